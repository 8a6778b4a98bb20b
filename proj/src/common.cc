#include "hospx/common.h"

#include <omp.h>

#include <atomic>
#include <cctype>
#include <iostream>

namespace hospx {
namespace {
std::atomic<bool> g_quiet{false};
}  // namespace

void Fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

void LogWarning(std::string_view message) {
  if (!g_quiet) std::cerr << "[warn] " << message << "\n";
}

void LogInfo(std::string_view message) {
  if (!g_quiet) std::cerr << "[info] " << message << "\n";
}

void SetLogQuiet(bool quiet) { g_quiet = quiet; }

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream) {
  return SplitMix64(SplitMix64(seed) ^ SplitMix64(stream + 0x632be59bd9b4e019ULL));
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view tag,
                         std::uint64_t stream) {
  // FNV-1a over the tag.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return DeriveSeed(seed ^ h, stream);
}

std::string ToLower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void SetMaxThreads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

}  // namespace hospx
