#include <cstring>
#include <fstream>
#include <sstream>

#include "hospx/features.h"

namespace hospx {
namespace {

constexpr std::string_view kMagic = "HOSPX-FEATURES 1";

template <typename T>
void WriteRaw(std::ostream& out, const T* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
void ReadRaw(std::istream& in, T* data, std::size_t count, const std::string& path) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) Fail(ErrorKind::kIo, "truncated feature file '" + path + "'");
}

std::string Expect(std::istream& in, std::string_view key, const std::string& path) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(key, 0) != 0 || line.size() <= key.size()) {
    Fail(ErrorKind::kIo, "feature file '" + path + "': expected '" + std::string(key) + "'");
  }
  return line.substr(key.size() + 1);
}

}  // namespace

void WriteFeatures(const FusedFeatures& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write '" + path + "'");
  const std::size_t n = f.n(), k = f.k(), mt = f.m * f.t;
  out << kMagic << '\n'
      << "n " << n << '\n'
      << "h " << f.h << '\n'
      << "m " << f.m << '\n'
      << "t " << f.t << '\n'
      << "k " << k << '\n'
      << "scenario " << ToString(f.scenario) << '\n'
      << "split_seed " << f.split_seed << '\n';
  for (const auto& name : f.feature_names) out << "column " << name << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << "row " << f.patient_ids[i] << ' ' << int(f.labels[i]) << ' ';
    if (f.admission_offsets[i]) {
      out << *f.admission_offsets[i];
    } else {
      out << '-';
    }
    out << '\n';
  }
  out << "data\n";
  std::vector<float> buf(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) buf[j] = static_cast<float>(f.early(i, j));
    WriteRaw(out, buf.data(), k);
  }
  std::vector<std::uint8_t> bits((n * mt + 7) / 8, 0);
  for (std::size_t b = 0; b < n * mt; ++b) {
    if (f.mask2[b]) bits[b / 8] |= static_cast<std::uint8_t>(1u << (b % 8));
  }
  WriteRaw(out, bits.data(), bits.size());
  WriteRaw(out, f.source_day.data().data(), n * mt);
  if (!out) Fail(ErrorKind::kIo, "write failed for '" + path + "'");
}

FusedFeatures ReadFeatures(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kMissingArtifact, "cannot read feature file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    Fail(ErrorKind::kIo, "'" + path + "' is not a feature file");
  }
  FusedFeatures f;
  const std::size_t n = std::stoull(Expect(in, "n", path));
  f.h = std::stoull(Expect(in, "h", path));
  f.m = std::stoull(Expect(in, "m", path));
  f.t = std::stoull(Expect(in, "t", path));
  const std::size_t k = std::stoull(Expect(in, "k", path));
  if (k != f.m * f.t + f.h) Fail(ErrorKind::kIo, "inconsistent shape in '" + path + "'");
  f.scenario = ParseScenario(Expect(in, "scenario", path));
  f.split_seed = std::stoull(Expect(in, "split_seed", path));
  for (std::size_t j = 0; j < k; ++j) f.feature_names.push_back(Expect(in, "column", path));
  for (std::size_t i = 0; i < n; ++i) {
    std::istringstream row(Expect(in, "row", path));
    std::string id, offset;
    int label = 0;
    row >> id >> label >> offset;
    f.patient_ids.push_back(id);
    f.labels.push_back(static_cast<std::uint8_t>(label));
    f.admission_offsets.push_back(offset == "-" ? std::nullopt : std::optional<int>(std::stoi(offset)));
  }
  if (!std::getline(in, line) || line != "data") Fail(ErrorKind::kIo, "missing data in '" + path + "'");
  const std::size_t mt = f.m * f.t;
  f.early = MatrixD(n, k);
  std::vector<float> buf(k);
  for (std::size_t i = 0; i < n; ++i) {
    ReadRaw(in, buf.data(), k, path);
    for (std::size_t j = 0; j < k; ++j) f.early(i, j) = buf[j];
  }
  std::vector<std::uint8_t> bits((n * mt + 7) / 8);
  ReadRaw(in, bits.data(), bits.size(), path);
  f.mask2.resize(n * mt);
  for (std::size_t b = 0; b < n * mt; ++b) f.mask2[b] = (bits[b / 8] >> (b % 8)) & 1u;
  f.source_day = Matrix<std::int16_t>(n, mt);
  ReadRaw(in, f.source_day.data().data(), n * mt, path);
  return f;
}

}  // namespace hospx
