#ifndef HOSPX_COMMON_H_
#define HOSPX_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hospx {

// Error categories map onto CLI exit codes (see tools/hospx_main.cc).
enum class ErrorKind {
  kInvalidArgument,
  kNotFound,
  kIo,
  kConfig,
  kMissingArtifact,
  kNumerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void Fail(ErrorKind kind, const std::string& what);

// Warnings go to stderr unless silenced (tests silence them).
void LogWarning(std::string_view message);
void LogInfo(std::string_view message);
void SetLogQuiet(bool quiet);

// Kernels that have both an OpenMP and a serial reference path take this.
enum class Exec { kSerial, kParallel };

// Row-major dense matrix.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using MatrixD = Matrix<double>;

// Stateless 64-bit mixer; used to derive independent RNG streams from a
// (seed, stream index) pair so that parallel work never shares a generator.
std::uint64_t SplitMix64(std::uint64_t x);
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view tag,
                         std::uint64_t stream = 0);

// Lower-case copy (ASCII).
std::string ToLower(std::string_view s);

// Number of OpenMP threads the kernels will use; 0 leaves the runtime default.
void SetMaxThreads(int n);

}  // namespace hospx

#endif  // HOSPX_COMMON_H_
