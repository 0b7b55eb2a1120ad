// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace sr {

/// Dense row-major matrix of doubles. Feature blocks (P x C token sets,
/// weights, attention maps) all use this type.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Shape-checked dense helpers.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T without materializing the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
void add_inplace(Matrix& a, const Matrix& b);
/// Rows of `a` stacked on top of rows of `b`.
Matrix vstack(const Matrix& a, const Matrix& b);
/// Columns [begin, begin + count) of `m`.
Matrix column_slice(const Matrix& m, std::size_t begin, std::size_t count);
/// Writes `block` into columns starting at `begin`.
void set_columns(Matrix& m, std::size_t begin, const Matrix& block);
/// Selected rows, in the order given.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

/// x * W^T + b with W stored (out x in) and b a 1 x out row.
Matrix linear(const Matrix& x, const Matrix& weight, const Matrix& bias);
/// Row-wise layer normalization with gain/shift rows of width cols.
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& shift, double eps = 1e-5);
/// Exact (erf-based) GELU, elementwise.
Matrix gelu(const Matrix& x);

/// Row-wise softmax with row-max subtraction. Throws kInvalidInput on
/// non-finite entries and kShape on an empty matrix.
Matrix softmax_rows(const Matrix& m);

struct AttentionOutput {
  Matrix out;      // P x Cv
  Matrix weights;  // P x S
};

/// Single-head scaled dot-product attention: softmax(q k^T * scale) v.
/// Throws kEmptyContext when k has no rows.
AttentionOutput attention(const Matrix& q, const Matrix& k, const Matrix& v, double scale);

/// Deterministic generator: std::mt19937_64 (fully specified by the
/// standard) with hand-rolled conversions, so draws are identical across
/// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n) by rejection; n > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
};

enum class InitKind {
  kLinearWeight,  // U(-1/sqrt(cols), 1/sqrt(cols))
  kLinearBias,    // U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  kOnes,
  kZeros,
};

struct LayerShape {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  InitKind init = InitKind::kLinearWeight;
  std::size_t fan_in = 0;  // only read for kLinearBias
};

/// Named weights regenerated from a seed. Initialization matches the
/// default fully-connected scheme of common frameworks: weight and bias
/// entries uniform in +-1/sqrt(fan_in); layer-norm gains one, shifts zero.
struct ParamSet {
  std::uint64_t seed = 0;
  std::map<std::string, Matrix> tensors;

  const Matrix& at(const std::string& name) const;
  Matrix& at(const std::string& name);
  bool contains(const std::string& name) const { return tensors.count(name) != 0; }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

/// Draws every layer in the order listed from one Rng(seed) stream.
ParamSet seeded_params(std::span<const LayerShape> layers, std::uint64_t seed);

/// Bound used by seeded_params for a given fan-in.
double init_bound(std::size_t fan_in);

}  // namespace sr
