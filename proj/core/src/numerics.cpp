// SPDX-License-Identifier: Apache-2.0
#include "streamrecon/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "streamrecon/error.hpp"

namespace sr {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kEmptyContext: return "empty context";
    case ErrorKind::kInvalidConfig: return "invalid config";
    case ErrorKind::kDegenerate: return "degenerate input";
    case ErrorKind::kLifecycle: return "lifecycle error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kInternal: return "internal error";
  }
  return "unknown error";
}

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, ErrorKind::kShape,
          "matrix data length does not match rows*cols");
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    require(row.size() == c, ErrorKind::kShape, "ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) fail(ErrorKind::kShape, "matmul " + dims(a) + " * " + dims(b));
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto br = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * br[j];
    }
  }
  return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorKind::kShape, "matmul_transposed " + dims(a) + " * (" + dims(b) + ")^T");
  }
  Matrix out(a.rows(), b.rows());
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i).data();
    auto o = out.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.row(j).data();
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += ar[k] * br[k];
      o[j] = acc;
    }
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::kShape, "add " + dims(a) + " + " + dims(b));
  }
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  if (a.cols() != b.cols()) fail(ErrorKind::kShape, "vstack " + dims(a) + " / " + dims(b));
  std::vector<double> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Matrix(a.rows() + b.rows(), a.cols(), std::move(data));
}

Matrix column_slice(const Matrix& m, std::size_t begin, std::size_t count) {
  require(begin + count <= m.cols(), ErrorKind::kShape, "column slice out of range");
  Matrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

void set_columns(Matrix& m, std::size_t begin, const Matrix& block) {
  require(block.rows() == m.rows() && begin + block.cols() <= m.cols(), ErrorKind::kShape,
          "set_columns out of range");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = block.row(r);
    std::copy(src.begin(), src.end(), m.row(r).begin() + static_cast<std::ptrdiff_t>(begin));
  }
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < m.rows(), ErrorKind::kInternal, "gather_rows index out of bounds");
    auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix linear(const Matrix& x, const Matrix& weight, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != weight.rows()) {
    fail(ErrorKind::kShape, "linear bias " + dims(bias) + " for weight " + dims(weight));
  }
  Matrix out = matmul_transposed(x, weight);
  auto b = bias.row(0);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto o = out.row(r);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] += b[c];
  }
  return out;
}

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& shift, double eps) {
  require(gain.rows() == 1 && gain.cols() == x.cols() && shift.rows() == 1 &&
              shift.cols() == x.cols(),
          ErrorKind::kShape, "layer_norm parameter width mismatch");
  Matrix out(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = (in[c] - mean) * inv * gain(0, c) + shift(0, c);
    }
  }
  return out;
}

Matrix gelu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  require(!m.empty(), ErrorKind::kShape, "softmax of an empty matrix");
  require(m.all_finite(), ErrorKind::kInvalidInput, "softmax input contains NaN or Inf");
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    for (double& v : o) v /= sum;
  }
  return out;
}

AttentionOutput attention(const Matrix& q, const Matrix& k, const Matrix& v, double scale) {
  if (k.rows() == 0) fail(ErrorKind::kEmptyContext, "attention over an empty key set");
  if (q.cols() != k.cols()) {
    fail(ErrorKind::kShape, "attention query " + dims(q) + " vs key " + dims(k));
  }
  if (k.rows() != v.rows()) {
    fail(ErrorKind::kShape, "attention key " + dims(k) + " vs value " + dims(v));
  }
  Matrix scores = matmul_transposed(q, k);
  for (double& s : scores.data()) s *= scale;
  AttentionOutput result;
  result.weights = softmax_rows(scores);
  result.out = matmul(result.weights, v);
  return result;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  require(n > 0, ErrorKind::kInvalidInput, "Rng::below(0)");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

const Matrix& ParamSet::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail(ErrorKind::kInvalidConfig, "missing parameter '" + name + "'");
  return it->second;
}

Matrix& ParamSet::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail(ErrorKind::kInvalidConfig, "missing parameter '" + name + "'");
  return it->second;
}

double init_bound(std::size_t fan_in) {
  return fan_in == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(fan_in));
}

ParamSet seeded_params(std::span<const LayerShape> layers, std::uint64_t seed) {
  ParamSet params;
  params.seed = seed;
  Rng rng(seed);
  for (const LayerShape& layer : layers) {
    Matrix m(layer.rows, layer.cols);
    switch (layer.init) {
      case InitKind::kLinearWeight: {
        const double b = init_bound(layer.cols);
        for (double& v : m.data()) v = rng.uniform(-b, b);
        break;
      }
      case InitKind::kLinearBias: {
        const double b = init_bound(layer.fan_in);
        for (double& v : m.data()) v = rng.uniform(-b, b);
        break;
      }
      case InitKind::kOnes:
        for (double& v : m.data()) v = 1.0;
        break;
      case InitKind::kZeros:
        break;
    }
    params.tensors.insert_or_assign(layer.name, std::move(m));
  }
  return params;
}

}  // namespace sr
