// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <vector>

#include "streamrecon/numerics.hpp"
#include "support.hpp"

using sr::ErrorKind;
using sr::Matrix;

TEST_CASE("softmax examples") {
  CHECK(sr::softmax_rows(Matrix::from_rows({{0.0}}))(0, 0) == 1.0);

  const Matrix sym = sr::softmax_rows(Matrix::from_rows({{3.0, 3.0}}));
  CHECK(sym(0, 0) == 0.5);
  CHECK(sym(0, 1) == 0.5);

  const Matrix m = sr::softmax_rows(Matrix::from_rows({{0.7071, 0.0}}));
  CHECK(std::abs(m(0, 0) - 0.6698) <= 1e-4);
  CHECK(std::abs(m(0, 1) - 0.3302) <= 1e-4);
}

TEST_CASE("softmax errors") {
  CHECK_THROWS_KIND(sr::softmax_rows(Matrix()), ErrorKind::kShape);
  CHECK_THROWS_KIND(sr::softmax_rows(Matrix::from_rows({{1.0, std::nan("")}})),
                    ErrorKind::kInvalidInput);
  CHECK_THROWS_KIND(
      sr::softmax_rows(Matrix::from_rows({{std::numeric_limits<double>::infinity(), 0.0}})),
      ErrorKind::kInvalidInput);
}

TEST_CASE("softmax rows sum to one (property)") {
  sr::Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t r = 1 + rng.below(6);
    const std::size_t c = 1 + rng.below(40);
    const Matrix s = sr::softmax_rows(testing::random_matrix(rng, r, c, -30.0, 30.0));
    for (std::size_t i = 0; i < r; ++i) {
      double sum = 0.0;
      for (double v : s.row(i)) {
        CHECK(v >= 0.0);
        sum += v;
      }
      REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("softmax is stable for large logits") {
  const Matrix s = sr::softmax_rows(Matrix::from_rows({{1000.0, 1000.0, -1000.0}}));
  CHECK(s(0, 0) == 0.5);
  CHECK(s(0, 2) == 0.0);
}

TEST_CASE("attention examples") {
  SUBCASE("single key returns the value") {
    const Matrix t = Matrix::from_rows({{0.3, -0.2}});
    const auto a = sr::attention(t, t, t, 1.0);
    CHECK(a.weights(0, 0) == 1.0);
    CHECK(a.out == t);
  }
  SUBCASE("identical keys split evenly") {
    const Matrix q = Matrix::from_rows({{1.0, 2.0}});
    const Matrix k = Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}});
    const Matrix v = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    const auto a = sr::attention(q, k, v, 1.0);
    CHECK(a.weights(0, 0) == 0.5);
    CHECK(a.weights(0, 1) == 0.5);
    CHECK(a.out(0, 0) == 0.5);
  }
  SUBCASE("scaled two-key case") {
    const Matrix q = Matrix::from_rows({{1.0, 0.0}});
    const Matrix k = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    const auto a = sr::attention(q, k, k, 1.0 / std::sqrt(2.0));
    CHECK(std::abs(a.weights(0, 0) - 0.6698) <= 1e-4);
    CHECK(std::abs(a.weights(0, 1) - 0.3302) <= 1e-4);
  }
  SUBCASE("empty context") {
    CHECK_THROWS_KIND(sr::attention(Matrix(1, 2), Matrix(0, 2), Matrix(0, 2), 1.0),
                      ErrorKind::kEmptyContext);
  }
  SUBCASE("width mismatch") {
    CHECK_THROWS_KIND(sr::attention(Matrix(1, 2), Matrix(3, 4), Matrix(3, 4), 1.0),
                      ErrorKind::kShape);
  }
}

TEST_CASE("attention matches a loop oracle") {
  sr::Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t p = 1 + rng.below(5), s = 1 + rng.below(7), d = 1 + rng.below(6);
    const Matrix q = testing::random_matrix(rng, p, d);
    const Matrix k = testing::random_matrix(rng, s, d);
    const Matrix v = testing::random_matrix(rng, s, d + 1);
    const auto a = sr::attention(q, k, v, 0.7);
    for (std::size_t i = 0; i < p; ++i) {
      std::vector<double> w(s);
      double z = 0.0;
      for (std::size_t j = 0; j < s; ++j) {
        double dot = 0.0;
        for (std::size_t t = 0; t < d; ++t) dot += q(i, t) * k(j, t);
        z += (w[j] = std::exp(0.7 * dot));
      }
      for (std::size_t c = 0; c < d + 1; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s; ++j) acc += w[j] / z * v(j, c);
        CHECK(std::abs(acc - a.out(i, c)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("dense helpers") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5, 6}, {7, 8}});
  CHECK(sr::matmul(a, b) == Matrix::from_rows({{19, 22}, {43, 50}}));
  CHECK(sr::matmul_transposed(a, b) == Matrix::from_rows({{17, 23}, {39, 53}}));
  CHECK(sr::add(a, b) == Matrix::from_rows({{6, 8}, {10, 12}}));
  CHECK(sr::vstack(a, b).rows() == 4);
  CHECK(sr::column_slice(a, 1, 1) == Matrix::from_rows({{2}, {4}}));
  const std::vector<std::size_t> idx{1, 0};
  CHECK(sr::gather_rows(a, idx) == Matrix::from_rows({{3, 4}, {1, 2}}));
  const std::vector<std::size_t> bad{2};
  CHECK_THROWS_KIND(sr::gather_rows(a, bad), ErrorKind::kInternal);
  CHECK_THROWS_KIND(sr::matmul(a, Matrix(3, 1)), ErrorKind::kShape);
  const Matrix w = Matrix::from_rows({{1, 0}, {0, 2}, {1, 1}});
  const Matrix bias = Matrix::from_rows({{0.5, 0, -1}});
  CHECK(sr::linear(a, w, bias) == Matrix::from_rows({{1.5, 4, 2}, {3.5, 8, 6}}));
}

TEST_CASE("layer norm and gelu") {
  const Matrix x = Matrix::from_rows({{1, 2, 3, 4}});
  const Matrix n = sr::layer_norm(x, Matrix(1, 4, 1.0), Matrix(1, 4, 0.0));
  double mean = 0.0, var = 0.0;
  for (double v : n.row(0)) mean += v / 4;
  for (double v : n.row(0)) var += (v - mean) * (v - mean) / 4;
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::abs(var - 1.25 / (1.25 + 1e-5)) < 1e-12);

  const Matrix g = sr::gelu(Matrix::from_rows({{0.0, 1.0, -1.0}}));
  CHECK(g(0, 0) == 0.0);
  CHECK(std::abs(g(0, 1) - 0.8413447460685429) < 1e-15);
  CHECK(std::abs(g(0, 2) + 0.15865525393145707) < 1e-15);
}

TEST_CASE("seeded params") {
  const std::vector<sr::LayerShape> spec{
      {"a.w", 4, 4, sr::InitKind::kLinearWeight, 0},
      {"a.b", 1, 4, sr::InitKind::kLinearBias, 4},
      {"n.gain", 1, 4, sr::InitKind::kOnes, 0},
      {"n.shift", 1, 4, sr::InitKind::kZeros, 0},
  };
  const sr::ParamSet p1 = sr::seeded_params(spec, 1);
  CHECK(p1 == sr::seeded_params(spec, 1));
  CHECK_FALSE(p1.at("a.w") == sr::seeded_params(spec, 2).at("a.w"));

  const double bound = sr::init_bound(4);
  CHECK(bound == 0.5);
  const Matrix& w = p1.at("a.w");
  CHECK(w.size() == 16);
  for (double v : w.data()) {
    CHECK(std::isfinite(v));
    CHECK(std::abs(v) <= bound);
  }
  for (double v : p1.at("n.gain").data()) CHECK(v == 1.0);
  for (double v : p1.at("n.shift").data()) CHECK(v == 0.0);
  CHECK_THROWS_KIND(p1.at("missing"), ErrorKind::kInvalidConfig);
}

TEST_CASE("rng determinism and ranges") {
  sr::Rng a(3), b(3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  sr::Rng r(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.below(7) < 7);
  }
}
