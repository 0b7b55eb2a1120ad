// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <doctest.h>

#include "streamrecon/error.hpp"
#include "streamrecon/numerics.hpp"

namespace testing {

inline sr::Matrix random_matrix(sr::Rng& rng, std::size_t rows, std::size_t cols,
                                double lo = -1.0, double hi = 1.0) {
  sr::Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

inline double max_abs_diff(const sr::Matrix& a, const sr::Matrix& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

}  // namespace testing

// Asserts that `expr` throws sr::Error with the given kind.
#define CHECK_THROWS_KIND(expr, expected_kind)                                   \
  do {                                                                           \
    bool sr_thrown_ = false;                                                     \
    try {                                                                        \
      (void)(expr);                                                              \
    } catch (const sr::Error& sr_e_) {                                           \
      sr_thrown_ = true;                                                         \
      CHECK_MESSAGE(sr_e_.kind() == (expected_kind), "kind: " << sr::to_string(sr_e_.kind())); \
    }                                                                            \
    CHECK_MESSAGE(sr_thrown_, "expected sr::Error from " #expr);                 \
  } while (0)
