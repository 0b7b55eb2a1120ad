// SPDX-License-Identifier: Apache-2.0
// Loop-level reference forward passes. Deliberately written without the
// library's dense helpers so tests compare two independent evaluations.
#pragma once

#include <cmath>
#include <vector>

#include "streamrecon/model.hpp"

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const sr::Matrix& m) {
  Rows r(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

inline Rows linear(const Rows& x, const sr::Matrix& w, const sr::Matrix& b) {
  Rows y(x.size(), std::vector<double>(w.rows()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t o = 0; o < w.rows(); ++o) {
      double acc = b(0, o);
      for (std::size_t k = 0; k < w.cols(); ++k) acc += w(o, k) * x[i][k];
      y[i][o] = acc;
    }
  }
  return y;
}

inline Rows layer_norm(const Rows& x, const sr::LayerNormWeights& w, double eps = 1e-5) {
  Rows y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(x[i].size());
    double mean = 0.0;
    for (double v : x[i]) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x[i]) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t j = 0; j < x[i].size(); ++j) {
      y[i][j] = (x[i][j] - mean) / std::sqrt(var + eps) * w.gain(0, j) + w.shift(0, j);
    }
  }
  return y;
}

inline Rows softmax(Rows s) {
  for (auto& row : s) {
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    double z = 0.0;
    for (double& v : row) z += (v = std::exp(v - m));
    for (double& v : row) v /= z;
  }
  return s;
}

inline Rows mha(const Rows& xq, const Rows& xk, const Rows& xv, const sr::AttentionWeights& w,
                std::size_t heads) {
  const Rows q = linear(xq, w.wq, w.bq);
  const Rows k = linear(xk, w.wk, w.bk);
  const Rows v = linear(xv, w.wv, w.bv);
  const std::size_t c = q[0].size();
  const std::size_t dh = c / heads;
  Rows merged(q.size(), std::vector<double>(c, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    Rows scores(q.size(), std::vector<double>(k.size()));
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t j = 0; j < k.size(); ++j) {
        double d = 0.0;
        for (std::size_t t = 0; t < dh; ++t) d += q[i][h * dh + t] * k[j][h * dh + t];
        scores[i][j] = d / std::sqrt(static_cast<double>(dh));
      }
    const Rows a = softmax(scores);
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t t = 0; t < dh; ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k.size(); ++j) acc += a[i][j] * v[j][h * dh + t];
        merged[i][h * dh + t] = acc;
      }
  }
  return linear(merged, w.wo, w.bo);
}

inline Rows mlp(const Rows& x, const sr::MlpWeights& w) {
  Rows h = linear(x, w.w1, w.b1);
  for (auto& row : h)
    for (double& v : row) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  return linear(h, w.w2, w.b2);
}

inline void accumulate(Rows& x, const Rows& d) {
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x[i].size(); ++j) x[i][j] += d[i][j];
}

/// keys/values may be empty, which skips the cross term.
inline Rows block(const Rows& x, const Rows& keys, const Rows& values, const sr::BlockWeights& w,
                  std::size_t heads) {
  Rows h = x;
  const Rows n1 = layer_norm(h, w.norm_self);
  accumulate(h, mha(n1, n1, n1, w.self_attn, heads));
  if (!keys.empty()) {
    const Rows n2 = layer_norm(h, w.norm_cross);
    accumulate(h, mha(n2, keys, values, w.cross_attn, heads));
  }
  accumulate(h, mlp(layer_norm(h, w.norm_mlp), w.mlp));
  return h;
}

inline Rows pairwise(const Rows& x, const Rows& ctx, const sr::BlockWeights& w, std::size_t heads) {
  const Rows c = layer_norm(ctx, w.norm_context);
  return block(x, c, c, w, heads);
}

}  // namespace oracle
