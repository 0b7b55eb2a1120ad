// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "oracles/reference_model.hpp"
#include "streamrecon/model.hpp"
#include "support.hpp"

using sr::ErrorKind;
using sr::Matrix;

namespace {

sr::ModelConfig small_config() {
  sr::ModelConfig cfg;
  cfg.image_h = 24;
  cfg.image_w = 24;
  cfg.patch = 8;
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.depth = 2;
  cfg.enc_depth = 1;
  cfg.seed = 4;
  return cfg;
}

sr::Image random_image(sr::Rng& rng, std::size_t h, std::size_t w) {
  sr::Image img(h, w);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

sr::TokenGrid grid_of(Matrix m) {
  sr::TokenGrid g;
  g.grid_h = 1;
  g.grid_w = m.rows();
  g.tokens = std::move(m);
  return g;
}

void check_close(const Matrix& got, const oracle::Rows& want, double tol = 1e-11) {
  REQUIRE(got.rows() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    REQUIRE(got.cols() == want[i].size());
    for (std::size_t j = 0; j < want[i].size(); ++j) {
      CHECK(std::abs(got(i, j) - want[i][j]) <= tol);
    }
  }
}

Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("config validation") {
  sr::ModelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.tokens() == 64);
  auto bad = cfg;
  bad.image_h = 60;
  CHECK_THROWS_KIND(bad.validate(), ErrorKind::kInvalidConfig);
  bad = cfg;
  bad.depth = 3;
  CHECK_THROWS_KIND(bad.validate(), ErrorKind::kInvalidConfig);
  bad = cfg;
  bad.heads = 3;
  CHECK_THROWS_KIND(bad.validate(), ErrorKind::kInvalidConfig);
  bad = cfg;
  bad.channels = 6;
  bad.heads = 2;
  CHECK_THROWS_KIND(bad.validate(), ErrorKind::kInvalidConfig);
}

TEST_CASE("layer shapes cover every branch") {
  const auto cfg = small_config();
  const auto shapes = sr::model_layer_shapes(cfg);
  auto has = [&](const std::string& n) {
    return std::any_of(shapes.begin(), shapes.end(), [&](const auto& s) { return s.name == n; });
  };
  CHECK(has("embed.w"));
  CHECK(has("encoder.1.self.wq"));
  CHECK(has("coarse.2.norm_context.gain"));
  CHECK(has("refined.1.cross.wo"));
  CHECK(has("head.w"));
  CHECK(has("memory.key.w"));
  CHECK(has("memory.value.b"));
  const auto w = sr::make_weights(cfg);
  CHECK(w.encoder.size() == 1);
  CHECK(w.coarse.size() == 2);
  CHECK(w.refined.size() == 2);
  CHECK(w.head.weight.rows() == 8 * 8 * 4);
  CHECK(w.embed_weight.cols() == 8 * 8 * 3);
}

TEST_CASE("encode shape and determinism") {
  sr::ModelConfig cfg;
  cfg.enc_depth = 1;
  const auto w = sr::make_weights(cfg);
  sr::Rng rng(1);
  const auto img = random_image(rng, 64, 64);
  const auto g = sr::encode(img, w, cfg, 3);
  CHECK(g.tokens.rows() == 64);
  CHECK(g.tokens.cols() == 64);
  CHECK(g.grid_h == 8);
  CHECK(g.frame_index == 3);
  CHECK(sr::encode(img, w, cfg, 3).tokens == g.tokens);
  CHECK_THROWS_KIND(sr::encode(random_image(rng, 32, 64), w, cfg), ErrorKind::kShape);
}

TEST_CASE("patch embedding closed form") {
  auto cfg = small_config();
  cfg.enc_depth = 0;
  const auto w = sr::make_weights(cfg);
  sr::Image img(24, 24);
  std::fill(img.data.begin(), img.data.end(), 0.25);
  const auto g = sr::encode(img, w, cfg);
  const std::size_t half = cfg.channels / 2;
  for (std::size_t gy = 0; gy < 3; ++gy) {
    for (std::size_t gx = 0; gx < 3; ++gx) {
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        double v = w.embed_bias(0, c);
        for (std::size_t k = 0; k < w.embed_weight.cols(); ++k) v += w.embed_weight(c, k) * 0.25;
        // Row signal in the first half, column signal in the second.
        const std::size_t local = c % half;
        const double pos = static_cast<double>(c < half ? gy : gx);
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(local - local % 2) /
                                                          static_cast<double>(half));
        v += local % 2 == 0 ? std::sin(pos * omega) : std::cos(pos * omega);
        CHECK(std::abs(g.tokens(gy * 3 + gx, c) - v) <= 1e-12);
      }
    }
  }
}

TEST_CASE("patch vector order is row, column, channel") {
  sr::Image img(4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<double>(100 * y + 10 * x + c);
  const auto v = sr::patch_vector(img, 1, 0, 2);
  REQUIRE(v.size() == 12);
  CHECK(v[0] == 200.0);
  CHECK(v[1] == 201.0);
  CHECK(v[3] == 210.0);
  CHECK(v[6] == 300.0);
}

TEST_CASE("pairwise block") {
  const auto cfg = small_config();
  const auto w = sr::make_weights(cfg);
  sr::Rng rng(9);

  SUBCASE("shape preserved and matches oracle") {
    const auto x = grid_of(testing::random_matrix(rng, 5, 8));
    const auto ctx = grid_of(testing::random_matrix(rng, 7, 8));
    const auto y = sr::pairwise_block(x, ctx, w.coarse[0], cfg.heads);
    CHECK(y.tokens.rows() == 5);
    CHECK(y.tokens.cols() == 8);
    check_close(y.tokens, oracle::pairwise(oracle::to_rows(x.tokens), oracle::to_rows(ctx.tokens),
                                           w.coarse[0], cfg.heads));
  }
  SUBCASE("single token, single context token") {
    const auto x = grid_of(testing::random_matrix(rng, 1, 8));
    const auto ctx = grid_of(testing::random_matrix(rng, 1, 8));
    const auto y = sr::pairwise_block(x, ctx, w.refined[1], cfg.heads);
    check_close(y.tokens, oracle::pairwise(oracle::to_rows(x.tokens), oracle::to_rows(ctx.tokens),
                                           w.refined[1], cfg.heads));
  }
  SUBCASE("zeroed output projections give the identity") {
    auto b = w.coarse[1];
    sr::zero_output_projections(b);
    const auto x = grid_of(testing::random_matrix(rng, 4, 8));
    const auto ctx = grid_of(testing::random_matrix(rng, 3, 8));
    CHECK(sr::pairwise_block(x, ctx, b, cfg.heads).tokens == x.tokens);
  }
  SUBCASE("channel mismatch") {
    const auto x = grid_of(testing::random_matrix(rng, 2, 8));
    const auto ctx = grid_of(testing::random_matrix(rng, 2, 4));
    CHECK_THROWS_KIND(sr::pairwise_block(x, ctx, w.coarse[0], cfg.heads), ErrorKind::kShape);
  }
}

TEST_CASE("memory block") {
  const auto cfg = small_config();
  const auto w = sr::make_weights(cfg);
  sr::Rng rng(12);

  SUBCASE("empty memory skips cross attention") {
    const auto x = grid_of(testing::random_matrix(rng, 3, 8));
    const auto y = sr::memory_block(x, sr::RelevantMemory{}, w.refined[1], cfg.heads);
    check_close(y.tokens, oracle::block(oracle::to_rows(x.tokens), {}, {}, w.refined[1], cfg.heads));
  }
  SUBCASE("two tokens, three memory entries") {
    const auto x = grid_of(testing::random_matrix(rng, 2, 8));
    sr::RelevantMemory mem;
    mem.keys = testing::random_matrix(rng, 3, 8);
    mem.values = testing::random_matrix(rng, 3, 8);
    const auto y = sr::memory_block(x, mem, w.refined[1], cfg.heads);
    check_close(y.tokens, oracle::block(oracle::to_rows(x.tokens), oracle::to_rows(mem.keys),
                                        oracle::to_rows(mem.values), w.refined[1], cfg.heads));
  }
  SUBCASE("single memory token under identity projections") {
    auto b = w.refined[1];
    sr::zero_output_projections(b);
    for (Matrix* m : {&b.cross_attn.wq, &b.cross_attn.wk, &b.cross_attn.wv, &b.cross_attn.wo}) {
      *m = identity(8);
    }
    for (Matrix* m : {&b.cross_attn.bq, &b.cross_attn.bk, &b.cross_attn.bv}) *m = Matrix(1, 8);
    const auto x = grid_of(testing::random_matrix(rng, 1, 8));
    sr::RelevantMemory mem;
    mem.keys = x.tokens;
    mem.values = x.tokens;
    const auto y = sr::memory_block(x, mem, b, cfg.heads);
    // One key: weight 1, so the cross term is the value itself.
    for (std::size_t c = 0; c < 8; ++c) {
      CHECK(std::abs(y.tokens(0, c) - 2.0 * x.tokens(0, c)) <= 1e-15);
    }
  }
}

TEST_CASE("concat block attends to frame and memory together") {
  const auto cfg = small_config();
  const auto w = sr::make_weights(cfg);
  sr::Rng rng(13);
  const auto x = grid_of(testing::random_matrix(rng, 3, 8));
  const auto ctx = grid_of(testing::random_matrix(rng, 4, 8));
  sr::RelevantMemory mem;
  mem.keys = testing::random_matrix(rng, 2, 8);
  mem.values = testing::random_matrix(rng, 2, 8);
  const auto y = sr::concat_block(x, ctx, mem, w.refined[0], cfg.heads);

  auto keys = oracle::layer_norm(oracle::to_rows(ctx.tokens), w.refined[0].norm_context);
  auto values = keys;
  for (const auto& r : oracle::to_rows(mem.keys)) keys.push_back(r);
  for (const auto& r : oracle::to_rows(mem.values)) values.push_back(r);
  check_close(y.tokens, oracle::block(oracle::to_rows(x.tokens), keys, values, w.refined[0], cfg.heads));

  // Without memory it degenerates to the pairwise block.
  CHECK(sr::concat_block(x, ctx, {}, w.refined[0], cfg.heads).tokens ==
        sr::pairwise_block(x, ctx, w.refined[0], cfg.heads).tokens);
}

TEST_CASE("prediction head") {
  const auto cfg = small_config();
  auto w = sr::make_weights(cfg);
  sr::Rng rng(21);

  SUBCASE("confidence exceeds one") {
    sr::TokenGrid g{testing::random_matrix(rng, 9, 8, -50.0, 50.0), 3, 3, 1};
    const auto pm = sr::predict_head(g, w.head, cfg);
    CHECK(pm.h == 24);
    for (double c : pm.confidence) {
      CHECK(c > 1.0);
      CHECK(std::isfinite(c));
    }
  }
  SUBCASE("zero weights") {
    sr::HeadWeights z{Matrix(w.head.weight.rows(), 8), Matrix(1, w.head.weight.rows())};
    sr::TokenGrid g{testing::random_matrix(rng, 9, 8), 3, 3, 1};
    const auto pm = sr::predict_head(g, z, cfg);
    for (std::size_t i = 0; i < pm.size(); ++i) {
      CHECK(pm.points[i] == sr::Vec3::Zero());
      CHECK(pm.confidence[i] == 2.0);
    }
  }
  SUBCASE("single token matches the linear map") {
    sr::TokenGrid g{testing::random_matrix(rng, 1, 8), 1, 1, 1};
    const auto pm = sr::predict_head(g, w.head, cfg);
    const auto raw = oracle::linear(oracle::to_rows(g.tokens), w.head.weight, w.head.bias)[0];
    for (std::size_t py = 0; py < 8; ++py) {
      for (std::size_t px = 0; px < 8; ++px) {
        const std::size_t base = (py * 8 + px) * 4;
        const auto& p = pm.at(py, px);
        CHECK(std::abs(p.x() - raw[base]) <= 1e-12);
        CHECK(std::abs(p.y() - raw[base + 1]) <= 1e-12);
        CHECK(std::abs(p.z() - raw[base + 2]) <= 1e-12);
        CHECK(std::abs(pm.confidence[pm.index(py, px)] - (1.0 + std::exp(raw[base + 3]))) <= 1e-12);
      }
    }
  }
}

TEST_CASE("block chains preserve shape") {
  const auto cfg = small_config();
  const auto w = sr::make_weights(cfg);
  sr::Rng rng(30);
  auto a = grid_of(testing::random_matrix(rng, 9, 8));
  auto b = grid_of(testing::random_matrix(rng, 9, 8));
  for (int i = 0; i < 6; ++i) {
    a = sr::pairwise_block(a, b, w.coarse[i % 2], cfg.heads);
    b = sr::memory_block(b, {}, w.refined[i % 2], cfg.heads);
    CHECK(a.tokens.rows() == 9);
    CHECK(b.tokens.cols() == 8);
    CHECK(a.tokens.all_finite());
  }
}
