// SPDX-License-Identifier: Apache-2.0
#include "streamrecon/model.hpp"

#include <algorithm>
#include <cmath>

#include "streamrecon/error.hpp"

namespace sr {

void ModelConfig::validate() const {
  require(patch > 0, ErrorKind::kInvalidConfig, "patch must be positive");
  require(image_h > 0 && image_w > 0, ErrorKind::kInvalidConfig, "image size must be positive");
  require(image_h % patch == 0 && image_w % patch == 0, ErrorKind::kInvalidConfig,
          "image_h and image_w must be divisible by patch");
  require(depth > 0 && depth % 2 == 0, ErrorKind::kInvalidConfig,
          "decoder depth B must be positive and even");
  require(heads > 0 && channels % heads == 0, ErrorKind::kInvalidConfig,
          "channels must be divisible by heads");
  require(channels > 0 && channels % 4 == 0, ErrorKind::kInvalidConfig,
          "channels must be a positive multiple of 4 for the 2D positional signal");
  require(mlp_ratio > 0, ErrorKind::kInvalidConfig, "mlp_ratio must be positive");
}

namespace {

void add_linear(std::vector<LayerShape>& out, const std::string& w, const std::string& b,
                std::size_t out_dim, std::size_t in_dim) {
  out.push_back({w, out_dim, in_dim, InitKind::kLinearWeight, in_dim});
  out.push_back({b, 1, out_dim, InitKind::kLinearBias, in_dim});
}

void add_norm(std::vector<LayerShape>& out, const std::string& prefix, std::size_t c) {
  out.push_back({prefix + ".gain", 1, c, InitKind::kOnes, 0});
  out.push_back({prefix + ".shift", 1, c, InitKind::kZeros, 0});
}

void add_attention(std::vector<LayerShape>& out, const std::string& prefix, std::size_t c) {
  for (const char* p : {"q", "k", "v", "o"}) {
    add_linear(out, prefix + ".w" + p, prefix + ".b" + p, c, c);
  }
}

void add_block(std::vector<LayerShape>& out, const std::string& prefix, const ModelConfig& cfg,
               bool with_cross) {
  const std::size_t c = cfg.channels;
  add_norm(out, prefix + ".norm_self", c);
  add_attention(out, prefix + ".self", c);
  if (with_cross) {
    add_norm(out, prefix + ".norm_cross", c);
    add_norm(out, prefix + ".norm_context", c);
    add_attention(out, prefix + ".cross", c);
  }
  add_norm(out, prefix + ".norm_mlp", c);
  add_linear(out, prefix + ".mlp.w1", prefix + ".mlp.b1", c * cfg.mlp_ratio, c);
  add_linear(out, prefix + ".mlp.w2", prefix + ".mlp.b2", c, c * cfg.mlp_ratio);
}

LayerNormWeights norm_from(const ParamSet& p, const std::string& prefix) {
  return {p.at(prefix + ".gain"), p.at(prefix + ".shift")};
}

AttentionWeights attention_from(const ParamSet& p, const std::string& prefix) {
  return {p.at(prefix + ".wq"), p.at(prefix + ".bq"), p.at(prefix + ".wk"), p.at(prefix + ".bk"),
          p.at(prefix + ".wv"), p.at(prefix + ".bv"), p.at(prefix + ".wo"), p.at(prefix + ".bo")};
}

BlockWeights block_from(const ParamSet& p, const std::string& prefix, bool with_cross) {
  BlockWeights w;
  w.norm_self = norm_from(p, prefix + ".norm_self");
  w.self_attn = attention_from(p, prefix + ".self");
  if (with_cross) {
    w.norm_cross = norm_from(p, prefix + ".norm_cross");
    w.norm_context = norm_from(p, prefix + ".norm_context");
    w.cross_attn = attention_from(p, prefix + ".cross");
  }
  w.norm_mlp = norm_from(p, prefix + ".norm_mlp");
  w.mlp = {p.at(prefix + ".mlp.w1"), p.at(prefix + ".mlp.b1"), p.at(prefix + ".mlp.w2"),
           p.at(prefix + ".mlp.b2")};
  return w;
}

struct CrossContext {
  const Matrix* keys = nullptr;
  const Matrix* values = nullptr;
};

Matrix apply_norm(const Matrix& x, const LayerNormWeights& n) {
  return layer_norm(x, n.gain, n.shift);
}

void check_channels(const Matrix& a, std::size_t channels, const char* what) {
  if (a.cols() != channels) {
    fail(ErrorKind::kShape, std::string(what) + " has " + std::to_string(a.cols()) +
                                " channels, expected " + std::to_string(channels));
  }
}

Matrix block_forward(const Matrix& x, const CrossContext& ctx, const BlockWeights& w,
                     std::size_t heads) {
  Matrix h = x;
  {
    const Matrix n = apply_norm(h, w.norm_self);
    add_inplace(h, multi_head_attention(n, n, n, w.self_attn, heads));
  }
  if (ctx.keys != nullptr && ctx.keys->rows() > 0) {
    const Matrix n = apply_norm(h, w.norm_cross);
    add_inplace(h, multi_head_attention(n, *ctx.keys, *ctx.values, w.cross_attn, heads));
  }
  add_inplace(h, mlp_forward(apply_norm(h, w.norm_mlp), w.mlp));
  return h;
}

}  // namespace

std::vector<LayerShape> model_layer_shapes(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.channels;
  const std::size_t pp = cfg.patch * cfg.patch;
  std::vector<LayerShape> out;
  add_linear(out, "embed.w", "embed.b", c, pp * 3);
  for (std::size_t i = 0; i < cfg.enc_depth; ++i) {
    add_block(out, "encoder." + std::to_string(i + 1), cfg, false);
  }
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    add_block(out, "coarse." + std::to_string(i + 1), cfg, true);
  }
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    add_block(out, "refined." + std::to_string(i + 1), cfg, true);
  }
  add_linear(out, "head.w", "head.b", pp * 4, c);
  add_linear(out, "memory.key.w", "memory.key.b", c, c);
  add_linear(out, "memory.value.w", "memory.value.b", c, c);
  return out;
}

ModelWeights unpack_weights(const ParamSet& p, const ModelConfig& cfg) {
  cfg.validate();
  ModelWeights w;
  w.embed_weight = p.at("embed.w");
  w.embed_bias = p.at("embed.b");
  for (std::size_t i = 0; i < cfg.enc_depth; ++i) {
    w.encoder.push_back(block_from(p, "encoder." + std::to_string(i + 1), false));
  }
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    w.coarse.push_back(block_from(p, "coarse." + std::to_string(i + 1), true));
    w.refined.push_back(block_from(p, "refined." + std::to_string(i + 1), true));
  }
  w.head = {p.at("head.w"), p.at("head.b")};
  w.memory_key_weight = p.at("memory.key.w");
  w.memory_key_bias = p.at("memory.key.b");
  w.memory_value_weight = p.at("memory.value.w");
  w.memory_value_bias = p.at("memory.value.b");
  return w;
}

ModelWeights make_weights(const ModelConfig& cfg) {
  const auto shapes = model_layer_shapes(cfg);
  return unpack_weights(seeded_params(shapes, cfg.seed), cfg);
}

void zero_output_projections(BlockWeights& w) {
  for (Matrix* m : {&w.self_attn.wo, &w.self_attn.bo, &w.cross_attn.wo, &w.cross_attn.bo,
                    &w.mlp.w2, &w.mlp.b2}) {
    std::fill(m->data().begin(), m->data().end(), 0.0);
  }
}

Matrix positional_encoding(std::size_t grid_h, std::size_t grid_w, std::size_t channels) {
  require(channels % 4 == 0, ErrorKind::kInvalidConfig,
          "positional encoding needs channels divisible by 4");
  const std::size_t half = channels / 2;
  const std::size_t pairs = half / 2;
  Matrix pe(grid_h * grid_w, channels);
  for (std::size_t gy = 0; gy < grid_h; ++gy) {
    for (std::size_t gx = 0; gx < grid_w; ++gx) {
      auto row = pe.row(gy * grid_w + gx);
      for (std::size_t k = 0; k < pairs; ++k) {
        const double omega =
            1.0 / std::pow(10000.0, static_cast<double>(2 * k) / static_cast<double>(half));
        const double ay = static_cast<double>(gy) * omega;
        const double ax = static_cast<double>(gx) * omega;
        row[2 * k] = std::sin(ay);
        row[2 * k + 1] = std::cos(ay);
        row[half + 2 * k] = std::sin(ax);
        row[half + 2 * k + 1] = std::cos(ax);
      }
    }
  }
  return pe;
}

std::vector<double> patch_vector(const Image& image, std::size_t gy, std::size_t gx,
                                 std::size_t patch) {
  std::vector<double> v;
  v.reserve(patch * patch * 3);
  for (std::size_t py = 0; py < patch; ++py) {
    for (std::size_t px = 0; px < patch; ++px) {
      for (std::size_t c = 0; c < 3; ++c) v.push_back(image.at(gy * patch + py, gx * patch + px, c));
    }
  }
  return v;
}

Matrix multi_head_attention(const Matrix& query_tokens, const Matrix& keys, const Matrix& values,
                            const AttentionWeights& w, std::size_t heads) {
  const Matrix q = linear(query_tokens, w.wq, w.bq);
  const Matrix k = linear(keys, w.wk, w.bk);
  const Matrix v = linear(values, w.wv, w.bv);
  const std::size_t c = q.cols();
  require(heads > 0 && c % heads == 0, ErrorKind::kInvalidConfig,
          "channels must be divisible by heads");
  const std::size_t dh = c / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix merged(q.rows(), c);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto head = attention(column_slice(q, h * dh, dh), column_slice(k, h * dh, dh),
                                column_slice(v, h * dh, dh), scale);
    set_columns(merged, h * dh, head.out);
  }
  return linear(merged, w.wo, w.bo);
}

Matrix mlp_forward(const Matrix& x, const MlpWeights& w) {
  return linear(gelu(linear(x, w.w1, w.b1)), w.w2, w.b2);
}

TokenGrid encode(const Image& image, const ModelWeights& weights, const ModelConfig& cfg,
                 std::int64_t frame_index) {
  if (image.h != cfg.image_h || image.w != cfg.image_w || image.data.size() != image.h * image.w * 3) {
    fail(ErrorKind::kShape, "image " + std::to_string(image.h) + "x" + std::to_string(image.w) +
                                " does not match configured " + std::to_string(cfg.image_h) +
                                "x" + std::to_string(cfg.image_w));
  }
  const std::size_t gh = cfg.grid_h();
  const std::size_t gw = cfg.grid_w();
  const std::size_t pp3 = cfg.patch * cfg.patch * 3;
  Matrix patches(gh * gw, pp3);
  for (std::size_t gy = 0; gy < gh; ++gy) {
    for (std::size_t gx = 0; gx < gw; ++gx) {
      const auto v = patch_vector(image, gy, gx, cfg.patch);
      std::copy(v.begin(), v.end(), patches.row(gy * gw + gx).begin());
    }
  }
  Matrix tokens = linear(patches, weights.embed_weight, weights.embed_bias);
  add_inplace(tokens, positional_encoding(gh, gw, cfg.channels));
  for (const BlockWeights& block : weights.encoder) {
    tokens = block_forward(tokens, CrossContext{}, block, cfg.heads);
  }
  return {std::move(tokens), gh, gw, frame_index};
}

TokenGrid pairwise_block(const TokenGrid& x, const TokenGrid& context, const BlockWeights& w,
                         std::size_t heads) {
  const std::size_t c = x.tokens.cols();
  check_channels(context.tokens, c, "pairwise context");
  const Matrix ctx = apply_norm(context.tokens, w.norm_context);
  TokenGrid out = x;
  out.tokens = block_forward(x.tokens, CrossContext{&ctx, &ctx}, w, heads);
  return out;
}

TokenGrid memory_block(const TokenGrid& x, const RelevantMemory& mem, const BlockWeights& w,
                       std::size_t heads) {
  TokenGrid out = x;
  if (mem.empty()) {
    out.tokens = block_forward(x.tokens, CrossContext{}, w, heads);
    return out;
  }
  const std::size_t c = x.tokens.cols();
  check_channels(mem.keys, c, "memory keys");
  check_channels(mem.values, c, "memory values");
  out.tokens = block_forward(x.tokens, CrossContext{&mem.keys, &mem.values}, w, heads);
  return out;
}

TokenGrid concat_block(const TokenGrid& x, const TokenGrid& context, const RelevantMemory& mem,
                       const BlockWeights& w, std::size_t heads) {
  const std::size_t c = x.tokens.cols();
  check_channels(context.tokens, c, "concat context");
  const Matrix ctx = apply_norm(context.tokens, w.norm_context);
  Matrix keys = ctx;
  Matrix values = ctx;
  if (!mem.empty()) {
    check_channels(mem.keys, c, "memory keys");
    check_channels(mem.values, c, "memory values");
    keys = vstack(ctx, mem.keys);
    values = vstack(ctx, mem.values);
  }
  TokenGrid out = x;
  out.tokens = block_forward(x.tokens, CrossContext{&keys, &values}, w, heads);
  return out;
}

Pointmap predict_head(const TokenGrid& tokens, const HeadWeights& w, const ModelConfig& cfg) {
  const std::size_t p = cfg.patch;
  require(tokens.tokens.rows() == tokens.grid_h * tokens.grid_w, ErrorKind::kShape,
          "token count does not match grid");
  const Matrix raw = linear(tokens.tokens, w.weight, w.bias);
  Pointmap pm(tokens.grid_h * p, tokens.grid_w * p);
  for (std::size_t gy = 0; gy < tokens.grid_h; ++gy) {
    for (std::size_t gx = 0; gx < tokens.grid_w; ++gx) {
      auto r = raw.row(gy * tokens.grid_w + gx);
      for (std::size_t py = 0; py < p; ++py) {
        for (std::size_t px = 0; px < p; ++px) {
          const std::size_t base = (py * p + px) * 4;
          const std::size_t i = pm.index(gy * p + py, gx * p + px);
          pm.points[i] = Vec3(r[base], r[base + 1], r[base + 2]);
          const double logit = std::clamp(r[base + 3], kMinConfidenceLogit, kMaxConfidenceLogit);
          pm.confidence[i] = 1.0 + std::exp(logit);
        }
      }
    }
  }
  return pm;
}

}  // namespace sr
