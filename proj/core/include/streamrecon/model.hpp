// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "streamrecon/geometry.hpp"
#include "streamrecon/memory_view.hpp"
#include "streamrecon/numerics.hpp"

namespace sr {

struct ModelConfig {
  std::size_t image_h = 64;
  std::size_t image_w = 64;
  std::size_t patch = 8;
  std::size_t channels = 64;  // C
  std::size_t depth = 4;      // B, blocks per decoder
  std::size_t heads = 4;
  std::size_t enc_depth = 2;
  std::size_t mlp_ratio = 4;
  std::uint64_t seed = 0;

  std::size_t grid_h() const { return image_h / patch; }
  std::size_t grid_w() const { return image_w / patch; }
  std::size_t tokens() const { return grid_h() * grid_w(); }

  /// Throws kInvalidConfig when any structural constraint is violated.
  void validate() const;
};

/// One frame's P x C feature tokens on a grid_h x grid_w patch grid.
struct TokenGrid {
  Matrix tokens;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::int64_t frame_index = 0;
};

struct LayerNormWeights {
  Matrix gain;
  Matrix shift;
};

struct AttentionWeights {
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
};

struct MlpWeights {
  Matrix w1, b1, w2, b2;
};

/// Pre-norm transformer block: self-attention, cross-attention, MLP. The
/// encoder uses the same layout and never reads the cross-attention part.
struct BlockWeights {
  LayerNormWeights norm_self;
  AttentionWeights self_attn;
  LayerNormWeights norm_cross;
  LayerNormWeights norm_context;
  AttentionWeights cross_attn;
  LayerNormWeights norm_mlp;
  MlpWeights mlp;
};

struct HeadWeights {
  Matrix weight;  // (patch*patch*4) x C
  Matrix bias;
};

/// Every learned tensor of the pipeline, unpacked from a ParamSet.
struct ModelWeights {
  Matrix embed_weight;  // C x (patch*patch*3)
  Matrix embed_bias;
  std::vector<BlockWeights> encoder;
  std::vector<BlockWeights> coarse;
  std::vector<BlockWeights> refined;
  HeadWeights head;
  Matrix memory_key_weight, memory_key_bias;
  Matrix memory_value_weight, memory_value_bias;
};

/// Shapes of every tensor, in generation order.
std::vector<LayerShape> model_layer_shapes(const ModelConfig& cfg);
ModelWeights unpack_weights(const ParamSet& params, const ModelConfig& cfg);
/// seeded_params + unpack_weights with cfg.seed.
ModelWeights make_weights(const ModelConfig& cfg);

/// Zeroes the attention and MLP output projections so the block reduces to
/// the identity map.
void zero_output_projections(BlockWeights& w);

/// Fixed 2D sinusoidal signal: first C/2 channels encode the row, last C/2
/// the column, each as interleaved sin/cos pairs.
Matrix positional_encoding(std::size_t grid_h, std::size_t grid_w, std::size_t channels);

/// Flattened patch pixels in (row, column, channel) order.
std::vector<double> patch_vector(const Image& image, std::size_t gy, std::size_t gx,
                                 std::size_t patch);

/// Multi-head attention of `query_tokens` over (keys, values); every input
/// is projected by the block's q/k/v weights and the result by wo.
Matrix multi_head_attention(const Matrix& query_tokens, const Matrix& keys, const Matrix& values,
                            const AttentionWeights& w, std::size_t heads);

Matrix mlp_forward(const Matrix& x, const MlpWeights& w);

TokenGrid encode(const Image& image, const ModelWeights& weights, const ModelConfig& cfg,
                 std::int64_t frame_index = 0);

/// x += SA(norm(x)); x += CA(norm(x), norm(context)); x += MLP(norm(x)).
TokenGrid pairwise_block(const TokenGrid& x, const TokenGrid& context, const BlockWeights& w,
                         std::size_t heads);

/// Same residual layout with the relevant memory as cross-attention
/// keys/values. An empty memory skips the cross-attention term.
TokenGrid memory_block(const TokenGrid& x, const RelevantMemory& mem, const BlockWeights& w,
                       std::size_t heads);

/// Cross-attends to the concatenation of normalized next-frame tokens and
/// the relevant memory in one attention call.
TokenGrid concat_block(const TokenGrid& x, const TokenGrid& context, const RelevantMemory& mem,
                       const BlockWeights& w, std::size_t heads);

/// Per-token linear map to patch*patch*4 values. Channels 0-2 are points;
/// channel 3 becomes confidence 1 + exp(raw), raw clamped to
/// [kMinConfidenceLogit, kMaxConfidenceLogit].
Pointmap predict_head(const TokenGrid& tokens, const HeadWeights& w, const ModelConfig& cfg);

inline constexpr double kMinConfidenceLogit = -30.0;
inline constexpr double kMaxConfidenceLogit = 50.0;

}  // namespace sr
