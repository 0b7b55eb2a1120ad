// SPDX-License-Identifier: Apache-2.0
#include "streamrecon/engine.hpp"

#include <algorithm>
#include <cmath>

#include "streamrecon/error.hpp"

namespace sr {

namespace {

// Floor for a frame whose predicted patch centres coincide; keeps the
// running scene voxel strictly positive.
constexpr double kMinImageVoxel = 1e-12;

}  // namespace

std::string_view to_string(DecoderVariant v) {
  switch (v) {
    case DecoderVariant::kInterleaved: return "interleaved";
    case DecoderVariant::kConcat: return "concat";
  }
  return "unknown";
}

void EngineConfig::validate() const {
  model.validate();
  require(model.grid_h() >= 3 && model.grid_w() >= 3, ErrorKind::kInvalidConfig,
          "the patch grid must be at least 3x3 for adaptive voxel sizing");
  require(tau >= 0.0 && std::isfinite(tau), ErrorKind::kInvalidConfig, "tau must be >= 0");
  require(memory.window > 0 && memory.capacity > 0, ErrorKind::kInvalidConfig,
          "memory window and capacity must be positive");
}

Engine::Engine(EngineConfig cfg) : Engine(cfg, make_weights(cfg.model)) {}

Engine::Engine(EngineConfig cfg, ModelWeights weights)
    : cfg_(cfg), weights_(std::move(weights)), bank_(cfg.memory) {
  cfg_.validate();
}

std::optional<FrameResult> Engine::ingest(const Image& image) {
  require(!finished_, ErrorKind::kLifecycle, "ingest after finalize");
  const std::int64_t frame = frame_counter_ + 1;
  TokenGrid encoded = encode(image, weights_, cfg_.model, frame);
  ++frame_counter_;

  if (!pending_) {
    // First frame: the coarse decoder pairs the frame with its own encoder
    // tokens at every block.
    TokenGrid c = encoded;
    std::vector<BlockEvent> events;
    for (std::size_t i = 1; i <= cfg_.model.depth; ++i) {
      c = pairwise_block(c, encoded, weights_.coarse[i - 1], cfg_.model.heads);
      if (cfg_.instrument) {
        events.push_back({Branch::kCoarse, i, BlockKind::kPairwise, frame,
                          ContextSource::kEncoderTokens, frame, 0});
      }
    }
    gate(frame, std::move(c), std::move(events));
    return std::nullopt;
  }

  PassOutput pass = lockstep_pass(&encoded);
  remember(pass.result);
  gate(frame, std::move(*pass.next_coarse), std::move(pass.next_coarse_events));
  return std::move(pass.result);
}

FrameResult Engine::finalize() {
  require(!finished_, ErrorKind::kLifecycle, "finalize called twice");
  require(pending_.has_value(), ErrorKind::kLifecycle, "finalize with no pending frame");
  PassOutput pass = lockstep_pass(nullptr);
  remember(pass.result);
  pending_.reset();
  finished_ = true;
  return std::move(pass.result);
}

Engine::PassOutput Engine::lockstep_pass(const TokenGrid* next_encoded) {
  Pending& p = *pending_;
  const std::size_t heads = cfg_.model.heads;
  const std::int64_t t = p.frame;

  PassOutput out;
  FrameResult& result = out.result;
  result.frame_index = t;
  result.blocks = std::move(p.coarse_events);

  TokenGrid r = p.fused;
  std::optional<TokenGrid> c;
  if (next_encoded != nullptr) c = *next_encoded;

  for (std::size_t i = 1; i <= cfg_.model.depth; ++i) {
    // Both branches read level i-1 of the other before either advances.
    std::optional<TokenGrid> c_next;
    if (c) {
      c_next = pairwise_block(*c, r, weights_.coarse[i - 1], heads);
      if (cfg_.instrument) {
        out.next_coarse_events.push_back({Branch::kCoarse, i, BlockKind::kPairwise, c->frame_index,
                                          ContextSource::kRefinedTokens, t, i - 1});
      }
    }

    const TokenGrid& pair_ctx = c ? *c : p.coarse_final;
    const ContextSource pair_source =
        c ? ContextSource::kCoarseTokens : ContextSource::kFinalCoarseTokens;
    const std::int64_t ctx_frame = c ? c->frame_index : t;
    const std::size_t ctx_level = c ? i - 1 : cfg_.model.depth;
    const BlockWeights& w = weights_.refined[i - 1];

    BlockEvent ev{Branch::kRefined, i, BlockKind::kPairwise, t, pair_source, ctx_frame, ctx_level};
    if (cfg_.variant == DecoderVariant::kConcat) {
      r = concat_block(r, pair_ctx, p.relevant, w, heads);
      ev.kind = BlockKind::kConcat;
      ev.source = ContextSource::kCoarseAndMemory;
    } else if (i % 2 == 1) {
      r = pairwise_block(r, pair_ctx, w, heads);
    } else {
      r = memory_block(r, p.relevant, w, heads);
      ev.kind = BlockKind::kMemory;
      ev.source = ContextSource::kRelevantMemory;
      ev.context_frame = t;
      ev.context_level = 0;
    }
    if (cfg_.instrument) result.blocks.push_back(ev);
    if (c_next) c = std::move(c_next);
  }

  result.pointmap = predict_head(r, weights_.head, cfg_.model);
  result.refined_tokens = std::move(r);
  result.stats.snapshot_size = p.snapshot_size;
  result.stats.kept = p.kept;
  result.stats.gated_fraction = p.gated_fraction;
  if (c) out.next_coarse = std::move(c);
  return out;
}

void Engine::remember(FrameResult& result) {
  const ModelConfig& m = cfg_.model;
  const Matrix positions = patch_positions(result.pointmap, m.grid_h(), m.grid_w(), m.patch);
  const double v_img = image_voxel_size(positions, m.grid_h(), m.grid_w());
  bank_.update_scene_voxel(std::max(v_img, kMinImageVoxel));

  const Matrix& tokens = result.refined_tokens.tokens;
  const Matrix keys = linear(tokens, weights_.memory_key_weight, weights_.memory_key_bias);
  const Matrix values = linear(tokens, weights_.memory_value_weight, weights_.memory_value_bias);
  bank_.insert_frame(keys, values, positions, result.frame_index);

  result.stats.v_img = v_img;
  result.stats.v_scene = bank_.scene_voxel();
  result.stats.short_tokens = bank_.short_term_size();
  result.stats.long_tokens = bank_.long_term_size();
}

void Engine::gate(std::int64_t frame, TokenGrid coarse_final,
                  std::vector<BlockEvent> coarse_events) {
  Pending next;
  next.frame = frame;
  next.coarse_events = std::move(coarse_events);

  const MemoryView snap = bank_.snapshot();
  if (snap.empty()) {
    next.fused = coarse_final;
  } else {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.model.channels));
    GatingResult g = fuse_and_gate(coarse_final.tokens, snap.keys, snap.values, cfg_.tau, scale);
    next.relevant = filter_memory(snap, g);
    next.snapshot_size = snap.size();
    next.kept = g.kept_indices.size();
    next.gated_fraction = g.kept_fraction();
    const auto received = accumulate_attention(g.weights);
    bank_.add_attention(snap.token_ids, received);
    next.fused = coarse_final;
    next.fused.tokens = std::move(g.fused);
  }
  next.coarse_final = std::move(coarse_final);
  pending_ = std::move(next);
}

}  // namespace sr
