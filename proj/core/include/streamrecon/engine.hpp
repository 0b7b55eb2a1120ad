// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "streamrecon/gating.hpp"
#include "streamrecon/geometry.hpp"
#include "streamrecon/memory3d.hpp"
#include "streamrecon/model.hpp"

namespace sr {

enum class DecoderVariant {
  kInterleaved,  // odd blocks attend to the next frame, even blocks to memory
  kConcat,       // every block attends to [next frame ; memory]
};

std::string_view to_string(DecoderVariant v);

struct EngineConfig {
  ModelConfig model;
  MemoryConfig memory;
  double tau = kDefaultGateThreshold;
  DecoderVariant variant = DecoderVariant::kInterleaved;
  /// Record a BlockEvent for every decoder block executed.
  bool instrument = false;

  void validate() const;
};

enum class Branch { kCoarse, kRefined };
enum class BlockKind { kPairwise, kMemory, kConcat };

/// What a block cross-attended to.
enum class ContextSource {
  kEncoderTokens,      // first frame, self-paired coarse pass
  kRefinedTokens,      // refined tokens of the previous frame at level i-1
  kCoarseTokens,       // coarse tokens of the next frame at level i-1
  kFinalCoarseTokens,  // last frame, self-paired refined pass
  kRelevantMemory,
  kCoarseAndMemory,    // concat variant
};

struct BlockEvent {
  Branch branch = Branch::kCoarse;
  std::size_t block = 0;  // 1-based
  BlockKind kind = BlockKind::kPairwise;
  std::int64_t frame = 0;
  ContextSource source = ContextSource::kEncoderTokens;
  std::int64_t context_frame = 0;
  std::size_t context_level = 0;  // 0 = decoder input, i = output of block i
};

struct FrameStats {
  std::size_t snapshot_size = 0;  // S seen by this frame's gating
  std::size_t kept = 0;           // slots passed to the refined decoder
  double gated_fraction = 1.0;    // kept / S, 1.0 when S = 0
  std::size_t short_tokens = 0;   // bank sizes after inserting this frame
  std::size_t long_tokens = 0;
  double v_img = 0.0;
  double v_scene = 0.0;
};

struct FrameResult {
  std::int64_t frame_index = 0;
  Pointmap pointmap;
  TokenGrid refined_tokens;
  FrameStats stats;
  /// Coarse blocks of this frame followed by its refined blocks; empty unless
  /// instrumentation is on.
  std::vector<BlockEvent> blocks;
};

/// Streaming reconstruction over one image sequence. Frame t is refined
/// against the coarse tokens of frame t+1, so results trail input by one
/// frame; finalize() flushes the last one. Single caller per instance.
class Engine {
 public:
  explicit Engine(EngineConfig cfg);
  Engine(EngineConfig cfg, ModelWeights weights);

  /// Encodes the next frame. Returns the result for the previous frame, or
  /// nothing on the first call.
  std::optional<FrameResult> ingest(const Image& image);

  /// Refines the pending frame against its own final coarse tokens and
  /// closes the stream.
  FrameResult finalize();

  bool finished() const { return finished_; }
  std::int64_t frames_ingested() const { return frame_counter_; }
  const EngineConfig& config() const { return cfg_; }
  const ModelWeights& weights() const { return weights_; }
  const MemoryBank& bank() const { return bank_; }

 private:
  struct Pending {
    std::int64_t frame = 0;
    TokenGrid coarse_final;
    TokenGrid fused;
    RelevantMemory relevant;
    std::size_t snapshot_size = 0;
    std::size_t kept = 0;
    double gated_fraction = 1.0;
    std::vector<BlockEvent> coarse_events;
  };

  struct PassOutput {
    FrameResult result;
    std::optional<TokenGrid> next_coarse;
    std::vector<BlockEvent> next_coarse_events;
  };

  PassOutput lockstep_pass(const TokenGrid* next_encoded);
  void remember(FrameResult& result);
  void gate(std::int64_t frame, TokenGrid coarse_final, std::vector<BlockEvent> coarse_events);

  EngineConfig cfg_;
  ModelWeights weights_;
  MemoryBank bank_;
  std::optional<Pending> pending_;
  std::int64_t frame_counter_ = 0;
  bool finished_ = false;
};

}  // namespace sr
