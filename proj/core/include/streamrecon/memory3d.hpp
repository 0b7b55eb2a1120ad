// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <vector>

#include "streamrecon/geometry.hpp"
#include "streamrecon/memory_view.hpp"
#include "streamrecon/numerics.hpp"

namespace sr {

inline constexpr std::size_t kDefaultMemoryWindow = 10;
inline constexpr std::size_t kDefaultMemoryCapacity = 3000;
/// Mean over the 8 image-plane neighbours.
inline constexpr double kNeighbourWeight = 0.125;

struct MemoryConfig {
  std::size_t window = kDefaultMemoryWindow;      // K frames of short-term memory
  std::size_t capacity = kDefaultMemoryCapacity;  // long-term token budget
};

struct MemoryToken {
  std::vector<double> key;
  std::vector<double> value;
  Vec3 position = Vec3::Zero();
  double acc_weight = 0.0;
  std::int64_t frame_index = 0;
  std::uint64_t token_id = 0;
};

struct VoxelKey {
  std::int64_t ix = 0;
  std::int64_t iy = 0;
  std::int64_t iz = 0;

  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

/// floor(position / voxel) per axis, anchored at the origin.
VoxelKey voxel_key(const Vec3& position, double voxel);

/// Confidence-weighted mean point of each patch, one row per token in
/// row-major grid order.
Matrix patch_positions(const Pointmap& pm, std::size_t grid_h, std::size_t grid_w,
                       std::size_t patch);

/// Minimum over interior tokens of 0.125 * sum of distances to the eight
/// grid neighbours. Border tokens have incomplete neighbourhoods and are
/// skipped. Throws kDegenerate for grids smaller than 3x3.
double image_voxel_size(const Matrix& positions, std::size_t grid_h, std::size_t grid_w);

struct FrameTokens {
  std::int64_t frame_index = 0;
  std::vector<MemoryToken> tokens;
};

/// Short-term window of the K newest frames plus a voxel-bucketed long-term
/// store with at most one token per voxel and a hard token budget.
/// Not thread-safe; one bank per stream.
class MemoryBank {
 public:
  explicit MemoryBank(MemoryConfig cfg = {});

  /// Appends one frame (acc_weight 0). When the window overflows, the oldest
  /// frame migrates to long-term memory, followed by prune() and evict().
  void insert_frame(const Matrix& keys, const Matrix& values, const Matrix& positions,
                    std::int64_t frame_index);

  /// Folds one frame's image voxel size into the running mean; returns the
  /// new scene voxel size.
  double update_scene_voxel(double v_img);

  /// Re-buckets every long-term token under the current scene voxel size and
  /// keeps the highest accumulated weight per voxel (ties: smaller id).
  void prune();

  /// Drops lowest-weight long-term tokens (ties: larger id first) until the
  /// store fits the capacity.
  void evict();

  /// Short-term tokens oldest frame first, then long-term tokens in voxel-key
  /// order. token_ids serve as handles for add_attention.
  MemoryView snapshot() const;

  /// Adds weights[i] to the accumulated weight of token ids[i]. Unknown ids
  /// (tokens dropped since the snapshot) are ignored.
  void add_attention(std::span<const std::uint64_t> ids, std::span<const double> weights);

  /// Places tokens into long-term staging as if migrated; they are bucketed
  /// by the next prune(). Used to restore or seed a bank.
  void stage_long_term(std::vector<MemoryToken> tokens);

  const MemoryConfig& config() const { return cfg_; }
  double scene_voxel() const { return v_scene_; }
  std::size_t frames_seen() const { return voxel_samples_; }
  std::size_t short_term_frames() const { return short_term_.size(); }
  std::size_t short_term_size() const;
  std::size_t long_term_size() const { return long_term_.size() + staged_.size(); }
  std::size_t total_tokens() const { return short_term_size() + long_term_size(); }

  const std::deque<FrameTokens>& short_term() const { return short_term_; }
  const std::map<VoxelKey, MemoryToken>& long_term() const { return long_term_; }
  /// Long-term tokens in voxel-key order (staged tokens last).
  std::vector<MemoryToken> long_term_tokens() const;

 private:
  MemoryConfig cfg_;
  std::deque<FrameTokens> short_term_;
  std::map<VoxelKey, MemoryToken> long_term_;
  std::vector<MemoryToken> staged_;
  double v_scene_ = 0.0;
  double v_img_sum_ = 0.0;
  std::size_t voxel_samples_ = 0;
  std::uint64_t next_id_ = 0;
  std::size_t channels_ = 0;
};

}  // namespace sr
