// SPDX-License-Identifier: Apache-2.0
#include "streamrecon/memory3d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "streamrecon/error.hpp"

namespace sr {

VoxelKey voxel_key(const Vec3& position, double voxel) {
  return {static_cast<std::int64_t>(std::floor(position.x() / voxel)),
          static_cast<std::int64_t>(std::floor(position.y() / voxel)),
          static_cast<std::int64_t>(std::floor(position.z() / voxel))};
}

Matrix patch_positions(const Pointmap& pm, std::size_t grid_h, std::size_t grid_w,
                       std::size_t patch) {
  require(pm.h == grid_h * patch && pm.w == grid_w * patch, ErrorKind::kShape,
          "pointmap size does not match the patch grid");
  Matrix out(grid_h * grid_w, 3);
  for (std::size_t gy = 0; gy < grid_h; ++gy) {
    for (std::size_t gx = 0; gx < grid_w; ++gx) {
      Vec3 acc = Vec3::Zero();
      double total = 0.0;
      for (std::size_t py = 0; py < patch; ++py) {
        for (std::size_t px = 0; px < patch; ++px) {
          const std::size_t i = pm.index(gy * patch + py, gx * patch + px);
          acc += pm.confidence[i] * pm.points[i];
          total += pm.confidence[i];
        }
      }
      require(total > 0.0, ErrorKind::kInternal, "patch has zero total confidence");
      auto row = out.row(gy * grid_w + gx);
      for (int k = 0; k < 3; ++k) row[static_cast<std::size_t>(k)] = acc[k] / total;
    }
  }
  return out;
}

double image_voxel_size(const Matrix& positions, std::size_t grid_h, std::size_t grid_w) {
  require(grid_h >= 3 && grid_w >= 3, ErrorKind::kDegenerate,
          "image voxel size needs at least a 3x3 token grid");
  require(positions.rows() == grid_h * grid_w && positions.cols() == 3, ErrorKind::kShape,
          "positions must be (grid_h*grid_w) x 3");
  auto at = [&](std::size_t y, std::size_t x) {
    auto r = positions.row(y * grid_w + x);
    return Vec3(r[0], r[1], r[2]);
  };
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t y = 1; y + 1 < grid_h; ++y) {
    for (std::size_t x = 1; x + 1 < grid_w; ++x) {
      const Vec3 c = at(y, x);
      double sum = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const auto ny = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(y) + dy);
          const auto nx = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + dx);
          sum += (c - at(ny, nx)).norm();
        }
      }
      best = std::min(best, kNeighbourWeight * sum);
    }
  }
  return best;
}

MemoryBank::MemoryBank(MemoryConfig cfg) : cfg_(cfg) {
  require(cfg_.window > 0, ErrorKind::kInvalidConfig, "memory window K must be positive");
  require(cfg_.capacity > 0, ErrorKind::kInvalidConfig, "memory capacity must be positive");
}

std::size_t MemoryBank::short_term_size() const {
  std::size_t n = 0;
  for (const auto& f : short_term_) n += f.tokens.size();
  return n;
}

double MemoryBank::update_scene_voxel(double v_img) {
  require(std::isfinite(v_img) && v_img > 0.0, ErrorKind::kInvalidInput,
          "image voxel size must be positive and finite");
  v_img_sum_ += v_img;
  ++voxel_samples_;
  v_scene_ = v_img_sum_ / static_cast<double>(voxel_samples_);
  return v_scene_;
}

void MemoryBank::insert_frame(const Matrix& keys, const Matrix& values, const Matrix& positions,
                              std::int64_t frame_index) {
  require(keys.rows() == values.rows() && keys.rows() == positions.rows(), ErrorKind::kShape,
          "keys, values and positions must have equal row counts");
  require(positions.cols() == 3, ErrorKind::kShape, "positions must have 3 columns");
  require(keys.cols() == values.cols(), ErrorKind::kShape, "key and value widths differ");
  if (channels_ == 0) channels_ = keys.cols();
  require(keys.cols() == channels_, ErrorKind::kShape, "token width changed between frames");

  FrameTokens frame;
  frame.frame_index = frame_index;
  frame.tokens.reserve(keys.rows());
  for (std::size_t r = 0; r < keys.rows(); ++r) {
    MemoryToken tok;
    tok.key.assign(keys.row(r).begin(), keys.row(r).end());
    tok.value.assign(values.row(r).begin(), values.row(r).end());
    auto p = positions.row(r);
    tok.position = Vec3(p[0], p[1], p[2]);
    require(tok.position.allFinite(), ErrorKind::kInvalidInput, "token position is not finite");
    tok.frame_index = frame_index;
    tok.token_id = next_id_++;
    frame.tokens.push_back(std::move(tok));
  }
  short_term_.push_back(std::move(frame));

  if (short_term_.size() > cfg_.window) {
    FrameTokens oldest = std::move(short_term_.front());
    short_term_.pop_front();
    for (auto& tok : oldest.tokens) staged_.push_back(std::move(tok));
    prune();
    evict();
  }
}

void MemoryBank::prune() {
  if (long_term_.empty() && staged_.empty()) return;
  require(v_scene_ > 0.0, ErrorKind::kInvalidConfig,
          "pruning requires a positive scene voxel size");
  std::vector<MemoryToken> all;
  all.reserve(long_term_.size() + staged_.size());
  for (auto& [key, tok] : long_term_) all.push_back(std::move(tok));
  for (auto& tok : staged_) all.push_back(std::move(tok));
  long_term_.clear();
  staged_.clear();

  for (auto& tok : all) {
    const VoxelKey key = voxel_key(tok.position, v_scene_);
    auto [it, inserted] = long_term_.try_emplace(key);
    if (inserted) {
      it->second = std::move(tok);
      continue;
    }
    const MemoryToken& cur = it->second;
    const bool better = tok.acc_weight > cur.acc_weight ||
                        (tok.acc_weight == cur.acc_weight && tok.token_id < cur.token_id);
    if (better) it->second = std::move(tok);
  }
}

void MemoryBank::evict() {
  const std::size_t total = long_term_size();
  if (total <= cfg_.capacity) return;

  struct Candidate {
    double weight;
    std::uint64_t id;
  };
  std::vector<Candidate> cands;
  cands.reserve(total);
  for (const auto& [key, tok] : long_term_) cands.push_back({tok.acc_weight, tok.token_id});
  for (const auto& tok : staged_) cands.push_back({tok.acc_weight, tok.token_id});
  // Eviction order: lowest weight first, newer (larger id) first among ties.
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    return a.id > b.id;
  });
  std::unordered_set<std::uint64_t> drop;
  for (std::size_t i = 0; i < total - cfg_.capacity; ++i) drop.insert(cands[i].id);

  std::erase_if(long_term_, [&](const auto& kv) { return drop.count(kv.second.token_id) != 0; });
  std::erase_if(staged_, [&](const MemoryToken& t) { return drop.count(t.token_id) != 0; });
}

MemoryView MemoryBank::snapshot() const {
  const std::size_t s = total_tokens();
  const std::size_t c = channels_;
  MemoryView view;
  view.keys = Matrix(s, c);
  view.values = Matrix(s, c);
  view.positions = Matrix(s, 3);
  view.token_ids.reserve(s);
  std::size_t row = 0;
  auto emit = [&](const MemoryToken& tok) {
    std::copy(tok.key.begin(), tok.key.end(), view.keys.row(row).begin());
    std::copy(tok.value.begin(), tok.value.end(), view.values.row(row).begin());
    auto p = view.positions.row(row);
    p[0] = tok.position.x();
    p[1] = tok.position.y();
    p[2] = tok.position.z();
    view.token_ids.push_back(tok.token_id);
    ++row;
  };
  for (const auto& frame : short_term_) {
    for (const auto& tok : frame.tokens) emit(tok);
  }
  for (const auto& [key, tok] : long_term_) emit(tok);
  for (const auto& tok : staged_) emit(tok);
  return view;
}

void MemoryBank::add_attention(std::span<const std::uint64_t> ids,
                               std::span<const double> weights) {
  require(ids.size() == weights.size(), ErrorKind::kShape,
          "attention handles and weights differ in length");
  std::unordered_map<std::uint64_t, double> delta;
  delta.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(weights[i] >= 0.0, ErrorKind::kInvalidInput, "attention weight must be >= 0");
    delta[ids[i]] += weights[i];
  }
  auto apply = [&](MemoryToken& tok) {
    auto it = delta.find(tok.token_id);
    if (it != delta.end()) tok.acc_weight += it->second;
  };
  for (auto& frame : short_term_) {
    for (auto& tok : frame.tokens) apply(tok);
  }
  for (auto& [key, tok] : long_term_) apply(tok);
  for (auto& tok : staged_) apply(tok);
}

void MemoryBank::stage_long_term(std::vector<MemoryToken> tokens) {
  for (auto& tok : tokens) {
    require(tok.position.allFinite(), ErrorKind::kInvalidInput, "token position is not finite");
    require(tok.acc_weight >= 0.0, ErrorKind::kInvalidInput, "acc_weight must be >= 0");
    if (channels_ == 0) channels_ = tok.key.size();
    require(tok.key.size() == channels_ && tok.value.size() == channels_, ErrorKind::kShape,
            "staged token width differs from the bank");
    next_id_ = std::max(next_id_, tok.token_id + 1);
    staged_.push_back(std::move(tok));
  }
}

std::vector<MemoryToken> MemoryBank::long_term_tokens() const {
  std::vector<MemoryToken> out;
  out.reserve(long_term_size());
  for (const auto& [key, tok] : long_term_) out.push_back(tok);
  for (const auto& tok : staged_) out.push_back(tok);
  return out;
}

}  // namespace sr
