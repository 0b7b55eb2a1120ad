// SPDX-License-Identifier: Apache-2.0
#include "streamrecon/gating.hpp"

#include "streamrecon/error.hpp"

namespace sr {

double GatingResult::kept_fraction() const {
  if (keep_mask.empty()) return 1.0;
  return static_cast<double>(kept_indices.size()) / static_cast<double>(keep_mask.size());
}

GatingResult fuse_and_gate(const Matrix& coarse_tokens, const Matrix& mem_keys,
                           const Matrix& mem_values, double tau, double scale) {
  require(tau >= 0.0, ErrorKind::kInvalidConfig, "gating threshold tau must be >= 0");
  require(mem_keys.rows() == mem_values.rows(), ErrorKind::kShape,
          "memory keys and values differ in row count");
  auto att = attention(coarse_tokens, mem_keys, mem_values, scale);

  GatingResult result;
  const std::size_t slots = att.weights.cols();
  result.keep_mask.assign(slots, false);
  for (std::size_t p = 0; p < att.weights.rows(); ++p) {
    auto row = att.weights.row(p);
    for (std::size_t s = 0; s < slots; ++s) {
      if (row[s] > tau) result.keep_mask[s] = true;
    }
  }
  for (std::size_t s = 0; s < slots; ++s) {
    if (result.keep_mask[s]) result.kept_indices.push_back(s);
  }
  result.fused = std::move(att.out);
  result.weights = std::move(att.weights);
  return result;
}

RelevantMemory filter_memory(const MemoryView& mem, const GatingResult& result) {
  require(result.keep_mask.size() == mem.size(), ErrorKind::kInternal,
          "gating result was computed against a different memory snapshot");
  for (std::size_t idx : result.kept_indices) {
    require(idx < mem.size(), ErrorKind::kInternal, "kept index out of bounds");
  }
  RelevantMemory out;
  out.keys = gather_rows(mem.keys, result.kept_indices);
  out.values = gather_rows(mem.values, result.kept_indices);
  out.positions = gather_rows(mem.positions, result.kept_indices);
  out.token_ids.reserve(result.kept_indices.size());
  for (std::size_t idx : result.kept_indices) out.token_ids.push_back(mem.token_ids[idx]);
  return out;
}

std::vector<double> accumulate_attention(const Matrix& weights) {
  std::vector<double> sums(weights.cols(), 0.0);
  for (std::size_t p = 0; p < weights.rows(); ++p) {
    auto row = weights.row(p);
    for (std::size_t s = 0; s < sums.size(); ++s) sums[s] += row[s];
  }
  return sums;
}

}  // namespace sr
