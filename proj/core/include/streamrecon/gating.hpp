// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "streamrecon/memory_view.hpp"
#include "streamrecon/numerics.hpp"

namespace sr {

inline constexpr double kDefaultGateThreshold = 5e-4;

struct GatingResult {
  Matrix fused;    // P x C, attention over every memory slot
  Matrix weights;  // P x S
  std::vector<bool> keep_mask;
  std::vector<std::size_t> kept_indices;

  /// kept / S; 1.0 for an empty memory.
  double kept_fraction() const;
};

/// Fuses the coarse tokens with all of memory and marks slot s as relevant
/// iff some query row gives it weight strictly greater than tau. Queries
/// are used unprojected.
GatingResult fuse_and_gate(const Matrix& coarse_tokens, const Matrix& mem_keys,
                           const Matrix& mem_values, double tau, double scale);

/// Rows of `mem` at result.kept_indices, order preserved.
RelevantMemory filter_memory(const MemoryView& mem, const GatingResult& result);

/// Column sums of a P x S attention map.
std::vector<double> accumulate_attention(const Matrix& weights);

}  // namespace sr
