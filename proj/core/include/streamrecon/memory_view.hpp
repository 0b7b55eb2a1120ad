// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "streamrecon/numerics.hpp"

namespace sr {

/// Row-aligned copy of memory tokens: keys, values, positions (S x 3) and
/// the originating token ids. Used both for full-bank snapshots and for the
/// gated subset handed to the refined decoder.
struct MemoryView {
  Matrix keys;
  Matrix values;
  Matrix positions;
  std::vector<std::uint64_t> token_ids;

  std::size_t size() const { return keys.rows(); }
  bool empty() const { return keys.rows() == 0; }
};

using RelevantMemory = MemoryView;

}  // namespace sr
