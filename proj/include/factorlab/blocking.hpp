#pragma once

#include "factorlab/panel.hpp"

#include <vector>

namespace factorlab {

/// Half-open range [begin, end) of 0-based time indices.
struct IndexRange {
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
  bool contains(Index t) const { return t >= begin && t < end; }
};

/// Partition of 0..T-1 into consecutive blocks of length block_size (the last
/// one possibly shorter). leave_out[l] lists every time index outside block
/// l and its two neighbours, in increasing order.
struct BlockPartition {
  Index T = 0;
  Index block_size = 0;
  std::vector<IndexRange> blocks;
  std::vector<std::vector<Index>> leave_out;

  Index block_count() const { return static_cast<Index>(blocks.size()); }
};

inline constexpr Index kMinBlockCount = 4;

/// Throws BlockingInfeasible when fewer than kMinBlockCount blocks result.
BlockPartition make_partition(Index T, Index block_size);

/// Block size ceil(T / block_count).
BlockPartition make_partition_by_count(Index T, Index block_count);

enum class BlockRounding { Floor, Ceil };

/// (log T)^2 rounded per `rounding` and clamped to [1, T]. Natural log
/// unless another base is given.
Index default_block_size(Index T, BlockRounding rounding = BlockRounding::Floor,
                         double log_base = 0.0);

/// 0-based block index containing time t (0-based).
Index block_of(const BlockPartition& partition, Index t);

}  // namespace factorlab
