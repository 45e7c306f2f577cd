#include "factorlab/blocking.hpp"

#include "factorlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace factorlab {

BlockPartition make_partition(Index T, Index block_size) {
  if (T < 1 || block_size < 1 || block_size > T) {
    throw InvalidInput("block size " + std::to_string(block_size) + " invalid for T=" +
                       std::to_string(T));
  }
  const Index count = (T + block_size - 1) / block_size;
  if (count < kMinBlockCount) {
    throw BlockingInfeasible("T=" + std::to_string(T) + " with block size " +
                             std::to_string(block_size) + " gives " + std::to_string(count) +
                             " blocks; at least " + std::to_string(kMinBlockCount) +
                             " are required");
  }

  BlockPartition p;
  p.T = T;
  p.block_size = block_size;
  p.blocks.reserve(static_cast<std::size_t>(count));
  for (Index l = 0; l < count; ++l) {
    p.blocks.push_back({l * block_size, std::min((l + 1) * block_size, T)});
  }
  p.leave_out.resize(static_cast<std::size_t>(count));
  for (Index l = 0; l < count; ++l) {
    const Index excluded_begin = p.blocks[static_cast<std::size_t>(std::max<Index>(l - 1, 0))].begin;
    const Index excluded_end =
        p.blocks[static_cast<std::size_t>(std::min<Index>(l + 1, count - 1))].end;
    auto& out = p.leave_out[static_cast<std::size_t>(l)];
    out.reserve(static_cast<std::size_t>(T - (excluded_end - excluded_begin)));
    for (Index t = 0; t < excluded_begin; ++t) out.push_back(t);
    for (Index t = excluded_end; t < T; ++t) out.push_back(t);
  }
  return p;
}

BlockPartition make_partition_by_count(Index T, Index block_count) {
  if (block_count < 1 || block_count > T) {
    throw InvalidInput("block count " + std::to_string(block_count) + " invalid for T=" +
                       std::to_string(T));
  }
  return make_partition(T, (T + block_count - 1) / block_count);
}

Index default_block_size(Index T, BlockRounding rounding, double log_base) {
  if (T < 1) throw InvalidInput("default_block_size requires T >= 1");
  double lg = std::log(static_cast<double>(T));
  if (log_base > 0.0) lg /= std::log(log_base);
  const double sq = lg * lg;
  const double rounded = rounding == BlockRounding::Floor ? std::floor(sq) : std::ceil(sq);
  return std::clamp<Index>(static_cast<Index>(rounded), 1, T);
}

Index block_of(const BlockPartition& partition, Index t) {
  if (t < 0 || t >= partition.T) {
    throw InvalidInput("time index " + std::to_string(t) + " outside [0, " +
                       std::to_string(partition.T) + ")");
  }
  return t / partition.block_size;
}

}  // namespace factorlab
