#include "factorlab/blocking.hpp"
#include "factorlab/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

using namespace factorlab;

namespace {

std::vector<Index> range(Index begin, Index end) {
  std::vector<Index> out;
  for (Index t = begin; t < end; ++t) out.push_back(t);
  return out;
}

}  // namespace

TEST(Partition, SmallEnumeration) {
  const BlockPartition p = make_partition(10, 2);
  ASSERT_EQ(p.block_count(), 5);
  EXPECT_EQ(p.blocks[0].begin, 0);
  EXPECT_EQ(p.blocks[0].end, 2);
  EXPECT_EQ(p.leave_out[0], range(4, 10));
  EXPECT_EQ(p.leave_out[2], (std::vector<Index>{0, 1, 8, 9}));
  EXPECT_EQ(p.leave_out[4], range(0, 6));
}

TEST(Partition, ShortLastBlock) {
  const Index b = default_block_size(500);
  ASSERT_EQ(b, 38);
  const BlockPartition p = make_partition(500, b);
  EXPECT_EQ(p.block_count(), 14);
  EXPECT_EQ(p.blocks.back().size(), 6);
}

TEST(Partition, TooFewBlocks) {
  EXPECT_THROW(make_partition(9, 3), BlockingInfeasible);
  EXPECT_NO_THROW(make_partition(8, 2));
}

TEST(Partition, FourBlocksLeaveOutOfFirst) {
  const BlockPartition p = make_partition(8, 2);
  EXPECT_EQ(p.leave_out[0], (std::vector<Index>{4, 5, 6, 7}));
}

TEST(Partition, ByCount) {
  const BlockPartition p = make_partition_by_count(500, 5);
  EXPECT_EQ(p.block_count(), 5);
  EXPECT_EQ(p.block_size, 100);
}

TEST(Partition, Invariants) {
  for (Index T : {8, 13, 50, 97, 500, 1000}) {
    for (Index b : {1, 2, 3, 7, 20}) {
      if ((T + b - 1) / b < kMinBlockCount) continue;
      const BlockPartition p = make_partition(T, b);
      Index total = 0;
      std::set<Index> seen;
      for (Index l = 0; l < p.block_count(); ++l) {
        total += p.blocks[l].size();
        for (Index t = p.blocks[l].begin; t < p.blocks[l].end; ++t) {
          EXPECT_TRUE(seen.insert(t).second);
          EXPECT_EQ(block_of(p, t), l);
          EXPECT_TRUE(p.blocks[block_of(p, t)].contains(t));
        }
        const Index lo = std::max<Index>(0, l - 1);
        const Index hi = std::min<Index>(p.block_count() - 1, l + 1);
        for (Index t : p.leave_out[l]) {
          EXPECT_TRUE(t < p.blocks[lo].begin || t >= p.blocks[hi].end);
        }
        EXPECT_GE(static_cast<Index>(p.leave_out[l].size()), T - 3 * b);
        EXPECT_TRUE(std::is_sorted(p.leave_out[l].begin(), p.leave_out[l].end()));
      }
      EXPECT_EQ(total, T);
    }
  }
}

TEST(BlockSize, DefaultRule) {
  EXPECT_EQ(default_block_size(500), 38);
  EXPECT_EQ(default_block_size(2000), 57);
  EXPECT_EQ(default_block_size(3), 1);
  EXPECT_EQ(default_block_size(500), static_cast<Index>(std::floor(std::pow(std::log(500.0), 2))));
  EXPECT_EQ(default_block_size(253, BlockRounding::Ceil), 31);
  EXPECT_EQ(default_block_size(500, BlockRounding::Floor, 10.0),
            static_cast<Index>(std::floor(std::pow(std::log10(500.0), 2))));
}

TEST(BlockOf, Lookup) {
  const BlockPartition p = make_partition(10, 2);
  EXPECT_EQ(block_of(p, 4), 2);
  EXPECT_EQ(block_of(p, 0), 0);
  EXPECT_EQ(block_of(p, 9), p.block_count() - 1);
}
