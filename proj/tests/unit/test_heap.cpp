// Copyright 2026 The famsync Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstring>

#include "famsync/error.hpp"
#include "famsync/heap.hpp"

namespace famsync {
namespace {

constexpr std::uint64_t kRegion = 4096;

struct HeapFixture : ::testing::Test {
  HeapFixture()
      : media([] {
          MediaConfig m;
          m.capacity_bytes = Layout{kRegion, 1, 4096}.capacity();
          m.line_size = 8;
          return m;
        }()) {
    region = Region::open(media, config());
  }
  static RegionConfig config() {
    RegionConfig c;
    c.region_size = kRegion;
    c.max_threads = 1;
    c.slot_size = 4096;
    c.reserve_size = 1 << 24;
    return c;
  }
  SimulatedMedia media;
  std::unique_ptr<Region> region;
};

TEST_F(HeapFixture, InitializesDurably) {
  Heap heap(*region);
  EXPECT_EQ(region->sync_epoch(), 1u);
  const auto image = media.durable_snapshot();
  const auto w = walk_heap(std::span(image).subspan(region->layout().data_offset()));
  EXPECT_TRUE(w.ok());
  EXPECT_EQ(w.high_water, heap_layout::kHeaderSize);
  EXPECT_TRUE(w.blocks.empty());
  EXPECT_EQ(heap.root(), 0u);
}

TEST_F(HeapFixture, FirstFitSplitAndReuse) {
  Heap heap(*region);
  const auto a = heap.alloc(24);
  const auto b = heap.alloc(1);
  EXPECT_EQ(a, 40u);
  EXPECT_EQ(b, 72u);
  heap.free(a);
  EXPECT_EQ(heap.walk().free_blocks(), std::vector<std::uint64_t>{32});
  const auto c = heap.alloc(8);
  EXPECT_EQ(c, 40u);
  const auto w = heap.walk();
  ASSERT_TRUE(w.ok()) << w.problems.front();
  EXPECT_EQ(w.blocks, (std::vector<HeapBlock>{{32, 16, false}, {48, 16, true}, {64, 16, false}}));
  EXPECT_EQ(w.live_payloads(), (std::vector<std::uint64_t>{40, 72}));
  // An exact fit does not split.
  EXPECT_EQ(heap.alloc(8), 56u);
  EXPECT_TRUE(heap.walk().free_blocks().empty());
}

TEST_F(HeapFixture, OutOfMemory) {
  Heap heap(*region);
  EXPECT_THROW(heap.alloc(kRegion + 1), OutOfMemoryError);
  EXPECT_THROW(heap.alloc(kRegion - 32), OutOfMemoryError);
  region->fa_msync();
  EXPECT_NO_THROW(heap.alloc(kRegion - 48));
  EXPECT_THROW(heap.alloc(1), OutOfMemoryError);
}

TEST_F(HeapFixture, FreeContract) {
  Heap heap(*region, HeapOptions{.debug_checks = true});
  const auto a = heap.alloc(32);
  EXPECT_THROW(heap.free(8), ContractError);
  EXPECT_THROW(heap.free(a + 8), ContractError);
  EXPECT_THROW(heap.free(4000), ContractError);
  heap.free(a);
  EXPECT_THROW(heap.free(a), ContractError);
}

TEST_F(HeapFixture, RootAndReopen) {
  {
    Heap heap(*region);
    const auto a = heap.alloc(16);
    *heap.at<std::uint64_t>(a) = 0;  // untracked on purpose: value is irrelevant
    heap.set_root(a);
    EXPECT_THROW(heap.set_root(kRegion), RangeError);
    region->fa_msync();
  }
  region.reset();
  auto again = Region::open(media, config());
  Heap heap(*again);
  EXPECT_EQ(heap.root(), 40u);
  EXPECT_EQ(heap.walk().live_payloads(), std::vector<std::uint64_t>{40});
}

TEST_F(HeapFixture, DamagedHeaderIsRejected) {
  region->tracked_store(reinterpret_cast<std::uint64_t*>(region->working_base()), std::uint64_t{7});
  EXPECT_THROW(Heap{*region}, CorruptionError);
}

TEST(HeapWalk, FindsInconsistencies) {
  std::vector<std::byte> data(256);
  store_u64(data, heap_layout::kMagicAt, heap_layout::kMagic);
  store_u64(data, heap_layout::kHighWaterAt, 64);
  store_u64(data, 32, 16);
  store_u64(data, 48, 24);  // overruns the high water mark
  EXPECT_FALSE(walk_heap(data).ok());

  store_u64(data, 48, 16);
  EXPECT_TRUE(walk_heap(data).ok());
  store_u64(data, heap_layout::kFreeHeadAt, 32);
  store_u64(data, 40, 32);  // free list cycle
  EXPECT_FALSE(walk_heap(data).ok());
  store_u64(data, 40, 40);  // not a block start
  EXPECT_FALSE(walk_heap(data).ok());
  store_u64(data, 40, 0);
  EXPECT_TRUE(walk_heap(data).ok());

  store_u64(data, heap_layout::kMagicAt, 0);
  EXPECT_FALSE(walk_heap(data).ok());
}

}  // namespace
}  // namespace famsync
