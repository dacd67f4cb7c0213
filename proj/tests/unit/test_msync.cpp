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
#include <thread>

#include "famsync/error.hpp"
#include "famsync/region.hpp"

namespace famsync {
namespace {

constexpr std::uint64_t kRegion = 16384;

struct Fixture {
  explicit Fixture(SyncPolicy policy, std::uint32_t line = 64) : media([&] {
      MediaConfig m;
      m.capacity_bytes = Layout{kRegion, 2, 8192}.capacity();
      m.line_size = line;
      return m;
    }()) {
    RegionConfig c;
    c.region_size = kRegion;
    c.max_threads = 2;
    c.slot_size = 8192;
    c.reserve_size = 1 << 24;
    c.policy = policy;
    region = Region::open(media, c);
  }
  void put(std::uint64_t offset, std::uint64_t value) {
    region->tracked_store(reinterpret_cast<std::uint64_t*>(region->working_base() + offset), value);
  }
  std::uint64_t durable(std::uint64_t offset) const {
    const auto image = media.durable_snapshot();
    std::uint64_t v;
    std::memcpy(&v, image.data() + region->layout().data_offset() + offset, 8);
    return v;
  }
  SimulatedMedia media;
  std::unique_ptr<Region> region;
};

SyncPolicy policy(SyncScheme s, FenceMode f = FenceMode::strict,
                  CopySource src = CopySource::dirty_list) {
  return SyncPolicy{s, f, src, false};
}

TEST(FaMsync, StrictUsesThreeFencesAndPersists) {
  Fixture f(policy(SyncScheme::famsync));
  f.put(0, 11);
  f.put(4096, 22);
  const auto rep = f.region->fa_msync();
  EXPECT_EQ(rep.fences_issued, 3u);
  EXPECT_EQ(rep.durability_points, 1u);
  EXPECT_EQ(rep.entries_sealed, 2u);
  EXPECT_EQ(rep.logged_bytes, 16u);
  EXPECT_EQ(rep.coalesced_bytes, 16u);
  EXPECT_EQ(rep.bytes_copied, 128u);  // two 64-byte lines
  EXPECT_EQ(rep.media_reads, 0u);
  EXPECT_EQ(rep.epoch, 1u);
  EXPECT_EQ(f.durable(0), 11u);
  EXPECT_EQ(f.durable(4096), 22u);
  EXPECT_EQ(f.region->generation(), 1u);
  EXPECT_EQ(f.region->sync_history().size(), 1u);
  EXPECT_GT(rep.media_op_end, rep.media_op_begin);
  // Nothing is left unfenced but the log resets.
  EXPECT_LE(f.media.pending_line_count(), 1u);
}

TEST(FaMsync, EmptySyncStillCommits) {
  Fixture f(policy(SyncScheme::famsync));
  const auto rep = f.region->fa_msync();
  EXPECT_EQ(rep.fences_issued, 3u);
  EXPECT_EQ(rep.bytes_copied, 0u);
  EXPECT_EQ(f.region->generation(), 1u);
}

TEST(FaMsync, CompatUsesTwoFencesAndCloseFinishes) {
  Fixture f(policy(SyncScheme::famsync, FenceMode::compat));
  f.put(0, 5);
  const auto rep = f.region->fa_msync();
  EXPECT_EQ(rep.fences_issued, 2u);
  EXPECT_GT(f.media.pending_line_count(), 0u);  // the commit is unfenced
  f.put(8, 6);
  EXPECT_EQ(f.region->fa_msync().fences_issued, 2u);
  f.region->close();
  EXPECT_EQ(f.media.pending_line_count(), 0u);
  EXPECT_EQ(read_file_header(f.media).generation, 2u);
}

TEST(FaMsync, Page4kCopiesWholePages) {
  Fixture f(policy(SyncScheme::page4k));
  f.put(8, 1);
  f.put(4096 + 8, 2);
  const auto rep = f.region->fa_msync();
  EXPECT_EQ(rep.bytes_copied, 8192u);
  EXPECT_EQ(rep.fences_issued, 3u);
  EXPECT_EQ(f.durable(4096 + 8), 2u);
}

TEST(FaMsync, WalHasTwoDurabilityPoints) {
  Fixture f(policy(SyncScheme::wal));
  f.put(16, 3);
  f.put(24, 4);
  const auto rep = f.region->fa_msync();
  EXPECT_EQ(rep.durability_points, 2u);
  EXPECT_EQ(rep.fences_issued, 2u);
  EXPECT_EQ(rep.wal_bytes, 16u);
  EXPECT_EQ(rep.logged_bytes, 0u);
  EXPECT_EQ(rep.bytes_copied, 4096u);
  EXPECT_EQ(f.durable(24), 4u);
  f.put(24, 5);
  f.region->fa_msync();
  EXPECT_EQ(f.durable(24), 5u);
}

TEST(FaMsync, SyncFromLogMatchesDirtyList) {
  Fixture a(policy(SyncScheme::famsync));
  Fixture b(policy(SyncScheme::famsync, FenceMode::strict, CopySource::undo_log));
  for (auto* f : {&a, &b}) {
    for (std::uint64_t i = 0; i < 50; ++i) f->put((i * 328) % (kRegion - 8) & ~7ull, i * 7);
  }
  const auto ra = a.region->fa_msync();
  const auto rb = b.region->fa_msync();
  EXPECT_EQ(ra.media_reads, 0u);
  EXPECT_GT(rb.media_reads, 0u);
  EXPECT_EQ(ra.bytes_copied, rb.bytes_copied);
  EXPECT_EQ(a.media.durable_snapshot(), b.media.durable_snapshot());
}

TEST(FaMsync, GenerationParityAlternatesLogs) {
  Fixture f(policy(SyncScheme::famsync));
  const auto& layout = f.region->layout();
  f.put(0, 1);
  EXPECT_EQ(f.region->slot_log(0).slot_offset(), layout.log_offset(0, 0));
  f.region->fa_msync();
  f.put(0, 2);
  EXPECT_EQ(f.region->slot_log(0).slot_offset(), layout.log_offset(0, 1));
  f.region->fa_msync();
  EXPECT_EQ(f.region->slot_log(0).slot_offset(), layout.log_offset(0, 0));
}

TEST(FaMsync, SharingIsDetected) {
  auto p = policy(SyncScheme::famsync);
  p.detect_sharing = true;
  Fixture f(p);
  f.put(0, 1);
  std::thread([&] { f.put(64, 2); }).join();
  EXPECT_NO_THROW(f.region->fa_msync());
  f.put(0, 1);
  std::thread([&] {
    f.region->bind_thread_slot(1);
    f.region->tracked_memset(f.region->working_base() + 4, std::byte{1}, 8);
  }).join();
  EXPECT_THROW(f.region->fa_msync(), ContractError);
}

TEST(FaMsync, LogOverflowIsReported) {
  Fixture f(policy(SyncScheme::famsync));
  EXPECT_THROW(f.region->tracked_memset(f.region->working_base(), std::byte{1}, 8000),
               LogFullError);
}

TEST(FaMsync, ReopenAfterSyncsSeesLastSync) {
  Fixture f(policy(SyncScheme::famsync, FenceMode::strict), 8);
  for (std::uint64_t i = 1; i <= 5; ++i) {
    f.put(0, i);
    f.region->fa_msync();
  }
  f.put(0, 99);  // never synced
  SimulatedMedia copy(f.media.durable_snapshot(), 8);
  auto r = Region::open(copy);
  std::uint64_t v;
  std::memcpy(&v, r->working_base(), 8);
  EXPECT_EQ(v, 5u);
  EXPECT_EQ(r->recovery().slots_rolled_back, 0u);
}

}  // namespace
}  // namespace famsync
