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

constexpr std::uint64_t kRegion = 4096;

RegionConfig small_config() {
  RegionConfig c;
  c.region_size = kRegion;
  c.max_threads = 2;
  c.slot_size = 8192;
  c.reserve_size = 1 << 24;
  return c;
}

MediaConfig media_config(std::uint32_t line = 64) {
  MediaConfig m;
  m.capacity_bytes = Layout{kRegion, 2, 8192}.capacity();
  m.line_size = line;
  return m;
}

TEST(Region, FormatsBlankMedia) {
  SimulatedMedia media(media_config());
  auto r = Region::open(media, small_config());
  EXPECT_EQ(r->size(), kRegion);
  EXPECT_EQ(r->generation(), 0u);
  const auto h = read_file_header(media);
  EXPECT_EQ(h.region_size, kRegion);
  EXPECT_EQ(h.max_threads, 2u);
  EXPECT_EQ(h.slot_size, 8192u);
  // The header is durable right after formatting.
  const auto image = media.durable_snapshot();
  EXPECT_EQ(std::memcmp(image.data(), layout::kMagic.data(), 8), 0);
  for (std::size_t i = 0; i < kRegion; ++i) ASSERT_EQ(r->working_base()[i], std::byte{0});
}

TEST(Region, ReopenAdoptsGeometryAndContents) {
  SimulatedMedia media(media_config());
  {
    auto r = Region::open(media, small_config());
    r->tracked_store(reinterpret_cast<std::uint64_t*>(r->working_base() + 64), std::uint64_t{42});
    r->fa_msync();
  }
  RegionConfig adopt;
  adopt.region_size = 0;
  adopt.reserve_size = 1 << 24;
  auto r = Region::open(media, adopt);
  EXPECT_EQ(r->size(), kRegion);
  EXPECT_EQ(r->layout().max_threads, 2u);
  EXPECT_EQ(r->generation(), 1u);
  std::uint64_t v;
  std::memcpy(&v, r->working_base() + 64, 8);
  EXPECT_EQ(v, 42u);

  auto wrong = small_config();
  wrong.region_size = 8192;
  EXPECT_THROW(Region::open(media, wrong), ConfigError);
}

TEST(Region, RejectsBadMedia) {
  SimulatedMedia tiny([] {
    MediaConfig m;
    m.capacity_bytes = 4096;
    m.line_size = 64;
    return m;
  }());
  EXPECT_THROW(Region::open(tiny, small_config()), ConfigError);

  SimulatedMedia media(media_config());
  media.write(0, std::as_bytes(std::span("NOTMAGIC", 8)));
  media.flush(0, 8);
  media.fence();
  EXPECT_THROW(Region::open(media, small_config()), CorruptionError);

  SimulatedMedia blank(media_config());
  EXPECT_THROW(recover_region(blank), CorruptionError);

  auto bad = small_config();
  bad.slot_size = 1000;
  EXPECT_THROW(Region::open(blank, bad), ConfigError);
}

TEST(Region, AddressTranslation) {
  SimulatedMedia media(media_config());
  auto r = Region::open(media, small_config());
  EXPECT_EQ(r->to_offset(r->working_base() + 100), 100u);
  EXPECT_EQ(r->from_offset(100), r->working_base() + 100);
  EXPECT_EQ(r->to_backing(r->working_base() + 5), r->backing_base() + 5);
  EXPECT_TRUE(r->in_backing_range(r->backing_base() + kRegion - 1));
  EXPECT_FALSE(r->in_backing_range(r->backing_base() + kRegion));
  int outside = 0;
  EXPECT_FALSE(r->in_working_range(&outside));
  EXPECT_THROW(r->to_offset(&outside), RangeError);
  EXPECT_THROW(r->from_offset(kRegion), RangeError);
}

TEST(Interpose, StoresLogPreImages) {
  SimulatedMedia media(media_config());
  auto r = Region::open(media, small_config());
  r->bind_thread_slot(1);
  auto* p = reinterpret_cast<std::uint32_t*>(r->working_base() + 8);
  r->tracked_store(p, std::uint32_t{7});
  r->on_store(p, 4);
  *p = 9;
  const auto& log = r->slot_log(1);
  EXPECT_EQ(log.entry_count(), 2u);
  EXPECT_EQ(log.logged_bytes(), 8u);
  EXPECT_EQ(r->slot_dirty(1).records().size(), 2u);
  EXPECT_TRUE(r->slot_log(0).empty());

  // Second entry's payload is the value 7 that the store overwrote.
  std::vector<std::byte> entry(24);
  media.read(r->layout().log_offset(1, 0) + 16 + 24, entry);
  std::uint32_t pre;
  std::memcpy(&pre, entry.data() + 16, 4);
  EXPECT_EQ(pre, 7u);

  int outside = 0;
  EXPECT_NO_THROW(r->on_store(&outside, 4));  // ignored
  EXPECT_EQ(log.entry_count(), 2u);
  EXPECT_THROW(r->on_store(p, 3), RangeError);
  EXPECT_THROW(r->on_store(r->working_base() + kRegion - 4, 8), RangeError);
}

TEST(Interpose, BulkOperations) {
  SimulatedMedia media(media_config());
  auto r = Region::open(media, small_config());
  auto* base = r->working_base();
  r->tracked_memset(base, std::byte{0xAB}, 100);
  r->tracked_memcpy(base + 200, base, 50);
  r->tracked_memmove(base + 10, base + 0, 100);
  EXPECT_EQ(base[109], std::byte{0xAB});
  EXPECT_EQ(base[249], std::byte{0xAB});
  EXPECT_EQ(r->slot_dirty(0).total_logged_bytes(), 250u);
  EXPECT_THROW(r->tracked_memset(base + kRegion - 1, std::byte{0}, 2), RangeError);
  EXPECT_THROW(r->tracked_memset(base, std::byte{0}, 0), RangeError);
  std::array<std::byte, 8> outside{};
  EXPECT_THROW(r->tracked_memmove(base, outside.data(), 8), RangeError);
  EXPECT_NO_THROW(r->tracked_memcpy(base, outside.data(), 8));
}

TEST(Region, ThreadSlotsAreLimited) {
  SimulatedMedia media(media_config());
  auto r = Region::open(media, small_config());
  EXPECT_EQ(r->thread_slot(), 0u);
  EXPECT_EQ(r->thread_slot(), 0u);
  std::uint32_t second = 99;
  std::thread([&] { second = r->thread_slot(); }).join();
  EXPECT_EQ(second, 1u);
  bool threw = false;
  std::thread([&] {
    try {
      r->thread_slot();
    } catch (const ConfigError&) {
      threw = true;
    }
  }).join();
  EXPECT_TRUE(threw);
  EXPECT_THROW(r->bind_thread_slot(2), RangeError);
}

TEST(Region, RecoveryRollsBackAnInterruptedSync) {
  SimulatedMedia media(media_config(8));
  auto r = Region::open(media, small_config());
  auto* p = reinterpret_cast<std::uint64_t*>(r->working_base());
  r->tracked_store(p, std::uint64_t{1});
  r->fa_msync();
  const auto committed = media.durable_snapshot();

  r->tracked_store(p, std::uint64_t{2});
  r->tracked_store(p + 100, std::uint64_t{3});
  // Stop right before the commit write: seal and copy are durable.
  const auto begin = media.op_count();
  std::optional<std::uint64_t> commit_at;
  media.set_observer([&](const MediaEvent& e) {
    if (e.kind == MediaEvent::Kind::write && e.offset == layout::kGenerationAt && !commit_at) {
      commit_at = media.op_count() - 1;
    }
  });
  r->fa_msync();
  media.set_observer(nullptr);
  ASSERT_TRUE(commit_at.has_value());

  // Replay on a fresh copy, crashing at the commit write.
  SimulatedMedia again(committed, 8);
  auto r2 = Region::open(again, small_config());
  auto* q = reinterpret_cast<std::uint64_t*>(r2->working_base());
  r2->tracked_store(q, std::uint64_t{2});
  r2->tracked_store(q + 100, std::uint64_t{3});
  again.set_crash_point(again.op_count() + (*commit_at - begin));
  EXPECT_THROW(r2->fa_msync(), SimulatedCrash);
  r2.reset();

  SimulatedMedia after(again.durable_snapshot(), 8);
  auto r3 = Region::open(after, small_config());
  EXPECT_EQ(r3->recovery().slots_rolled_back, 1u);
  EXPECT_EQ(r3->recovery().entries_applied, 2u);
  std::uint64_t a, b;
  std::memcpy(&a, r3->working_base(), 8);
  std::memcpy(&b, r3->working_base() + 800, 8);
  EXPECT_EQ(a, 1u);
  EXPECT_EQ(b, 0u);
  EXPECT_EQ(r3->generation(), 2u);  // recovery retires the rolled-back epoch
}

}  // namespace
}  // namespace famsync
