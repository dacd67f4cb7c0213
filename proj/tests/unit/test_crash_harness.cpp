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

#include "famsync/crash_harness.hpp"
#include "famsync/error.hpp"

namespace famsync {
namespace {

// Three adjacent stores and one sync: 3 log appends, then seal (write,
// flush), fence 1, copy (write, flush), fence 2, commit (write, flush),
// fence 3, reset (write, flush). 14 media ops in all.
constexpr const char* kThreeStores = R"([
  {"op": "store", "args": {"offset": 0, "size": 8, "value": 1}},
  {"op": "store", "args": {"offset": 8, "size": 8, "value": 2}},
  {"op": "store", "args": {"offset": 16, "size": 8, "value": 3}},
  {"op": "sync"}
])";
constexpr std::uint64_t kFence1 = 5, kFence2 = 8, kCommitWrite = 9, kFence3 = 11;

// Data images recovered from every crash state at `boundary`.
std::vector<std::vector<std::byte>> recovered_at(const Trace& trace, const HarnessConfig& config,
                                                 std::uint64_t boundary) {
  const Layout layout{config.region_size, config.max_threads, config.slot_size};
  MediaConfig m;
  m.capacity_bytes = layout.capacity();
  m.line_size = config.line_size;
  SimulatedMedia media(m);
  try {
    run_trace(media, trace, config, boundary);
  } catch (const SimulatedCrash&) {
  }
  std::vector<std::vector<std::byte>> out;
  for (const auto& s : media.enumerate_crash_states(config.enumeration_bound)) {
    out.push_back(recovered_data_image(s.durable_image, layout));
  }
  return out;
}

TEST(CrashHarness, CountsBoundaries) {
  CrashHarness h(parse_trace(kThreeStores));
  EXPECT_EQ(h.media_op_count(), 14u);
  EXPECT_EQ(h.boundary_count(), 15u);
  ASSERT_EQ(h.sync_reports().size(), 1u);
  EXPECT_EQ(h.sync_reports()[0].media_op_begin, 3u);
  EXPECT_EQ(h.sync_reports()[0].media_op_end, 14u);
  EXPECT_EQ(h.epoch_images().size(), 2u);
  EXPECT_EQ(h.final_image(), h.epoch_images()[1]);
  EXPECT_TRUE(h.reference_problems().empty());
  EXPECT_THROW(h.inject_and_check(15), RangeError);
}

TEST(CrashHarness, EpochWindows) {
  CrashHarness h(parse_trace(kThreeStores));
  auto v = h.inject_and_check(3);
  EXPECT_EQ(v.epoch, 0u);
  EXPECT_FALSE(v.in_sync);
  v = h.inject_and_check(7);
  EXPECT_EQ(v.epoch, 0u);
  EXPECT_TRUE(v.in_sync);
  v = h.inject_and_check(14);
  EXPECT_EQ(v.epoch, 1u);
  EXPECT_FALSE(v.in_sync);
  for (std::uint64_t b = 0; b < h.boundary_count(); ++b) {
    EXPECT_TRUE(h.inject_and_check(b).ok()) << "boundary " << b;
  }
}

TEST(CrashHarness, CrashBetweenFencesRecoversThePreSyncImage) {
  const auto trace = parse_trace(kThreeStores);
  CrashHarness h(trace);
  for (auto b : {kFence1 + 1, kFence2, kFence2 + 1, kCommitWrite + 1}) {
    const auto images = recovered_at(trace, {}, b);
    ASSERT_FALSE(images.empty());
    for (const auto& img : images) EXPECT_EQ(img, h.epoch_images()[0]) << "boundary " << b;
  }
  // With the commit flushed but unfenced both outcomes are reachable.
  const auto images = recovered_at(trace, {}, kFence3);
  bool saw_old = false, saw_new = false;
  for (const auto& img : images) {
    saw_old |= img == h.epoch_images()[0];
    saw_new |= img == h.epoch_images()[1];
  }
  EXPECT_TRUE(saw_old);
  EXPECT_TRUE(saw_new);
  for (const auto& img : recovered_at(trace, {}, kFence3 + 1)) EXPECT_EQ(img, h.epoch_images()[1]);
}

TEST(CrashHarness, StoreTraceSweepsClean) {
  HarnessConfig c;
  c.region_size = 4096;
  c.line_size = 64;
  const auto trace = parse_trace(R"([
    {"op": "put", "args": {"key": 1, "value": 10}}, {"op": "sync"},
    {"op": "put", "args": {"key": 2, "value": 20}}, {"op": "put", "args": {"key": 1, "value": 11}},
    {"op": "sync"}, {"op": "remove", "args": {"key": 2}}, {"op": "sync"}
  ])");
  CrashHarness h(trace, c);
  EXPECT_EQ(h.kind(), TraceKind::kv);
  const auto s = h.sweep();
  EXPECT_TRUE(s.ok()) << (s.examples.empty() ? "" : s.examples.front().second.detail);
  EXPECT_EQ(s.boundaries, h.boundary_count());
  EXPECT_EQ(s.syncs, 3u);
}

TEST(CrashHarness, HeapTraceSweepsClean) {
  HarnessConfig c;
  c.region_size = 1024;
  const auto trace = parse_trace(R"([
    {"op": "alloc", "args": {"size": 16}}, {"op": "root_set", "args": {"handle": 0}}, {"op": "sync"},
    {"op": "alloc", "args": {"size": 8}}, {"op": "free", "args": {"handle": 0}}, {"op": "sync"}
  ])");
  const auto s = CrashHarness(trace, c).sweep();
  EXPECT_TRUE(s.ok());
}

TEST(CrashHarness, CompatModeOnlyShowsTheInvalidationWindow) {
  FuzzOptions o;
  o.traces = 100;
  o.harness.fences = FenceMode::compat;
  const auto s = fuzz(o);
  EXPECT_GT(s.counterexamples, 0u);
  EXPECT_EQ(s.by_kind.size(), 1u);
  EXPECT_EQ(s.by_kind.count(ViolationKind::invalidation_window), 1u);
}

TEST(CrashHarness, StrictFuzzIsClean) {
  FuzzOptions o;
  o.traces = 100;
  const auto s = fuzz(o);
  EXPECT_EQ(s.traces, 100u);
  EXPECT_TRUE(s.ok()) << (s.examples.empty() ? "" : s.examples.front().second.detail);
}

TEST(CrashHarness, EnumerationBound) {
  HarnessConfig c;
  c.enumeration_bound = 2;
  CrashHarness h(parse_trace(kThreeStores), c);
  EXPECT_GT(h.max_pending_lines(), 2u);
  EXPECT_THROW(h.sweep(), EnumerationBoundError);
}

TEST(CrashHarness, DetectsSharedBytes) {
  EXPECT_THROW(CrashHarness(parse_trace(R"([
    {"op": "store", "args": {"offset": 0, "size": 8, "value": 1}},
    {"op": "store", "args": {"offset": 4, "size": 4, "value": 2, "thread": 1}},
    {"op": "sync"}])")),
               ContractError);
}

TEST(CrashHarness, RunTraceReportsSyncs) {
  const Layout layout{256, 2, 4096};
  MediaConfig m;
  m.capacity_bytes = layout.capacity();
  m.line_size = 8;
  SimulatedMedia media(m);
  const auto reports = run_trace(media, parse_trace(kThreeStores), {});
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].fences_issued, 3u);
  EXPECT_EQ(recovered_data_image(media.durable_snapshot(), layout)[16], std::byte{3});
}

}  // namespace
}  // namespace famsync
