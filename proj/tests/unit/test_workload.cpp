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

#include <map>
#include <set>
#include <sstream>

#include "famsync/error.hpp"
#include "famsync/workload.hpp"

namespace famsync {
namespace {

TEST(Names, ParseAndPrint) {
  for (auto m : {Mix::A, Mix::B, Mix::C, Mix::D, Mix::E, Mix::F, Mix::G}) {
    EXPECT_EQ(parse_mix(to_string(m)), m);
  }
  for (auto s : {SyncScheme::famsync, SyncScheme::page4k, SyncScheme::wal}) {
    EXPECT_EQ(parse_scheme(to_string(s)), s);
  }
  EXPECT_EQ(parse_distribution("uniform"), KeyDistribution::uniform);
  EXPECT_THROW(parse_mix("H"), ConfigError);
  EXPECT_THROW(parse_scheme("fast"), ConfigError);
}

TEST(Zipfian, SkewedAndInRange) {
  ZipfianGenerator z(1000);
  std::mt19937_64 rng(3);
  std::vector<int> hist(1000);
  for (int i = 0; i < 100000; ++i) {
    const auto r = z.next(rng);
    ASSERT_LT(r, 1000u);
    ++hist[r];
  }
  EXPECT_GT(hist[0], hist[1]);
  EXPECT_GT(hist[1], hist[10]);
  EXPECT_GT(hist[0], 100000 / 20);  // rank 0 dominates at theta 0.99
  EXPECT_LT(hist[999], hist[0] / 50);
  ZipfianGenerator one(1);
  EXPECT_EQ(one.next(rng), 0u);
}

TEST(UnitDouble, Range) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const auto d = unit_double(rng);
    ASSERT_GE(d, 0.0);
    ASSERT_LT(d, 1.0);
  }
}

std::map<OpKind, int> histogram(Mix mix, int n = 20000) {
  WorkloadSpec spec;
  spec.mix = mix;
  spec.record_count = 1000;
  std::vector<std::uint64_t> keys(1000);
  for (std::uint64_t i = 0; i < keys.size(); ++i) keys[i] = i;
  OperationGenerator gen(spec, 0, keys, [](std::uint64_t) { return true; });
  std::map<OpKind, int> h;
  for (int i = 0; i < n; ++i) ++h[gen.next().kind];
  return h;
}

TEST(Generator, MixProportions) {
  auto a = histogram(Mix::A);
  EXPECT_NEAR(a[OpKind::read] / 20000.0, 0.5, 0.02);
  auto b = histogram(Mix::B);
  EXPECT_NEAR(b[OpKind::update] / 20000.0, 0.05, 0.01);
  EXPECT_EQ(histogram(Mix::C)[OpKind::read], 20000);
  auto d = histogram(Mix::D);
  EXPECT_NEAR(d[OpKind::read] / 20000.0, 0.90, 0.02);
  EXPECT_NEAR(d[OpKind::insert] / 20000.0, 0.05, 0.01);
  EXPECT_NEAR(d[OpKind::remove] / 20000.0, 0.05, 0.01);
  EXPECT_EQ(histogram(Mix::E)[OpKind::read_modify_write], 20000);
  EXPECT_EQ(histogram(Mix::F)[OpKind::scan], 20000);
  EXPECT_EQ(histogram(Mix::G)[OpKind::update], 20000);
  EXPECT_TRUE(is_update(OpKind::update));
  EXPECT_FALSE(is_update(OpKind::read));
}

TEST(Generator, MixDInsertsFreshOwnedKeys) {
  WorkloadSpec spec;
  spec.mix = Mix::D;
  spec.record_count = 100;
  std::vector<std::uint64_t> keys;
  for (std::uint64_t i = 0; i < 100; i += 2) keys.push_back(i);
  OperationGenerator gen(spec, 0, keys, [](std::uint64_t k) { return k % 2 == 0; });
  std::set<std::uint64_t> live(keys.begin(), keys.end());
  for (int i = 0; i < 5000; ++i) {
    const auto op = gen.next();
    if (op.kind == OpKind::insert) {
      EXPECT_EQ(op.key % 2, 0u);
      EXPECT_GE(op.key, 100u);
      EXPECT_TRUE(live.insert(op.key).second);
    } else if (op.kind == OpKind::remove) {
      EXPECT_EQ(live.erase(op.key), 1u);
    } else {
      EXPECT_TRUE(live.contains(op.key));
    }
  }
  EXPECT_EQ(live.size(), gen.live_keys().size());
}

TEST(Generator, Deterministic) {
  WorkloadSpec spec;
  spec.mix = Mix::F;
  std::vector<std::uint64_t> keys{1, 2, 3, 4};
  OperationGenerator a(spec, 0, keys, {}), b(spec, 0, keys, {});
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next(), y = b.next();
    ASSERT_EQ(x.key, y.key);
    ASSERT_EQ(x.scan_length, y.scan_length);
    ASSERT_GE(x.scan_length, 1u);
    ASSERT_LE(x.scan_length, 10u);
  }
}

WorkloadSpec small(Mix mix) {
  WorkloadSpec s;
  s.mix = mix;
  s.record_count = 500;
  s.op_count = 400;
  s.seed = 9;
  return s;
}

BenchOptions small_options() {
  BenchOptions o;
  o.region_size = 4 << 20;
  return o;
}

TEST(RunWorkload, ReadOnlyMixCopiesNothing) {
  const auto r = run_workload(small(Mix::C), SyncScheme::famsync, small_options());
  EXPECT_EQ(r.ops, 400u);
  EXPECT_EQ(r.update_ops, 0u);
  EXPECT_EQ(r.copied_bytes, 0u);
  EXPECT_EQ(r.final_contents.size(), 500u);
}

TEST(RunWorkload, SchemesAgreeOnContents) {
  const auto f = run_workload(small(Mix::A), SyncScheme::famsync, small_options());
  const auto p = run_workload(small(Mix::A), SyncScheme::page4k, small_options());
  const auto w = run_workload(small(Mix::A), SyncScheme::wal, small_options());
  EXPECT_EQ(f.final_contents, p.final_contents);
  EXPECT_EQ(f.final_contents, w.final_contents);
  EXPECT_EQ(f.image_crc, p.image_crc);
  EXPECT_EQ(f.syncs, f.update_ops);
  EXPECT_EQ(f.fences, 3 * f.syncs);
  EXPECT_EQ(w.fences, 2 * w.syncs);
  EXPECT_EQ(f.durability_points, f.syncs);
  EXPECT_EQ(w.durability_points, 2 * w.syncs);
  EXPECT_GT(w.wal_bytes, 0u);
  EXPECT_EQ(f.wal_bytes, 0u);
  EXPECT_GT(p.copied_bytes, 10 * f.copied_bytes);
}

TEST(RunWorkload, SyncFromLogGivesSameImage) {
  auto o = small_options();
  const auto a = run_workload(small(Mix::G), SyncScheme::famsync, o);
  o.source = CopySource::undo_log;
  const auto b = run_workload(small(Mix::G), SyncScheme::famsync, o);
  EXPECT_EQ(a.image_crc, b.image_crc);
  EXPECT_EQ(a.media_reads, 0u);
  EXPECT_GT(b.media_reads, 0u);
}

TEST(RunWorkload, EveryMixRunsMultithreaded) {
  for (auto m : {Mix::A, Mix::B, Mix::C, Mix::D, Mix::E, Mix::F, Mix::G}) {
    auto spec = small(m);
    spec.threads = 3;
    const auto r = run_workload(spec, SyncScheme::famsync, small_options());
    EXPECT_EQ(r.ops, spec.op_count) << to_string(m);
  }
}

TEST(RunWorkload, CsvRow) {
  std::ostringstream out;
  write_csv_header(out);
  write_csv_row(out, run_workload(small(Mix::G), SyncScheme::wal, small_options()));
  const auto text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "mode,mix,ops_per_sec,syncs,fences,logged_bytes,copied_bytes,wal_bytes");
  EXPECT_NE(text.find("\nwal,G,"), std::string::npos);
}

}  // namespace
}  // namespace famsync
