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

#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "famsync/kv_store.hpp"
#include "famsync/region.hpp"

namespace famsync {

/// A..C and G are the usual read/update blends. D inserts new keys, reads
/// among the latest ones and deletes the oldest. E is read-modify-write and
/// F runs short range scans.
enum class Mix { A, B, C, D, E, F, G };
enum class KeyDistribution { uniform, zipfian };

std::string_view to_string(Mix mix) noexcept;
std::string_view to_string(SyncScheme scheme) noexcept;
std::string_view to_string(KeyDistribution dist) noexcept;
/// Throws ConfigError on unknown names.
Mix parse_mix(std::string_view name);
SyncScheme parse_scheme(std::string_view name);
KeyDistribution parse_distribution(std::string_view name);

struct WorkloadSpec {
  Mix mix = Mix::A;
  std::uint64_t record_count = 100000;
  std::uint64_t op_count = 100000;
  KeyDistribution key_dist = KeyDistribution::zipfian;
  std::uint32_t value_size = 8;
  std::uint64_t seed = 1;
  std::uint32_t threads = 1;
};

/// Zipfian ranks in [0, n) with rank 0 the most popular.
class ZipfianGenerator {
 public:
  static constexpr double kDefaultTheta = 0.99;
  explicit ZipfianGenerator(std::uint64_t n, double theta = kDefaultTheta);
  std::uint64_t next(std::mt19937_64& rng) const;
  std::uint64_t size() const noexcept { return n_; }

 private:
  std::uint64_t n_;
  double theta_, alpha_, zetan_, eta_, half_pow_theta_;
};

/// Uniform double in [0, 1) from 53 random bits.
double unit_double(std::mt19937_64& rng) noexcept;

enum class OpKind { read, update, insert, remove, read_modify_write, scan };

struct WorkloadOp {
  OpKind kind;
  std::uint64_t key;
  std::uint64_t value;      // new value for update and insert
  std::uint32_t scan_length;  // scans only
};

bool is_update(OpKind kind) noexcept;

/// Deterministic operation stream for one driver thread. `keys` are the
/// preloaded keys this thread owns, in insertion order; `owns` decides which
/// fresh keys an inserting thread may claim.
class OperationGenerator {
 public:
  OperationGenerator(const WorkloadSpec& spec, std::uint32_t thread_index,
                     std::vector<std::uint64_t> keys,
                     std::function<bool(std::uint64_t)> owns);

  WorkloadOp next();
  /// Live keys in insertion order (mix D changes them).
  const std::deque<std::uint64_t>& live_keys() const noexcept { return live_; }

 private:
  std::uint64_t pick_index(std::uint64_t n);
  std::uint64_t fresh_key();

  WorkloadSpec spec_;
  std::mt19937_64 rng_;
  std::deque<std::uint64_t> live_;
  std::function<bool(std::uint64_t)> owns_;
  std::uint64_t next_fresh_;
  ZipfianGenerator zipf_;
  ZipfianGenerator latest_zipf_;
};

inline constexpr std::uint64_t kLatestWindow = 100;

struct BenchOptions {
  /// Empty runs on simulated media.
  std::filesystem::path file;
  std::uint32_t line_size = 64;
  std::uint64_t latency_ns_per_flush = 0;
  /// 0 sizes the region from the workload (at least 64 MiB).
  std::uint64_t region_size = 0;
  std::uint64_t slot_size = std::uint64_t{1} << 20;
  CopySource source = CopySource::dirty_list;
  FenceMode fences = FenceMode::strict;
};

struct BenchReport {
  SyncScheme mode = SyncScheme::famsync;
  Mix mix = Mix::A;
  std::uint64_t ops = 0;
  std::uint64_t update_ops = 0;
  double seconds = 0;
  double ops_per_sec = 0;
  std::uint64_t syncs = 0;
  std::uint64_t fences = 0;
  std::uint64_t durability_points = 0;
  std::uint64_t logged_bytes = 0;
  std::uint64_t copied_bytes = 0;
  std::uint64_t wal_bytes = 0;
  std::uint64_t media_reads = 0;
  std::uint64_t region_size = 0;
  /// CRC-32 of the durable data area after the run.
  std::uint32_t image_crc = 0;
  /// Final store contents (single-threaded runs).
  KvContents final_contents;
};

/// Bucket count used for `record_count` preloaded records.
std::uint64_t bench_bucket_count(std::uint64_t record_count) noexcept;
std::uint64_t bench_region_size(const WorkloadSpec& spec) noexcept;

/// Preloads keys 0..record_count-1, then runs the mix with one fa_msync per
/// update. Counters cover the measured phase only.
BenchReport run_workload(const WorkloadSpec& spec, SyncScheme mode, const BenchOptions& options = {});

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const BenchReport& report);

}  // namespace famsync
