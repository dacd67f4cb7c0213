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

#include "famsync/workload.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ostream>
#include <thread>

#include "famsync/crc32.hpp"
#include "famsync/error.hpp"
#include "famsync/heap.hpp"

namespace famsync {

namespace {

constexpr std::uint64_t kPreloadBatch = 256;
constexpr std::uint64_t kMinBenchRegion = std::uint64_t{64} << 20;

double zeta(std::uint64_t n, double theta) {
  double sum = 0;
  for (std::uint64_t i = 1; i <= n; ++i) {
    sum += 1.0 / std::pow(static_cast<double>(i), theta);
  }
  return sum;
}

std::vector<std::byte> value_bytes(std::uint64_t value, std::uint32_t size) {
  std::vector<std::byte> out(size);
  for (std::uint32_t i = 0; i < size; ++i) {
    out[i] = static_cast<std::byte>(value >> (8 * (i % 8)));
  }
  return out;
}

std::uint64_t first_u64(const std::vector<std::byte>& bytes) {
  std::uint64_t v = 0;
  std::memcpy(&v, bytes.data(), std::min<std::size_t>(8, bytes.size()));
  return v;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(Mix mix) noexcept {
  static constexpr std::string_view names[] = {"A", "B", "C", "D", "E", "F", "G"};
  return names[static_cast<int>(mix)];
}

std::string_view to_string(SyncScheme scheme) noexcept {
  switch (scheme) {
    case SyncScheme::famsync: return "famsync";
    case SyncScheme::page4k: return "page4k";
    case SyncScheme::wal: return "wal";
  }
  return "?";
}

std::string_view to_string(KeyDistribution dist) noexcept {
  return dist == KeyDistribution::uniform ? "uniform" : "zipfian";
}

Mix parse_mix(std::string_view name) {
  if (name.size() == 1) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    if (c >= 'A' && c <= 'G') {
      return static_cast<Mix>(c - 'A');
    }
  }
  throw ConfigError("unknown mix '" + std::string(name) + "', expected A..G");
}

SyncScheme parse_scheme(std::string_view name) {
  if (name == "famsync") return SyncScheme::famsync;
  if (name == "page4k") return SyncScheme::page4k;
  if (name == "wal") return SyncScheme::wal;
  throw ConfigError("unknown mode '" + std::string(name) + "', expected famsync, page4k or wal");
}

KeyDistribution parse_distribution(std::string_view name) {
  if (name == "uniform") return KeyDistribution::uniform;
  if (name == "zipfian") return KeyDistribution::zipfian;
  throw ConfigError("unknown key distribution '" + std::string(name) + "'");
}

double unit_double(std::mt19937_64& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

ZipfianGenerator::ZipfianGenerator(std::uint64_t n, double theta) : n_(n), theta_(theta) {
  if (n == 0 || theta <= 0 || theta >= 1) {
    throw ConfigError("zipfian needs n > 0 and theta in (0, 1)");
  }
  alpha_ = 1.0 / (1.0 - theta);
  zetan_ = zeta(n, theta);
  const double zeta2 = zeta(std::min<std::uint64_t>(n, 2), theta);
  eta_ = n < 2 ? 0.0
               : (1.0 - std::pow(2.0 / static_cast<double>(n), 1.0 - theta)) / (1.0 - zeta2 / zetan_);
  half_pow_theta_ = std::pow(0.5, theta);
}

std::uint64_t ZipfianGenerator::next(std::mt19937_64& rng) const {
  const double u = unit_double(rng);
  const double uz = u * zetan_;
  if (uz < 1.0 || n_ == 1) return 0;
  if (uz < 1.0 + half_pow_theta_) return 1;
  const auto rank = static_cast<std::uint64_t>(static_cast<double>(n_) *
                                               std::pow(eta_ * u - eta_ + 1.0, alpha_));
  return std::min(rank, n_ - 1);
}

bool is_update(OpKind kind) noexcept {
  return kind == OpKind::update || kind == OpKind::insert || kind == OpKind::remove ||
         kind == OpKind::read_modify_write;
}

OperationGenerator::OperationGenerator(const WorkloadSpec& spec, std::uint32_t thread_index,
                                       std::vector<std::uint64_t> keys,
                                       std::function<bool(std::uint64_t)> owns)
    : spec_(spec),
      rng_(mix_seed(spec.seed, thread_index)),
      live_(keys.begin(), keys.end()),
      owns_(std::move(owns)),
      next_fresh_(spec.record_count),
      zipf_(std::max<std::size_t>(keys.size(), 1)),
      latest_zipf_(kLatestWindow) {
  if (keys.empty() && spec.mix != Mix::D) {
    throw ConfigError("a driver thread owns no keys; use fewer threads or more records");
  }
}

std::uint64_t OperationGenerator::pick_index(std::uint64_t n) {
  if (spec_.key_dist == KeyDistribution::uniform) {
    return rng_() % n;
  }
  return (n == zipf_.size() ? zipf_.next(rng_) : ZipfianGenerator(n).next(rng_));
}

std::uint64_t OperationGenerator::fresh_key() {
  while (!owns_(next_fresh_)) {
    ++next_fresh_;
  }
  return next_fresh_++;
}

WorkloadOp OperationGenerator::next() {
  WorkloadOp op{OpKind::read, 0, 0, 0};
  auto existing = [&] { return live_[pick_index(live_.size())]; };
  switch (spec_.mix) {
    case Mix::A:
    case Mix::B: {
      const double read_share = spec_.mix == Mix::A ? 0.5 : 0.95;
      op.kind = unit_double(rng_) < read_share ? OpKind::read : OpKind::update;
      op.key = existing();
      break;
    }
    case Mix::C:
      op.key = existing();
      break;
    case Mix::D: {
      const double r = unit_double(rng_);
      if (r < 0.90 && !live_.empty()) {
        const auto window = std::min<std::uint64_t>(kLatestWindow, live_.size());
        const auto rank = spec_.key_dist == KeyDistribution::uniform
                              ? rng_() % window
                              : latest_zipf_.next(rng_) % window;
        op.key = live_[live_.size() - 1 - rank];
      } else if (r < 0.95 || live_.size() <= 1) {
        op.kind = OpKind::insert;
        op.key = fresh_key();
        live_.push_back(op.key);
      } else {
        op.kind = OpKind::remove;
        op.key = live_.front();
        live_.pop_front();
      }
      break;
    }
    case Mix::E:
      op.kind = OpKind::read_modify_write;
      op.key = existing();
      break;
    case Mix::F:
      op.kind = OpKind::scan;
      op.key = existing();
      op.scan_length = static_cast<std::uint32_t>(1 + rng_() % 10);
      break;
    case Mix::G:
      op.kind = OpKind::update;
      op.key = existing();
      break;
  }
  if (op.kind == OpKind::update || op.kind == OpKind::insert) {
    op.value = rng_();
  }
  return op;
}

std::uint64_t bench_bucket_count(std::uint64_t record_count) noexcept {
  return std::max<std::uint64_t>(1, record_count / 2);
}

std::uint64_t bench_region_size(const WorkloadSpec& spec) noexcept {
  const auto stride = 8 + align_up(spec.value_size, 8);
  // Bucket arrays double, and a grown array's old block is only reused by
  // smaller requests, so budget four times the live record bytes.
  const auto records = spec.record_count + (spec.mix == Mix::D ? spec.op_count : 0);
  const auto estimate = records * stride * 4 + bench_bucket_count(spec.record_count) * 24 +
                        (std::uint64_t{1} << 20);
  return std::max(kMinBenchRegion, align_up(estimate, std::uint64_t{1} << 20));
}

BenchReport run_workload(const WorkloadSpec& spec, SyncScheme mode, const BenchOptions& options) {
  if (spec.threads == 0 || spec.value_size == 0) {
    throw ConfigError("threads and value_size must be non-zero");
  }
  RegionConfig config;
  config.region_size = options.region_size != 0 ? options.region_size : bench_region_size(spec);
  config.max_threads = spec.threads;
  config.slot_size = options.slot_size;
  config.policy = SyncPolicy{mode, options.fences, options.source, false};
  const Layout layout{config.region_size, config.max_threads, config.slot_size};
  layout.validate();

  MediaConfig media_config;
  media_config.capacity_bytes = layout.capacity();
  media_config.line_size = options.line_size;
  media_config.latency_ns_per_flush = options.latency_ns_per_flush;
  if (options.file.empty()) {
    media_config.mode = options.latency_ns_per_flush != 0 ? MediaMode::simulated_with_latency
                                                          : MediaMode::simulated;
  } else {
    media_config.mode = MediaMode::real_file;
    media_config.path = options.file;
  }
  auto media = make_media(media_config);
  auto region = Region::open(*media, config);
  Heap heap(*region);
  KvOptions kv_options;
  kv_options.bucket_count = bench_bucket_count(spec.record_count);
  kv_options.value_size = spec.value_size;
  kv_options.sync_each_op = false;
  KvStore kv(heap, kv_options);

  for (std::uint64_t key = 0; key < spec.record_count; ++key) {
    kv.put(key, value_bytes(mix_seed(spec.seed, key), spec.value_size));
    if ((key + 1) % kPreloadBatch == 0) {
      region->fa_msync();
    }
  }
  region->fa_msync();
  kv.set_sync_each_op(true);

  std::vector<std::vector<std::uint64_t>> owned(spec.threads);
  for (std::uint64_t key = 0; key < spec.record_count; ++key) {
    owned[kv.owner_of(key, spec.threads)].push_back(key);
  }
  std::vector<OperationGenerator> generators;
  for (std::uint32_t t = 0; t < spec.threads; ++t) {
    generators.emplace_back(spec, t, std::move(owned[t]), [&kv, t, n = spec.threads](std::uint64_t key) {
      return kv.owner_of(key, n) == t;
    });
  }

  const auto history_start = region->sync_history().size();
  const auto stats_before = media->stats();
  std::vector<std::uint64_t> updates(spec.threads, 0);
  auto drive = [&](std::uint32_t t, std::uint64_t ops) {
    region->bind_thread_slot(t);
    auto& gen = generators[t];
    for (std::uint64_t i = 0; i < ops; ++i) {
      const auto op = gen.next();
      switch (op.kind) {
        case OpKind::read:
          (void)kv.get(op.key);
          break;
        case OpKind::update:
        case OpKind::insert:
          kv.put(op.key, value_bytes(op.value, spec.value_size));
          break;
        case OpKind::remove:
          kv.remove(op.key);
          break;
        case OpKind::read_modify_write: {
          const auto current = kv.get(op.key);
          const auto base = current ? first_u64(*current) : 0;
          kv.put(op.key, value_bytes(base + 1, spec.value_size));
          break;
        }
        case OpKind::scan:
          (void)kv.scan(op.key, op.scan_length);
          break;
      }
      if (is_update(op.kind)) {
        ++updates[t];
      }
    }
  };

  const auto start = std::chrono::steady_clock::now();
  if (spec.threads == 1) {
    drive(0, spec.op_count);
  } else {
    std::vector<std::thread> workers;
    for (std::uint32_t t = 0; t < spec.threads; ++t) {
      const auto share = spec.op_count / spec.threads + (t < spec.op_count % spec.threads ? 1 : 0);
      workers.emplace_back(drive, t, share);
    }
    for (auto& w : workers) {
      w.join();
    }
  }
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);

  BenchReport report;
  report.mode = mode;
  report.mix = spec.mix;
  report.ops = spec.op_count;
  for (auto u : updates) {
    report.update_ops += u;
  }
  report.seconds = elapsed.count();
  report.ops_per_sec = report.seconds > 0 ? static_cast<double>(spec.op_count) / report.seconds : 0;
  const auto& history = region->sync_history();
  for (auto i = history_start; i < history.size(); ++i) {
    const auto& s = history[i];
    ++report.syncs;
    report.durability_points += s.durability_points;
    report.logged_bytes += s.logged_bytes;
    report.copied_bytes += s.bytes_copied;
    report.wal_bytes += s.wal_bytes;
    report.media_reads += s.media_reads;
  }
  report.fences = media->stats().fences - stats_before.fences;
  report.region_size = config.region_size;
  report.final_contents = kv.contents();
  region->close();
  const auto durable = media->durable_snapshot();
  report.image_crc = crc32(std::span(durable).subspan(layout.data_offset(), layout.region_size));
  return report;
}

void write_csv_header(std::ostream& out) {
  out << "mode,mix,ops_per_sec,syncs,fences,logged_bytes,copied_bytes,wal_bytes\n";
}

void write_csv_row(std::ostream& out, const BenchReport& r) {
  out << to_string(r.mode) << ',' << to_string(r.mix) << ',' << static_cast<std::uint64_t>(r.ops_per_sec)
      << ',' << r.syncs << ',' << r.fences << ',' << r.logged_bytes << ',' << r.copied_bytes << ','
      << r.wal_bytes << '\n';
}

}  // namespace famsync
