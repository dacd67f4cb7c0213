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

#include "famsync/crash_harness.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "famsync/error.hpp"
#include "famsync/heap.hpp"

namespace famsync {

namespace {

constexpr std::uint64_t kHarnessReserve = std::uint64_t{1} << 26;

std::uint64_t expected_fences(const HarnessConfig& config) {
  if (config.scheme == SyncScheme::wal) return 2;
  return config.fences == FenceMode::strict ? 3 : 2;
}

std::string describe_diff(std::span<const std::byte> got, std::span<const std::byte> want) {
  std::ostringstream out;
  int shown = 0;
  for (std::size_t i = 0; i < std::min(got.size(), want.size()) && shown < 4; ++i) {
    if (got[i] != want[i]) {
      out << (shown++ ? ", " : "") << "@" << i << ": got 0x" << std::hex
          << std::to_integer<unsigned>(got[i]) << " want 0x" << std::to_integer<unsigned>(want[i])
          << std::dec;
    }
  }
  return out.str();
}

std::uint64_t fuzz_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt) {
  std::uint64_t x = seed ^ (index * 0x9E3779B97F4A7C15ull) ^ (attempt * 0xD1B54A32D192ED03ull);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(ViolationKind kind) noexcept {
  switch (kind) {
    case ViolationKind::atomicity: return "atomicity";
    case ViolationKind::durability: return "durability";
    case ViolationKind::invalidation_window: return "invalidation-window";
    case ViolationKind::heap: return "heap";
    case ViolationKind::kv: return "kv";
    case ViolationKind::model: return "model";
    case ViolationKind::continuation: return "continuation";
    case ViolationKind::fence_count: return "fence-count";
    case ViolationKind::recovery_error: return "recovery-error";
  }
  return "?";
}

void SweepSummary::add(std::uint64_t trace_index, const Verdict& verdict) {
  ++boundaries;
  images += verdict.images;
  for (const auto& c : verdict.counterexamples) {
    ++counterexamples;
    ++by_kind[c.kind];
    if (examples.size() < kMaxExamples) {
      examples.emplace_back(trace_index, c);
    }
  }
}

void SweepSummary::merge(const SweepSummary& other) {
  traces += other.traces;
  boundaries += other.boundaries;
  images += other.images;
  syncs += other.syncs;
  counterexamples += other.counterexamples;
  for (const auto& [kind, n] : other.by_kind) {
    by_kind[kind] += n;
  }
  for (const auto& e : other.examples) {
    if (examples.size() < kMaxExamples) {
      examples.push_back(e);
    }
  }
}

std::vector<std::byte> recovered_data_image(std::span<const std::byte> media_image, const Layout& layout) {
  if (media_image.size() < layout.capacity()) {
    throw RangeError("media image is smaller than the region layout");
  }
  if (FileHeader::check_magic(media_image) != MagicState::valid) {
    throw CorruptionError("media image has no valid header");
  }
  const auto generation = load_u64(media_image, layout::kGenerationAt);
  const auto plan = plan_recovery(media_image.first(layout.data_offset()), layout, generation);
  const auto data = media_image.subspan(layout.data_offset(), layout.region_size);
  std::vector<std::byte> out(data.begin(), data.end());
  apply_plan(plan, out);
  return out;
}

// Independent expectations for one sync epoch.
struct CrashHarness::EpochOracle {
  std::vector<std::byte> model;  // raw traces
  std::map<std::uint64_t, std::uint64_t> kv;
  std::vector<std::uint64_t> live_handles;
  std::optional<std::uint64_t> root_handle;
};

namespace detail {

struct TraceSession {
  std::unique_ptr<SimulatedMedia> media;
  std::unique_ptr<Region> region;
  std::unique_ptr<Heap> heap;
  std::unique_ptr<KvStore> kv;
  std::vector<std::uint64_t> handles;

  void apply(const TraceOp& op) {
    auto& r = *region;
    r.bind_thread_slot(op.thread);
    auto at = [&](std::uint64_t offset, std::uint64_t size) {
      if (offset > r.size() || size > r.size() - offset) {
        throw RangeError("trace range [" + std::to_string(offset) + ", +" + std::to_string(size) +
                         ") leaves the region");
      }
      return r.from_offset(offset);
    };
    auto handle = [&](std::uint64_t h) {
      if (h >= handles.size()) {
        throw ConfigError("handle " + std::to_string(h) + " was never allocated");
      }
      return handles[h];
    };
    switch (op.kind) {
      case TraceOpKind::write:
        r.tracked_write(at(op.offset, op.data.size()), op.data);
        break;
      case TraceOpKind::store: {
        auto* p = at(op.offset, op.size);
        auto section = r.store_section();
        r.on_store(p, op.size);
        std::memcpy(p, &op.value, op.size);
        break;
      }
      case TraceOpKind::memset:
        r.tracked_memset(at(op.offset, op.size), static_cast<std::byte>(op.value), op.size);
        break;
      case TraceOpKind::memcpy:
        r.tracked_memcpy(at(op.offset, op.size), at(op.src, op.size), op.size);
        break;
      case TraceOpKind::memmove:
        r.tracked_memmove(at(op.offset, op.size), at(op.src, op.size), op.size);
        break;
      case TraceOpKind::sync:
        r.fa_msync();
        break;
      case TraceOpKind::alloc:
        handles.push_back(heap->alloc(op.size));
        break;
      case TraceOpKind::free:
        heap->free(handle(*op.handle));
        break;
      case TraceOpKind::root_set:
        heap->set_root(op.handle ? handle(*op.handle) : 0);
        break;
      case TraceOpKind::put:
        kv->put_u64(op.key, op.value);
        break;
      case TraceOpKind::remove:
        kv->remove(op.key);
        break;
    }
  }
};

}  // namespace detail

using detail::TraceSession;

std::vector<SyncReport> run_trace(Media& media, const Trace& trace, const HarnessConfig& config,
                                  std::optional<std::uint64_t> crash_boundary) {
  const auto kind = classify(trace);
  RegionConfig region_config;
  region_config.region_size = config.region_size;
  region_config.max_threads = config.max_threads;
  region_config.slot_size = config.slot_size;
  region_config.reserve_size = kHarnessReserve;
  region_config.policy = SyncPolicy{config.scheme, config.fences, config.source, true};
  TraceSession session;
  session.region = Region::open(media, region_config);
  if (kind != TraceKind::raw) {
    session.heap = std::make_unique<Heap>(*session.region);
    if (kind == TraceKind::kv) {
      if (session.heap->root() == 0) {
        KvOptions options;
        options.bucket_count = config.kv_buckets;
        options.sync_each_op = false;
        session.kv = std::make_unique<KvStore>(*session.heap, options);
      } else {
        session.kv = std::make_unique<KvStore>(*session.heap);
      }
      session.kv->set_sync_each_op(false);
    }
  }
  const auto first = session.region->sync_history().size();
  if (crash_boundary) {
    media.set_crash_point(media.op_count() + *crash_boundary);
  }
  for (const auto& op : trace) {
    session.apply(op);
  }
  const auto& history = session.region->sync_history();
  return {history.begin() + static_cast<std::ptrdiff_t>(first), history.end()};
}

CrashHarness::CrashHarness(Trace trace, const HarnessConfig& config)
    : trace_(std::move(trace)),
      config_(config),
      kind_(classify(trace_)),
      layout_{config.region_size, config.max_threads, config.slot_size} {
  layout_.validate();
  MediaConfig media_config;
  media_config.capacity_bytes = layout_.capacity();
  media_config.line_size = config.line_size;
  SimulatedMedia media(media_config);
  {
    RegionConfig region_config;
    region_config.region_size = config.region_size;
    region_config.max_threads = config.max_threads;
    region_config.slot_size = config.slot_size;
    region_config.reserve_size = kHarnessReserve;
    auto region = Region::open(media, region_config);
    if (kind_ != TraceKind::raw) {
      Heap heap(*region);
      if (kind_ == TraceKind::kv) {
        KvOptions options;
        options.bucket_count = config.kv_buckets;
        options.sync_each_op = false;
        KvStore kv(heap, options);
      }
    }
    region->close();
  }
  base_image_ = media.durable_snapshot();
  run_reference();
}

CrashHarness::~CrashHarness() = default;

std::unique_ptr<TraceSession> CrashHarness::open_session(std::span<const std::byte> image) const {
  auto s = std::make_unique<TraceSession>();
  s->media = std::make_unique<SimulatedMedia>(image, config_.line_size);
  RegionConfig region_config;
  region_config.reserve_size = kHarnessReserve;
  region_config.policy = SyncPolicy{config_.scheme, config_.fences, config_.source, true};
  s->region = Region::open(*s->media, region_config);
  if (kind_ != TraceKind::raw) {
    s->heap = std::make_unique<Heap>(*s->region);
    if (kind_ == TraceKind::kv) {
      s->kv = std::make_unique<KvStore>(*s->heap);
      s->kv->set_sync_each_op(false);
    }
  }
  return s;
}

void CrashHarness::run_reference() {
  auto session = open_session(base_image_);
  auto& media = *session->media;
  const auto start = media.op_count();
  media.set_observer([&](const MediaEvent&) {
    max_pending_ = std::max(max_pending_, media.pending_line_count());
  });

  EpochOracle oracle;
  oracle.model.assign(base_image_.begin() + static_cast<std::ptrdiff_t>(layout_.data_offset()),
                      base_image_.begin() + static_cast<std::ptrdiff_t>(layout_.data_offset() + layout_.region_size));
  std::vector<bool> live;
  auto snapshot = [&] {
    epochs_.emplace_back(session->region->working_image().begin(), session->region->working_image().end());
    handles_at_.push_back(session->handles);
    EpochOracle copy = oracle;
    for (std::uint64_t h = 0; h < live.size(); ++h) {
      if (live[h]) copy.live_handles.push_back(h);
    }
    oracles_.push_back(std::make_unique<EpochOracle>(std::move(copy)));
  };
  snapshot();

  for (std::size_t i = 0; i < trace_.size(); ++i) {
    const auto& op = trace_[i];
    session->apply(op);
    auto& m = oracle.model;
    switch (op.kind) {
      case TraceOpKind::write:
        std::copy(op.data.begin(), op.data.end(), m.begin() + static_cast<std::ptrdiff_t>(op.offset));
        break;
      case TraceOpKind::store:
        for (std::uint64_t b = 0; b < op.size; ++b) {
          m[op.offset + b] = static_cast<std::byte>(op.value >> (8 * b));
        }
        break;
      case TraceOpKind::memset:
        std::fill_n(m.begin() + static_cast<std::ptrdiff_t>(op.offset), op.size, static_cast<std::byte>(op.value));
        break;
      case TraceOpKind::memcpy:
      case TraceOpKind::memmove:
        std::memmove(m.data() + op.offset, m.data() + op.src, op.size);
        break;
      case TraceOpKind::alloc:
        live.push_back(true);
        break;
      case TraceOpKind::free:
        live.at(*op.handle) = false;
        break;
      case TraceOpKind::root_set:
        oracle.root_handle = op.handle;
        break;
      case TraceOpKind::put:
        oracle.kv[op.key] = op.value;
        break;
      case TraceOpKind::remove:
        oracle.kv.erase(op.key);
        break;
      case TraceOpKind::sync: {
        auto report = session->region->sync_history().back();
        report.media_op_begin -= start;
        report.media_op_end -= start;
        syncs_.push_back(report);
        sync_op_index_.push_back(i);
        snapshot();
        break;
      }
    }
  }
  media_ops_ = media.op_count() - start;
  final_image_.assign(session->region->working_image().begin(), session->region->working_image().end());
  media.set_observer(nullptr);

  for (std::size_t k = 0; k < syncs_.size(); ++k) {
    if (syncs_[k].fences_issued != expected_fences(config_)) {
      reference_problems_.push_back({syncs_[k].media_op_end, ViolationKind::fence_count, k + 1, k + 1,
                                     "sync issued " + std::to_string(syncs_[k].fences_issued) +
                                         " fences, expected " + std::to_string(expected_fences(config_))});
    }
  }
  for (std::size_t k = 0; k < epochs_.size(); ++k) {
    check_epoch_semantics(k, reference_problems_, k == 0 ? 0 : syncs_[k - 1].media_op_end);
  }
}

void CrashHarness::check_epoch_semantics(std::size_t epoch, std::vector<Counterexample>& out,
                                         std::uint64_t boundary) {
  const auto& image = epochs_[epoch];
  const auto& oracle = *oracles_[epoch];
  auto report = [&](ViolationKind kind, std::string detail) {
    out.push_back({boundary, kind, epoch, epoch, std::move(detail)});
  };
  switch (kind_) {
    case TraceKind::raw:
      if (image != oracle.model) {
        report(ViolationKind::model, describe_diff(image, oracle.model));
      }
      break;
    case TraceKind::heap: {
      const auto walk = walk_heap(image);
      if (!walk.ok()) {
        report(ViolationKind::heap, walk.problems.front());
        break;
      }
      std::vector<std::uint64_t> expected;
      for (auto h : oracle.live_handles) {
        expected.push_back(handles_at_[epoch].at(h));
      }
      std::sort(expected.begin(), expected.end());
      auto live = walk.live_payloads();
      std::sort(live.begin(), live.end());
      if (live != expected) {
        report(ViolationKind::heap, "allocated blocks " + std::to_string(live.size()) +
                                        " differ from the " + std::to_string(expected.size()) +
                                        " live handles");
      }
      const auto root = oracle.root_handle ? handles_at_[epoch].at(*oracle.root_handle) : 0;
      if (walk.root != root) {
        report(ViolationKind::heap, "root is " + std::to_string(walk.root) + ", expected " + std::to_string(root));
      }
      break;
    }
    case TraceKind::kv: {
      if (const auto walk = walk_heap(image); !walk.ok()) {
        report(ViolationKind::heap, walk.problems.front());
      }
      try {
        const auto contents = KvStore::decode_image(image);
        std::map<std::uint64_t, std::uint64_t> got;
        for (const auto& [key, value] : contents) {
          std::uint64_t v = 0;
          std::memcpy(&v, value.data(), std::min<std::size_t>(8, value.size()));
          got[key] = v;
        }
        if (got != oracle.kv) {
          report(ViolationKind::kv, "store holds " + std::to_string(got.size()) + " keys, oracle " +
                                        std::to_string(oracle.kv.size()));
        }
      } catch (const Error& e) {
        report(ViolationKind::kv, e.what());
      }
      break;
    }
  }
}

Verdict CrashHarness::inject_and_check(std::uint64_t boundary) {
  if (boundary > media_ops_) {
    throw RangeError("boundary " + std::to_string(boundary) + " is past the last of " +
                     std::to_string(boundary_count()) + " boundaries");
  }
  auto session = open_session(base_image_);
  auto& media = *session->media;
  const auto start = media.op_count();
  if (boundary < media_ops_) {
    media.set_crash_point(start + boundary);
  }
  bool crashed = false;
  try {
    for (const auto& op : trace_) {
      session->apply(op);
    }
  } catch (const SimulatedCrash&) {
    crashed = true;
  }
  if (crashed != (boundary < media_ops_)) {
    throw Error("replay diverged from the reference run at boundary " + std::to_string(boundary));
  }

  Verdict verdict;
  verdict.boundary = boundary;
  for (const auto& s : syncs_) {
    if (s.media_op_end <= boundary) ++verdict.epoch;
    if (s.media_op_begin < boundary && boundary < s.media_op_end) verdict.in_sync = true;
  }
  const auto epoch = verdict.epoch;

  auto classify_image = [&](std::span<const std::byte> image) -> std::optional<std::uint64_t> {
    std::vector<std::byte> recovered;
    try {
      recovered = recovered_data_image(image, layout_);
    } catch (const Error& e) {
      verdict.counterexamples.push_back({boundary, ViolationKind::recovery_error, epoch, std::nullopt, e.what()});
      return std::nullopt;
    }
    if (recovered == epochs_[epoch]) return epoch;
    if (verdict.in_sync && recovered == epochs_[epoch + 1]) return epoch + 1;
    std::optional<std::uint64_t> match;
    for (std::uint64_t k = 0; k < epochs_.size(); ++k) {
      if (recovered == epochs_[k]) {
        match = k;
      }
    }
    Counterexample c{boundary, ViolationKind::atomicity, epoch, match, {}};
    if (match && *match < epoch) {
      c.kind = (config_.fences == FenceMode::compat && *match + 1 == epoch) ? ViolationKind::invalidation_window
                                                                            : ViolationKind::durability;
      c.detail = "recovered epoch " + std::to_string(*match) + " after sync " + std::to_string(epoch) + " returned";
    } else {
      c.detail = describe_diff(recovered, epochs_[epoch]);
    }
    verdict.counterexamples.push_back(std::move(c));
    return std::nullopt;
  };

  media.visit_crash_images(config_.enumeration_bound, [&](std::span<const std::byte> image) {
    ++verdict.images;
    classify_image(image);
  });

  if (config_.check_continuation && verdict.ok()) {
    auto committed = media.durable_snapshot();
    auto all_flushed = committed;
    for (auto line : media.pending_lines()) {
      const auto off = line * media.line_size();
      media.read(off, std::span(all_flushed).subspan(off, media.line_size()));
    }
    for (const auto* image : {&committed, &all_flushed}) {
      const auto recovered = recovered_data_image(*image, layout_);
      const auto k = classify_image(*image);
      if (k) {
        check_continuation(*image, recovered, *k, boundary, verdict);
      }
    }
  }
  return verdict;
}

void CrashHarness::check_continuation(std::span<const std::byte> image, std::span<const std::byte> recovered,
                                      std::uint64_t epoch, std::uint64_t boundary, Verdict& verdict) const {
  auto fail = [&](std::string detail) {
    verdict.counterexamples.push_back({boundary, ViolationKind::continuation, epoch, epoch, std::move(detail)});
  };
  try {
    auto session = open_session(image);
    const auto working = session->region->working_image();
    if (!std::equal(working.begin(), working.end(), recovered.begin(), recovered.end())) {
      fail("reopened region differs from the enumerated recovery: " + describe_diff(working, recovered));
      return;
    }
    session->handles = handles_at_[epoch];
    const std::size_t first = epoch == 0 ? 0 : sync_op_index_[epoch - 1] + 1;
    for (std::size_t i = first; i < trace_.size(); ++i) {
      session->apply(trace_[i]);
    }
    const auto end = session->region->working_image();
    if (!std::equal(end.begin(), end.end(), final_image_.begin(), final_image_.end())) {
      fail("resumed run ends in a different image: " + describe_diff(end, final_image_));
    }
  } catch (const Error& e) {
    fail(std::string("resumed run failed: ") + e.what());
  }
}

SweepSummary CrashHarness::sweep() {
  SweepSummary summary;
  summary.traces = 1;
  summary.syncs = syncs_.size();
  for (const auto& c : reference_problems_) {
    ++summary.counterexamples;
    ++summary.by_kind[c.kind];
    if (summary.examples.size() < kMaxExamples) {
      summary.examples.emplace_back(0, c);
    }
  }
  for (std::uint64_t b = 0; b <= media_ops_; ++b) {
    summary.add(0, inject_and_check(b));
  }
  return summary;
}

SweepSummary fuzz(const FuzzOptions& options) {
  SweepSummary total;
  for (std::uint64_t i = 0; i < options.traces; ++i) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (attempt == 1000) {
        throw EnumerationBoundError("no random trace within the enumeration bound after 1000 attempts");
      }
      std::mt19937_64 rng(fuzz_seed(options.seed, i, attempt));
      CrashHarness harness(random_trace(rng, options.trace), options.harness);
      if (harness.max_pending_lines() > options.harness.enumeration_bound) {
        continue;
      }
      auto summary = harness.sweep();
      for (auto& [index, example] : summary.examples) {
        index = i;
      }
      total.merge(summary);
      break;
    }
  }
  return total;
}

}  // namespace famsync
