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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "famsync/kv_store.hpp"
#include "famsync/region.hpp"
#include "famsync/trace.hpp"

namespace famsync {

struct HarnessConfig {
  std::uint64_t region_size = 256;
  std::uint32_t line_size = 8;
  std::uint32_t max_threads = 2;
  std::uint64_t slot_size = 4096;
  SyncScheme scheme = SyncScheme::famsync;
  FenceMode fences = FenceMode::strict;
  CopySource source = CopySource::dirty_list;
  std::size_t enumeration_bound = kDefaultEnumerationBound;
  std::uint64_t kv_buckets = 4;
  /// Reopen the committed-only and all-flushed images through the full
  /// recovery path and run the rest of the trace on them.
  bool check_continuation = true;
};

namespace detail {
struct TraceSession;
}

/// Runs a trace against `media`, formatting it when blank and creating the
/// heap or store the trace needs. Returns the reports of the syncs it ran.
/// With `crash_boundary` set the run throws SimulatedCrash before that media
/// operation, counted from the first op of the trace as in CrashHarness.
std::vector<SyncReport> run_trace(Media& media, const Trace& trace, const HarnessConfig& config,
                                  std::optional<std::uint64_t> crash_boundary = std::nullopt);

enum class ViolationKind {
  /// Recovered image matches no allowed sync epoch.
  atomicity,
  /// Recovered to an epoch older than the last completed sync.
  durability,
  /// Durability violation of compat mode: the previous epoch came back
  /// because the last sync left its commit unfenced.
  invalidation_window,
  /// Heap walk problems or a live set that differs from the trace.
  heap,
  /// Store contents differ from the oracle map.
  kv,
  /// Recovered image differs from the independent byte model of the trace.
  model,
  /// Full reopen disagrees with the enumerated recovery, or the resumed run
  /// ends in a different image.
  continuation,
  /// A sync issued a different number of fences than its mode requires.
  fence_count,
  /// Recovery threw.
  recovery_error,
};

std::string_view to_string(ViolationKind kind) noexcept;

struct Counterexample {
  std::uint64_t boundary = 0;
  ViolationKind kind = ViolationKind::atomicity;
  std::uint64_t expected_epoch = 0;
  /// Epoch the image recovered to, if it matches any.
  std::optional<std::uint64_t> recovered_epoch;
  std::string detail;
};

struct Verdict {
  std::uint64_t boundary = 0;
  /// Syncs completed before the crash.
  std::uint64_t epoch = 0;
  /// The crash interrupted a sync, so epoch + 1 is also allowed.
  bool in_sync = false;
  std::uint64_t images = 0;
  std::vector<Counterexample> counterexamples;
  bool ok() const noexcept { return counterexamples.empty(); }
};

struct SweepSummary {
  std::uint64_t traces = 0;
  std::uint64_t boundaries = 0;
  std::uint64_t images = 0;
  std::uint64_t syncs = 0;
  std::uint64_t counterexamples = 0;
  std::map<ViolationKind, std::uint64_t> by_kind;
  /// The first few counterexamples, with the trace they came from.
  std::vector<std::pair<std::uint64_t, Counterexample>> examples;

  bool ok() const noexcept { return counterexamples == 0; }
  void add(std::uint64_t trace_index, const Verdict& verdict);
  void merge(const SweepSummary& other);
};

inline constexpr std::size_t kMaxExamples = 20;

/// Systematic crash injection over one trace.
///
/// The trace first runs to completion on simulated media (the reference run).
/// Boundary b crashes the replay just before media operation b, so a trace
/// with n media operations has n + 1 boundaries, the last one after every
/// operation. At each boundary every durable image reachable by the crash is
/// recovered and must equal the data image of an allowed sync epoch.
class CrashHarness {
 public:
  /// Runs the reference. Throws ConfigError on invalid traces,
  /// ContractError when threads share bytes between syncs.
  CrashHarness(Trace trace, const HarnessConfig& config = {});
  ~CrashHarness();
  CrashHarness(const CrashHarness&) = delete;
  CrashHarness& operator=(const CrashHarness&) = delete;

  const Trace& trace() const noexcept { return trace_; }
  TraceKind kind() const noexcept { return kind_; }
  std::uint64_t media_op_count() const noexcept { return media_ops_; }
  std::uint64_t boundary_count() const noexcept { return media_ops_ + 1; }
  /// Largest number of flushed-but-unfenced lines seen in the reference run.
  std::size_t max_pending_lines() const noexcept { return max_pending_; }
  const std::vector<SyncReport>& sync_reports() const noexcept { return syncs_; }
  /// Data image after each completed sync; index 0 is the initial image.
  const std::vector<std::vector<std::byte>>& epoch_images() const noexcept { return epochs_; }
  const std::vector<std::byte>& final_image() const noexcept { return final_image_; }
  /// Problems found in the reference run itself (fence counts, model and
  /// oracle disagreements). Reported once by sweep().
  const std::vector<Counterexample>& reference_problems() const noexcept { return reference_problems_; }

  /// Throws EnumerationBoundError when the crash leaves too many lines
  /// pending, and RangeError for a boundary past the end.
  Verdict inject_and_check(std::uint64_t boundary);
  SweepSummary sweep();

 private:
  struct EpochOracle;

  std::unique_ptr<detail::TraceSession> open_session(std::span<const std::byte> image) const;
  void run_reference();
  void check_epoch_semantics(std::size_t epoch, std::vector<Counterexample>& out, std::uint64_t boundary);
  void check_continuation(std::span<const std::byte> image, std::span<const std::byte> recovered,
                          std::uint64_t epoch, std::uint64_t boundary, Verdict& verdict) const;

  Trace trace_;
  HarnessConfig config_;
  TraceKind kind_;
  Layout layout_;
  std::vector<std::byte> base_image_;
  std::uint64_t media_ops_ = 0;
  std::size_t max_pending_ = 0;
  std::vector<SyncReport> syncs_;
  std::vector<std::size_t> sync_op_index_;
  std::vector<std::vector<std::byte>> epochs_;
  std::vector<std::vector<std::uint64_t>> handles_at_;  // handle offsets known at each epoch
  std::vector<std::byte> final_image_;
  std::vector<Counterexample> reference_problems_;
  std::vector<std::unique_ptr<EpochOracle>> oracles_;
};

/// Data image that recovery produces from a full media image, computed
/// without touching any media.
std::vector<std::byte> recovered_data_image(std::span<const std::byte> media_image, const Layout& layout);

struct FuzzOptions {
  std::uint64_t seed = 1;
  std::uint64_t traces = 1000;
  RandomTraceOptions trace;
  HarnessConfig harness;
};

/// Sweeps `traces` random traces. A generated trace whose reference run
/// would exceed the enumeration bound is replaced by the next candidate from
/// the same seed stream, so results are reproducible.
SweepSummary fuzz(const FuzzOptions& options);

}  // namespace famsync
