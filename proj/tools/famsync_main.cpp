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

// Command-line front end: inspect and recover region files, dump simulated
// media, print sync statistics, run the key-value benchmark and the crash
// harness.

#include <CLI11.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "famsync/crash_harness.hpp"
#include "famsync/error.hpp"
#include "famsync/heap.hpp"
#include "famsync/layout.hpp"
#include "famsync/media.hpp"
#include "famsync/region.hpp"
#include "famsync/trace.hpp"
#include "famsync/undo_log.hpp"
#include "famsync/workload.hpp"

namespace fs = std::filesystem;
using namespace famsync;

namespace {

// Options shared by every command that runs a trace.
struct TraceOptions {
  std::optional<std::uint64_t> region_size;
  std::optional<std::uint32_t> line_size;
  std::uint32_t max_threads = 2;
  std::uint64_t slot_size = 4096;
  std::string mode = "famsync";
  int fences = 3;
  bool sync_from_log = false;
  std::uint64_t buckets = 4;
  std::size_t bound = kDefaultEnumerationBound;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--region-size", region_size, "Data area bytes (default 256 raw, 4096 heap or kv)");
    cmd.add_option("--line-size", line_size, "Media line bytes (default 8, 64 for kv traces)");
    cmd.add_option("--max-threads", max_threads, "Log slots")->capture_default_str();
    cmd.add_option("--slot-size", slot_size, "Bytes per log slot, a multiple of 4096")->capture_default_str();
    cmd.add_option("--mode", mode, "famsync, page4k or wal")->capture_default_str();
    cmd.add_option("--fences", fences, "Fences per sync: 3 (strict) or 2 (compat)")
        ->check(CLI::IsMember({2, 3}))
        ->capture_default_str();
    cmd.add_flag("--sync-from-log", sync_from_log, "Find modified ranges by reading the undo log");
    cmd.add_option("--buckets", buckets, "Bucket count of the store in kv traces")->capture_default_str();
    cmd.add_option("--bound", bound, "Crash-state enumeration bound")->capture_default_str();
  }

  HarnessConfig config(TraceKind kind) const {
    HarnessConfig c;
    c.region_size = region_size.value_or(kind == TraceKind::raw ? 256 : 4096);
    c.line_size = line_size.value_or(kind == TraceKind::kv ? 64 : 8);
    c.max_threads = max_threads;
    c.slot_size = slot_size;
    c.scheme = parse_scheme(mode);
    c.fences = fences == 2 ? FenceMode::compat : FenceMode::strict;
    c.source = sync_from_log ? CopySource::undo_log : CopySource::dirty_list;
    c.kv_buckets = buckets;
    c.enumeration_bound = bound;
    return c;
  }
};

std::vector<std::byte> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_file(const fs::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
}

std::string hex_prefix(std::span<const std::byte> bytes, std::size_t max = 16) {
  std::ostringstream out;
  for (std::size_t i = 0; i < std::min(max, bytes.size()); ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << std::to_integer<unsigned>(bytes[i]);
  }
  if (bytes.size() > max) out << "..";
  return out.str();
}

std::string_view state_name(SlotState s) {
  switch (s) {
    case SlotState::invalid: return "invalid";
    case SlotState::valid: return "valid";
    case SlotState::redo: return "redo";
  }
  return "unknown";
}

// --- inspect -----------------------------------------------------------------

int cmd_inspect(const fs::path& path, bool logs, bool heap) {
  const auto image = read_file(path);
  if (image.size() < layout::kHeaderSize) {
    throw CorruptionError(path.string() + " is too small to hold a region header");
  }
  switch (FileHeader::check_magic(image)) {
    case MagicState::absent:
      std::cout << path.string() << ": blank (no region header)\n";
      return 0;
    case MagicState::invalid:
      throw CorruptionError(path.string() + ": bad magic, not a region file");
    case MagicState::valid:
      break;
  }
  const auto header = FileHeader::decode(image);
  const Layout lay{header.region_size, static_cast<std::uint32_t>(header.max_threads), header.slot_size};
  std::cout << "magic        FAMSYNC1\n"
            << "version      " << header.version << "\n"
            << "region_size  " << header.region_size << "\n"
            << "max_threads  " << header.max_threads << "\n"
            << "slot_size    " << header.slot_size << "\n"
            << "generation   " << header.generation << "\n"
            << "data_offset  " << lay.data_offset() << "\n"
            << "capacity     " << lay.capacity() << "\n"
            << "file_size    " << image.size() << "\n";
  if (image.size() < lay.capacity()) {
    throw CorruptionError("file is shorter than its header's capacity");
  }

  if (logs) {
    for (std::uint32_t slot = 0; slot < lay.max_threads; ++slot) {
      for (std::uint64_t parity = 0; parity < 2; ++parity) {
        const bool active = (header.generation & 1) == parity;
        const auto off = lay.slot_offset(slot) + parity * lay.log_size();
        const auto bytes = std::span(image).subspan(off, lay.log_size());
        const auto h = SlotHeader::decode(bytes);
        std::cout << "slot " << slot << " log " << parity << (active ? " (active)" : " (retired)")
                  << ": state " << state_name(h.state) << ", tail " << h.tail << "\n";
        if (h.state == SlotState::invalid || h.tail == 0) continue;
        // Entries of the retired log were written under the previous generation.
        const auto gen = active ? header.generation : header.generation - 1;
        if (!active && header.generation == 0) continue;
        const auto scan = scan_entries(bytes.subspan(layout::kSlotHeaderSize),
                                       std::min(h.tail, lay.entry_area_size()), gen, lay.region_size);
        for (const auto& e : scan.entries) {
          std::cout << "  @" << e.position << " offset " << e.offset << " size " << e.size << " crc 0x"
                    << std::hex << e.checksum << std::dec << " data " << hex_prefix(e.payload) << "\n";
        }
        if (scan.stopped_early || scan.consumed != h.tail) {
          std::cout << "  (" << scan.consumed << " of " << h.tail << " bytes decode under generation "
                    << gen << ")\n";
        }
      }
    }
  }

  if (heap) {
    const auto data = std::span(image).subspan(lay.data_offset(), lay.region_size);
    const auto walk = walk_heap(data);
    std::cout << "heap root " << walk.root << ", free_head " << walk.free_head << ", high_water "
              << walk.high_water << "\n";
    std::cout << "free list:";
    for (auto b : walk.free_blocks()) std::cout << " " << b;
    std::cout << "\nblocks:\n";
    for (const auto& b : walk.blocks) {
      std::cout << "  " << b.offset << " size " << b.size << (b.free ? " free" : " live") << "\n";
    }
    for (const auto& p : walk.problems) {
      std::cout << "problem: " << p << "\n";
    }
    if (!walk.ok()) return 1;
  }
  return 0;
}

// --- recover -----------------------------------------------------------------

int cmd_recover(const fs::path& path) {
  MediaConfig config;
  config.mode = MediaMode::real_file;
  config.path = path;
  config.capacity_bytes = 0;
  RealFileMedia media(config);
  const auto report = recover_region(media);
  std::cout << "slots rolled back: " << report.slots_rolled_back << "\n"
            << "entries applied:   " << report.entries_applied << "\n"
            << "generation:        " << read_file_header(media).generation << "\n";
  return 0;
}

// --- dump --------------------------------------------------------------------

int cmd_dump(const fs::path& trace_path, const fs::path& out, std::optional<std::uint64_t> crash_at,
             bool all_flushed, const TraceOptions& options) {
  const auto trace = load_trace(trace_path);
  const auto config = options.config(classify(trace));
  MediaConfig media_config;
  media_config.capacity_bytes =
      Layout{config.region_size, config.max_threads, config.slot_size}.capacity();
  media_config.line_size = config.line_size;
  SimulatedMedia media(media_config);
  std::size_t syncs = 0;
  bool crashed = false;
  try {
    syncs = run_trace(media, trace, config, crash_at).size();
  } catch (const SimulatedCrash&) {
    crashed = true;
    std::cout << "crashed at boundary " << *crash_at << "\n";
  }
  auto image = media.durable_snapshot();
  if (all_flushed) {
    for (auto line : media.pending_lines()) {
      const auto off = line * media.line_size();
      media.read(off, std::span(image).subspan(off, media.line_size()));
    }
  }
  write_file(out, image);
  std::cout << "wrote " << image.size() << " bytes to " << out.string() << " (";
  if (crashed) {
    std::cout << "crashed";
  } else {
    std::cout << syncs << " syncs";
  }
  std::cout << ", " << media.pending_line_count() << " lines pending)\n";
  return 0;
}

// --- sync-stats --------------------------------------------------------------

int cmd_sync_stats(const fs::path& trace_path, const std::optional<fs::path>& file,
                   const TraceOptions& options) {
  const auto trace = load_trace(trace_path);
  const auto config = options.config(classify(trace));
  const auto capacity = Layout{config.region_size, config.max_threads, config.slot_size}.capacity();
  std::unique_ptr<Media> media;
  MediaConfig media_config;
  media_config.line_size = config.line_size;
  if (file) {
    media_config.mode = MediaMode::real_file;
    media_config.path = *file;
    media_config.capacity_bytes = fs::exists(*file) ? 0 : capacity;
  } else {
    media_config.capacity_bytes = capacity;
  }
  media = make_media(media_config);
  const auto reports = run_trace(*media, trace, config);
  std::cout << "epoch,entries,logged_bytes,copied_bytes,fences\n";
  for (const auto& r : reports) {
    std::cout << r.epoch << ',' << r.entries_sealed << ',' << r.logged_bytes << ',' << r.bytes_copied << ','
              << r.fences_issued << '\n';
  }
  return 0;
}

// --- bench -------------------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> mixes{"A"};
  std::vector<std::string> modes{"famsync"};
  std::uint64_t records = 100000;
  std::uint64_t ops = 100000;
  std::uint64_t seed = 1;
  std::uint32_t threads = 1;
  std::string csv;
  std::string dist = "zipfian";
  std::uint32_t value_size = 8;
  std::uint32_t line_size = 64;
  std::uint64_t latency_ns = 0;
  std::string file;
  bool sync_from_log = false;
  int fences = 3;
};

int cmd_bench(const BenchArgs& a) {
  std::ofstream csv_file;
  std::ostream* csv = nullptr;
  if (!a.csv.empty()) {
    if (a.csv == "-") {
      csv = &std::cout;
    } else {
      csv_file.open(a.csv, std::ios::trunc);
      if (!csv_file) throw IoError("cannot write " + a.csv);
      csv = &csv_file;
    }
    write_csv_header(*csv);
  }
  for (const auto& mix_name : a.mixes) {
    for (const auto& mode_name : a.modes) {
      WorkloadSpec spec;
      spec.mix = parse_mix(mix_name);
      spec.record_count = a.records;
      spec.op_count = a.ops;
      spec.seed = a.seed;
      spec.threads = a.threads;
      spec.key_dist = parse_distribution(a.dist);
      spec.value_size = a.value_size;
      BenchOptions options;
      options.line_size = a.line_size;
      options.latency_ns_per_flush = a.latency_ns;
      options.source = a.sync_from_log ? CopySource::undo_log : CopySource::dirty_list;
      options.fences = a.fences == 2 ? FenceMode::compat : FenceMode::strict;
      if (!a.file.empty()) {
        if (fs::exists(a.file)) {
          throw ConfigError("bench file " + a.file + " already exists; pick a fresh path");
        }
        options.file = a.file;
      }
      BenchReport r;
      try {
        r = run_workload(spec, parse_scheme(mode_name), options);
      } catch (...) {
        if (!a.file.empty()) fs::remove(a.file);
        throw;
      }
      if (!a.file.empty()) fs::remove(a.file);
      const double per_update = r.update_ops ? static_cast<double>(r.durability_points) / r.update_ops : 0;
      std::cerr << to_string(r.mode) << " mix " << to_string(r.mix) << ": " << std::fixed << std::setprecision(0)
                << r.ops_per_sec << " ops/s, " << r.syncs << " syncs, " << r.fences << " fences, "
                << std::setprecision(2) << per_update << " durability points/update, logged "
                << r.logged_bytes << " B, copied " << r.copied_bytes << " B, wal " << r.wal_bytes << " B\n";
      if (csv) write_csv_row(*csv, r);
    }
  }
  return 0;
}

// --- crashtest ---------------------------------------------------------------

void print_summary(const SweepSummary& s, std::size_t max_examples) {
  std::cout << "traces " << s.traces << ", boundaries " << s.boundaries << ", crash images " << s.images
            << ", syncs " << s.syncs << ", counterexamples " << s.counterexamples << "\n";
  for (const auto& [kind, n] : s.by_kind) {
    std::cout << "  " << to_string(kind) << ": " << n << "\n";
  }
  std::size_t shown = 0;
  for (const auto& [trace, c] : s.examples) {
    if (shown++ == max_examples) break;
    std::cout << "  trace " << trace << " boundary " << c.boundary << " " << to_string(c.kind)
              << " (expected epoch " << c.expected_epoch << "): " << c.detail << "\n";
  }
}

int cmd_crashtest(const std::string& trace_path, bool sweep, std::optional<std::uint64_t> boundary,
                  std::uint64_t seed, std::uint64_t random_traces, const std::string& kind,
                  std::size_t examples, bool continuation, const TraceOptions& options) {
  if (!trace_path.empty()) {
    const auto trace = load_trace(trace_path);
    auto config = options.config(classify(trace));
    config.check_continuation = continuation;
    CrashHarness harness(trace, config);
    std::cout << "trace: " << trace.size() << " ops, " << harness.sync_reports().size() << " syncs, "
              << harness.media_op_count() << " media ops, " << harness.boundary_count()
              << " boundaries, at most " << harness.max_pending_lines() << " lines pending\n";
    if (boundary) {
      const auto v = harness.inject_and_check(*boundary);
      std::cout << "boundary " << v.boundary << ": epoch " << v.epoch << (v.in_sync ? " (inside a sync)" : "")
                << ", " << v.images << " crash images, " << v.counterexamples.size() << " counterexamples\n";
      for (const auto& c : v.counterexamples) {
        std::cout << "  " << to_string(c.kind) << ": " << c.detail << "\n";
      }
      return v.ok() ? 0 : 1;
    }
    if (!sweep) {
      throw ConfigError("give --sweep or --boundary with --trace");
    }
    const auto s = harness.sweep();
    print_summary(s, examples);
    return s.ok() ? 0 : 1;
  }
  if (random_traces == 0) {
    throw ConfigError("give --trace FILE or --random-traces N");
  }
  FuzzOptions fuzz_options;
  fuzz_options.seed = seed;
  fuzz_options.traces = random_traces;
  fuzz_options.trace.kind = kind == "heap" ? TraceKind::heap : kind == "kv" ? TraceKind::kv : TraceKind::raw;
  fuzz_options.harness = options.config(fuzz_options.trace.kind);
  fuzz_options.harness.check_continuation = continuation;
  fuzz_options.trace.region_size = fuzz_options.harness.region_size;
  fuzz_options.trace.threads = fuzz_options.trace.kind == TraceKind::raw ? options.max_threads : 1;
  const auto s = fuzz(fuzz_options);
  print_summary(s, examples);
  return s.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"famsync: failure-atomic msync for memory-mapped files"};
  app.require_subcommand(1);

  fs::path inspect_path;
  bool inspect_logs = false, inspect_heap = false;
  auto* inspect = app.add_subcommand("inspect", "Print a region file's header, logs and heap");
  inspect->add_option("file", inspect_path, "Region file or media image")->required();
  inspect->add_flag("--logs", inspect_logs, "Decode every log slot");
  inspect->add_flag("--heap", inspect_heap, "Walk the persistent heap");

  fs::path recover_path;
  auto* recover = app.add_subcommand("recover", "Roll back an interrupted sync in a region file");
  recover->add_option("file", recover_path, "Region file")->required()->check(CLI::ExistingFile);

  fs::path dump_trace_path, dump_out;
  std::optional<std::uint64_t> dump_crash;
  bool dump_media = false, dump_all_flushed = false;
  TraceOptions dump_options;
  auto* dump = app.add_subcommand("dump", "Run a trace on simulated media and write its durable image");
  dump->add_flag("--media", dump_media, "Dump the durable media image")->required();
  dump->add_option("--trace", dump_trace_path, "Trace file (JSON)")->required()->check(CLI::ExistingFile);
  dump->add_option("--out", dump_out, "Output image path")->required();
  dump->add_option("--crash-at", dump_crash, "Crash at this boundary (media op index within the trace)");
  dump->add_flag("--all-flushed", dump_all_flushed, "Let every flushed line survive the crash");
  dump_options.add_to(*dump);

  fs::path stats_trace;
  std::optional<fs::path> stats_file;
  TraceOptions stats_options;
  auto* stats = app.add_subcommand("sync-stats", "Run a trace and print one CSV row per sync");
  stats->add_option("--trace", stats_trace, "Trace file (JSON)")->required()->check(CLI::ExistingFile);
  stats->add_option("--file", stats_file, "Run on this region file instead of simulated media");
  stats_options.add_to(*stats);

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Run the key-value benchmark");
  bench->add_option("--mix", bench_args.mixes, "Workload mix A..G (comma separated)")->delimiter(',');
  bench->add_option("--mode", bench_args.modes, "famsync, page4k or wal (comma separated)")->delimiter(',');
  bench->add_option("--records", bench_args.records, "Preloaded records")->capture_default_str();
  bench->add_option("--ops", bench_args.ops, "Measured operations")->capture_default_str();
  bench->add_option("--seed", bench_args.seed, "Workload seed")->capture_default_str();
  bench->add_option("--threads", bench_args.threads, "Driver threads")->capture_default_str();
  bench->add_option("--csv", bench_args.csv, "Append CSV rows to this file ('-' for stdout)");
  bench->add_option("--dist", bench_args.dist, "uniform or zipfian")->capture_default_str();
  bench->add_option("--value-size", bench_args.value_size, "Value bytes")->capture_default_str();
  bench->add_option("--line-size", bench_args.line_size, "Media line bytes")->capture_default_str();
  bench->add_option("--latency-ns", bench_args.latency_ns, "Simulated cost per flush");
  bench->add_option("--file", bench_args.file, "Run on a fresh real file at this path");
  bench->add_flag("--sync-from-log", bench_args.sync_from_log, "Find modified ranges by reading the undo log");
  bench->add_option("--fences", bench_args.fences, "3 (strict) or 2 (compat)")->check(CLI::IsMember({2, 3}));

  std::string crash_trace, crash_kind = "raw";
  bool crash_sweep = false, crash_no_continuation = false;
  std::optional<std::uint64_t> crash_boundary;
  std::uint64_t crash_seed = 1, crash_random = 0;
  std::size_t crash_examples = 10;
  TraceOptions crash_options;
  auto* crash = app.add_subcommand("crashtest", "Inject crashes at every media-operation boundary");
  crash->add_option("--trace", crash_trace, "Trace file (JSON)")->check(CLI::ExistingFile);
  crash->add_flag("--sweep", crash_sweep, "Check every boundary of the trace");
  crash->add_option("--boundary", crash_boundary, "Check a single boundary");
  crash->add_option("--seed", crash_seed, "Seed for random traces")->capture_default_str();
  crash->add_option("--random-traces", crash_random, "Sweep this many random traces");
  crash->add_option("--kind", crash_kind, "Random trace kind: raw, heap or kv")
      ->check(CLI::IsMember({"raw", "heap", "kv"}))
      ->capture_default_str();
  crash->add_option("--examples", crash_examples, "Counterexamples to print")->capture_default_str();
  crash->add_flag("--no-continuation", crash_no_continuation, "Skip the reopen-and-resume check");
  crash_options.add_to(*crash);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*inspect) return cmd_inspect(inspect_path, inspect_logs, inspect_heap);
    if (*recover) return cmd_recover(recover_path);
    if (*dump) return cmd_dump(dump_trace_path, dump_out, dump_crash, dump_all_flushed, dump_options);
    if (*stats) return cmd_sync_stats(stats_trace, stats_file, stats_options);
    if (*bench) return cmd_bench(bench_args);
    if (*crash) {
      return cmd_crashtest(crash_trace, crash_sweep, crash_boundary, crash_seed, crash_random, crash_kind,
                           crash_examples, !crash_no_continuation, crash_options);
    }
  } catch (const std::exception& e) {
    std::cerr << "famsync: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
