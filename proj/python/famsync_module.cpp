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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "famsync/crash_harness.hpp"
#include "famsync/error.hpp"
#include "famsync/workload.hpp"

namespace py = pybind11;
using namespace famsync;

namespace {

py::bytes to_bytes(std::span<const std::byte> b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

std::span<const std::byte> as_span(std::string_view s) {
  return std::as_bytes(std::span(s.data(), s.size()));
}

py::dict report_dict(const SyncReport& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["entries"] = r.entries_sealed;
  d["logged_bytes"] = r.logged_bytes;
  d["copied_bytes"] = r.bytes_copied;
  d["wal_bytes"] = r.wal_bytes;
  d["fences"] = r.fences_issued;
  d["durability_points"] = r.durability_points;
  d["media_reads"] = r.media_reads;
  return d;
}

py::dict summary_dict(const SweepSummary& s) {
  py::dict d;
  d["traces"] = s.traces;
  d["boundaries"] = s.boundaries;
  d["images"] = s.images;
  d["syncs"] = s.syncs;
  d["counterexamples"] = s.counterexamples;
  py::dict kinds;
  for (const auto& [k, n] : s.by_kind) kinds[py::str(std::string(to_string(k)))] = n;
  d["by_kind"] = kinds;
  return d;
}

py::dict contents_dict(const KvContents& c) {
  py::dict d;
  for (const auto& [k, v] : c) d[py::int_(k)] = to_bytes(v);
  return d;
}

HarnessConfig harness_config(TraceKind kind, std::optional<std::uint64_t> region_size,
                             std::optional<std::uint32_t> line_size, const std::string& mode,
                             int fences, bool sync_from_log) {
  HarnessConfig c;
  c.region_size = region_size.value_or(kind == TraceKind::raw ? 256 : 4096);
  c.line_size = line_size.value_or(kind == TraceKind::kv ? 64 : 8);
  c.scheme = parse_scheme(mode);
  if (fences != 2 && fences != 3) throw ConfigError("fences must be 2 or 3");
  c.fences = fences == 3 ? FenceMode::strict : FenceMode::compat;
  c.source = sync_from_log ? CopySource::undo_log : CopySource::dirty_list;
  return c;
}

TraceKind parse_kind(const std::string& k) {
  if (k == "raw") return TraceKind::raw;
  if (k == "heap") return TraceKind::heap;
  if (k == "kv") return TraceKind::kv;
  throw ConfigError("unknown trace kind '" + k + "'");
}

}  // namespace

PYBIND11_MODULE(_famsync, m) {
  m.doc() = "Failure-atomic msync on a simulated or file-backed persistent region";

  auto base = py::register_exception<Error>(m, "FamsyncError", PyExc_RuntimeError);
  py::register_exception<RangeError>(m, "RangeError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<CorruptionError>(m, "CorruptionError", base);
  py::register_exception<LogFullError>(m, "LogFullError", base);
  py::register_exception<OutOfMemoryError>(m, "OutOfMemoryError", base);
  py::register_exception<EnumerationBoundError>(m, "EnumerationBoundError", base);
  py::register_exception<ContractError>(m, "ContractError", base);
  py::register_exception<IoError>(m, "IoError", base);

  py::class_<Media>(m, "Media")
      .def_property_readonly("capacity", &Media::capacity)
      .def_property_readonly("line_size", &Media::line_size)
      .def_property_readonly("pending_lines", &Media::pending_line_count)
      .def_property_readonly("op_count", &Media::op_count)
      .def("durable_snapshot", [](const Media& me) { return to_bytes(me.durable_snapshot()); })
      .def("crash_images",
           [](const Media& me, std::size_t bound) {
             py::list out;
             me.visit_crash_images(bound, [&](std::span<const std::byte> img) { out.append(to_bytes(img)); });
             return out;
           },
           py::arg("bound") = kDefaultEnumerationBound)
      .def("stats", [](const Media& me) {
        const auto s = me.stats();
        py::dict d;
        d["writes"] = s.writes;
        d["reads"] = s.reads;
        d["flushes"] = s.flushes;
        d["flushed_lines"] = s.flushed_lines;
        d["fences"] = s.fences;
        return d;
      });

  py::class_<SimulatedMedia, Media>(m, "SimulatedMedia")
      .def(py::init([](std::uint64_t capacity, std::uint32_t line_size) {
             MediaConfig c;
             c.capacity_bytes = capacity;
             c.line_size = line_size;
             return std::make_unique<SimulatedMedia>(c);
           }),
           py::arg("capacity"), py::arg("line_size") = 64)
      .def(py::init([](py::bytes image, std::uint32_t line_size) {
             const std::string_view v = image;
             return std::make_unique<SimulatedMedia>(as_span(v), line_size);
           }),
           py::arg("image"), py::arg("line_size") = 64);

  py::class_<RealFileMedia, Media>(m, "RealFileMedia")
      .def(py::init([](const std::filesystem::path& path, std::uint64_t capacity, std::uint32_t line_size) {
             MediaConfig c;
             c.mode = MediaMode::real_file;
             c.path = path;
             c.capacity_bytes = capacity;
             c.line_size = line_size;
             return std::make_unique<RealFileMedia>(c);
           }),
           py::arg("path"), py::arg("capacity") = 0, py::arg("line_size") = 64);

  m.def("region_capacity",
        [](std::uint64_t region_size, std::uint32_t max_threads, std::uint64_t slot_size) {
          return Layout{region_size, max_threads, slot_size}.capacity();
        },
        py::arg("region_size"), py::arg("max_threads") = 16, py::arg("slot_size") = 1 << 20,
        "Media bytes needed for a region of the given geometry.");

  m.def("recover",
        [](Media& media) {
          const auto r = recover_region(media);
          return py::make_tuple(r.slots_rolled_back, r.entries_applied);
        },
        "Rolls back interrupted syncs. Returns (slots, entries).");

  py::class_<Region>(m, "Region")
      .def(py::init([](Media& media, std::uint64_t region_size, std::uint32_t max_threads,
                       std::uint64_t slot_size, const std::string& mode, int fences, bool sync_from_log) {
             RegionConfig c;
             c.region_size = region_size;
             c.max_threads = max_threads;
             c.slot_size = slot_size;
             c.reserve_size = std::uint64_t{1} << 32;
             c.policy.scheme = parse_scheme(mode);
             if (fences != 2 && fences != 3) throw ConfigError("fences must be 2 or 3");
             c.policy.fences = fences == 3 ? FenceMode::strict : FenceMode::compat;
             c.policy.source = sync_from_log ? CopySource::undo_log : CopySource::dirty_list;
             return Region::open(media, c);
           }),
           py::arg("media"), py::arg("region_size") = 0, py::arg("max_threads") = 16,
           py::arg("slot_size") = 1 << 20, py::arg("mode") = "famsync", py::arg("fences") = 3,
           py::arg("sync_from_log") = false, py::keep_alive<1, 2>())
      .def_property_readonly("size", &Region::size)
      .def_property_readonly("generation", &Region::generation)
      .def_property_readonly("epoch", &Region::sync_epoch)
      .def("read",
           [](const Region& r, std::uint64_t offset, std::uint64_t n) {
             if (offset > r.size() || n > r.size() - offset) throw RangeError("read outside the region");
             return to_bytes(r.working_image().subspan(offset, n));
           })
      .def("write",
           [](Region& r, std::uint64_t offset, py::bytes data) {
             const std::string_view v = data;
             if (v.empty()) throw RangeError("empty write");
             r.tracked_write(r.from_offset(offset), as_span(v));
           })
      .def("store_u64",
           [](Region& r, std::uint64_t offset, std::uint64_t value) {
             r.tracked_write(r.from_offset(offset), std::as_bytes(std::span(&value, 1)));
           })
      .def("memset",
           [](Region& r, std::uint64_t offset, std::uint8_t value, std::uint64_t n) {
             r.tracked_memset(r.from_offset(offset), std::byte{value}, n);
           })
      .def("memmove",
           [](Region& r, std::uint64_t dst, std::uint64_t src, std::uint64_t n) {
             r.tracked_memmove(r.from_offset(dst), r.from_offset(src), n);
           })
      .def("fa_msync",
           [](Region& r) {
             const auto rep = [&] {
               py::gil_scoped_release release;
               return r.fa_msync();
             }();
             return report_dict(rep);
           })
      .def("sync_history",
           [](const Region& r) {
             py::list out;
             for (const auto& rep : r.sync_history()) out.append(report_dict(rep));
             return out;
           })
      .def("close", &Region::close);

  py::class_<Heap>(m, "Heap")
      .def(py::init<Region&>(), py::keep_alive<1, 2>())
      .def("alloc", &Heap::alloc)
      .def("free", &Heap::free)
      .def_property("root", &Heap::root, &Heap::set_root)
      .def("live", [](const Heap& h) { return h.walk().live_payloads(); })
      .def("problems", [](const Heap& h) { return h.walk().problems; });

  py::class_<KvStore>(m, "KvStore")
      .def(py::init([](Heap& heap, std::uint64_t buckets, std::uint32_t value_size) {
             return std::make_unique<KvStore>(heap, KvOptions{buckets, value_size, true});
           }),
           py::arg("heap"), py::arg("buckets") = 1024, py::arg("value_size") = 8, py::keep_alive<1, 2>())
      .def_static("attach", [](Heap& heap) { return std::make_unique<KvStore>(heap); },
                  py::keep_alive<0, 1>())
      .def("put",
           [](KvStore& kv, std::uint64_t key, py::bytes value) {
             const std::string_view v = value;
             return kv.put(key, as_span(v));
           })
      .def("get",
           [](const KvStore& kv, std::uint64_t key) -> py::object {
             auto v = kv.get(key);
             if (!v) return py::none();
             return to_bytes(*v);
           })
      .def("remove", &KvStore::remove)
      .def("contents", [](const KvStore& kv) { return contents_dict(kv.contents()); });

  m.def("bench",
        [](const std::string& mix, const std::string& mode, std::uint64_t records, std::uint64_t ops,
           std::uint64_t seed, std::uint32_t threads) {
          WorkloadSpec spec;
          spec.mix = parse_mix(mix);
          spec.record_count = records;
          spec.op_count = ops;
          spec.seed = seed;
          spec.threads = threads;
          const auto r = [&] {
            py::gil_scoped_release release;
            return run_workload(spec, parse_scheme(mode));
          }();
          py::dict d;
          d["mode"] = std::string(to_string(r.mode));
          d["mix"] = std::string(to_string(r.mix));
          d["ops_per_sec"] = r.ops_per_sec;
          d["syncs"] = r.syncs;
          d["fences"] = r.fences;
          d["durability_points"] = r.durability_points;
          d["logged_bytes"] = r.logged_bytes;
          d["copied_bytes"] = r.copied_bytes;
          d["wal_bytes"] = r.wal_bytes;
          return d;
        },
        py::arg("mix"), py::arg("mode") = "famsync", py::arg("records") = 1000, py::arg("ops") = 1000,
        py::arg("seed") = 1, py::arg("threads") = 1, "Runs a key-value workload mix; returns counters.");

  m.def("crashtest",
        [](const std::string& trace_json, std::optional<std::uint64_t> region_size,
           std::optional<std::uint32_t> line_size, const std::string& mode, int fences, bool sync_from_log) {
          auto trace = parse_trace(trace_json);
          const auto c = harness_config(classify(trace), region_size, line_size, mode, fences, sync_from_log);
          py::gil_scoped_release release;
          CrashHarness h(std::move(trace), c);
          return h.sweep();
        },
        py::arg("trace_json"), py::arg("region_size") = py::none(), py::arg("line_size") = py::none(),
        py::arg("mode") = "famsync", py::arg("fences") = 3, py::arg("sync_from_log") = false,
        "Crash sweep of one JSON trace.");

  m.def("fuzz",
        [](std::uint64_t traces, std::uint64_t seed, const std::string& kind, const std::string& mode,
           int fences) {
          FuzzOptions o;
          o.seed = seed;
          o.traces = traces;
          o.trace.kind = parse_kind(kind);
          o.harness = harness_config(o.trace.kind, std::nullopt, std::nullopt, mode, fences, false);
          o.trace.region_size = o.harness.region_size;
          if (o.trace.kind != TraceKind::raw) o.trace.threads = 1;
          py::gil_scoped_release release;
          return fuzz(o);
        },
        py::arg("traces") = 100, py::arg("seed") = 1, py::arg("kind") = "raw", py::arg("mode") = "famsync",
        py::arg("fences") = 3, "Crash sweeps over random traces.");

  py::class_<SweepSummary>(m, "SweepSummary")
      .def("as_dict", &summary_dict)
      .def_property_readonly("ok", &SweepSummary::ok)
      .def_readonly("counterexamples", &SweepSummary::counterexamples)
      .def_readonly("traces", &SweepSummary::traces)
      .def_readonly("boundaries", &SweepSummary::boundaries);
}
