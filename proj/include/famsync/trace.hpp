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
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace famsync {

/// One scripted call against the public API. Offsets are data-area offsets.
///
/// Raw ops: write {offset, data}, store {offset, size, value},
/// memset {offset, size, value}, memcpy and memmove {dst, src, size}.
/// Heap ops: alloc {size}, free {handle}, root_set {handle or null}; handle
/// n names the payload returned by the n-th alloc of the trace.
/// Store ops: put {key, value}, remove {key}.
/// Every op may carry args.thread, the log slot it runs on (default 0).
/// sync takes no arguments.
enum class TraceOpKind { write, store, memset, memcpy, memmove, sync, alloc, free, root_set, put, remove };

struct TraceOp {
  TraceOpKind kind = TraceOpKind::sync;
  std::uint32_t thread = 0;
  std::uint64_t offset = 0;  // write, store, memset; dst of memcpy and memmove
  std::uint64_t src = 0;
  std::uint64_t size = 0;
  std::uint64_t value = 0;   // store, memset (low byte), put
  std::uint64_t key = 0;
  std::optional<std::uint64_t> handle;  // free, root_set (empty clears the root)
  std::vector<std::byte> data;          // write

  friend bool operator==(const TraceOp&, const TraceOp&) = default;
};

using Trace = std::vector<TraceOp>;

/// Raw traces touch bytes directly; heap traces drive the allocator; store
/// traces drive the key-value store. Syncs fit all three.
enum class TraceKind { raw, heap, kv };

std::string_view to_string(TraceOpKind kind) noexcept;
std::string_view to_string(TraceKind kind) noexcept;
/// Throws ConfigError when a trace mixes raw, heap and store ops.
TraceKind classify(const Trace& trace);
std::size_t sync_count(const Trace& trace) noexcept;

/// Parses a JSON array of {"op": name, "args": {...}} records. Throws
/// ConfigError with the record index on malformed input.
Trace parse_trace(std::string_view json);
Trace load_trace(const std::filesystem::path& path);
std::string dump_trace(const Trace& trace, int indent = 2);

struct RandomTraceOptions {
  TraceKind kind = TraceKind::raw;
  std::uint64_t region_size = 256;
  std::size_t max_ops = 20;
  std::size_t max_syncs = 3;
  /// Each thread writes only inside its own slice of the region.
  std::uint32_t threads = 2;
  /// Keys are drawn from [0, key_space).
  std::uint64_t key_space = 16;
};

/// A random trace of at most max_ops tracked ops plus at most max_syncs
/// syncs. Always valid: frees and root sets name live handles, memcpy ranges
/// are disjoint. Heap and store traces run on thread 0 only.
Trace random_trace(std::mt19937_64& rng, const RandomTraceOptions& options);

}  // namespace famsync
