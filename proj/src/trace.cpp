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

#include "famsync/trace.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <span>
#include <sstream>

#include <json.hpp>

#include "famsync/error.hpp"

namespace famsync {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<TraceOpKind, std::string_view>, 11> kNames{{
    {TraceOpKind::write, "write"},
    {TraceOpKind::store, "store"},
    {TraceOpKind::memset, "memset"},
    {TraceOpKind::memcpy, "memcpy"},
    {TraceOpKind::memmove, "memmove"},
    {TraceOpKind::sync, "sync"},
    {TraceOpKind::alloc, "alloc"},
    {TraceOpKind::free, "free"},
    {TraceOpKind::root_set, "root_set"},
    {TraceOpKind::put, "put"},
    {TraceOpKind::remove, "remove"},
}};

std::string to_hex(std::span<const std::byte> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (auto b : bytes) {
    out += digits[std::to_integer<unsigned>(b) >> 4];
    out += digits[std::to_integer<unsigned>(b) & 15];
  }
  return out;
}

std::vector<std::byte> from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) {
    throw ConfigError("hex data has odd length");
  }
  auto nibble = [](char c) -> unsigned {
    if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
    throw ConfigError(std::string("bad hex digit '") + c + "'");
  };
  std::vector<std::byte> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::byte>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return out;
}

std::uint64_t need_u64(const json& args, const char* name) {
  if (!args.contains(name)) {
    throw ConfigError(std::string("missing argument '") + name + "'");
  }
  const auto& v = args.at(name);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError(std::string("argument '") + name + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

TraceOp decode_op(const json& record) {
  if (!record.is_object() || !record.contains("op") || !record.at("op").is_string()) {
    throw ConfigError("record needs a string 'op'");
  }
  const auto name = record.at("op").get<std::string>();
  const auto it = std::find_if(kNames.begin(), kNames.end(),
                               [&](const auto& p) { return p.second == name; });
  if (it == kNames.end()) {
    throw ConfigError("unknown op '" + name + "'");
  }
  const json args = record.value("args", json::object());
  if (!args.is_object()) {
    throw ConfigError("'args' must be an object");
  }
  TraceOp op;
  op.kind = it->first;
  if (args.contains("thread")) {
    op.thread = static_cast<std::uint32_t>(need_u64(args, "thread"));
  }
  switch (op.kind) {
    case TraceOpKind::write:
      op.offset = need_u64(args, "offset");
      if (!args.contains("data") || !args.at("data").is_string()) {
        throw ConfigError("write needs hex string 'data'");
      }
      op.data = from_hex(args.at("data").get<std::string>());
      op.size = op.data.size();
      break;
    case TraceOpKind::store:
      op.offset = need_u64(args, "offset");
      op.size = need_u64(args, "size");
      op.value = need_u64(args, "value");
      if (op.size != 1 && op.size != 2 && op.size != 4 && op.size != 8) {
        throw ConfigError("store size must be 1, 2, 4 or 8");
      }
      break;
    case TraceOpKind::memset:
      op.offset = need_u64(args, "offset");
      op.size = need_u64(args, "size");
      op.value = need_u64(args, "value") & 0xff;
      break;
    case TraceOpKind::memcpy:
    case TraceOpKind::memmove:
      op.offset = need_u64(args, "dst");
      op.src = need_u64(args, "src");
      op.size = need_u64(args, "size");
      break;
    case TraceOpKind::sync:
      break;
    case TraceOpKind::alloc:
      op.size = need_u64(args, "size");
      break;
    case TraceOpKind::free:
      op.handle = need_u64(args, "handle");
      break;
    case TraceOpKind::root_set:
      if (args.contains("handle") && !args.at("handle").is_null()) {
        op.handle = need_u64(args, "handle");
      }
      break;
    case TraceOpKind::put:
      op.key = need_u64(args, "key");
      op.value = need_u64(args, "value");
      break;
    case TraceOpKind::remove:
      op.key = need_u64(args, "key");
      break;
  }
  return op;
}

json encode_op(const TraceOp& op) {
  json args = json::object();
  switch (op.kind) {
    case TraceOpKind::write:
      args["offset"] = op.offset;
      args["data"] = to_hex(op.data);
      break;
    case TraceOpKind::store:
      args["offset"] = op.offset;
      args["size"] = op.size;
      args["value"] = op.value;
      break;
    case TraceOpKind::memset:
      args["offset"] = op.offset;
      args["size"] = op.size;
      args["value"] = op.value;
      break;
    case TraceOpKind::memcpy:
    case TraceOpKind::memmove:
      args["dst"] = op.offset;
      args["src"] = op.src;
      args["size"] = op.size;
      break;
    case TraceOpKind::sync:
      break;
    case TraceOpKind::alloc:
      args["size"] = op.size;
      break;
    case TraceOpKind::free:
      args["handle"] = op.handle.value_or(0);
      break;
    case TraceOpKind::root_set:
      args["handle"] = op.handle ? json(*op.handle) : json(nullptr);
      break;
    case TraceOpKind::put:
      args["key"] = op.key;
      args["value"] = op.value;
      break;
    case TraceOpKind::remove:
      args["key"] = op.key;
      break;
  }
  if (op.thread != 0) {
    args["thread"] = op.thread;
  }
  json record = {{"op", std::string(to_string(op.kind))}};
  if (!args.empty()) {
    record["args"] = std::move(args);
  }
  return record;
}

}  // namespace

std::string_view to_string(TraceOpKind kind) noexcept {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::string_view to_string(TraceKind kind) noexcept {
  switch (kind) {
    case TraceKind::raw: return "raw";
    case TraceKind::heap: return "heap";
    case TraceKind::kv: return "kv";
  }
  return "?";
}

TraceKind classify(const Trace& trace) {
  std::optional<TraceKind> kind;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    TraceKind k;
    switch (trace[i].kind) {
      case TraceOpKind::sync:
        continue;
      case TraceOpKind::alloc:
      case TraceOpKind::free:
      case TraceOpKind::root_set:
        k = TraceKind::heap;
        break;
      case TraceOpKind::put:
      case TraceOpKind::remove:
        k = TraceKind::kv;
        break;
      default:
        k = TraceKind::raw;
        break;
    }
    if (kind && *kind != k) {
      throw ConfigError("op " + std::to_string(i) + " (" + std::string(to_string(trace[i].kind)) +
                        ") mixes " + std::string(to_string(k)) + " ops into a " +
                        std::string(to_string(*kind)) + " trace");
    }
    kind = k;
  }
  return kind.value_or(TraceKind::raw);
}

std::size_t sync_count(const Trace& trace) noexcept {
  return static_cast<std::size_t>(std::count_if(
      trace.begin(), trace.end(), [](const TraceOp& op) { return op.kind == TraceOpKind::sync; }));
}

Trace parse_trace(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("trace is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) {
    throw ConfigError("trace must be a JSON array");
  }
  Trace trace;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    try {
      trace.push_back(decode_op(doc[i]));
    } catch (const ConfigError& e) {
      throw ConfigError("trace record " + std::to_string(i) + ": " + e.what());
    }
  }
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open trace " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_trace(buffer.str());
}

std::string dump_trace(const Trace& trace, int indent) {
  json doc = json::array();
  for (const auto& op : trace) {
    doc.push_back(encode_op(op));
  }
  return doc.dump(indent);
}

Trace random_trace(std::mt19937_64& rng, const RandomTraceOptions& options) {
  const auto threads = options.kind == TraceKind::raw ? std::max<std::uint32_t>(options.threads, 1) : 1;
  const std::uint64_t slice = options.region_size / threads;
  if (slice < 16 || options.max_ops == 0) {
    throw ConfigError("random traces need at least 16 bytes per thread and one op");
  }
  auto below = [&](std::uint64_t n) { return n == 0 ? 0 : rng() % n; };

  const std::size_t ops = 1 + below(options.max_ops);
  const std::size_t syncs = below(options.max_syncs + 1);
  std::vector<bool> is_sync(ops + syncs, false);
  for (std::size_t placed = 0; placed < syncs;) {
    const auto at = below(is_sync.size());
    if (!is_sync[at]) {
      is_sync[at] = true;
      ++placed;
    }
  }

  Trace trace;
  std::vector<std::uint64_t> live;  // heap handles
  std::uint64_t allocs = 0;
  for (bool sync : is_sync) {
    TraceOp op;
    if (sync) {
      trace.push_back(op);
      continue;
    }
    switch (options.kind) {
      case TraceKind::raw: {
        op.thread = static_cast<std::uint32_t>(below(threads));
        const auto base = op.thread * slice;
        const auto pick = below(100);
        auto place = [&](std::uint64_t size, std::uint64_t align) {
          return base + below((slice - size) / align + 1) * align;
        };
        if (pick < 30) {
          op.kind = TraceOpKind::write;
          op.size = 1 + below(16);
          op.offset = place(op.size, 1);
          for (std::uint64_t i = 0; i < op.size; ++i) {
            op.data.push_back(static_cast<std::byte>(rng()));
          }
        } else if (pick < 60) {
          op.kind = TraceOpKind::store;
          op.size = std::uint64_t{1} << below(4);
          op.offset = place(op.size, op.size);
          op.value = rng() & (op.size == 8 ? ~std::uint64_t{0} : (std::uint64_t{1} << (8 * op.size)) - 1);
        } else if (pick < 75) {
          op.kind = TraceOpKind::memset;
          op.size = 1 + below(std::min<std::uint64_t>(24, slice));
          op.offset = place(op.size, 1);
          op.value = rng() & 0xff;
        } else if (pick < 85) {
          op.kind = TraceOpKind::memcpy;
          op.size = 1 + below(std::min<std::uint64_t>(16, slice / 2));
          op.offset = place(op.size, 1);
          do {
            op.src = below(options.region_size - op.size + 1);
          } while (op.src < op.offset + op.size && op.offset < op.src + op.size);
        } else {
          op.kind = TraceOpKind::memmove;
          op.size = 1 + below(16);
          op.offset = place(op.size, 1);
          op.src = place(op.size, 1);
        }
        break;
      }
      case TraceKind::heap: {
        const auto pick = below(100);
        if (live.empty() || pick < 50) {
          op.kind = TraceOpKind::alloc;
          op.size = 8 + below(41);
          live.push_back(allocs++);
        } else if (pick < 80) {
          op.kind = TraceOpKind::free;
          const auto i = below(live.size());
          op.handle = live[i];
          live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
          op.kind = TraceOpKind::root_set;
          if (below(5) != 0) {
            op.handle = live[below(live.size())];
          }
        }
        break;
      }
      case TraceKind::kv:
        op.key = below(options.key_space);
        if (below(100) < 65) {
          op.kind = TraceOpKind::put;
          op.value = rng();
        } else {
          op.kind = TraceOpKind::remove;
        }
        break;
    }
    trace.push_back(std::move(op));
  }
  return trace;
}

}  // namespace famsync
