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

// Kill-and-recover driver for a key-value store on a real file. A child
// process runs a deterministic op stream and acknowledges every op after it
// returns; it is killed at a chosen media op. The parent then reopens the
// file and compares the store with an oracle replay.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "famsync/kv_store.hpp"

namespace famsync::testing {

struct KillRunConfig {
  std::filesystem::path file;
  std::uint64_t ops = 10000;
  std::uint64_t seed = 1;
  std::uint64_t key_space = 1024;
  std::uint64_t region_size = std::uint64_t{8} << 20;
  std::uint64_t buckets = 256;
};

struct KvOp {
  enum Kind { get, put, remove } kind;
  std::uint64_t key;
  std::uint64_t value;
};

inline std::vector<KvOp> kill_run_ops(const KillRunConfig& c) {
  std::mt19937_64 rng(c.seed);
  std::vector<KvOp> ops(c.ops);
  for (auto& op : ops) {
    const auto r = rng() % 10;
    op.kind = r < 6 ? KvOp::put : r < 8 ? KvOp::remove : KvOp::get;
    op.key = rng() % c.key_space;
    op.value = rng();
  }
  return ops;
}

inline KvContents kill_run_oracle(const std::vector<KvOp>& ops, std::uint64_t applied) {
  KvContents m;
  for (std::uint64_t i = 0; i < applied && i < ops.size(); ++i) {
    const auto& op = ops[i];
    if (op.kind == KvOp::put) {
      std::vector<std::byte> v(8);
      store_u64(v, 0, op.value);
      m[op.key] = std::move(v);
    } else if (op.kind == KvOp::remove) {
      m.erase(op.key);
    }
  }
  return m;
}

inline MediaConfig kill_run_media(const KillRunConfig& c, MediaMode mode) {
  MediaConfig m;
  m.capacity_bytes = Layout{c.region_size, 1, std::uint64_t{1} << 20}.capacity();
  m.line_size = 64;
  m.mode = mode;
  m.path = c.file;
  return m;
}

/// Opens the store and runs the ops. `ack(n)` is called once the store
/// exists (n = 0) and after each op returns (n = ops done).
template <class Ack>
void kill_run_drive(Media& media, const KillRunConfig& c, const std::vector<KvOp>& ops, Ack&& ack) {
  RegionConfig rc;
  rc.region_size = c.region_size;
  rc.max_threads = 1;
  rc.slot_size = std::uint64_t{1} << 20;
  rc.reserve_size = std::uint64_t{1} << 30;
  auto region = Region::open(media, rc);
  Heap heap(*region);
  KvStore kv(heap, KvOptions{.bucket_count = c.buckets});
  ack(0);
  for (std::uint64_t i = 0; i < ops.size(); ++i) {
    const auto& op = ops[i];
    if (op.kind == KvOp::put) {
      kv.put_u64(op.key, op.value);
    } else if (op.kind == KvOp::remove) {
      kv.remove(op.key);
    } else {
      (void)kv.get(op.key);
    }
    ack(i + 1);
  }
}

struct KillRunResult {
  std::uint64_t kill_at = 0;
  std::uint64_t setup_ops = 0;
  std::uint64_t total_ops = 0;
  bool killed = false;
  std::optional<std::uint64_t> acked;
  /// Ops applied by the recovered store: acked, or acked + 1 when the
  /// in-flight op's sync had already committed.
  std::optional<std::uint64_t> recovered_ops;
  std::string error;

  bool ok() const { return killed && error.empty() && recovered_ops.has_value(); }
};

/// One full run: simulated dry run to count media ops, forked real-file run
/// killed at a random op after setup, then recovery and comparison.
inline KillRunResult kill_run(const KillRunConfig& c) {
  KillRunResult res;
  const auto ops = kill_run_ops(c);
  {
    SimulatedMedia dry(kill_run_media(c, MediaMode::simulated));
    kill_run_drive(dry, c, ops, [&](std::uint64_t n) {
      if (n == 0) res.setup_ops = dry.op_count();
    });
    res.total_ops = dry.op_count();
  }
  std::mt19937_64 rng(c.seed ^ 0x9E3779B97F4A7C15ull);
  res.kill_at = res.setup_ops + rng() % (res.total_ops - res.setup_ops);

  std::filesystem::remove(c.file);
  int fds[2];
  if (::pipe(fds) != 0) {
    res.error = "pipe failed";
    return res;
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    res.error = "fork failed";
    return res;
  }
  if (pid == 0) {
    ::close(fds[0]);
    try {
      RealFileMedia media(kill_run_media(c, MediaMode::real_file));
      media.set_kill_point(res.kill_at);
      kill_run_drive(media, c, ops, [&](std::uint64_t n) {
        if (::write(fds[1], &n, sizeof n) != sizeof n) ::_exit(3);
      });
    } catch (...) {
      ::_exit(2);
    }
    ::_exit(0);
  }
  ::close(fds[1]);
  std::uint64_t n = 0;
  for (;;) {
    const auto got = ::read(fds[0], &n, sizeof n);
    if (got == static_cast<ssize_t>(sizeof n)) {
      res.acked = n;
    } else if (got < 0 && errno == EINTR) {
      continue;
    } else {
      break;
    }
  }
  ::close(fds[0]);
  int status = 0;
  ::waitpid(pid, &status, 0);
  res.killed = WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL;
  if (!res.killed) {
    res.error = "child was not killed (status " + std::to_string(status) + ")";
    return res;
  }
  if (!res.acked) {
    res.error = "child died before the store existed";
    return res;
  }

  try {
    auto mc = kill_run_media(c, MediaMode::real_file);
    mc.capacity_bytes = 0;
    RealFileMedia media(mc);
    auto region = Region::open(media, RegionConfig{.reserve_size = std::uint64_t{1} << 30});
    Heap heap(*region);
    if (!heap.walk().ok()) {
      res.error = "heap walk: " + heap.walk().problems.front();
      return res;
    }
    const auto got = KvStore(heap).contents();
    for (auto applied : {*res.acked, *res.acked + 1}) {
      if (applied <= ops.size() && got == kill_run_oracle(ops, applied)) {
        res.recovered_ops = applied;
        break;
      }
    }
    if (!res.recovered_ops) {
      res.error = "recovered store matches neither op " + std::to_string(*res.acked) + " nor the next";
    }
  } catch (const std::exception& e) {
    res.error = std::string("recovery failed: ") + e.what();
  }
  std::filesystem::remove(c.file);
  return res;
}

}  // namespace famsync::testing
