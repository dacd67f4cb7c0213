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
#include <span>
#include <vector>

namespace famsync {

/// A modified byte range of the data area.
struct DirtyRecord {
  std::uint64_t offset = 0;
  std::uint64_t size = 0;

  std::uint64_t end() const noexcept { return offset + size; }
  friend bool operator==(const DirtyRecord&, const DirtyRecord&) = default;
};

/// Volatile per-thread list of ranges touched since the last sync.
class DirtyList {
 public:
  void record(std::uint64_t offset, std::uint64_t size) {
    records_.push_back({offset, size});
    total_ += size;
  }
  void clear() noexcept {
    records_.clear();
    total_ = 0;
  }

  std::span<const DirtyRecord> records() const noexcept { return records_; }
  std::uint64_t total_logged_bytes() const noexcept { return total_; }
  bool empty() const noexcept { return records_.empty(); }

 private:
  std::vector<DirtyRecord> records_;
  std::uint64_t total_ = 0;
};

/// Sorts `ranges` by offset and merges overlapping or adjacent ranges.
std::vector<DirtyRecord> coalesce(std::vector<DirtyRecord> ranges);

/// Coalesces the records of every list.
std::vector<DirtyRecord> dirty_coalesce(std::span<const DirtyList* const> lists);

/// Widens each range outward to `granularity` boundaries, clamps to `limit`
/// and re-merges. Input must be coalesced.
std::vector<DirtyRecord> widen(std::span<const DirtyRecord> ranges, std::uint64_t granularity,
                               std::uint64_t limit);

void dirty_clear(std::span<DirtyList* const> lists) noexcept;

std::uint64_t total_bytes(std::span<const DirtyRecord> ranges) noexcept;

}  // namespace famsync
