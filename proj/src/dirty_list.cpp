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

#include "famsync/dirty_list.hpp"

#include <algorithm>

#include "famsync/layout.hpp"

namespace famsync {

std::vector<DirtyRecord> coalesce(std::vector<DirtyRecord> ranges) {
  std::erase_if(ranges, [](const DirtyRecord& r) { return r.size == 0; });
  std::sort(ranges.begin(), ranges.end(),
            [](const DirtyRecord& a, const DirtyRecord& b) { return a.offset < b.offset; });
  std::vector<DirtyRecord> merged;
  merged.reserve(ranges.size());
  for (const auto& r : ranges) {
    if (!merged.empty() && r.offset <= merged.back().end()) {
      auto& last = merged.back();
      last.size = std::max(last.end(), r.end()) - last.offset;
    } else {
      merged.push_back(r);
    }
  }
  return merged;
}

std::vector<DirtyRecord> dirty_coalesce(std::span<const DirtyList* const> lists) {
  std::vector<DirtyRecord> all;
  std::size_t n = 0;
  for (const auto* list : lists) {
    n += list->records().size();
  }
  all.reserve(n);
  for (const auto* list : lists) {
    all.insert(all.end(), list->records().begin(), list->records().end());
  }
  return coalesce(std::move(all));
}

std::vector<DirtyRecord> widen(std::span<const DirtyRecord> ranges, std::uint64_t granularity,
                               std::uint64_t limit) {
  std::vector<DirtyRecord> out;
  out.reserve(ranges.size());
  for (const auto& r : ranges) {
    const auto begin = align_down(r.offset, granularity);
    const auto end = std::min(align_up(r.end(), granularity), limit);
    if (!out.empty() && begin <= out.back().end()) {
      out.back().size = std::max(out.back().end(), end) - out.back().offset;
    } else {
      out.push_back({begin, end - begin});
    }
  }
  return out;
}

void dirty_clear(std::span<DirtyList* const> lists) noexcept {
  for (auto* list : lists) {
    list->clear();
  }
}

std::uint64_t total_bytes(std::span<const DirtyRecord> ranges) noexcept {
  std::uint64_t n = 0;
  for (const auto& r : ranges) {
    n += r.size;
  }
  return n;
}

}  // namespace famsync
