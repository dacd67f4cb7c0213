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

#include "famsync/heap.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "famsync/error.hpp"

namespace famsync {

using namespace heap_layout;

std::vector<std::uint64_t> HeapWalk::live_payloads() const {
  std::vector<std::uint64_t> out;
  for (const auto& b : blocks) {
    if (!b.free) out.push_back(b.payload());
  }
  return out;
}

std::vector<std::uint64_t> HeapWalk::free_blocks() const {
  std::vector<std::uint64_t> out;
  for (const auto& b : blocks) {
    if (b.free) out.push_back(b.offset);
  }
  return out;
}

HeapWalk walk_heap(std::span<const std::byte> data) {
  HeapWalk walk;
  const auto end = align_down(data.size(), 8);
  if (end < kHeaderSize) {
    walk.problems.push_back("data area too small for a heap header");
    return walk;
  }
  if (load_u64(data, kMagicAt) != kMagic) {
    walk.problems.push_back("heap magic missing");
    return walk;
  }
  walk.root = load_u64(data, kRootAt);
  walk.free_head = load_u64(data, kFreeHeadAt);
  walk.high_water = load_u64(data, kHighWaterAt);
  if (walk.high_water < kHeaderSize || walk.high_water > end || walk.high_water % 8 != 0) {
    walk.problems.push_back("high water mark " + std::to_string(walk.high_water) +
                            " out of range");
    return walk;
  }
  if (walk.root >= end) {
    walk.problems.push_back("root offset out of range");
  }

  std::uint64_t at = kHeaderSize;
  while (at < walk.high_water) {
    const auto size = load_u64(data, at);
    if (size < kMinBlockSize || size % 8 != 0 || size > walk.high_water - at) {
      walk.problems.push_back("bad block size " + std::to_string(size) + " at " +
                              std::to_string(at));
      return walk;
    }
    walk.blocks.push_back({at, size, false});
    at += size;
  }

  std::unordered_set<std::uint64_t> seen;
  for (auto cur = walk.free_head; cur != 0;) {
    auto it = std::lower_bound(walk.blocks.begin(), walk.blocks.end(), cur,
                               [](const HeapBlock& b, std::uint64_t off) { return b.offset < off; });
    if (it == walk.blocks.end() || it->offset != cur) {
      walk.problems.push_back("free list entry " + std::to_string(cur) + " is not a block");
      break;
    }
    if (!seen.insert(cur).second) {
      walk.problems.push_back("free list cycles at " + std::to_string(cur));
      break;
    }
    it->free = true;
    cur = load_u64(data, cur + kBlockHeaderSize);
  }
  return walk;
}

Heap::Heap(Region& region, HeapOptions options)
    : region_(region), options_(options), end_(align_down(region.size(), 8)) {
  if (end_ < kHeaderSize + kMinBlockSize) {
    throw ConfigError("region too small for a heap");
  }
  const auto magic = field(kMagicAt);
  if (magic == 0) {
    set_field(kRootAt, 0);
    set_field(kFreeHeadAt, 0);
    set_field(kHighWaterAt, kHeaderSize);
    set_field(kMagicAt, kMagic);
    region_.fa_msync();
    return;
  }
  if (magic != kMagic) {
    throw CorruptionError("heap header magic is damaged");
  }
  const auto hw = field(kHighWaterAt);
  const auto head = field(kFreeHeadAt);
  if (hw < kHeaderSize || hw > end_ || hw % 8 != 0 || head >= hw || field(kRootAt) >= end_) {
    throw CorruptionError("heap header fields are out of range");
  }
}

std::uint64_t Heap::field(std::size_t at) const { return load_u64(region_.working_image(), at); }

void Heap::set_field(std::uint64_t at, std::uint64_t value) {
  region_.tracked_store(reinterpret_cast<std::uint64_t*>(region_.from_offset(at)), value);
}

void Heap::link(std::uint64_t prev, std::uint64_t next) {
  set_field(prev == 0 ? kFreeHeadAt : prev + kBlockHeaderSize, next);
}

std::uint64_t Heap::alloc(std::uint64_t size) {
  if (size > end_) {
    throw OutOfMemoryError("allocation of " + std::to_string(size) + " bytes exceeds the heap");
  }
  const auto need = kBlockHeaderSize + std::max<std::uint64_t>(8, align_up(size, 8));
  std::lock_guard lock(mutex_);

  std::uint64_t prev = 0;
  for (auto cur = field(kFreeHeadAt); cur != 0;) {
    const auto block_size = field(cur);
    const auto next = field(cur + kBlockHeaderSize);
    if (block_size >= need) {
      const auto rest = block_size - need;
      if (rest >= kMinBlockSize) {
        // Split: the tail stays on the free list in this block's place.
        const auto tail = cur + need;
        std::array<std::uint64_t, 2> tail_header{rest, next};
        region_.tracked_write(region_.from_offset(tail), std::as_bytes(std::span(tail_header)));
        set_field(cur, need);
        link(prev, tail);
      } else {
        link(prev, next);
      }
      return cur + kBlockHeaderSize;
    }
    prev = cur;
    cur = next;
  }

  const auto hw = field(kHighWaterAt);
  if (need > end_ - hw) {
    throw OutOfMemoryError("heap exhausted: " + std::to_string(need) + " bytes needed, " +
                           std::to_string(end_ - hw) + " left");
  }
  set_field(hw, need);
  set_field(kHighWaterAt, hw + need);
  return hw + kBlockHeaderSize;
}

void Heap::free(std::uint64_t payload_offset) {
  std::lock_guard lock(mutex_);
  if (payload_offset < kHeaderSize + kBlockHeaderSize || payload_offset >= field(kHighWaterAt)) {
    throw ContractError("free of offset " + std::to_string(payload_offset) +
                        " outside the heap");
  }
  const auto block = payload_offset - kBlockHeaderSize;
  if (options_.debug_checks) {
    const auto w = walk();
    auto it = std::find_if(w.blocks.begin(), w.blocks.end(),
                           [&](const HeapBlock& b) { return b.offset == block; });
    if (it == w.blocks.end()) {
      throw ContractError("free of " + std::to_string(payload_offset) + ": not a block");
    }
    if (it->free) {
      throw ContractError("double free of " + std::to_string(payload_offset));
    }
  }
  set_field(block + kBlockHeaderSize, field(kFreeHeadAt));
  set_field(kFreeHeadAt, block);
}

void Heap::set_root(std::uint64_t offset) {
  if (offset >= end_) {
    throw RangeError("root offset outside the heap");
  }
  std::lock_guard lock(mutex_);
  set_field(kRootAt, offset);
}

std::uint64_t Heap::root() const { return field(kRootAt); }

}  // namespace famsync
