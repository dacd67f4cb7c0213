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
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "famsync/region.hpp"

namespace famsync {

/// Heap header at data offset 0. Every offset stored in heap metadata is a
/// data-area offset, so the heap survives remapping.
namespace heap_layout {
inline constexpr std::uint64_t kMagic = 0x31504145484D4146ull;  // "FAMHEAP1"
inline constexpr std::size_t kMagicAt = 0;
inline constexpr std::size_t kRootAt = 8;
inline constexpr std::size_t kFreeHeadAt = 16;
inline constexpr std::size_t kHighWaterAt = 24;
inline constexpr std::uint64_t kHeaderSize = 32;
/// Block header: block size (u64, includes the header). A free block keeps
/// the next free block offset in its first payload word.
inline constexpr std::uint64_t kBlockHeaderSize = 8;
inline constexpr std::uint64_t kMinBlockSize = 16;
}  // namespace heap_layout

struct HeapBlock {
  std::uint64_t offset = 0;  // of the block header
  std::uint64_t size = 0;
  bool free = false;

  std::uint64_t payload() const noexcept { return offset + heap_layout::kBlockHeaderSize; }
  friend bool operator==(const HeapBlock&, const HeapBlock&) = default;
};

/// Result of walking a heap image: blocks in address order and every
/// inconsistency found.
struct HeapWalk {
  std::uint64_t root = 0;
  std::uint64_t free_head = 0;
  std::uint64_t high_water = 0;
  std::vector<HeapBlock> blocks;
  std::vector<std::string> problems;

  bool ok() const noexcept { return problems.empty(); }
  std::vector<std::uint64_t> live_payloads() const;
  std::vector<std::uint64_t> free_blocks() const;
};

/// Checks that blocks tile [header, high_water) exactly and that the free
/// list is acyclic, duplicate-free and made of block starts.
HeapWalk walk_heap(std::span<const std::byte> data_area);

struct HeapOptions {
  /// Validate frees against a full heap walk (catches double frees).
  bool debug_checks = false;
};

/// First-fit free-list allocator inside a region's data area. It has no
/// persistence code of its own: every metadata update is a tracked write, so
/// the region's undo log makes it crash consistent.
class Heap {
 public:
  /// Initializes a blank data area (one sync) or validates an existing heap.
  /// Throws CorruptionError on a damaged header.
  explicit Heap(Region& region, HeapOptions options = {});

  /// Returns the data offset of a payload of at least `size` bytes.
  /// Throws OutOfMemoryError.
  std::uint64_t alloc(std::uint64_t size);
  void free(std::uint64_t payload_offset);

  void set_root(std::uint64_t offset);
  std::uint64_t root() const;

  template <class T>
  T* at(std::uint64_t offset) const {
    return reinterpret_cast<T*>(region_.from_offset(offset));
  }

  HeapWalk walk() const { return walk_heap(region_.working_image()); }
  Region& region() const noexcept { return region_; }

 private:
  std::uint64_t field(std::size_t at) const;
  void set_field(std::uint64_t at, std::uint64_t value);
  void link(std::uint64_t prev, std::uint64_t next);

  Region& region_;
  HeapOptions options_;
  std::uint64_t end_;
  mutable std::mutex mutex_;
};

}  // namespace famsync
