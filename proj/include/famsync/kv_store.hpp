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
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "famsync/heap.hpp"

namespace famsync {

namespace kv_layout {
inline constexpr std::uint64_t kMagic = 0x314254564B4D4146ull;  // "FAMKVTB1"
// Table header, pointed to by the heap root.
inline constexpr std::size_t kMagicAt = 0;
inline constexpr std::size_t kBucketCountAt = 8;
inline constexpr std::size_t kValueSizeAt = 16;
inline constexpr std::size_t kBucketsAt = 24;
inline constexpr std::uint64_t kTableSize = 32;
// Bucket descriptor: records offset, size, capacity.
inline constexpr std::uint64_t kBucketSize = 24;
inline constexpr std::uint64_t kInitialCapacity = 4;
}  // namespace kv_layout

using KvContents = std::map<std::uint64_t, std::vector<std::byte>>;

struct KvOptions {
  std::uint64_t bucket_count = 1024;
  std::uint32_t value_size = 8;
  /// Sync after every put and remove.
  bool sync_each_op = true;
};

/// Hash table whose buckets are growable arrays of (key, value) records, all
/// allocated from the persistent heap.
///
/// Concurrent callers must not share buckets between syncs; partition keys
/// with owner_of(). Bucket growth allocates from the shared heap and is
/// serialized together with its sync.
class KvStore {
 public:
  /// Creates an empty table, installs it as the heap root and syncs.
  KvStore(Heap& heap, const KvOptions& options);
  /// Attaches to the table at the heap root. Throws CorruptionError.
  explicit KvStore(Heap& heap);

  /// Inserts or overwrites. Returns true if the key was new.
  bool put(std::uint64_t key, std::span<const std::byte> value);
  bool put_u64(std::uint64_t key, std::uint64_t value);
  std::optional<std::vector<std::byte>> get(std::uint64_t key) const;
  /// Returns false if the key is absent.
  bool remove(std::uint64_t key);
  /// Up to `n` records starting at the bucket of `start_key`, keys ascending
  /// within each bucket, buckets in index order.
  std::vector<std::pair<std::uint64_t, std::vector<std::byte>>> scan(std::uint64_t start_key,
                                                                     std::size_t n) const;

  KvContents contents() const;
  std::uint64_t bucket_of(std::uint64_t key) const noexcept;
  /// Partition owning `key` when `parts` threads split the table.
  std::uint64_t owner_of(std::uint64_t key, std::uint64_t parts) const noexcept {
    return bucket_of(key) % parts;
  }

  std::uint64_t bucket_count() const noexcept { return bucket_count_; }
  std::uint32_t value_size() const noexcept { return value_size_; }
  void set_sync_each_op(bool on) noexcept { sync_each_op_ = on; }

  /// Decodes a table from a data-area image. Throws CorruptionError.
  static KvContents decode_image(std::span<const std::byte> data_area);

 private:
  struct Found {
    std::uint64_t bucket_desc;
    std::uint64_t index;
    bool found;
  };

  std::uint64_t stride() const noexcept { return 8 + align_up(value_size_, 8); }
  std::uint64_t u64(std::uint64_t offset) const;
  void set_u64(std::uint64_t offset, std::uint64_t value);
  Found find(std::uint64_t key) const;
  void grow(std::uint64_t desc);

  Heap& heap_;
  Region& region_;
  std::uint64_t table_ = 0;
  std::uint64_t bucket_count_ = 0;
  std::uint32_t value_size_ = 0;
  std::uint64_t buckets_ = 0;
  bool sync_each_op_ = true;
  std::unique_ptr<std::mutex> grow_mutex_ = std::make_unique<std::mutex>();
};

}  // namespace famsync
