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

#include "famsync/kv_store.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "famsync/error.hpp"

namespace famsync {

using namespace kv_layout;

namespace {

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kInitChunk = 256 * 1024;

}  // namespace

KvStore::KvStore(Heap& heap, const KvOptions& options)
    : heap_(heap),
      region_(heap.region()),
      bucket_count_(options.bucket_count),
      value_size_(options.value_size),
      sync_each_op_(options.sync_each_op) {
  if (bucket_count_ == 0 || value_size_ == 0) {
    throw ConfigError("bucket_count and value_size must be non-zero");
  }
  table_ = heap_.alloc(kTableSize);
  buckets_ = heap_.alloc(bucket_count_ * kBucketSize);
  // Descriptors are cleared in bounded chunks so a large table never
  // overflows one undo log slot. A crash before the root is set leaks the
  // two blocks but leaves the heap consistent.
  const auto total = bucket_count_ * kBucketSize;
  for (std::uint64_t done = 0; done < total; done += kInitChunk) {
    const auto n = std::min(kInitChunk, total - done);
    region_.tracked_memset(region_.from_offset(buckets_ + done), std::byte{0}, n);
    if (done + n < total) {
      region_.fa_msync();
    }
  }
  const std::uint64_t header[] = {kMagic, bucket_count_, value_size_, buckets_};
  region_.tracked_write(region_.from_offset(table_), std::as_bytes(std::span(header)));
  heap_.set_root(table_);
  region_.fa_msync();
}

KvStore::KvStore(Heap& heap) : heap_(heap), region_(heap.region()) {
  table_ = heap_.root();
  if (table_ == 0 || table_ + kTableSize > region_.size() || u64(table_ + kMagicAt) != kMagic) {
    throw CorruptionError("heap root does not point at a key-value table");
  }
  bucket_count_ = u64(table_ + kBucketCountAt);
  const auto value_size = u64(table_ + kValueSizeAt);
  buckets_ = u64(table_ + kBucketsAt);
  if (bucket_count_ == 0 || value_size == 0 || value_size > UINT32_MAX ||
      buckets_ > region_.size() || bucket_count_ > (region_.size() - buckets_) / kBucketSize) {
    throw CorruptionError("key-value table header is out of range");
  }
  value_size_ = static_cast<std::uint32_t>(value_size);
}

std::uint64_t KvStore::u64(std::uint64_t offset) const {
  return load_u64(region_.working_image(), offset);
}

void KvStore::set_u64(std::uint64_t offset, std::uint64_t value) {
  region_.tracked_store(reinterpret_cast<std::uint64_t*>(region_.from_offset(offset)), value);
}

std::uint64_t KvStore::bucket_of(std::uint64_t key) const noexcept {
  return mix64(key) % bucket_count_;
}

KvStore::Found KvStore::find(std::uint64_t key) const {
  const auto desc = buckets_ + bucket_of(key) * kBucketSize;
  const auto records = u64(desc);
  const auto size = u64(desc + 8);
  for (std::uint64_t i = 0; i < size; ++i) {
    if (u64(records + i * stride()) == key) {
      return {desc, i, true};
    }
  }
  return {desc, size, false};
}

void KvStore::grow(std::uint64_t desc) {
  const auto old = u64(desc);
  const auto size = u64(desc + 8);
  const auto capacity = u64(desc + 16);
  const auto next_capacity = std::max(kInitialCapacity, capacity * 2);
  const auto fresh = heap_.alloc(next_capacity * stride());
  if (size > 0) {
    region_.tracked_memcpy(region_.from_offset(fresh), region_.from_offset(old), size * stride());
  }
  set_u64(desc, fresh);
  set_u64(desc + 16, next_capacity);
  if (old != 0) {
    heap_.free(old);
  }
}

bool KvStore::put(std::uint64_t key, std::span<const std::byte> value) {
  if (value.size() != value_size_) {
    throw RangeError("value must be exactly " + std::to_string(value_size_) + " bytes");
  }
  std::unique_lock grow_lock(*grow_mutex_, std::defer_lock);
  const auto f = find(key);
  if (f.found) {
    const auto at = u64(f.bucket_desc) + f.index * stride() + 8;
    region_.tracked_write(region_.from_offset(at), value);
  } else {
    if (f.index == u64(f.bucket_desc + 16)) {
      grow_lock.lock();
      grow(f.bucket_desc);
    }
    std::vector<std::byte> record(stride());
    store_u64(record, 0, key);
    std::memcpy(record.data() + 8, value.data(), value.size());
    const auto at = u64(f.bucket_desc) + f.index * stride();
    region_.tracked_write(region_.from_offset(at), record);
    set_u64(f.bucket_desc + 8, f.index + 1);
  }
  if (sync_each_op_) {
    region_.fa_msync();
  }
  return !f.found;
}

bool KvStore::put_u64(std::uint64_t key, std::uint64_t value) {
  std::vector<std::byte> bytes(value_size_);
  std::memcpy(bytes.data(), &value, std::min<std::size_t>(8, bytes.size()));
  return put(key, bytes);
}

std::optional<std::vector<std::byte>> KvStore::get(std::uint64_t key) const {
  const auto f = find(key);
  if (!f.found) {
    return std::nullopt;
  }
  const auto at = u64(f.bucket_desc) + f.index * stride() + 8;
  const auto image = region_.working_image();
  return std::vector<std::byte>(image.begin() + static_cast<std::ptrdiff_t>(at),
                                image.begin() + static_cast<std::ptrdiff_t>(at + value_size_));
}

bool KvStore::remove(std::uint64_t key) {
  const auto f = find(key);
  if (!f.found) {
    return false;
  }
  const auto records = u64(f.bucket_desc);
  const auto last = u64(f.bucket_desc + 8) - 1;
  if (f.index != last) {
    region_.tracked_memcpy(region_.from_offset(records + f.index * stride()),
                           region_.from_offset(records + last * stride()), stride());
  }
  set_u64(f.bucket_desc + 8, last);
  if (sync_each_op_) {
    region_.fa_msync();
  }
  return true;
}

std::vector<std::pair<std::uint64_t, std::vector<std::byte>>> KvStore::scan(
    std::uint64_t start_key, std::size_t n) const {
  std::vector<std::pair<std::uint64_t, std::vector<std::byte>>> out;
  const auto image = region_.working_image();
  for (auto b = bucket_of(start_key); b < bucket_count_ && out.size() < n; ++b) {
    const auto desc = buckets_ + b * kBucketSize;
    const auto records = u64(desc);
    const auto size = u64(desc + 8);
    std::vector<std::pair<std::uint64_t, std::vector<std::byte>>> bucket;
    for (std::uint64_t i = 0; i < size; ++i) {
      const auto at = records + i * stride();
      bucket.emplace_back(u64(at), std::vector<std::byte>(
                                       image.begin() + static_cast<std::ptrdiff_t>(at + 8),
                                       image.begin() + static_cast<std::ptrdiff_t>(at + 8 + value_size_)));
    }
    std::sort(bucket.begin(), bucket.end(),
              [](const auto& a, const auto& c) { return a.first < c.first; });
    for (auto& rec : bucket) {
      if (out.size() == n) break;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

KvContents KvStore::contents() const { return decode_image(region_.working_image()); }

KvContents KvStore::decode_image(std::span<const std::byte> data) {
  auto in_range = [&](std::uint64_t off, std::uint64_t len) {
    return off <= data.size() && len <= data.size() - off;
  };
  if (!in_range(0, heap_layout::kHeaderSize) ||
      load_u64(data, heap_layout::kMagicAt) != heap_layout::kMagic) {
    throw CorruptionError("no heap in image");
  }
  const auto table = load_u64(data, heap_layout::kRootAt);
  if (table == 0 || !in_range(table, kTableSize) || load_u64(data, table) != kMagic) {
    throw CorruptionError("no key-value table in image");
  }
  const auto bucket_count = load_u64(data, table + kBucketCountAt);
  const auto value_size = load_u64(data, table + kValueSizeAt);
  const auto buckets = load_u64(data, table + kBucketsAt);
  if (value_size == 0 || value_size > data.size() || bucket_count > data.size() / kBucketSize ||
      !in_range(buckets, bucket_count * kBucketSize)) {
    throw CorruptionError("key-value table header out of range");
  }
  const auto stride = 8 + align_up(value_size, 8);
  KvContents out;
  for (std::uint64_t b = 0; b < bucket_count; ++b) {
    const auto desc = buckets + b * kBucketSize;
    const auto records = load_u64(data, desc);
    const auto size = load_u64(data, desc + 8);
    const auto capacity = load_u64(data, desc + 16);
    if (size > capacity || capacity > data.size() / stride || !in_range(records, size * stride)) {
      throw CorruptionError("bucket " + std::to_string(b) + " is out of range");
    }
    for (std::uint64_t i = 0; i < size; ++i) {
      const auto at = records + i * stride;
      const auto first = data.begin() + static_cast<std::ptrdiff_t>(at + 8);
      auto [it, inserted] = out.emplace(load_u64(data, at),
                                        std::vector<std::byte>(first, first + static_cast<std::ptrdiff_t>(value_size)));
      if (!inserted) {
        throw CorruptionError("key " + std::to_string(it->first) + " stored twice");
      }
    }
  }
  return out;
}

}  // namespace famsync
