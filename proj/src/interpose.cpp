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

#include <bit>
#include <cstring>
#include <string>

#include "famsync/error.hpp"
#include "famsync/region.hpp"

namespace famsync {

void Region::check_span(const void* addr, std::size_t n, const char* what) const {
  const auto a = reinterpret_cast<std::uintptr_t>(addr);
  const auto base = reinterpret_cast<std::uintptr_t>(working_);
  if (n == 0 || a < base || a - base > layout_.region_size || n > layout_.region_size - (a - base)) {
    throw RangeError(std::string(what) + ": " + std::to_string(n) +
                     " bytes are not inside the working range");
  }
}

void Region::log_store(std::uint64_t offset, std::uint64_t size) {
  auto& slot = slots_[thread_slot()];
  if (policy_.scheme != SyncScheme::wal) {
    slot.log(generation_).append(media_, generation_, offset, std::span(working_ + offset, size));
  }
  slot.dirty.record(offset, size);
}

void Region::on_store(const void* addr, std::size_t size) {
  if (!in_working_range(addr)) {
    return;
  }
  if (size == 0 || size > 8 || !std::has_single_bit(size)) {
    throw RangeError("scalar store size must be 1, 2, 4 or 8, got " + std::to_string(size));
  }
  check_span(addr, size, "on_store");
  log_store(to_offset(addr), size);
}

void Region::tracked_write(void* dst, std::span<const std::byte> data) {
  check_span(dst, data.size(), "tracked_write");
  std::shared_lock lock(sync_mutex_);
  log_store(to_offset(dst), data.size());
  std::memcpy(dst, data.data(), data.size());
}

void Region::tracked_memcpy(void* dst, const void* src, std::size_t n) {
  check_span(dst, n, "tracked_memcpy");
  std::shared_lock lock(sync_mutex_);
  log_store(to_offset(dst), n);
  std::memmove(dst, src, n);
}

void Region::tracked_memset(void* dst, std::byte value, std::size_t n) {
  check_span(dst, n, "tracked_memset");
  std::shared_lock lock(sync_mutex_);
  log_store(to_offset(dst), n);
  std::memset(dst, std::to_integer<int>(value), n);
}

void Region::tracked_memmove(void* dst, const void* src, std::size_t n) {
  check_span(dst, n, "tracked_memmove");
  check_span(src, n, "tracked_memmove source");
  std::shared_lock lock(sync_mutex_);
  log_store(to_offset(dst), n);
  std::memmove(dst, src, n);
}

}  // namespace famsync
