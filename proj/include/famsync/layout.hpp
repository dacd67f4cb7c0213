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

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>

namespace famsync {

static_assert(std::endian::native == std::endian::little,
              "on-media format is little-endian; big-endian hosts need byte swapping");

inline std::uint64_t load_u64(std::span<const std::byte> b, std::size_t at) noexcept {
  std::uint64_t v;
  std::memcpy(&v, b.data() + at, sizeof v);
  return v;
}
inline std::uint32_t load_u32(std::span<const std::byte> b, std::size_t at) noexcept {
  std::uint32_t v;
  std::memcpy(&v, b.data() + at, sizeof v);
  return v;
}
inline void store_u64(std::span<std::byte> b, std::size_t at, std::uint64_t v) noexcept {
  std::memcpy(b.data() + at, &v, sizeof v);
}
inline void store_u32(std::span<std::byte> b, std::size_t at, std::uint32_t v) noexcept {
  std::memcpy(b.data() + at, &v, sizeof v);
}

constexpr std::uint64_t align_up(std::uint64_t v, std::uint64_t a) noexcept {
  return (v + a - 1) / a * a;
}
constexpr std::uint64_t align_down(std::uint64_t v, std::uint64_t a) noexcept {
  return v / a * a;
}

/// Backing file layout.
///
///   [0, 64)             file header
///   [4096, +n*slot)     one undo log slot per thread
///   [data_offset, ...)  data area, 4096-byte aligned
namespace layout {

inline constexpr std::array<char, 8> kMagic{'F', 'A', 'M', 'S', 'Y', 'N', 'C', '1'};
inline constexpr std::uint64_t kFormatVersion = 1;
inline constexpr std::uint64_t kPageSize = 4096;

inline constexpr std::size_t kMagicAt = 0;
inline constexpr std::size_t kVersionAt = 8;
inline constexpr std::size_t kRegionSizeAt = 16;
inline constexpr std::size_t kMaxThreadsAt = 24;
inline constexpr std::size_t kSlotSizeAt = 32;
/// Log generation: the single word whose durable update commits a sync.
inline constexpr std::size_t kGenerationAt = 40;
inline constexpr std::size_t kHeaderSize = 64;

inline constexpr std::uint64_t kSlotsOffset = kPageSize;
inline constexpr std::uint64_t kSlotHeaderSize = 16;
inline constexpr std::uint64_t kEntryHeaderSize = 16;

}  // namespace layout

enum class MagicState { absent, valid, invalid };

struct FileHeader {
  std::uint64_t version = layout::kFormatVersion;
  std::uint64_t region_size = 0;
  std::uint64_t max_threads = 0;
  std::uint64_t slot_size = 0;
  std::uint64_t generation = 0;

  static MagicState check_magic(std::span<const std::byte> header) noexcept;
  static FileHeader decode(std::span<const std::byte> header) noexcept;
  /// Encodes everything except the magic into `out` (kHeaderSize bytes).
  void encode_fields(std::span<std::byte> out) const noexcept;
};

/// Derived geometry of a region's backing file.
struct Layout {
  std::uint64_t region_size = 0;
  std::uint32_t max_threads = 0;
  std::uint64_t slot_size = 0;

  std::uint64_t slot_offset(std::uint32_t slot) const noexcept {
    return layout::kSlotsOffset + std::uint64_t{slot} * slot_size;
  }
  /// Also the size of the log area at the head of the file.
  std::uint64_t data_offset() const noexcept {
    return align_up(layout::kSlotsOffset + std::uint64_t{max_threads} * slot_size,
                    layout::kPageSize);
  }
  std::uint64_t capacity() const noexcept {
    return align_up(data_offset() + region_size, layout::kPageSize);
  }
  /// Each slot holds two logs. Syncs alternate between them by generation
  /// parity, so a sync never overwrites the log of the previous sync.
  std::uint64_t log_size() const noexcept { return slot_size / 2; }
  std::uint64_t log_offset(std::uint32_t slot, std::uint64_t generation) const noexcept {
    return slot_offset(slot) + (generation & 1) * log_size();
  }
  std::uint64_t entry_area_size() const noexcept { return log_size() - layout::kSlotHeaderSize; }

  /// Throws ConfigError on zero sizes or a slot size that is not a multiple
  /// of 4096.
  void validate() const;
};

}  // namespace famsync
