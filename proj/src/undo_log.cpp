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

#include "famsync/undo_log.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "famsync/crc32.hpp"
#include "famsync/error.hpp"

namespace famsync {

SlotHeader SlotHeader::decode(std::span<const std::byte> bytes) noexcept {
  return SlotHeader{static_cast<SlotState>(load_u32(bytes, 0)), load_u64(bytes, 4)};
}

void SlotHeader::encode(std::span<std::byte> out) const noexcept {
  store_u32(out, 0, static_cast<std::uint32_t>(state));
  store_u64(out, 4, tail);
  store_u32(out, 12, 0);
}

std::uint32_t entry_checksum(std::uint64_t generation, std::uint64_t offset,
                             std::span<const std::byte> payload) noexcept {
  std::array<std::byte, 20> head{};
  store_u64(head, 0, generation);
  store_u64(head, 8, offset);
  store_u32(head, 16, static_cast<std::uint32_t>(payload.size()));
  return crc32(payload, crc32(head));
}

void encode_entry(std::span<std::byte> out, std::uint64_t generation, std::uint64_t offset,
                  std::span<const std::byte> payload) noexcept {
  store_u64(out, 0, offset);
  store_u32(out, 8, static_cast<std::uint32_t>(payload.size()));
  store_u32(out, 12, entry_checksum(generation, offset, payload));
  std::memcpy(out.data() + layout::kEntryHeaderSize, payload.data(), payload.size());
  const auto used = layout::kEntryHeaderSize + payload.size();
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(used), out.end(), std::byte{0});
}

SlotScan scan_entries(std::span<const std::byte> entry_area, std::uint64_t limit,
                      std::uint64_t generation, std::uint64_t region_size) {
  SlotScan scan;
  limit = std::min<std::uint64_t>(limit, entry_area.size());
  std::uint64_t pos = 0;
  while (pos < limit) {
    if (limit - pos < layout::kEntryHeaderSize) {
      scan.stopped_early = true;
      break;
    }
    const auto offset = load_u64(entry_area, pos);
    const auto size = load_u32(entry_area, pos + 8);
    const auto checksum = load_u32(entry_area, pos + 12);
    const auto footprint = entry_footprint(size);
    if (size == 0 || footprint > limit - pos || offset > region_size ||
        size > region_size - offset) {
      scan.stopped_early = true;
      break;
    }
    const auto payload = entry_area.subspan(pos + layout::kEntryHeaderSize, size);
    const auto padding = entry_area.subspan(pos + layout::kEntryHeaderSize + size,
                                            footprint - layout::kEntryHeaderSize - size);
    const bool padding_clean =
        std::all_of(padding.begin(), padding.end(), [](std::byte b) { return b == std::byte{0}; });
    if (!padding_clean || entry_checksum(generation, offset, payload) != checksum) {
      scan.stopped_early = true;
      break;
    }
    scan.entries.push_back(LogEntry{pos, offset, size, checksum, payload});
    pos += footprint;
  }
  scan.consumed = pos;
  return scan;
}

std::size_t RecoveryPlan::entry_count() const noexcept {
  std::size_t n = 0;
  for (const auto& slot : slots) {
    n += slot.entries.size();
  }
  return n;
}

RecoveryPlan plan_recovery(std::span<const std::byte> log_area, const Layout& layout,
                           std::uint64_t generation) {
  RecoveryPlan plan;
  for (std::uint32_t slot = 0; slot < layout.max_threads; ++slot) {
    const auto bytes = log_area.subspan(layout.log_offset(slot, generation), layout.log_size());
    const auto header = SlotHeader::decode(bytes);
    if (header.state != SlotState::valid && header.state != SlotState::redo) {
      continue;
    }
    auto scan = scan_entries(bytes.subspan(layout::kSlotHeaderSize), header.tail, generation,
                             layout.region_size);
    if (header.state == SlotState::redo && !scan.complete(header.tail)) {
      scan.entries.clear();
    }
    plan.slots.push_back(SlotPlan{slot, header.state, std::move(scan.entries)});
  }
  return plan;
}

void apply_plan(const RecoveryPlan& plan, std::span<std::byte> data_area) {
  for (const auto& slot : plan.slots) {
    auto apply = [&](const LogEntry& e) {
      std::memcpy(data_area.data() + e.offset, e.payload.data(), e.size);
    };
    if (slot.state == SlotState::redo) {
      std::for_each(slot.entries.begin(), slot.entries.end(), apply);
    } else {
      std::for_each(slot.entries.rbegin(), slot.entries.rend(), apply);
    }
  }
}

UndoLog::UndoLog(std::uint64_t log_offset, std::uint64_t log_size)
    : slot_offset_(log_offset), slot_size_(log_size) {}

void UndoLog::append(Media& media, std::uint64_t generation, std::uint64_t data_offset,
                     std::span<const std::byte> original) {
  const auto footprint = entry_footprint(original.size());
  const auto room = slot_size_ - layout::kSlotHeaderSize;
  if (original.empty() || original.size() > UINT32_MAX) {
    throw RangeError("log entry size must be in [1, 2^32)");
  }
  if (footprint > room - tail_) {
    throw LogFullError("undo log slot full: " + std::to_string(tail_) + " of " +
                       std::to_string(room) + " bytes used, entry needs " +
                       std::to_string(footprint));
  }
  scratch_.resize(footprint);
  encode_entry(scratch_, generation, data_offset, original);
  media.write(slot_offset_ + layout::kSlotHeaderSize + tail_, scratch_);
  tail_ += footprint;
  ++entries_;
  logged_bytes_ += original.size();
  sealed_ = false;
}

void UndoLog::seal(Media& media, SlotState state) {
  std::array<std::byte, layout::kSlotHeaderSize> header{};
  SlotHeader{state, tail_}.encode(header);
  // Reserved bytes stay as they are on the media.
  media.write(slot_offset_, std::span(header).first(12));
  media.flush(slot_offset_, layout::kSlotHeaderSize + tail_);
  sealed_ = true;
}

void UndoLog::reset(Media& media) {
  std::array<std::byte, layout::kSlotHeaderSize> header{};
  SlotHeader{SlotState::invalid, 0}.encode(header);
  media.write(slot_offset_, std::span(header).first(12));
  media.flush(slot_offset_, layout::kSlotHeaderSize);
  clear();
}

void UndoLog::clear() noexcept {
  tail_ = 0;
  entries_ = 0;
  logged_bytes_ = 0;
  sealed_ = false;
}

std::size_t rollback_slot(Media& media, const Layout& layout, std::uint32_t slot,
                          std::uint64_t generation) {
  if (slot >= layout.max_threads) {
    throw RangeError("log slot " + std::to_string(slot) + " does not exist");
  }
  std::vector<std::byte> bytes(layout.log_size());
  media.read(layout.log_offset(slot, generation), bytes);
  const auto header = SlotHeader::decode(bytes);
  if (header.state != SlotState::valid && header.state != SlotState::redo) {
    return 0;
  }
  auto scan = scan_entries(std::span<const std::byte>(bytes).subspan(layout::kSlotHeaderSize),
                           header.tail, generation, layout.region_size);
  if (header.state == SlotState::redo && !scan.complete(header.tail)) {
    scan.entries.clear();
  }
  auto write_back = [&](const LogEntry& e) {
    media.write(layout.data_offset() + e.offset, e.payload);
    media.flush(layout.data_offset() + e.offset, e.size);
  };
  if (header.state == SlotState::redo) {
    std::for_each(scan.entries.begin(), scan.entries.end(), write_back);
  } else {
    std::for_each(scan.entries.rbegin(), scan.entries.rend(), write_back);
  }
  media.fence();
  return scan.entries.size();
}

}  // namespace famsync
