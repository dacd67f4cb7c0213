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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "famsync/layout.hpp"
#include "famsync/media.hpp"

namespace famsync {

enum class SlotState : std::uint32_t {
  invalid = 0,
  valid = 1,  // undo entries, rolled back in reverse
  redo = 2,   // write-ahead records of the wal baseline, replayed forward
};

/// Slot header: state u32 at 0, tail u64 at 4, reserved u32 at 12.
struct SlotHeader {
  SlotState state = SlotState::invalid;
  std::uint64_t tail = 0;  // bytes used in the entry area

  static SlotHeader decode(std::span<const std::byte> bytes) noexcept;
  void encode(std::span<std::byte> out) const noexcept;
};

/// A decoded log entry. `payload` points into the buffer that was scanned.
struct LogEntry {
  std::uint64_t position = 0;  // byte position within the entry area
  std::uint64_t offset = 0;    // data-area offset
  std::uint32_t size = 0;
  std::uint32_t checksum = 0;
  std::span<const std::byte> payload;
};

/// Serialized size of an entry: 16-byte header plus payload padded to 8.
constexpr std::uint64_t entry_footprint(std::uint64_t payload_size) noexcept {
  return layout::kEntryHeaderSize + align_up(payload_size, 8);
}

/// CRC-32 over generation (u64), offset (u64), size (u32) and payload.
/// Mixing in the generation keeps entries left over from an older sync from
/// validating after the slot is reused.
std::uint32_t entry_checksum(std::uint64_t generation, std::uint64_t offset,
                             std::span<const std::byte> payload) noexcept;

/// Writes one entry into `out`, which must be entry_footprint(payload) long.
void encode_entry(std::span<std::byte> out, std::uint64_t generation, std::uint64_t offset,
                  std::span<const std::byte> payload) noexcept;

struct SlotScan {
  std::vector<LogEntry> entries;
  /// Bytes covered by the returned entries.
  std::uint64_t consumed = 0;
  /// True when scanning stopped at a malformed entry before `limit`.
  bool stopped_early = false;

  /// A redo log commits only if every record up to the tail is intact.
  bool complete(std::uint64_t tail) const noexcept { return !stopped_early && consumed == tail; }
};

/// Decodes entries from the start of `entry_area` up to `limit` bytes. Stops
/// at the first entry with a zero size, an out-of-region target, non-zero
/// padding or a checksum mismatch; nothing after it is returned.
SlotScan scan_entries(std::span<const std::byte> entry_area, std::uint64_t limit,
                      std::uint64_t generation, std::uint64_t region_size);

/// Rollback work for one slot found active on the media.
struct SlotPlan {
  std::uint32_t slot = 0;
  SlotState state = SlotState::invalid;
  std::vector<LogEntry> entries;  // log order
};

struct RecoveryPlan {
  std::vector<SlotPlan> slots;

  std::size_t entry_count() const noexcept;
};

/// Plans recovery from the log area bytes [0, layout.data_offset()). Undo
/// slots contribute their valid entry prefix; redo slots contribute all of
/// their records or, if any is damaged or missing, none.
RecoveryPlan plan_recovery(std::span<const std::byte> log_area, const Layout& layout,
                           std::uint64_t generation);

/// Applies a plan to a data-area image: undo slots in reverse log order, redo
/// slots forward. Slot order is not significant under the thread contract.
void apply_plan(const RecoveryPlan& plan, std::span<std::byte> data_area);

/// Volatile writer for one persistent log slot. Thread-confined: only the
/// owning thread appends; seal and reset run under the sync lock.
class UndoLog {
 public:
  /// Covers [log_offset, log_offset + log_size): one of the two logs of a
  /// slot, header first.
  UndoLog(std::uint64_t log_offset, std::uint64_t log_size);

  /// Serializes an entry at the tail and writes it to the media. No flush, no
  /// fence. Throws LogFullError when the entry does not fit.
  void append(Media& media, std::uint64_t generation, std::uint64_t data_offset,
              std::span<const std::byte> original);

  /// Writes the header with `state` and the current tail, then flushes the
  /// header and every entry byte. Does not fence.
  void seal(Media& media, SlotState state = SlotState::valid);

  /// Writes an invalid header with tail 0 and flushes it. Does not fence.
  void reset(Media& media);

  /// Forgets all entries without touching the media.
  void clear() noexcept;

  std::uint64_t slot_offset() const noexcept { return slot_offset_; }
  std::uint64_t slot_size() const noexcept { return slot_size_; }
  std::uint64_t tail() const noexcept { return tail_; }
  std::size_t entry_count() const noexcept { return entries_; }
  std::uint64_t logged_bytes() const noexcept { return logged_bytes_; }
  bool empty() const noexcept { return entries_ == 0; }
  bool sealed() const noexcept { return sealed_; }

 private:
  std::uint64_t slot_offset_;
  std::uint64_t slot_size_;
  std::uint64_t tail_ = 0;
  std::size_t entries_ = 0;
  std::uint64_t logged_bytes_ = 0;
  bool sealed_ = false;
  std::vector<std::byte> scratch_;
};

/// Rolls back one slot directly on the media: reads it, applies the valid
/// entries to the data area in reverse, flushes and fences. Returns the
/// number of entries applied. The slot header is left untouched.
std::size_t rollback_slot(Media& media, const Layout& layout, std::uint32_t slot,
                          std::uint64_t generation);

}  // namespace famsync
