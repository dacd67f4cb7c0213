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
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <type_traits>
#include <vector>

#include "famsync/dirty_list.hpp"
#include "famsync/layout.hpp"
#include "famsync/media.hpp"
#include "famsync/undo_log.hpp"

namespace famsync {

/// Fences per sync: strict issues three (seal, copy, commit); compat defers
/// the commit fence to the next sync, which leaves a window where a returned
/// sync can still be rolled back.
enum class FenceMode { strict, compat };

/// Where fa_msync finds the modified ranges.
enum class CopySource { dirty_list, undo_log };

/// famsync: undo log + line-granular copy. page4k: undo log + 4096-byte page
/// copy. wal: redo records written at sync, then page copy (two durability
/// points per sync).
enum class SyncScheme { famsync, page4k, wal };

struct SyncPolicy {
  SyncScheme scheme = SyncScheme::famsync;
  FenceMode fences = FenceMode::strict;
  CopySource source = CopySource::dirty_list;
  /// Check at every sync that no two threads touched the same bytes.
  bool detect_sharing = false;
};

struct RegionConfig {
  /// Data area size. 0 adopts the size recorded in an existing file.
  std::uint64_t region_size = 0;
  std::uint32_t max_threads = 16;
  std::uint64_t slot_size = std::uint64_t{1} << 20;
  /// Virtual address space reserved for each of the working and backing
  /// ranges.
  std::uint64_t reserve_size = std::uint64_t{1} << 40;
  SyncPolicy policy;
};

struct SyncReport {
  std::uint64_t epoch = 0;
  std::size_t entries_sealed = 0;
  std::size_t dirty_records = 0;
  std::uint64_t logged_bytes = 0;     // undo payload bytes
  std::uint64_t dirty_bytes = 0;      // sum of dirty record sizes
  std::uint64_t coalesced_bytes = 0;  // distinct modified bytes
  std::uint64_t bytes_copied = 0;     // after widening
  std::uint64_t wal_bytes = 0;
  std::uint64_t fences_issued = 0;
  std::uint64_t durability_points = 0;
  std::uint64_t media_reads = 0;
  // Media operation indices [begin, end) issued by this sync.
  std::uint64_t media_op_begin = 0;
  std::uint64_t media_op_end = 0;
};

struct RecoveryReport {
  std::size_t slots_rolled_back = 0;
  std::size_t entries_applied = 0;
};

/// Rolls back every active log slot of a formatted media and invalidates the
/// logs durably. Throws CorruptionError if the header is missing or damaged.
RecoveryReport recover_region(Media& media);

/// Reads and validates the file header of a formatted media.
FileHeader read_file_header(Media& media);

/// A persistent file exposed at two coordinated address ranges: the working
/// range (ordinary memory the application mutates) and the backing range
/// (the media). Offsets are identical in both.
///
/// Every store to the working range must be announced through on_store or
/// performed by a tracked_* call. fa_msync then makes the media reflect the
/// working image atomically.
class Region {
 public:
  /// Formats blank media, otherwise recovers it, then loads the working
  /// image. Throws CorruptionError on a foreign or damaged header and
  /// ConfigError on geometry mismatches.
  static std::unique_ptr<Region> open(Media& media, const RegionConfig& config = {});

  ~Region();
  Region(const Region&) = delete;
  Region& operator=(const Region&) = delete;

  const Layout& layout() const noexcept { return layout_; }
  const SyncPolicy& policy() const noexcept { return policy_; }
  Media& media() noexcept { return media_; }
  std::uint64_t size() const noexcept { return layout_.region_size; }
  std::uint64_t generation() const noexcept { return generation_; }
  const RecoveryReport& recovery() const noexcept { return recovery_; }

  std::byte* working_base() const noexcept { return working_; }
  /// Backing-range address of data offset 0.
  std::uintptr_t backing_base() const noexcept { return backing_data_; }
  std::span<const std::byte> working_image() const noexcept { return {working_, size()}; }

  bool in_working_range(const void* addr) const noexcept {
    const auto a = reinterpret_cast<std::uintptr_t>(addr);
    const auto base = reinterpret_cast<std::uintptr_t>(working_);
    return a >= base && a - base < layout_.region_size;
  }
  bool in_backing_range(std::uintptr_t addr) const noexcept {
    return addr >= backing_data_ && addr - backing_data_ < layout_.region_size;
  }
  /// Data-area offset of a working-range address. Throws RangeError.
  std::uint64_t to_offset(const void* addr) const;
  std::byte* from_offset(std::uint64_t offset) const;
  std::uintptr_t to_backing(const void* addr) const { return backing_data_ + to_offset(addr); }

  // --- interposition -------------------------------------------------------

  /// Logs [addr, addr+size) before a scalar store. Addresses outside the
  /// working range are ignored. Size must be 1, 2, 4 or 8. Does not lock: a
  /// caller racing with fa_msync must hold store_section() across the call
  /// and its store.
  void on_store(const void* addr, std::size_t size);

  void tracked_write(void* dst, std::span<const std::byte> data);

  template <class T>
    requires std::is_trivially_copyable_v<T>
  void tracked_store(T* dst, const T& value) {
    tracked_write(dst, std::as_bytes(std::span(&value, 1)));
  }

  void tracked_memcpy(void* dst, const void* src, std::size_t n);
  void tracked_memset(void* dst, std::byte value, std::size_t n);
  /// Source must lie in the working range too. Handles overlap.
  void tracked_memmove(void* dst, const void* src, std::size_t n);

  std::shared_lock<std::shared_mutex> store_section() { return std::shared_lock(sync_mutex_); }

  // --- sync ----------------------------------------------------------------

  /// Failure-atomic sync of the whole region.
  SyncReport fa_msync();

  std::uint64_t sync_epoch() const noexcept { return epoch_; }
  const std::vector<SyncReport>& sync_history() const noexcept { return history_; }

  /// Log slot of the calling thread, assigned on first use.
  std::uint32_t thread_slot();
  /// Pins the calling thread to `slot`.
  void bind_thread_slot(std::uint32_t slot);

  /// Log the current epoch appends to.
  const UndoLog& slot_log(std::uint32_t slot) const { return slots_.at(slot).logs[generation_ & 1]; }
  const DirtyList& slot_dirty(std::uint32_t slot) const { return slots_.at(slot).dirty; }

  /// Fences anything a compat-mode sync left unfenced.
  void close();

 private:
  struct Slot {
    std::array<UndoLog, 2> logs;  // indexed by generation parity
    DirtyList dirty;
    UndoLog& log(std::uint64_t generation) { return logs[generation & 1]; }
    const UndoLog& log(std::uint64_t generation) const { return logs[generation & 1]; }
  };
  struct Reservation {
    void* base = nullptr;
    std::size_t size = 0;
    ~Reservation();
  };

  Region(Media& media, const Layout& layout, const SyncPolicy& policy);

  void reserve(std::uint64_t reserve_size);
  void check_span(const void* addr, std::size_t n, const char* what) const;
  void log_store(std::uint64_t offset, std::uint64_t size);
  void check_sharing() const;
  std::vector<DirtyRecord> ranges_from_log(std::span<const std::uint32_t> slots) const;
  std::uint64_t copy_ranges(std::span<const DirtyRecord> ranges, std::uint64_t granularity);
  void commit_generation();
  void sync_undo(SyncReport& report);
  void sync_wal(SyncReport& report);

  Media& media_;
  Layout layout_;
  SyncPolicy policy_;
  std::uint64_t region_id_;
  std::uint64_t generation_ = 0;
  RecoveryReport recovery_;

  Reservation working_reservation_;
  Reservation backing_reservation_;
  std::byte* working_ = nullptr;
  std::uintptr_t backing_data_ = 0;

  std::vector<Slot> slots_;
  std::atomic<std::uint32_t> next_slot_{0};

  std::shared_mutex sync_mutex_;
  std::uint64_t epoch_ = 0;
  std::vector<SyncReport> history_;
};

}  // namespace famsync
