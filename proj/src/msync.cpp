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

#include <algorithm>
#include <array>
#include <string>

#include "famsync/error.hpp"
#include "famsync/region.hpp"

namespace famsync {

namespace {

constexpr std::uint64_t kWalRecordMax = 64 * 1024;

}  // namespace

void Region::check_sharing() const {
  struct Tagged {
    DirtyRecord range;
    std::uint32_t slot;
  };
  std::vector<Tagged> all;
  for (std::uint32_t s = 0; s < slots_.size(); ++s) {
    for (const auto& r : coalesce({slots_[s].dirty.records().begin(), slots_[s].dirty.records().end()})) {
      all.push_back({r, s});
    }
  }
  std::sort(all.begin(), all.end(),
            [](const Tagged& a, const Tagged& b) { return a.range.offset < b.range.offset; });
  // Ranges within one slot are disjoint, so any cross-slot overlap shows up
  // against the furthest-reaching range seen so far.
  const Tagged* reach = nullptr;
  for (const auto& t : all) {
    if (reach != nullptr && t.range.offset < reach->range.end() && t.slot != reach->slot) {
      throw ContractError("threads " + std::to_string(reach->slot) + " and " +
                          std::to_string(t.slot) + " both modified bytes near offset " +
                          std::to_string(t.range.offset) + " since the last sync");
    }
    if (reach == nullptr || t.range.end() > reach->range.end()) {
      reach = &t;
    }
  }
}

std::vector<DirtyRecord> Region::ranges_from_log(std::span<const std::uint32_t> slots) const {
  std::vector<DirtyRecord> ranges;
  std::vector<std::byte> bytes;
  for (auto s : slots) {
    const auto& log = slots_[s].log(generation_);
    bytes.resize(log.tail());
    media_.read(log.slot_offset() + layout::kSlotHeaderSize, bytes);
    const auto scan = scan_entries(bytes, log.tail(), generation_, layout_.region_size);
    if (scan.entries.size() != log.entry_count()) {
      throw CorruptionError("undo log of slot " + std::to_string(s) +
                            " does not read back intact");
    }
    for (const auto& e : scan.entries) {
      ranges.push_back({e.offset, e.size});
    }
  }
  return coalesce(std::move(ranges));
}

std::uint64_t Region::copy_ranges(std::span<const DirtyRecord> ranges, std::uint64_t granularity) {
  const auto copies = widen(ranges, granularity, layout_.region_size);
  for (const auto& r : copies) {
    const auto at = layout_.data_offset() + r.offset;
    media_.write(at, std::span(working_ + r.offset, r.size));
    media_.flush(at, r.size);
  }
  return total_bytes(copies);
}

void Region::commit_generation() {
  std::array<std::byte, 8> next{};
  store_u64(next, 0, generation_ + 1);
  media_.write(layout::kGenerationAt, next);
  media_.flush(layout::kGenerationAt, next.size());
  if (policy_.fences == FenceMode::strict) {
    media_.fence();
  }
  ++generation_;
}

void Region::sync_undo(SyncReport& report) {
  // Seal: every entry and its slot header become durable together.
  std::vector<std::uint32_t> sealed;
  for (std::uint32_t s = 0; s < slots_.size(); ++s) {
    auto& log = slots_[s].log(generation_);
    if (!log.empty()) {
      report.entries_sealed += log.entry_count();
      report.logged_bytes += log.logged_bytes();
      log.seal(media_);
      sealed.push_back(s);
    }
  }
  media_.fence();

  std::vector<DirtyRecord> ranges;
  if (policy_.source == CopySource::undo_log) {
    ranges = ranges_from_log(sealed);
  } else {
    std::vector<const DirtyList*> lists;
    for (const auto& slot : slots_) {
      lists.push_back(&slot.dirty);
    }
    ranges = dirty_coalesce(lists);
  }
  report.coalesced_bytes = total_bytes(ranges);
  const std::uint64_t granularity =
      policy_.scheme == SyncScheme::page4k ? layout::kPageSize : media_.line_size();
  report.bytes_copied = copy_ranges(ranges, granularity);
  media_.fence();

  // The generation bump is the commit point: it retires every sealed entry at
  // once. Slot headers are reset afterwards and ride on the next fence. With
  // the commit unfenced a reset could land before the bump and tear the
  // rollback across slots, so compat mode leaves the stale headers alone.
  const auto committed = generation_;
  commit_generation();
  if (policy_.fences == FenceMode::strict) {
    for (auto s : sealed) {
      slots_[s].log(committed).reset(media_);
    }
  }
  report.durability_points = 1;
}

void Region::sync_wal(SyncReport& report) {
  std::vector<const DirtyList*> lists;
  for (const auto& slot : slots_) {
    lists.push_back(&slot.dirty);
  }
  const auto ranges = dirty_coalesce(lists);
  report.coalesced_bytes = total_bytes(ranges);

  // Durability point 1: redo records with the new contents.
  auto& wal = slots_[0].log(generation_);
  wal.clear();
  for (const auto& r : ranges) {
    for (std::uint64_t done = 0; done < r.size; done += kWalRecordMax) {
      const auto n = std::min(kWalRecordMax, r.size - done);
      wal.append(media_, generation_, r.offset + done, std::span(working_ + r.offset + done, n));
      report.wal_bytes += n;
    }
  }
  wal.seal(media_, SlotState::redo);
  media_.fence();

  // Durability point 2: page-granular write-back in place.
  report.bytes_copied = copy_ranges(ranges, layout::kPageSize);
  media_.fence();

  // Truncate. Replaying a stale log is harmless, so no fence here.
  std::array<std::byte, 8> next{};
  store_u64(next, 0, generation_ + 1);
  media_.write(layout::kGenerationAt, next);
  media_.flush(layout::kGenerationAt, next.size());
  ++generation_;
  wal.reset(media_);
  report.durability_points = 2;
}

SyncReport Region::fa_msync() {
  std::unique_lock lock(sync_mutex_);
  if (policy_.detect_sharing) {
    check_sharing();
  }
  const auto before = media_.stats();
  SyncReport report;
  report.media_op_begin = media_.op_count();
  for (const auto& slot : slots_) {
    report.dirty_records += slot.dirty.records().size();
    report.dirty_bytes += slot.dirty.total_logged_bytes();
  }
  if (policy_.scheme == SyncScheme::wal) {
    sync_wal(report);
  } else {
    sync_undo(report);
  }
  for (auto& slot : slots_) {
    slot.dirty.clear();
    slot.logs[0].clear();
    slot.logs[1].clear();
  }
  const auto after = media_.stats();
  report.fences_issued = after.fences - before.fences;
  report.media_reads = after.reads - before.reads;
  report.media_op_end = media_.op_count();
  report.epoch = ++epoch_;
  history_.push_back(report);
  return report;
}

}  // namespace famsync
