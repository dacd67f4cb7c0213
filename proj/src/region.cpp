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

#include "famsync/region.hpp"

#include <sys/mman.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <string>

#include "famsync/error.hpp"

namespace famsync {

namespace {

std::atomic<std::uint64_t> g_next_region_id{1};

struct SlotBinding {
  std::uint64_t region_id;
  std::uint32_t slot;
};
thread_local std::vector<SlotBinding> t_bindings;

std::array<std::byte, layout::kHeaderSize> read_header_bytes(Media& media) {
  if (media.capacity() < layout::kSlotsOffset) {
    throw ConfigError("media too small to hold a region header");
  }
  std::array<std::byte, layout::kHeaderSize> bytes{};
  media.read(0, bytes);
  return bytes;
}

Layout layout_of(const FileHeader& header) {
  Layout layout{header.region_size, static_cast<std::uint32_t>(header.max_threads),
                header.slot_size};
  try {
    layout.validate();
  } catch (const ConfigError& e) {
    throw CorruptionError(std::string("region header holds impossible geometry: ") + e.what());
  }
  if (header.max_threads != layout.max_threads) {
    throw CorruptionError("region header holds impossible max_threads");
  }
  return layout;
}

void format(Media& media, const Layout& layout) {
  std::array<std::byte, layout::kHeaderSize> bytes{};
  FileHeader{.region_size = layout.region_size,
             .max_threads = layout.max_threads,
             .slot_size = layout.slot_size}
      .encode_fields(bytes);
  // Fields first, magic last: a torn format reads as blank media.
  media.write(0, bytes);
  media.flush(0, bytes.size());
  media.fence();
  media.write(layout::kMagicAt, std::as_bytes(std::span(layout::kMagic)));
  media.flush(layout::kMagicAt, layout::kMagic.size());
  media.fence();
}

}  // namespace

FileHeader read_file_header(Media& media) {
  const auto bytes = read_header_bytes(media);
  switch (FileHeader::check_magic(bytes)) {
    case MagicState::absent:
      throw CorruptionError("media holds no region (blank header)");
    case MagicState::invalid:
      throw CorruptionError("bad region header magic");
    case MagicState::valid:
      break;
  }
  auto header = FileHeader::decode(bytes);
  if (header.version != layout::kFormatVersion) {
    throw CorruptionError("unsupported region format version " + std::to_string(header.version));
  }
  const auto layout = layout_of(header);
  if (media.capacity() < layout.capacity()) {
    throw CorruptionError("media smaller than the region its header describes");
  }
  return header;
}

RecoveryReport recover_region(Media& media) {
  const auto header = read_file_header(media);
  const auto layout = layout_of(header);

  std::vector<std::byte> log_area(layout.data_offset());
  media.read(0, log_area);
  const auto plan = plan_recovery(log_area, layout, header.generation);
  if (plan.slots.empty()) {
    return {};
  }

  for (const auto& slot : plan.slots) {
    auto write_back = [&](const LogEntry& e) {
      media.write(layout.data_offset() + e.offset, e.payload);
      media.flush(layout.data_offset() + e.offset, e.size);
    };
    if (slot.state == SlotState::redo) {
      std::for_each(slot.entries.begin(), slot.entries.end(), write_back);
    } else {
      std::for_each(slot.entries.rbegin(), slot.entries.rend(), write_back);
    }
  }
  media.fence();

  std::array<std::byte, 8> next{};
  store_u64(next, 0, header.generation + 1);
  media.write(layout::kGenerationAt, next);
  media.flush(layout::kGenerationAt, next.size());
  media.fence();

  for (const auto& slot : plan.slots) {
    UndoLog(layout.log_offset(slot.slot, header.generation), layout.log_size()).reset(media);
  }
  media.fence();
  return {plan.slots.size(), plan.entry_count()};
}

Region::Reservation::~Reservation() {
  if (base != nullptr) {
    ::munmap(base, size);
  }
}

Region::Region(Media& media, const Layout& layout, const SyncPolicy& policy)
    : media_(media), layout_(layout), policy_(policy), region_id_(g_next_region_id++) {
  slots_.reserve(layout.max_threads);
  for (std::uint32_t i = 0; i < layout.max_threads; ++i) {
    slots_.push_back(Slot{{UndoLog(layout.log_offset(i, 0), layout.log_size()),
                           UndoLog(layout.log_offset(i, 1), layout.log_size())},
                          DirtyList{}});
  }
}

Region::~Region() {
  std::erase_if(t_bindings, [&](const SlotBinding& b) { return b.region_id == region_id_; });
}

std::unique_ptr<Region> Region::open(Media& media, const RegionConfig& config) {
  const auto bytes = read_header_bytes(media);
  Layout layout;
  switch (FileHeader::check_magic(bytes)) {
    case MagicState::invalid:
      throw CorruptionError("bad region header magic");
    case MagicState::absent: {
      layout = Layout{config.region_size, config.max_threads, config.slot_size};
      layout.validate();
      if (media.capacity() < layout.capacity()) {
        throw ConfigError("media capacity " + std::to_string(media.capacity()) +
                          " is below the " + std::to_string(layout.capacity()) +
                          " bytes the region needs");
      }
      format(media, layout);
      break;
    }
    case MagicState::valid:
      layout = layout_of(read_file_header(media));
      if (config.region_size != 0 && config.region_size != layout.region_size) {
        throw ConfigError("region_size " + std::to_string(config.region_size) +
                          " does not match the existing file (" +
                          std::to_string(layout.region_size) + ")");
      }
      break;
  }
  if (layout.region_size + layout.data_offset() > config.reserve_size) {
    throw ConfigError("region and log area do not fit in reserve_size");
  }

  std::unique_ptr<Region> region(new Region(media, layout, config.policy));
  region->recovery_ = recover_region(media);
  region->generation_ = read_file_header(media).generation;
  region->reserve(config.reserve_size);
  media.read(layout.data_offset(), std::span(region->working_, layout.region_size));
  return region;
}

void Region::reserve(std::uint64_t reserve_size) {
  auto map = [&](Reservation& r) {
    void* p = ::mmap(nullptr, reserve_size, PROT_NONE,
                     MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
    if (p == MAP_FAILED) {
      throw ConfigError("cannot reserve " + std::to_string(reserve_size) +
                        " bytes of address space: " + std::strerror(errno));
    }
    r.base = p;
    r.size = reserve_size;
  };
  map(working_reservation_);
  map(backing_reservation_);
  const auto rw = align_up(layout_.region_size, layout::kPageSize);
  if (::mprotect(working_reservation_.base, rw, PROT_READ | PROT_WRITE) != 0) {
    throw ConfigError(std::string("cannot commit working range: ") + std::strerror(errno));
  }
  working_ = static_cast<std::byte*>(working_reservation_.base);
  backing_data_ = reinterpret_cast<std::uintptr_t>(backing_reservation_.base) + layout_.data_offset();
}

std::uint64_t Region::to_offset(const void* addr) const {
  if (!in_working_range(addr)) {
    throw RangeError("address is outside the working range");
  }
  return static_cast<std::uint64_t>(static_cast<const std::byte*>(addr) - working_);
}

std::byte* Region::from_offset(std::uint64_t offset) const {
  if (offset >= layout_.region_size) {
    throw RangeError("offset " + std::to_string(offset) + " is outside the region");
  }
  return working_ + offset;
}

std::uint32_t Region::thread_slot() {
  for (const auto& b : t_bindings) {
    if (b.region_id == region_id_) {
      return b.slot;
    }
  }
  const auto slot = next_slot_.fetch_add(1);
  if (slot >= layout_.max_threads) {
    throw ConfigError("more threads than log slots (max_threads = " +
                      std::to_string(layout_.max_threads) + ")");
  }
  t_bindings.push_back({region_id_, slot});
  return slot;
}

void Region::bind_thread_slot(std::uint32_t slot) {
  if (slot >= layout_.max_threads) {
    throw RangeError("log slot " + std::to_string(slot) + " does not exist");
  }
  for (auto& b : t_bindings) {
    if (b.region_id == region_id_) {
      b.slot = slot;
      return;
    }
  }
  t_bindings.push_back({region_id_, slot});
}

void Region::close() {
  std::unique_lock lock(sync_mutex_);
  if (media_.pending_line_count() > 0) {
    media_.fence();
  }
}

}  // namespace famsync
