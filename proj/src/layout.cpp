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

#include "famsync/layout.hpp"

#include <string>

#include "famsync/error.hpp"

namespace famsync {

MagicState FileHeader::check_magic(std::span<const std::byte> header) noexcept {
  const auto* raw = header.data() + layout::kMagicAt;
  if (std::memcmp(raw, layout::kMagic.data(), layout::kMagic.size()) == 0) {
    return MagicState::valid;
  }
  for (std::size_t i = 0; i < layout::kMagic.size(); ++i) {
    if (raw[i] != std::byte{0}) {
      return MagicState::invalid;
    }
  }
  return MagicState::absent;
}

FileHeader FileHeader::decode(std::span<const std::byte> header) noexcept {
  return FileHeader{
      .version = load_u64(header, layout::kVersionAt),
      .region_size = load_u64(header, layout::kRegionSizeAt),
      .max_threads = load_u64(header, layout::kMaxThreadsAt),
      .slot_size = load_u64(header, layout::kSlotSizeAt),
      .generation = load_u64(header, layout::kGenerationAt),
  };
}

void FileHeader::encode_fields(std::span<std::byte> out) const noexcept {
  store_u64(out, layout::kVersionAt, version);
  store_u64(out, layout::kRegionSizeAt, region_size);
  store_u64(out, layout::kMaxThreadsAt, max_threads);
  store_u64(out, layout::kSlotSizeAt, slot_size);
  store_u64(out, layout::kGenerationAt, generation);
}

void Layout::validate() const {
  if (region_size == 0) {
    throw ConfigError("region_size must be non-zero");
  }
  if (max_threads == 0 || max_threads > 4096) {
    throw ConfigError("max_threads must be in [1, 4096]");
  }
  if (slot_size == 0 || slot_size % layout::kPageSize != 0) {
    throw ConfigError("slot_size must be a non-zero multiple of 4096, got " +
                      std::to_string(slot_size));
  }
  if (slot_size > (std::uint64_t{1} << 32)) {
    throw ConfigError("slot_size must not exceed 4 GiB");
  }
}

}  // namespace famsync
