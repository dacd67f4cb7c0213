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

#include "famsync/crc32.hpp"

#include <zlib.h>

#include <algorithm>

namespace famsync {

std::uint32_t crc32(std::span<const std::byte> data, std::uint32_t seed) noexcept {
  // zlib takes a uInt length; chunk anything larger.
  uLong crc = seed;
  auto rest = data;
  while (!rest.empty()) {
    const auto n = std::min<std::size_t>(rest.size(), 1u << 30);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(rest.data()), static_cast<uInt>(n));
    rest = rest.subspan(n);
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace famsync
