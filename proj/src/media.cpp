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

#include "famsync/media.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <string>

#include "famsync/error.hpp"

namespace famsync {

namespace {

constexpr std::uint8_t as_u8(LineStatus s) { return static_cast<std::uint8_t>(s); }

[[noreturn]] void throw_errno(const std::string& what) {
  throw IoError(what + ": " + std::strerror(errno));
}

void spin_for(std::uint64_t ns) {
  const auto until = std::chrono::steady_clock::now() + std::chrono::nanoseconds(ns);
  while (std::chrono::steady_clock::now() < until) {
  }
}

}  // namespace

void MediaConfig::validate() const {
  if (line_size < 8 || line_size > 4096 || !std::has_single_bit(line_size)) {
    throw ConfigError("line_size must be a power of two in [8, 4096], got " +
                      std::to_string(line_size));
  }
  if (capacity_bytes == 0 || capacity_bytes % line_size != 0) {
    throw ConfigError("capacity_bytes must be a non-zero multiple of line_size");
  }
}

namespace {

std::uint64_t validated_capacity(std::uint64_t capacity, std::uint32_t line_size) {
  MediaConfig config;
  config.capacity_bytes = capacity;
  config.line_size = line_size;
  config.validate();
  return capacity;
}

}  // namespace

Media::Media(std::uint64_t capacity, std::uint32_t line_size)
    : capacity_(validated_capacity(capacity, line_size)),
      line_size_(line_size),
      overlay_(capacity),
      status_(std::make_unique<std::atomic<std::uint8_t>[]>(capacity / line_size)) {
  for (std::uint64_t i = 0; i < line_count(); ++i) {
    status_[i].store(as_u8(LineStatus::clean), std::memory_order_relaxed);
  }
}

void Media::check_range(std::uint64_t offset, std::uint64_t length, const char* what) const {
  if (offset > capacity_ || length > capacity_ - offset) {
    throw RangeError(std::string(what) + " [" + std::to_string(offset) + ", +" +
                     std::to_string(length) + ") exceeds media capacity " +
                     std::to_string(capacity_));
  }
}

void Media::begin_op(MediaEvent::Kind kind) {
  const auto index = op_count_.load(std::memory_order_relaxed);
  if (crash_at_ && *crash_at_ == index) {
    throw SimulatedCrash(index);
  }
  before_op(index, kind);
  op_count_.fetch_add(1, std::memory_order_relaxed);
}

void Media::notify(MediaEvent::Kind kind, std::uint64_t offset, std::uint64_t length) const {
  if (observer_) {
    observer_(MediaEvent{kind, offset, length});
  }
}

void Media::write(std::uint64_t offset, std::span<const std::byte> data) {
  check_range(offset, data.size(), "write");
  begin_op(MediaEvent::Kind::write);
  if (!data.empty()) {
    std::memcpy(overlay_.data() + offset, data.data(), data.size());
    const auto first = offset / line_size_;
    const auto last = (offset + data.size() - 1) / line_size_;
    for (auto line = first; line <= last; ++line) {
      const auto prev = status_[line].exchange(as_u8(LineStatus::dirty_unflushed),
                                               std::memory_order_relaxed);
      if (prev == as_u8(LineStatus::flushed_unfenced)) {
        pending_count_.fetch_sub(1, std::memory_order_relaxed);
      }
    }
  }
  writes_.fetch_add(1, std::memory_order_relaxed);
  write_bytes_.fetch_add(data.size(), std::memory_order_relaxed);
  notify(MediaEvent::Kind::write, offset, data.size());
}

void Media::read(std::uint64_t offset, std::span<std::byte> out) const {
  check_range(offset, out.size(), "read");
  std::memcpy(out.data(), overlay_.data() + offset, out.size());
  reads_.fetch_add(1, std::memory_order_relaxed);
  read_bytes_.fetch_add(out.size(), std::memory_order_relaxed);
  notify(MediaEvent::Kind::read, offset, out.size());
}

void Media::flush(std::uint64_t offset, std::uint64_t length) {
  check_range(offset, length, "flush");
  begin_op(MediaEvent::Kind::flush);
  std::uint64_t moved = 0;
  if (length > 0) {
    const auto first = offset / line_size_;
    const auto last = (offset + length - 1) / line_size_;
    for (auto line = first; line <= last; ++line) {
      if (status_[line].load(std::memory_order_relaxed) == as_u8(LineStatus::dirty_unflushed)) {
        status_[line].store(as_u8(LineStatus::flushed_unfenced), std::memory_order_relaxed);
        flushed_.push_back(line);
        ++moved;
      }
    }
  }
  pending_count_.fetch_add(moved, std::memory_order_relaxed);
  flushes_.fetch_add(1, std::memory_order_relaxed);
  flushed_lines_.fetch_add(moved, std::memory_order_relaxed);
  after_flush();
  notify(MediaEvent::Kind::flush, offset, length);
}

void Media::fence() {
  begin_op(MediaEvent::Kind::fence);
  auto lines = pending_lines();
  if (!lines.empty()) {
    commit(lines);
    for (auto line : lines) {
      status_[line].store(as_u8(LineStatus::clean), std::memory_order_relaxed);
    }
  }
  flushed_.clear();
  pending_count_.store(0, std::memory_order_relaxed);
  fences_.fetch_add(1, std::memory_order_relaxed);
  notify(MediaEvent::Kind::fence, 0, 0);
}

LineStatus Media::line_status(std::uint64_t line) const {
  if (line >= line_count()) {
    throw RangeError("line index " + std::to_string(line) + " out of range");
  }
  return static_cast<LineStatus>(status_[line].load(std::memory_order_relaxed));
}

std::vector<std::uint64_t> Media::pending_lines() const {
  std::vector<std::uint64_t> lines;
  lines.reserve(flushed_.size());
  for (auto line : flushed_) {
    if (status_[line].load(std::memory_order_relaxed) == as_u8(LineStatus::flushed_unfenced)) {
      lines.push_back(line);
    }
  }
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  return lines;
}

std::vector<std::byte> Media::durable_snapshot() const {
  std::vector<std::byte> image(capacity_);
  load_durable(image);
  return image;
}

std::vector<CrashState> Media::enumerate_crash_states(std::size_t bound) const {
  const auto lines = pending_lines();
  if (lines.size() > bound || lines.size() >= 63) {
    throw EnumerationBoundError(std::to_string(lines.size()) +
                                " flushed-but-unfenced lines exceed the enumeration bound of " +
                                std::to_string(bound) + "; use a shorter trace");
  }
  const auto base = durable_snapshot();
  const std::uint64_t count = std::uint64_t{1} << lines.size();
  std::vector<CrashState> states;
  states.reserve(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    CrashState state{base, {}};
    for (std::size_t bit = 0; bit < lines.size(); ++bit) {
      if (mask & (std::uint64_t{1} << bit)) {
        const auto off = lines[bit] * line_size_;
        std::memcpy(state.durable_image.data() + off, overlay_.data() + off, line_size_);
        state.persisted_subset.push_back(lines[bit]);
      }
    }
    states.push_back(std::move(state));
  }
  return states;
}

void Media::visit_crash_images(std::size_t bound, const ImageVisitor& visit) const {
  const auto lines = pending_lines();
  if (lines.size() > bound || lines.size() >= 63) {
    throw EnumerationBoundError(std::to_string(lines.size()) +
                                " flushed-but-unfenced lines exceed the enumeration bound of " +
                                std::to_string(bound) + "; use a shorter trace");
  }
  auto image = durable_snapshot();
  std::vector<std::uint64_t> changing;
  for (auto line : lines) {
    const auto off = line * line_size_;
    if (std::memcmp(image.data() + off, overlay_.data() + off, line_size_) != 0) {
      changing.push_back(line);
    }
  }
  // Committed bytes of each changing line, to toggle back to.
  std::vector<std::byte> committed(changing.size() * line_size_);
  for (std::size_t i = 0; i < changing.size(); ++i) {
    std::memcpy(committed.data() + i * line_size_, image.data() + changing[i] * line_size_,
                line_size_);
  }
  std::uint64_t present = 0;
  visit(image);
  const std::uint64_t count = std::uint64_t{1} << changing.size();
  for (std::uint64_t step = 1; step < count; ++step) {
    const auto bit = static_cast<std::size_t>(std::countr_zero(step));
    const auto off = changing[bit] * line_size_;
    present ^= std::uint64_t{1} << bit;
    const auto* src = (present >> bit) & 1 ? overlay_.data() + off
                                           : committed.data() + bit * line_size_;
    std::memcpy(image.data() + off, src, line_size_);
    visit(image);
  }
}

MediaStats Media::stats() const noexcept {
  return MediaStats{
      .writes = writes_.load(),
      .write_bytes = write_bytes_.load(),
      .reads = reads_.load(),
      .read_bytes = read_bytes_.load(),
      .flushes = flushes_.load(),
      .flushed_lines = flushed_lines_.load(),
      .fences = fences_.load(),
      .latency_ns = latency_ns_.load(),
  };
}

void Media::reset_stats() noexcept {
  for (auto* c : {&writes_, &write_bytes_, &flushes_, &flushed_lines_, &fences_, &latency_ns_}) {
    c->store(0);
  }
  reads_.store(0);
  read_bytes_.store(0);
}

// --- SimulatedMedia --------------------------------------------------------

SimulatedMedia::SimulatedMedia(const MediaConfig& config)
    : Media(config.capacity_bytes, config.line_size),
      durable_(config.capacity_bytes),
      latency_ns_per_flush_(config.mode == MediaMode::simulated_with_latency
                                ? config.latency_ns_per_flush
                                : 0) {
  if (config.mode == MediaMode::real_file) {
    throw ConfigError("SimulatedMedia cannot serve real_file mode");
  }
}

SimulatedMedia::SimulatedMedia(std::span<const std::byte> image, std::uint32_t line_size,
                               std::uint64_t latency_ns_per_flush)
    : Media(image.size(), line_size),
      durable_(image.begin(), image.end()),
      latency_ns_per_flush_(latency_ns_per_flush) {
  std::memcpy(overlay().data(), image.data(), image.size());
}

void SimulatedMedia::commit(std::span<const std::uint64_t> lines) {
  const auto ls = line_size();
  for (auto line : lines) {
    std::memcpy(durable_.data() + line * ls, overlay().data() + line * ls, ls);
  }
}

void SimulatedMedia::load_durable(std::span<std::byte> out) const {
  std::memcpy(out.data(), durable_.data(), durable_.size());
}

void SimulatedMedia::after_flush() {
  if (latency_ns_per_flush_ > 0) {
    spin_for(latency_ns_per_flush_);
    charge_latency(latency_ns_per_flush_);
  }
}

// --- RealFileMedia ---------------------------------------------------------

RealFileMedia::OpenedFile RealFileMedia::open_file(const MediaConfig& config) {
  const int fd = ::open(config.path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw_errno("open " + config.path.string());
  }
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw_errno("fstat " + config.path.string());
  }
  auto size = static_cast<std::uint64_t>(st.st_size);
  if (config.capacity_bytes > size) {
    if (::ftruncate(fd, static_cast<off_t>(config.capacity_bytes)) != 0) {
      ::close(fd);
      throw_errno("ftruncate " + config.path.string());
    }
    size = config.capacity_bytes;
  }
  if (size == 0) {
    ::close(fd);
    throw ConfigError("empty media file and no capacity given: " + config.path.string());
  }
  return {fd, size};
}

RealFileMedia::RealFileMedia(const MediaConfig& config) : RealFileMedia(config, open_file(config)) {}

RealFileMedia::RealFileMedia(const MediaConfig& config, OpenedFile file)
    : Media(file.size, config.line_size), path_(config.path), fd_(file.fd) {
  load_durable(overlay());
}

RealFileMedia::~RealFileMedia() {
  if (fd_ >= 0) {
    ::close(fd_);
  }
}

void RealFileMedia::load_durable(std::span<std::byte> out) const {
  std::uint64_t done = 0;
  while (done < out.size()) {
    const auto n = ::pread(fd_, out.data() + done, out.size() - done, static_cast<off_t>(done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("pread " + path_.string());
    }
    if (n == 0) {
      throw IoError("short read from " + path_.string());
    }
    done += static_cast<std::uint64_t>(n);
  }
}

void RealFileMedia::before_op(std::uint64_t index, MediaEvent::Kind kind) {
  if (!kill_at_ || *kill_at_ != index) {
    return;
  }
  if (kind == MediaEvent::Kind::fence && pending_line_count() > 1) {
    kill_in_commit_ = true;
    return;
  }
  ::raise(SIGKILL);
}

void RealFileMedia::commit(std::span<const std::uint64_t> lines) {
  const auto ls = line_size();
  const auto bytes = overlay();
  const std::size_t kill_after = kill_in_commit_ ? lines.size() / 2 : lines.size() + 1;
  std::size_t i = 0;
  while (i < lines.size()) {
    std::size_t j = i + 1;
    while (j < lines.size() && lines[j] == lines[j - 1] + 1 && j != kill_after) {
      ++j;
    }
    const auto off = lines[i] * ls;
    const auto len = (j - i) * ls;
    std::uint64_t done = 0;
    while (done < len) {
      const auto n = ::pwrite(fd_, bytes.data() + off + done, len - done,
                              static_cast<off_t>(off + done));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw_errno("pwrite " + path_.string());
      }
      done += static_cast<std::uint64_t>(n);
    }
    i = j;
    if (i == kill_after) {
      ::fdatasync(fd_);
      ::raise(SIGKILL);
    }
  }
  if (::fdatasync(fd_) != 0) {
    throw_errno("fdatasync " + path_.string());
  }
}

std::unique_ptr<Media> make_media(const MediaConfig& config) {
  if (config.mode == MediaMode::real_file) {
    return std::make_unique<RealFileMedia>(config);
  }
  config.validate();
  return std::make_unique<SimulatedMedia>(config);
}

}  // namespace famsync
