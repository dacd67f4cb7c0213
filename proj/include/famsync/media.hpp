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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace famsync {

enum class MediaMode { real_file, simulated, simulated_with_latency };

/// Persistence state of one cache line of the volatile overlay.
enum class LineStatus : std::uint8_t { clean = 0, dirty_unflushed = 1, flushed_unfenced = 2 };

struct MediaConfig {
  std::uint64_t capacity_bytes = 0;
  std::uint32_t line_size = 64;
  MediaMode mode = MediaMode::simulated;
  std::uint64_t latency_ns_per_flush = 0;
  std::filesystem::path path;

  /// Throws ConfigError unless line_size is a power of two in [8, 4096] and
  /// capacity_bytes is a non-zero multiple of it.
  void validate() const;
};

/// One durable image reachable by crashing now.
struct CrashState {
  std::vector<std::byte> durable_image;
  std::vector<std::uint64_t> persisted_subset;  // line indices, ascending
};

struct MediaEvent {
  enum class Kind : std::uint8_t { write, read, flush, fence };
  Kind kind;
  std::uint64_t offset;
  std::uint64_t length;
};

struct MediaStats {
  std::uint64_t writes = 0;
  std::uint64_t write_bytes = 0;
  std::uint64_t reads = 0;
  std::uint64_t read_bytes = 0;
  std::uint64_t flushes = 0;
  std::uint64_t flushed_lines = 0;
  std::uint64_t fences = 0;
  std::uint64_t latency_ns = 0;
};

inline constexpr std::size_t kDefaultEnumerationBound = 16;

/// Byte-addressable durable storage behind a volatile line cache.
///
/// Writes land in the volatile overlay and mark their lines dirty. `flush`
/// schedules dirty lines, `fence` makes every scheduled line durable. A crash
/// keeps the committed image plus any subset of flushed-but-unfenced lines;
/// unflushed writes never survive.
///
/// Writes to disjoint lines may come from different threads. Flush and fence
/// must be externally serialized against everything else.
class Media {
 public:
  using Observer = std::function<void(const MediaEvent&)>;
  using ImageVisitor = std::function<void(std::span<const std::byte>)>;

  virtual ~Media() = default;
  Media(const Media&) = delete;
  Media& operator=(const Media&) = delete;

  std::uint64_t capacity() const noexcept { return capacity_; }
  std::uint32_t line_size() const noexcept { return line_size_; }
  std::uint64_t line_count() const noexcept { return capacity_ / line_size_; }

  void write(std::uint64_t offset, std::span<const std::byte> data);
  /// Reads what the CPU would see: the volatile overlay.
  void read(std::uint64_t offset, std::span<std::byte> out) const;
  void flush(std::uint64_t offset, std::uint64_t length);
  void fence();

  LineStatus line_status(std::uint64_t line) const;
  /// Number of distinct flushed_unfenced lines.
  std::size_t pending_line_count() const noexcept { return pending_count_.load(); }
  std::vector<std::uint64_t> pending_lines() const;

  /// Committed durable bytes, without the volatile overlay.
  std::vector<std::byte> durable_snapshot() const;

  /// All 2^k crash states for the k flushed_unfenced lines.
  std::vector<CrashState> enumerate_crash_states(std::size_t bound = kDefaultEnumerationBound) const;

  /// Visits every distinct durable image reachable by a crash now, in Gray
  /// code order. Lines whose flushed content equals their committed content
  /// cannot change the image and are folded away. The span is only valid
  /// during the call.
  void visit_crash_images(std::size_t bound, const ImageVisitor& visit) const;

  MediaStats stats() const noexcept;
  void reset_stats() noexcept;

  void set_observer(Observer observer) { observer_ = std::move(observer); }

  /// Media operations (write, flush, fence) are numbered from 0. When the
  /// counter reaches `op_index`, that operation throws SimulatedCrash instead
  /// of executing.
  void set_crash_point(std::optional<std::uint64_t> op_index) noexcept { crash_at_ = op_index; }
  std::uint64_t op_count() const noexcept { return op_count_.load(); }

 protected:
  Media(std::uint64_t capacity, std::uint32_t line_size);

  std::span<std::byte> overlay() noexcept { return overlay_; }
  std::span<const std::byte> overlay() const noexcept { return overlay_; }

  /// Make the overlay content of `lines` durable. Lines are ascending.
  virtual void commit(std::span<const std::uint64_t> lines) = 0;
  virtual void load_durable(std::span<std::byte> out) const = 0;
  /// Called before operation `index` executes, after the crash-point check.
  virtual void before_op(std::uint64_t /*index*/, MediaEvent::Kind /*kind*/) {}
  virtual void after_flush() {}

  void charge_latency(std::uint64_t ns) noexcept { latency_ns_ += ns; }

 private:
  void check_range(std::uint64_t offset, std::uint64_t length, const char* what) const;
  void begin_op(MediaEvent::Kind kind);
  void notify(MediaEvent::Kind kind, std::uint64_t offset, std::uint64_t length) const;

  std::uint64_t capacity_;
  std::uint32_t line_size_;
  std::vector<std::byte> overlay_;
  std::unique_ptr<std::atomic<std::uint8_t>[]> status_;
  std::vector<std::uint64_t> flushed_;  // may hold stale or repeated indices
  std::atomic<std::size_t> pending_count_{0};

  std::optional<std::uint64_t> crash_at_;
  std::atomic<std::uint64_t> op_count_{0};
  Observer observer_;

  std::atomic<std::uint64_t> writes_{0}, write_bytes_{0};
  mutable std::atomic<std::uint64_t> reads_{0}, read_bytes_{0};
  std::atomic<std::uint64_t> flushes_{0}, flushed_lines_{0}, fences_{0}, latency_ns_{0};
};

/// In-memory backend. Crash states are fully enumerable.
class SimulatedMedia : public Media {
 public:
  explicit SimulatedMedia(const MediaConfig& config);
  /// Starts from `image` as the committed content (e.g. a crash state).
  SimulatedMedia(std::span<const std::byte> image, std::uint32_t line_size,
                 std::uint64_t latency_ns_per_flush = 0);

 protected:
  void commit(std::span<const std::uint64_t> lines) override;
  void load_durable(std::span<std::byte> out) const override;
  void after_flush() override;

 private:
  std::vector<std::byte> durable_;
  std::uint64_t latency_ns_per_flush_;
};

/// File-backed backend. The file only changes at a fence: flushed lines are
/// written with pwrite and then fdatasync'd.
class RealFileMedia : public Media {
 public:
  /// Opens `config.path`, creating it and extending it to capacity_bytes
  /// when needed. A capacity of 0 adopts the existing file size.
  explicit RealFileMedia(const MediaConfig& config);
  ~RealFileMedia() override;

  const std::filesystem::path& path() const noexcept { return path_; }

  /// Test hook: the process sends itself SIGKILL when operation `op_index`
  /// begins. If that operation is a fence, roughly half of its lines reach
  /// the file first.
  void set_kill_point(std::optional<std::uint64_t> op_index) noexcept { kill_at_ = op_index; }

 protected:
  void commit(std::span<const std::uint64_t> lines) override;
  void load_durable(std::span<std::byte> out) const override;
  void before_op(std::uint64_t index, MediaEvent::Kind kind) override;

 private:
  struct OpenedFile {
    int fd;
    std::uint64_t size;
  };
  static OpenedFile open_file(const MediaConfig& config);
  RealFileMedia(const MediaConfig& config, OpenedFile file);

  std::filesystem::path path_;
  int fd_;
  std::optional<std::uint64_t> kill_at_;
  bool kill_in_commit_ = false;
};

std::unique_ptr<Media> make_media(const MediaConfig& config);

}  // namespace famsync
