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

#include <stdexcept>
#include <cstdint>
#include <string>

namespace famsync {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An offset or address falls outside the object it addresses.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Persistent metadata failed validation (bad magic, impossible fields).
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// A per-thread undo log slot has no room for another entry.
class LogFullError : public Error {
 public:
  using Error::Error;
};

class OutOfMemoryError : public Error {
 public:
  using Error::Error;
};

/// Crash-state enumeration would exceed the configured line bound.
class EnumerationBoundError : public Error {
 public:
  using Error::Error;
};

/// Two threads modified the same bytes between consecutive syncs, or a heap
/// call violated the allocator contract (double free, foreign offset).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// I/O failure from the real-file backend.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Thrown by a media object when an injected crash point is reached. Not an
/// Error: library code never catches it, so it unwinds to the harness.
class SimulatedCrash : public std::exception {
 public:
  explicit SimulatedCrash(std::uint64_t op_index) : op_index_(op_index) {}
  const char* what() const noexcept override { return "simulated crash"; }
  std::uint64_t op_index() const noexcept { return op_index_; }

 private:
  std::uint64_t op_index_;
};

}  // namespace famsync
