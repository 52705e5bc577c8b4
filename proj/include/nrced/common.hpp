/*
 *  Copyright 2026 The NRCED Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace nrced {

// Data/validation failures carry Kind::Data and map to exit code 2 at the CLI;
// bad command lines are Kind::Usage (exit 1).
class Error : public std::runtime_error {
public:
  enum class Kind { Usage, Data };

  Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

[[noreturn]] inline void fail_data(const std::string& msg) {
  throw Error(Error::Kind::Data, msg);
}

using Rng = std::mt19937_64;

// Deterministic stream derivation: one master seed, many independent streams.
// splitmix64 finalizer, so nearby (seed, tag) pairs decorrelate.
inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level();           // initialized from NRCED_LOG on first use
void set_log_level(LogLevel lv);
void log_msg(LogLevel lv, const std::string& msg);

inline void log_error(const std::string& m) { log_msg(LogLevel::Error, m); }
inline void log_warn(const std::string& m) { log_msg(LogLevel::Warn, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log_msg(LogLevel::Debug, m); }

// Global parallelism cap (--threads). 0 means hardware concurrency.
int thread_cap();
void set_thread_cap(int n);

// Runs fn(i) for i in [0, n). Work is split into disjoint contiguous chunks,
// so writes to per-index slots stay race-free and results do not depend on
// the thread count.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace nrced
