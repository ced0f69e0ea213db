// Copyright 2026 The emgseq Authors
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

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace emgseq {

/// Library error with a stable machine-readable code alongside the message.
/// Codes are short snake_case identifiers ("bad_magic", "schema_violation", ...).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message) {
    throw Error(std::move(code), message);
}

inline void require(bool ok, const char* code, const std::string& message) {
    if (!ok) fail(code, message);
}

// ----------------------------------------------------------------------------
// Deterministic RNG. splitmix64 core with Box-Muller normals; self-contained
// so that streams are reproducible across platforms and standard libraries.
// ----------------------------------------------------------------------------
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit mantissa.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float next_float() { return static_cast<float>(next_double()); }

    /// Uniform integer in [0, n). Lemire multiply-shift; n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller with cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u = 1.0 - next_double();  // (0, 1], keeps log finite
        const double r = std::sqrt(-2.0 * std::log(u));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * next_double();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Derives an independent sub-stream seed. Used to split one experiment
    /// seed into init / dataloading / augmentation streams.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed ^ (0xD1B54A32D192ED03ull * (stream + 1)));
        return r.next_u64();
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ----------------------------------------------------------------------------
// Shared worker pool. Each output element is owned by exactly one worker and
// computed with a fixed serial inner loop, so results are bit-identical for
// any thread count.
// ----------------------------------------------------------------------------
namespace threading {

int num_threads();
void set_num_threads(int n);

/// Runs fn(begin, end) over a partition of [0, n). Falls back to a single
/// inline call when n < min_parallel or the pool has one thread.
void parallel_for(std::int64_t n, std::int64_t min_parallel,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace threading

}  // namespace emgseq
