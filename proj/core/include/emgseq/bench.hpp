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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgseq/mat.hpp"
#include "emgseq/model.hpp"

namespace emgseq::bench {

struct TimingReport {
    std::vector<double> trial_means_ms;  // mean latency per trial
    double median_ms = 0.0;              // median across trials
    int runs_per_trial = 0;
    int warmup_runs = 0;
    std::string model_id;
    std::int64_t window_samples = 0;
    std::int64_t window_channels = 0;
    std::string hardware;
};

nlohmann::json timing_report_to_json(const TimingReport& report);

/// "model name" plus logical core count, e.g. for telling reports from
/// different machines apart. Absolute latencies are informational only.
std::string hardware_descriptor();

constexpr int kWarmupRuns = 10;

/// Times `runs` single-window forward passes per trial (after kWarmupRuns
/// untimed warmups), repeats for `trials` trials, and reports the median of
/// the per-trial mean latencies.
TimingReport bench_inference(const model::Model& m, const MatF& window, int runs = 1000,
                             int trials = 3, const std::string& model_id = "");

/// One streaming emission: the global frame index and the argmax token id the
/// model assigned to that frame.
struct StreamEmission {
    std::int64_t frame = 0;
    int token = 0;
};

struct StreamStats {
    std::vector<StreamEmission> emissions;
    std::int64_t forward_passes = 0;
};

/// Naive streaming inference: keep a sliding raw buffer of one full padded
/// window, run a full-window forward every emit_last_n frames of new samples,
/// and emit the trailing emit_last_n per-frame predictions. Larger emit_last_n
/// divides the required inference frequency by that factor at the price of
/// added output latency.
class StreamingDecoder {
public:
    StreamingDecoder(const model::Model& m, std::int64_t window_len, std::int64_t pad_past,
                     std::int64_t pad_future, int emit_last_n = 1);

    /// Feeds samples ([n x channels]); returns emissions produced by any
    /// complete hops they finish.
    std::vector<StreamEmission> push(const MatF& samples);

    std::int64_t forward_passes() const { return forward_passes_; }
    std::int64_t samples_per_hop() const { return hop_samples_; }

private:
    const model::Model& model_;
    MatF buffer_;  // [window_total x channels], oldest first
    std::int64_t window_total_ = 0;
    std::int64_t hop_samples_ = 0;
    int emit_last_n_ = 1;
    std::int64_t pending_ = 0;         // samples since last forward
    std::int64_t consumed_ = 0;        // total samples consumed
    std::int64_t forward_passes_ = 0;
};

/// Runs a whole signal through a fresh StreamingDecoder.
StreamStats stream_infer(const model::Model& m, const MatF& signal, std::int64_t window_len,
                         std::int64_t pad_past, std::int64_t pad_future, int emit_last_n = 1);

}  // namespace emgseq::bench
