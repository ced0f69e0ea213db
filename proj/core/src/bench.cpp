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

#include "emgseq/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <thread>

#include "emgseq/eval.hpp"

namespace emgseq::bench {

nlohmann::json timing_report_to_json(const TimingReport& report) {
    return {
        {"trial_means_ms", report.trial_means_ms},
        {"median_ms", report.median_ms},
        {"runs_per_trial", report.runs_per_trial},
        {"warmup_runs", report.warmup_runs},
        {"model_id", report.model_id},
        {"window_samples", report.window_samples},
        {"window_channels", report.window_channels},
        {"hardware", report.hardware},
    };
}

std::string hardware_descriptor() {
    std::string cpu = "unknown-cpu";
    std::ifstream info("/proc/cpuinfo");
    std::string line;
    while (std::getline(info, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto pos = line.find(':');
            if (pos != std::string::npos) {
                cpu = line.substr(pos + 1);
                while (!cpu.empty() && cpu.front() == ' ') cpu.erase(cpu.begin());
            }
            break;
        }
    }
    return cpu + " / " + std::to_string(std::thread::hardware_concurrency()) + " threads";
}

TimingReport bench_inference(const model::Model& m, const MatF& window, int runs, int trials,
                             const std::string& model_id) {
    require(runs >= 1 && trials >= 1, "bad_bench_config", "runs and trials must be >= 1");
    using Clock = std::chrono::steady_clock;

    TimingReport report;
    report.runs_per_trial = runs;
    report.warmup_runs = kWarmupRuns;
    report.model_id = model_id;
    report.window_samples = window.rows;
    report.window_channels = window.cols;
    report.hardware = hardware_descriptor();

    volatile float sink = 0.0f;  // keeps the forward pass observable
    for (int trial = 0; trial < trials; ++trial) {
        for (int w = 0; w < kWarmupRuns; ++w) {
            const MatF logits = m.forward(window);
            sink = sink + logits.v[0];
        }
        double total_ms = 0.0;
        for (int r = 0; r < runs; ++r) {
            const auto t0 = Clock::now();
            const MatF logits = m.forward(window);
            const auto t1 = Clock::now();
            sink = sink + logits.v[0];
            total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
        }
        report.trial_means_ms.push_back(total_ms / static_cast<double>(runs));
    }

    std::vector<double> sorted = report.trial_means_ms;
    std::sort(sorted.begin(), sorted.end());
    report.median_ms = sorted[sorted.size() / 2];
    if (sorted.size() % 2 == 0) {
        report.median_ms = 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    }
    return report;
}

StreamingDecoder::StreamingDecoder(const model::Model& m, std::int64_t window_len,
                                   std::int64_t pad_past, std::int64_t pad_future, int emit_last_n)
    : model_(m), emit_last_n_(emit_last_n) {
    const int downsample = m.config().featurizer.downsample();
    window_total_ = pad_past + window_len + pad_future;
    require(window_total_ % downsample == 0, "bad_stream_config",
            "padded window must be a whole number of feature frames");
    const std::int64_t frames = window_total_ / downsample;
    require(emit_last_n >= 1, "bad_stream_config", "emit_last_n must be >= 1");
    require(emit_last_n <= frames, "bad_stream_config",
            "emit_last_n exceeds the frames in one window");
    hop_samples_ = static_cast<std::int64_t>(emit_last_n) * downsample;
    buffer_ = MatF(window_total_, m.config().num_channels);
}

std::vector<StreamEmission> StreamingDecoder::push(const MatF& samples) {
    require(samples.cols == buffer_.cols, "bad_input", "channel count mismatch");
    std::vector<StreamEmission> out;
    const int downsample = model_.config().featurizer.downsample();
    for (std::int64_t r = 0; r < samples.rows; ++r) {
        // Slide one sample: drop the oldest row. A ring buffer would avoid
        // the memmove; at 2 kHz this copy is nowhere near the bottleneck.
        std::memmove(buffer_.row(0), buffer_.row(1),
                     static_cast<std::size_t>((window_total_ - 1) * buffer_.cols) * sizeof(float));
        std::memcpy(buffer_.row(window_total_ - 1), samples.row(r),
                    static_cast<std::size_t>(buffer_.cols) * sizeof(float));
        ++consumed_;
        ++pending_;
        if (pending_ == hop_samples_) {
            pending_ = 0;
            const MatF logits = model_.forward(buffer_);
            ++forward_passes_;
            const std::vector<int> path = eval::argmax_path(logits);
            const std::int64_t frames = static_cast<std::int64_t>(path.size());
            const std::int64_t global_end = consumed_ / downsample;  // frames so far
            for (int i = emit_last_n_; i >= 1; --i) {
                StreamEmission e;
                e.frame = global_end - i;
                e.token = path[static_cast<std::size_t>(frames - i)];
                out.push_back(e);
            }
        }
    }
    return out;
}

StreamStats stream_infer(const model::Model& m, const MatF& signal, std::int64_t window_len,
                         std::int64_t pad_past, std::int64_t pad_future, int emit_last_n) {
    StreamingDecoder decoder(m, window_len, pad_past, pad_future, emit_last_n);
    StreamStats stats;
    stats.emissions = decoder.push(signal);
    stats.forward_passes = decoder.forward_passes();
    return stats;
}

}  // namespace emgseq::bench
