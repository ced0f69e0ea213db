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

#include "emgseq/augment.hpp"

#include <algorithm>
#include <cstring>

namespace emgseq::augment {

void validate_augment_config(const AugmentConfig& cfg) {
    require(cfg.band_size > 0, "bad_augment_config", "band_size must be positive");
    require(cfg.mask_max_len >= 0, "bad_augment_config", "mask_max_len must be non-negative");
    require(cfg.masks_per_window >= 0, "bad_augment_config",
            "masks_per_window must be non-negative");
    if (cfg.rotation_enabled()) {
        require(std::find(cfg.rotation_offsets.begin(), cfg.rotation_offsets.end(), 0) !=
                    cfg.rotation_offsets.end(),
                "bad_augment_config", "rotation_offsets must contain 0 unless rotation is disabled");
        for (int off : cfg.rotation_offsets) {
            require(std::abs(off) < cfg.band_size, "bad_augment_config",
                    "rotation offset magnitude must be below band_size");
        }
    }
}

MatF rotate_channels(const MatF& signal, int offset, int band_size) {
    require(band_size > 0, "bad_rotation", "band_size must be positive");
    require(signal.cols % band_size == 0, "bad_rotation",
            "channel count " + std::to_string(signal.cols) + " is not a multiple of band size " +
                std::to_string(band_size));
    require(std::abs(offset) < band_size, "bad_rotation",
            "offset magnitude must be below band size");
    if (offset == 0) return signal;

    const int shift = ((offset % band_size) + band_size) % band_size;
    MatF out(signal.rows, signal.cols);
    const std::int64_t bands = signal.cols / band_size;
    for (std::int64_t t = 0; t < signal.rows; ++t) {
        const float* src = signal.row(t);
        float* dst = out.row(t);
        for (std::int64_t b = 0; b < bands; ++b) {
            const std::int64_t base = b * band_size;
            for (int c = 0; c < band_size; ++c) {
                dst[base + (c + shift) % band_size] = src[base + c];
            }
        }
    }
    return out;
}

std::vector<MaskSpan> draw_mask_spans(std::int64_t num_frames, const AugmentConfig& cfg, Rng& rng) {
    require(num_frames >= 1, "bad_mask", "need at least one frame");
    std::vector<MaskSpan> spans;
    if (!cfg.masking_enabled()) return spans;
    spans.reserve(static_cast<std::size_t>(cfg.masks_per_window));
    for (int m = 0; m < cfg.masks_per_window; ++m) {
        MaskSpan span;
        span.start = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(num_frames)));
        span.len = 1 + static_cast<std::int64_t>(
                           rng.next_below(static_cast<std::uint64_t>(cfg.mask_max_len)));
        span.len = std::min(span.len, num_frames - span.start);
        spans.push_back(span);
    }
    return spans;
}

MatF mask_time(const MatF& features, const std::vector<MaskSpan>& spans) {
    if (spans.empty()) return features;
    MatF out = features;
    for (const MaskSpan& span : spans) {
        for (std::int64_t f = span.start; f < span.start + span.len && f < out.rows; ++f) {
            std::memset(out.row(f), 0, static_cast<std::size_t>(out.cols) * sizeof(float));
        }
    }
    return out;
}

MatF mask_time(const MatF& features, const AugmentConfig& cfg, Rng& rng) {
    if (!cfg.masking_enabled()) return features;
    return mask_time(features, draw_mask_spans(features.rows, cfg, rng));
}

AugmentPlan draw_plan(const AugmentConfig& cfg, std::int64_t num_frames, Rng& rng) {
    AugmentPlan plan;
    if (cfg.rotation_enabled()) {
        plan.rotation_offset = cfg.rotation_offsets[static_cast<std::size_t>(
            rng.next_below(cfg.rotation_offsets.size()))];
    }
    plan.mask_spans = draw_mask_spans(num_frames, cfg, rng);
    return plan;
}

}  // namespace emgseq::augment
