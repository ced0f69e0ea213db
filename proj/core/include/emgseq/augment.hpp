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
#include <vector>

#include "emgseq/common.hpp"
#include "emgseq/mat.hpp"

namespace emgseq::augment {

struct AugmentConfig {
    /// Circular per-band channel shifts drawn uniformly per sample.
    /// Empty = rotation disabled.
    std::vector<int> rotation_offsets = {-1, 0, 1};
    int band_size = 16;
    /// Maximum masked span length in feature frames; 0 disables masking.
    int mask_max_len = 0;
    int masks_per_window = 2;

    bool rotation_enabled() const { return !rotation_offsets.empty(); }
    bool masking_enabled() const { return mask_max_len > 0 && masks_per_window > 0; }
};

void validate_augment_config(const AugmentConfig& cfg);

/// Circular shift within each band: channel c maps to (c + offset) mod band.
/// The time axis is untouched. |offset| must be < band_size and the channel
/// count must be a multiple of band_size.
MatF rotate_channels(const MatF& signal, int offset, int band_size = 16);

/// One masked span in feature frames.
struct MaskSpan {
    std::int64_t start = 0;
    std::int64_t len = 0;
};

/// Draws masks_per_window spans: start uniform in [0, F), length uniform in
/// [1, mask_max_len], clipped at F. Returns an empty list when masking is off.
std::vector<MaskSpan> draw_mask_spans(std::int64_t num_frames, const AugmentConfig& cfg, Rng& rng);

/// Zeroes the masked frames across all feature dims; untouched frames are
/// bit-identical to the input.
MatF mask_time(const MatF& features, const std::vector<MaskSpan>& spans);

/// Convenience wrapper: draw spans then apply.
MatF mask_time(const MatF& features, const AugmentConfig& cfg, Rng& rng);

/// Per-sample augmentation decisions, drawn once so that a teacher and a
/// student can be fed the identically augmented input.
struct AugmentPlan {
    int rotation_offset = 0;
    std::vector<MaskSpan> mask_spans;
};

AugmentPlan draw_plan(const AugmentConfig& cfg, std::int64_t num_frames, Rng& rng);

}  // namespace emgseq::augment
