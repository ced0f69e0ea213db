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

#include <vector>

#include "emgseq/common.hpp"
#include "emgseq/mat.hpp"

namespace emgseq::loss {

constexpr int kBlankId = 0;

struct LossConfig {
    double alpha = 0.5;       // distillation weight
    double beta = 1.0;        // task weight
    double temperature = 2.0; // softening temperature
    bool ctc_zero_infinity = true;
    /// Multiplies the distillation term (loss and gradient) by T^2. Off: the
    /// plain soft-target cross-entropy is used as-is.
    bool hinton_t2_scaling = false;
};

void validate_loss_config(const LossConfig& cfg);

struct CtcResult {
    double loss = 0.0;
    /// Gradient w.r.t. the unnormalized logits behind the log-probabilities
    /// (the re-normalizing parameterization a linear decoder head produces).
    MatD grad_logits;
    bool infinite = false;  // no valid alignment existed
};

/// CTC negative log-likelihood via the log-space forward recursion, plus the
/// analytic gradient from the forward-backward posteriors. Rows of `logits`
/// are log-softmax normalized internally, so either raw logits or already
/// normalized log-probabilities are accepted.
///
/// An un-alignable target (more symbols/repeats than frames) yields +inf;
/// with zero_infinity the result is loss 0 with a zero gradient instead.
CtcResult ctc_loss(const MatD& logits, const std::vector<int>& target, bool zero_infinity = true);

struct DistillResult {
    double loss = 0.0;
    MatD grad_student;  // w.r.t. student logits
};

/// Per-frame soft-target cross-entropy between temperature-scaled teacher and
/// student distributions, averaged over frames. With t2_scaling both the loss
/// and gradient carry an extra T^2 factor.
DistillResult distill_loss(const MatD& student_logits, const MatD& teacher_logits,
                           double temperature, bool t2_scaling = false);

/// (alpha * l_distill + beta * l_task) / (alpha + beta).
double combined_loss(double l_task, double l_distill, const LossConfig& cfg);

/// Mean entropy of the temperature-softened distribution, the lower bound of
/// distill_loss for a fixed teacher.
double soft_target_entropy(const MatD& teacher_logits, double temperature);

}  // namespace emgseq::loss
