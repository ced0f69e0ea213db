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

#include "emgseq/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace emgseq::loss {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline double log_sum_exp(double a, double b, double c) { return log_sum_exp(log_sum_exp(a, b), c); }

/// Row-wise log-softmax; returns the normalized table.
MatD log_softmax_rows(const MatD& logits) {
    MatD out(logits.rows, logits.cols);
    for (std::int64_t t = 0; t < logits.rows; ++t) {
        const double* row = logits.row(t);
        double mx = row[0];
        for (std::int64_t v = 1; v < logits.cols; ++v) mx = std::max(mx, row[v]);
        double sum = 0.0;
        for (std::int64_t v = 0; v < logits.cols; ++v) sum += std::exp(row[v] - mx);
        const double lz = mx + std::log(sum);
        double* orow = out.row(t);
        for (std::int64_t v = 0; v < logits.cols; ++v) orow[v] = row[v] - lz;
    }
    return out;
}

}  // namespace

void validate_loss_config(const LossConfig& cfg) {
    require(cfg.alpha >= 0 && cfg.beta >= 0, "bad_loss_config", "alpha and beta must be >= 0");
    require(cfg.alpha + cfg.beta > 0, "bad_loss_config", "alpha + beta must be positive");
    require(cfg.temperature > 0, "bad_loss_config", "temperature must be positive");
}

CtcResult ctc_loss(const MatD& logits, const std::vector<int>& target, bool zero_infinity) {
    const std::int64_t frames = logits.rows;
    const std::int64_t vocab = logits.cols;
    require(frames >= 1 && vocab >= 2, "bad_ctc_input", "need at least one frame and two classes");
    for (int t : target) {
        require(t != kBlankId, "bad_ctc_target", "target contains the blank symbol");
        require(t > 0 && t < vocab, "bad_ctc_target",
                "target symbol " + std::to_string(t) + " outside [1, " + std::to_string(vocab) + ")");
    }

    const MatD lp = log_softmax_rows(logits);

    // Extended label sequence: blank, t1, blank, t2, ..., blank.
    const std::int64_t ext = 2 * static_cast<std::int64_t>(target.size()) + 1;
    auto label_at = [&](std::int64_t s) -> int {
        return (s % 2 == 0) ? kBlankId : target[static_cast<std::size_t>(s / 2)];
    };

    CtcResult res;
    res.grad_logits = MatD(frames, vocab);

    MatD alpha(frames, ext);
    alpha.fill(kNegInf);
    alpha.at(0, 0) = lp.at(0, kBlankId);
    if (ext > 1) alpha.at(0, 1) = lp.at(0, label_at(1));
    for (std::int64_t t = 1; t < frames; ++t) {
        for (std::int64_t s = 0; s < ext; ++s) {
            double a = alpha.at(t - 1, s);
            if (s >= 1) a = log_sum_exp(a, alpha.at(t - 1, s - 1));
            // Skip transition allowed between distinct non-blank labels.
            if (s >= 2 && s % 2 == 1 && label_at(s) != label_at(s - 2)) {
                a = log_sum_exp(a, alpha.at(t - 1, s - 2));
            }
            alpha.at(t, s) = a == kNegInf ? kNegInf : a + lp.at(t, label_at(s));
        }
    }

    double log_p = alpha.at(frames - 1, ext - 1);
    if (ext > 1) log_p = log_sum_exp(log_p, alpha.at(frames - 1, ext - 2));

    if (log_p == kNegInf) {
        res.infinite = true;
        if (zero_infinity) {
            res.loss = 0.0;
            return res;  // grad stays zero
        }
        res.loss = std::numeric_limits<double>::infinity();
        return res;
    }

    MatD beta(frames, ext);
    beta.fill(kNegInf);
    beta.at(frames - 1, ext - 1) = lp.at(frames - 1, kBlankId);
    if (ext > 1) beta.at(frames - 1, ext - 2) = lp.at(frames - 1, label_at(ext - 2));
    for (std::int64_t t = frames - 2; t >= 0; --t) {
        for (std::int64_t s = 0; s < ext; ++s) {
            double b = beta.at(t + 1, s);
            if (s + 1 < ext) b = log_sum_exp(b, beta.at(t + 1, s + 1));
            if (s + 2 < ext && s % 2 == 1 && label_at(s) != label_at(s + 2)) {
                b = log_sum_exp(b, beta.at(t + 1, s + 2));
            }
            beta.at(t, s) = b == kNegInf ? kNegInf : b + lp.at(t, label_at(s));
        }
    }

    // Posterior over extended states; gradient w.r.t. logits is
    // softmax(logits) - per-class posterior mass.
    for (std::int64_t t = 0; t < frames; ++t) {
        std::vector<double> class_post(static_cast<std::size_t>(vocab), 0.0);
        for (std::int64_t s = 0; s < ext; ++s) {
            const double a = alpha.at(t, s);
            const double b = beta.at(t, s);
            if (a == kNegInf || b == kNegInf) continue;
            // alpha and beta both include the emission at t; remove one copy.
            const double post = std::exp(a + b - lp.at(t, label_at(s)) - log_p);
            class_post[static_cast<std::size_t>(label_at(s))] += post;
        }
        double* grow = res.grad_logits.row(t);
        const double* lrow = lp.row(t);
        for (std::int64_t v = 0; v < vocab; ++v) {
            grow[v] = std::exp(lrow[v]) - class_post[static_cast<std::size_t>(v)];
        }
    }

    res.loss = -log_p;
    return res;
}

DistillResult distill_loss(const MatD& student_logits, const MatD& teacher_logits,
                           double temperature, bool t2_scaling) {
    require(student_logits.rows == teacher_logits.rows &&
                student_logits.cols == teacher_logits.cols,
            "frame_mismatch", "student and teacher logit tables must have identical shape");
    require(temperature > 0, "bad_loss_config", "temperature must be positive");
    const std::int64_t frames = student_logits.rows;
    const std::int64_t vocab = student_logits.cols;
    require(frames >= 1, "bad_distill_input", "need at least one frame");

    MatD t_scaled(frames, vocab), s_scaled(frames, vocab);
    for (std::int64_t i = 0; i < frames * vocab; ++i) {
        t_scaled.v[static_cast<std::size_t>(i)] =
            teacher_logits.v[static_cast<std::size_t>(i)] / temperature;
        s_scaled.v[static_cast<std::size_t>(i)] =
            student_logits.v[static_cast<std::size_t>(i)] / temperature;
    }
    const MatD t_logp = log_softmax_rows(t_scaled);
    const MatD s_logp = log_softmax_rows(s_scaled);

    DistillResult res;
    res.grad_student = MatD(frames, vocab);
    const double scale = (t2_scaling ? temperature * temperature : 1.0);
    double total = 0.0;
    for (std::int64_t t = 0; t < frames; ++t) {
        const double* tl = t_logp.row(t);
        const double* sl = s_logp.row(t);
        double* g = res.grad_student.row(t);
        double frame_loss = 0.0;
        for (std::int64_t v = 0; v < vocab; ++v) {
            const double pt = std::exp(tl[v]);
            frame_loss -= pt * sl[v];
            // d/ds of mean-frame cross-entropy, through the student softmax
            // and the 1/T logit scaling.
            g[v] = scale * (std::exp(sl[v]) - pt) /
                   (temperature * static_cast<double>(frames));
        }
        total += frame_loss;
    }
    res.loss = scale * total / static_cast<double>(frames);
    return res;
}

double combined_loss(double l_task, double l_distill, const LossConfig& cfg) {
    validate_loss_config(cfg);
    // Degenerate weights return the surviving term exactly; the quotient
    // form would round it.
    if (cfg.alpha == 0.0) return l_task;
    if (cfg.beta == 0.0) return l_distill;
    return (cfg.alpha * l_distill + cfg.beta * l_task) / (cfg.alpha + cfg.beta);
}

double soft_target_entropy(const MatD& teacher_logits, double temperature) {
    MatD scaled(teacher_logits.rows, teacher_logits.cols);
    for (std::size_t i = 0; i < scaled.v.size(); ++i) scaled.v[i] = teacher_logits.v[i] / temperature;
    const MatD lp = log_softmax_rows(scaled);
    double total = 0.0;
    for (std::int64_t t = 0; t < lp.rows; ++t) {
        const double* row = lp.row(t);
        for (std::int64_t v = 0; v < lp.cols; ++v) total -= std::exp(row[v]) * row[v];
    }
    return total / static_cast<double>(lp.rows);
}

}  // namespace emgseq::loss
