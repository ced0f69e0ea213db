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

#include <doctest.h>

#include <cmath>

#include "emgseq/loss.hpp"
#include "oracles.hpp"

using namespace emgseq;

namespace {

MatD uniform_log_probs(std::int64_t frames, std::int64_t vocab) {
    MatD lp(frames, vocab);
    lp.fill(-std::log(static_cast<double>(vocab)));
    return lp;
}

MatD random_logits(std::int64_t frames, std::int64_t vocab, std::uint64_t seed) {
    MatD m(frames, vocab);
    Rng rng(seed);
    for (double& v : m.v) v = rng.normal();
    return m;
}

}  // namespace

TEST_SUITE("loss") {

TEST_CASE("two-frame uniform table, single-symbol target") {
    // paths a.a, a.-, -.a out of 4; P = 3/4
    const MatD lp = uniform_log_probs(2, 2);
    const loss::CtcResult res = loss::ctc_loss(lp, {1});
    CHECK(res.loss == doctest::Approx(-std::log(0.75)).epsilon(1e-12));
    CHECK(res.loss == doctest::Approx(0.287682).epsilon(1e-5));
}

TEST_CASE("un-alignable target hits zero-infinity") {
    const MatD lp = uniform_log_probs(2, 2);
    const loss::CtcResult res = loss::ctc_loss(lp, {1, 1}, true);
    CHECK(res.infinite);
    CHECK(res.loss == 0.0);
    for (double g : res.grad_logits.v) CHECK(g == 0.0);
    const loss::CtcResult raw = loss::ctc_loss(lp, {1, 1}, false);
    CHECK(std::isinf(raw.loss));
}

TEST_CASE("empty target is the all-blank path") {
    const MatD lp = uniform_log_probs(2, 2);
    const loss::CtcResult res = loss::ctc_loss(lp, {});
    CHECK(res.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("forward recursion equals brute-force path enumeration") {
    Rng rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const std::int64_t frames = 1 + static_cast<std::int64_t>(rng.next_below(6));
        const std::int64_t vocab = 2 + static_cast<std::int64_t>(rng.next_below(3));
        const MatD logits = random_logits(frames, vocab, 1000 + static_cast<std::uint64_t>(trial));
        std::vector<int> target;
        const std::uint64_t len = rng.next_below(4);
        for (std::uint64_t i = 0; i < len; ++i) {
            target.push_back(1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(vocab - 1))));
        }
        const loss::CtcResult res = loss::ctc_loss(logits, target, true);
        const double brute = oracles::ctc_brute_force_prob(oracles::softmax_rows(logits), target);
        if (res.infinite) {
            CHECK(brute == 0.0);
        } else {
            CHECK(std::abs(res.loss - (-std::log(brute))) < 1e-6);
        }
    }
}

TEST_CASE("ctc gradient matches re-normalizing finite differences") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const std::int64_t frames = 2 + static_cast<std::int64_t>(rng.next_below(4));
        const std::int64_t vocab = 2 + static_cast<std::int64_t>(rng.next_below(3));
        MatD logits = random_logits(frames, vocab, 2000 + static_cast<std::uint64_t>(trial));
        std::vector<int> target;
        const std::uint64_t len = 1 + rng.next_below(2);
        for (std::uint64_t i = 0; i < len; ++i) {
            target.push_back(1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(vocab - 1))));
        }
        const loss::CtcResult res = loss::ctc_loss(logits, target, true);
        if (res.infinite) continue;
        for (std::int64_t t = 0; t < frames; ++t) {
            for (std::int64_t v = 0; v < vocab; ++v) {
                const double numeric = oracles::central_diff(
                    [&](double x) {
                        MatD perturbed = logits;
                        perturbed.at(t, v) = x;
                        return loss::ctc_loss(perturbed, target, true).loss;
                    },
                    logits.at(t, v), 1e-4);
                CHECK(oracles::rel_err(res.grad_logits.at(t, v), numeric, 1e-6) < 1e-3);
            }
        }
    }
}

TEST_CASE("ctc rejects malformed targets") {
    const MatD lp = uniform_log_probs(3, 3);
    CHECK_THROWS_AS(loss::ctc_loss(lp, {0}), Error);   // blank in target
    CHECK_THROWS_AS(loss::ctc_loss(lp, {3}), Error);   // out of vocab
    CHECK_THROWS_AS(loss::ctc_loss(lp, {-1}), Error);
}

TEST_CASE("matched-uniform distillation equals ln V") {
    MatD logits(3, 4);
    logits.fill(0.25);  // equal logits: uniform distribution
    const loss::DistillResult res = loss::distill_loss(logits, logits, 2.0);
    CHECK(res.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    for (double g : res.grad_student.v) CHECK(std::abs(g) < 1e-15);
}

TEST_CASE("temperature-two soft target of logits (2, 0)") {
    MatD teacher(1, 2);
    teacher.at(0, 0) = 2.0;
    teacher.at(0, 1) = 0.0;
    // softmax([1, 0]) after dividing by T = 2
    const double p0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
    CHECK(p0 == doctest::Approx(0.731059).epsilon(1e-6));
    // Matched student: loss equals the soft-target entropy.
    const loss::DistillResult res = loss::distill_loss(teacher, teacher, 2.0);
    const double entropy = -(p0 * std::log(p0) + (1 - p0) * std::log(1 - p0));
    CHECK(res.loss == doctest::Approx(entropy).epsilon(1e-12));
    CHECK(loss::soft_target_entropy(teacher, 2.0) == doctest::Approx(entropy).epsilon(1e-12));
}

TEST_CASE("distillation loss is bounded below by the soft-target entropy") {
    Rng rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        const MatD teacher = random_logits(4, 5, 3000 + static_cast<std::uint64_t>(trial));
        const MatD student = random_logits(4, 5, 4000 + static_cast<std::uint64_t>(trial));
        const double entropy = loss::soft_target_entropy(teacher, 2.0);
        CHECK(loss::distill_loss(student, teacher, 2.0).loss >= entropy - 1e-12);
    }
}

TEST_CASE("distillation gradient matches finite differences") {
    const MatD teacher = random_logits(3, 4, 50);
    MatD student = random_logits(3, 4, 51);
    for (const double temperature : {1.0, 2.0}) {
        const loss::DistillResult res = loss::distill_loss(student, teacher, temperature);
        for (std::int64_t t = 0; t < 3; ++t) {
            for (std::int64_t v = 0; v < 4; ++v) {
                const double numeric = oracles::central_diff(
                    [&](double x) {
                        MatD perturbed = student;
                        perturbed.at(t, v) = x;
                        return loss::distill_loss(perturbed, teacher, temperature).loss;
                    },
                    student.at(t, v), 1e-4);
                CHECK(oracles::rel_err(res.grad_student.at(t, v), numeric, 1e-8) < 1e-3);
            }
        }
    }
}

TEST_CASE("t2 scaling multiplies loss and gradient by T^2") {
    const MatD teacher = random_logits(2, 3, 60);
    const MatD student = random_logits(2, 3, 61);
    const loss::DistillResult plain = loss::distill_loss(student, teacher, 2.0, false);
    const loss::DistillResult scaled = loss::distill_loss(student, teacher, 2.0, true);
    CHECK(scaled.loss == doctest::Approx(4.0 * plain.loss).epsilon(1e-12));
    CHECK(scaled.grad_student.at(1, 2) ==
          doctest::Approx(4.0 * plain.grad_student.at(1, 2)).epsilon(1e-12));
}

TEST_CASE("distillation shape mismatch is an error") {
    CHECK_THROWS_AS(loss::distill_loss(random_logits(3, 4, 70), random_logits(2, 4, 71), 2.0),
                    Error);
}

TEST_CASE("combined loss fixtures") {
    loss::LossConfig cfg;  // alpha 0.5, beta 1.0
    CHECK(loss::combined_loss(3.0, 3.0, cfg) == 3.0);
    CHECK(loss::combined_loss(1.5, 0.0, cfg) == doctest::Approx(1.0).epsilon(1e-15));
    cfg.alpha = 0.0;
    cfg.beta = 0.7;
    CHECK(loss::combined_loss(0.1234567890123, 99.0, cfg) == 0.1234567890123);  // exact
    cfg.alpha = 0.5;
    cfg.beta = 0.0;
    CHECK(loss::combined_loss(99.0, 0.777, cfg) == 0.777);
    cfg.alpha = 0.0;
    cfg.beta = 0.0;
    CHECK_THROWS_AS(loss::combined_loss(1.0, 1.0, cfg), Error);
}

TEST_CASE("combined loss is invariant under power-of-two weight scaling") {
    Rng rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        loss::LossConfig cfg;
        cfg.alpha = 0.1 + rng.next_double();
        cfg.beta = 0.1 + rng.next_double();
        const double lt = rng.normal(), ld = rng.normal();
        const double base = loss::combined_loss(lt, ld, cfg);
        for (const double c : {2.0, 4.0, 0.5, 8.0}) {
            loss::LossConfig scaled = cfg;
            scaled.alpha = c * cfg.alpha;
            scaled.beta = c * cfg.beta;
            CHECK(loss::combined_loss(lt, ld, scaled) == base);  // bitwise
        }
        // general positive scalings agree to rounding
        loss::LossConfig odd = cfg;
        odd.alpha = 3.0 * cfg.alpha;
        odd.beta = 3.0 * cfg.beta;
        CHECK(loss::combined_loss(lt, ld, odd) == doctest::Approx(base).epsilon(1e-14));
    }
}

}  // TEST_SUITE
