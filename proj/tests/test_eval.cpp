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

#include "emgseq/eval.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace emgseq;

namespace {

// Logits whose argmax follows a given frame path.
MatF logits_for_path(const std::vector<int>& path, int vocab) {
    MatF logits(static_cast<std::int64_t>(path.size()), vocab);
    for (std::size_t t = 0; t < path.size(); ++t) {
        for (int v = 0; v < vocab; ++v) logits.at(static_cast<std::int64_t>(t), v) = 0.0f;
        logits.at(static_cast<std::int64_t>(t), path[t]) = 1.0f;
    }
    return logits;
}

std::vector<int> seq(std::initializer_list<int> xs) { return std::vector<int>(xs); }

std::vector<int> random_seq(Rng& rng, std::uint64_t max_len, int alphabet) {
    std::vector<int> out;
    const std::uint64_t len = rng.next_below(max_len + 1);
    for (std::uint64_t i = 0; i < len; ++i) {
        out.push_back(1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(alphabet))));
    }
    return out;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("greedy decode collapse rules") {
    CHECK(eval::greedy_decode(logits_for_path({1, 1, 0, 2}, 3)) == seq({1, 2}));
    CHECK(eval::greedy_decode(logits_for_path({0, 0, 0}, 3)).empty());
    CHECK(eval::greedy_decode(logits_for_path({1, 0, 1}, 3)) == seq({1, 1}));
}

TEST_CASE("argmax ties break toward the lower token id") {
    MatF logits(1, 4);
    logits.fill(0.5f);
    CHECK(eval::argmax_path(logits) == seq({0}));
    CHECK(eval::greedy_decode(logits).empty());  // blank wins the tie
}

TEST_CASE("greedy decode equals an independent collapse oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> path;
        const std::uint64_t frames = 1 + rng.next_below(12);
        for (std::uint64_t i = 0; i < frames; ++i) {
            path.push_back(static_cast<int>(rng.next_below(4)));
        }
        const auto decoded = eval::greedy_decode(logits_for_path(path, 4));
        CHECK(decoded == oracles::collapse(path));
        for (int tok : decoded) CHECK(tok != 0);
    }
}

TEST_CASE("cer identity and worked fixtures") {
    const auto same = eval::cer(seq({3, 1, 2}), seq({3, 1, 2}));
    CHECK(same.distance() == 0);
    CHECK(same.cer() == 0.0);

    // kitten vs sitting over a shared character coding
    // k i t t e n -> 1 2 3 3 4 5 ; s i t t i n g -> 6 2 3 3 2 5 7
    const auto kitten = eval::cer(seq({1, 2, 3, 3, 4, 5}), seq({6, 2, 3, 3, 2, 5, 7}));
    CHECK(kitten.distance() == 3);
    CHECK(kitten.ref_len == 7);
    CHECK(kitten.cer() == doctest::Approx(42.857142857).epsilon(1e-9));
    CHECK(kitten.substitutions == 2);
    CHECK(kitten.deletions == 1);
    CHECK(kitten.insertions == 0);

    const auto empty_pred = eval::cer({}, seq({1, 2}));
    CHECK(empty_pred.distance() == 2);
    CHECK(empty_pred.deletions == 2);
    CHECK(empty_pred.cer() == 100.0);
}

TEST_CASE("empty reference is an explicit error") {
    const auto b = eval::cer(seq({1}), {});
    CHECK(b.ref_len == 0);
    CHECK_THROWS_AS(b.cer(), Error);
}

TEST_CASE("dp distance equals the exhaustive edit-script minimum") {
    Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const auto pred = random_seq(rng, 8, 3);
        const auto ref = random_seq(rng, 8, 3);
        const auto b = eval::cer(pred, ref);
        CHECK(b.distance() == oracles::edit_script_min(pred, ref));
        CHECK(b.substitutions + b.deletions <= b.ref_len);
        CHECK(b.distance() == eval::cer(ref, pred).distance());  // distance symmetry
    }
}

TEST_CASE("micro-average pools edits over reference length") {
    // (3 edits / 10 chars) + (1 edit / 90 chars) -> 4 * 100 / 100
    eval::CerBreakdown total;
    total.substitutions = 3;
    total.ref_len = 10;
    eval::CerBreakdown other;
    other.substitutions = 1;
    other.ref_len = 90;
    total.substitutions += other.substitutions;
    total.ref_len += other.ref_len;
    CHECK(total.cer() == 4.0);
}

TEST_CASE("evaluate is deterministic and reports per session") {
    const std::string dir = fixtures::temp_dir("eval-run");
    data::SynthConfig synth = fixtures::tiny_synth_config();
    synth.session_duration_s = 2.0;
    const data::SplitManifest manifest = data::synth_dataset(synth, dir);
    const auto split = data::split_dataset(manifest, data::SplitMode::Generic);

    const model::Model m = model::Model::build(fixtures::micro_arch(), 23);
    eval::EvalOptions opts;
    opts.window_len = 2000;
    opts.pad_past = 100;
    opts.pad_future = 100;
    const eval::EvalReport r1 = eval::evaluate(m, split.test, opts, "ck", "test");
    const eval::EvalReport r2 = eval::evaluate(m, split.test, opts, "ck", "test");
    CHECK(eval::report_to_json(r1).dump() == eval::report_to_json(r2).dump());
    CHECK(r1.per_session.size() == split.test.size());
    CHECK(r1.aggregate.ref_len > 0);
    CHECK_THROWS_AS(eval::evaluate(m, {}, opts), Error);
}

TEST_CASE("pareto front worked example and degenerate cases") {
    using eval::ParetoPoint;
    const std::vector<ParetoPoint> pts = {
        {1000000, 50.0, "a"}, {2000000, 40.0, "b"}, {3000000, 45.0, "c"}};
    const auto front = eval::pareto_front(pts);
    REQUIRE(front.size() == 2);
    CHECK(front[0].tag == "a");
    CHECK(front[1].tag == "b");

    const std::vector<ParetoPoint> one = {{5, 1.0, "x"}};
    CHECK(eval::pareto_front(one).size() == 1);

    const std::vector<ParetoPoint> same = {{5, 1.0, "x"}, {5, 1.0, "y"}, {5, 1.0, "z"}};
    CHECK(eval::pareto_front(same).size() == 3);
}

TEST_CASE("pareto front is dominance-free and covers every exclusion") {
    Rng rng(24);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<eval::ParetoPoint> pts;
        const std::uint64_t n = 1 + rng.next_below(12);
        for (std::uint64_t i = 0; i < n; ++i) {
            pts.push_back({static_cast<std::int64_t>(1 + rng.next_below(5)),
                           static_cast<double>(rng.next_below(5)), std::to_string(i)});
        }
        const auto front = eval::pareto_front(pts);
        auto dominated = [&](const eval::ParetoPoint& p) {
            for (const auto& q : pts) {
                if (q.params <= p.params && q.cer < p.cer) return true;
            }
            return false;
        };
        for (const auto& p : front) CHECK(!dominated(p));
        for (const auto& p : pts) {
            const bool kept = std::any_of(front.begin(), front.end(), [&](const auto& f) {
                return f.tag == p.tag;
            });
            if (!kept) CHECK(dominated(p));
        }
    }
}

TEST_CASE("points csv round trips") {
    const std::string path = fixtures::temp_dir("pareto-csv") + "/points.csv";
    const std::vector<eval::ParetoPoint> pts = {{123, 4.5, "tiny"}, {456, 3.25, ""}};
    eval::write_points_csv(pts, path);
    const auto loaded = eval::read_points_csv(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].params == 123);
    CHECK(loaded[0].cer == 4.5);
    CHECK(loaded[0].tag == "tiny");
    CHECK(loaded[1].tag.empty());
}

}  // TEST_SUITE
