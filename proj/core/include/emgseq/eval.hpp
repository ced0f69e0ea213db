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
#include <string>
#include <vector>

#include <json.hpp>

#include "emgseq/common.hpp"
#include "emgseq/data.hpp"
#include "emgseq/mat.hpp"
#include "emgseq/model.hpp"

namespace emgseq::eval {

/// Best-path CTC decoding: per-frame argmax (ties toward the lower token id),
/// collapse adjacent repeats, drop blanks.
std::vector<int> greedy_decode(const MatF& logits);
std::vector<int> greedy_decode(const MatD& logits);

/// Per-frame argmax path before collapsing; what the streaming driver emits.
std::vector<int> argmax_path(const MatF& logits);

struct CerBreakdown {
    std::int64_t substitutions = 0;
    std::int64_t deletions = 0;   // reference characters with no counterpart
    std::int64_t insertions = 0;  // predicted characters with no counterpart
    std::int64_t ref_len = 0;

    std::int64_t distance() const { return substitutions + deletions + insertions; }
    double cer() const;  // (S+D+I) * 100 / N; throws on N == 0
};

/// Minimal-edit alignment of pred against ref with unit costs. Traceback ties
/// prefer substitution over deletion over insertion, so the S/D/I split is
/// reproducible. ref must be non-empty (cer() divides by its length).
CerBreakdown cer(const std::vector<int>& pred, const std::vector<int>& ref);

struct SessionReport {
    std::string session_path;
    std::string user_id;
    std::string session_id;
    CerBreakdown breakdown;
};

struct EvalReport {
    CerBreakdown aggregate;  // micro-average: total edits over total ref length
    std::vector<SessionReport> per_session;
    std::string checkpoint_id;
    std::string split;
};

struct EvalOptions {
    std::int64_t window_len = 8000;
    std::int64_t pad_past = 1800;
    std::int64_t pad_future = 200;
    // evaluation always windows without overlap (hop = window_len)
};

/// Runs the model over every session, scoring each window independently and
/// micro-averaging edits over total reference length.
EvalReport evaluate(const model::Model& m, const std::vector<std::string>& session_paths,
                    const EvalOptions& opts, const std::string& checkpoint_id = "",
                    const std::string& split = "");

nlohmann::json report_to_json(const EvalReport& report);

struct ParetoPoint {
    std::int64_t params = 0;
    double cer = 0.0;
    std::string tag;
};

/// Keeps p iff no q has q.params <= p.params and q.cer < p.cer. Ties on both
/// axes are all kept.
std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points);

std::vector<ParetoPoint> read_points_csv(const std::string& path);
void write_points_csv(const std::vector<ParetoPoint>& points, const std::string& path);

}  // namespace emgseq::eval
