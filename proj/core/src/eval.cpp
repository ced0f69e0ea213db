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

#include "emgseq/eval.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "emgseq/loss.hpp"

namespace emgseq::eval {

namespace {

template <typename T>
std::vector<int> argmax_path_impl(const Mat<T>& logits) {
    std::vector<int> path;
    path.reserve(static_cast<std::size_t>(logits.rows));
    for (std::int64_t t = 0; t < logits.rows; ++t) {
        const T* row = logits.row(t);
        int best = 0;
        for (std::int64_t v = 1; v < logits.cols; ++v) {
            if (row[v] > row[best]) best = static_cast<int>(v);  // ties keep the lower id
        }
        path.push_back(best);
    }
    return path;
}

std::vector<int> collapse_path(const std::vector<int>& path) {
    std::vector<int> out;
    int prev = loss::kBlankId;
    for (int tok : path) {
        if (tok != prev && tok != loss::kBlankId) out.push_back(tok);
        prev = tok;
    }
    return out;
}

}  // namespace

std::vector<int> argmax_path(const MatF& logits) { return argmax_path_impl(logits); }

std::vector<int> greedy_decode(const MatF& logits) { return collapse_path(argmax_path_impl(logits)); }
std::vector<int> greedy_decode(const MatD& logits) { return collapse_path(argmax_path_impl(logits)); }

double CerBreakdown::cer() const {
    require(ref_len > 0, "empty_reference", "CER undefined for an empty reference");
    return static_cast<double>(distance()) * 100.0 / static_cast<double>(ref_len);
}

CerBreakdown cer(const std::vector<int>& pred, const std::vector<int>& ref) {
    const std::int64_t np = static_cast<std::int64_t>(pred.size());
    const std::int64_t nr = static_cast<std::int64_t>(ref.size());

    // d[i][j]: minimal edits aligning pred[0..i) with ref[0..j).
    Mat<std::int32_t> d(np + 1, nr + 1);
    for (std::int64_t i = 0; i <= np; ++i) d.at(i, 0) = static_cast<std::int32_t>(i);
    for (std::int64_t j = 0; j <= nr; ++j) d.at(0, j) = static_cast<std::int32_t>(j);
    for (std::int64_t i = 1; i <= np; ++i) {
        for (std::int64_t j = 1; j <= nr; ++j) {
            const std::int32_t sub =
                d.at(i - 1, j - 1) + (pred[static_cast<std::size_t>(i - 1)] ==
                                              ref[static_cast<std::size_t>(j - 1)]
                                          ? 0
                                          : 1);
            const std::int32_t del = d.at(i, j - 1) + 1;  // ref char unmatched
            const std::int32_t ins = d.at(i - 1, j) + 1;  // pred char unmatched
            d.at(i, j) = std::min({sub, del, ins});
        }
    }

    CerBreakdown out;
    out.ref_len = nr;
    std::int64_t i = np, j = nr;
    while (i > 0 || j > 0) {
        const std::int32_t cur = d.at(i, j);
        if (i > 0 && j > 0) {
            const bool match =
                pred[static_cast<std::size_t>(i - 1)] == ref[static_cast<std::size_t>(j - 1)];
            if (cur == d.at(i - 1, j - 1) + (match ? 0 : 1)) {
                if (!match) ++out.substitutions;
                --i;
                --j;
                continue;
            }
        }
        if (j > 0 && cur == d.at(i, j - 1) + 1) {
            ++out.deletions;
            --j;
            continue;
        }
        ++out.insertions;
        --i;
    }
    return out;
}

EvalReport evaluate(const model::Model& m, const std::vector<std::string>& session_paths,
                    const EvalOptions& opts, const std::string& checkpoint_id,
                    const std::string& split) {
    require(!session_paths.empty(), "empty_file_list", "nothing to evaluate");
    EvalReport report;
    report.checkpoint_id = checkpoint_id;
    report.split = split;

    for (const std::string& path : session_paths) {
        const data::Session session = data::load_session(path);
        const auto windows = data::window_session(session, opts.window_len, opts.pad_past,
                                                  opts.pad_future, opts.window_len);
        SessionReport sr;
        sr.session_path = path;
        sr.user_id = session.user_id;
        sr.session_id = session.session_id;
        for (const data::WindowedSample& w : windows) {
            const MatF logits = m.forward(w.signal);
            const std::vector<int> pred = greedy_decode(logits);
            const CerBreakdown b = cer(pred, w.target);
            sr.breakdown.substitutions += b.substitutions;
            sr.breakdown.deletions += b.deletions;
            sr.breakdown.insertions += b.insertions;
            sr.breakdown.ref_len += b.ref_len;
        }
        report.aggregate.substitutions += sr.breakdown.substitutions;
        report.aggregate.deletions += sr.breakdown.deletions;
        report.aggregate.insertions += sr.breakdown.insertions;
        report.aggregate.ref_len += sr.breakdown.ref_len;
        report.per_session.push_back(std::move(sr));
    }
    return report;
}

namespace {

nlohmann::json breakdown_to_json(const CerBreakdown& b) {
    return {
        {"substitutions", b.substitutions},
        {"deletions", b.deletions},
        {"insertions", b.insertions},
        {"ref_len", b.ref_len},
        {"cer", b.ref_len > 0 ? b.cer() : 0.0},
    };
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json sessions = nlohmann::json::array();
    for (const SessionReport& s : report.per_session) {
        sessions.push_back({
            {"session_path", s.session_path},
            {"user_id", s.user_id},
            {"session_id", s.session_id},
            {"breakdown", breakdown_to_json(s.breakdown)},
        });
    }
    return {
        {"aggregate", breakdown_to_json(report.aggregate)},
        {"per_session", sessions},
        {"checkpoint_id", report.checkpoint_id},
        {"split", report.split},
    };
}

std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points) {
    require(!points.empty(), "empty_points", "pareto front of an empty set");
    std::vector<ParetoPoint> front;
    for (const ParetoPoint& p : points) {
        bool dominated = false;
        for (const ParetoPoint& q : points) {
            if (q.params <= p.params && q.cer < p.cer) {
                dominated = true;
                break;
            }
        }
        if (!dominated) front.push_back(p);
    }
    return front;
}

std::vector<ParetoPoint> read_points_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "io_error", "cannot open: " + path);
    std::vector<ParetoPoint> points;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("params", 0) == 0) continue;  // header row
        }
        std::stringstream ss(line);
        std::string field;
        ParetoPoint p;
        require(static_cast<bool>(std::getline(ss, field, ',')), "bad_csv", "missing params field");
        p.params = std::stoll(field);
        require(static_cast<bool>(std::getline(ss, field, ',')), "bad_csv", "missing cer field");
        p.cer = std::stod(field);
        if (std::getline(ss, field, ',')) p.tag = field;
        require(p.params > 0, "bad_csv", "params must be positive");
        points.push_back(std::move(p));
    }
    return points;
}

void write_points_csv(const std::vector<ParetoPoint>& points, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), "io_error", "cannot open for writing: " + path);
    out << "params,cer,tag\n";
    for (const ParetoPoint& p : points) {
        out << p.params << "," << p.cer << "," << p.tag << "\n";
    }
    require(out.good(), "io_error", "write failed: " + path);
}

}  // namespace emgseq::eval
