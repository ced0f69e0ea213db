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

#include <map>
#include <set>
#include <string>
#include <vector>

#include "emgseq/augment.hpp"
#include "emgseq/data.hpp"
#include "emgseq/loss.hpp"
#include "emgseq/model.hpp"
#include "emgseq/train.hpp"

namespace emgseq::config {

inline constexpr const char* kVersion = "emgseq 0.1.0";

/// Flat dotted-key store behind the experiment config files. Files use INI
/// style sections ([train] + peak_lr=...) or fully dotted keys; command-line
/// overrides are dotted ("train.peak_lr=1e-3"). Keys that nothing consumes
/// are schema violations, reported by name.
class KeyValues {
public:
    void load_file(const std::string& path);
    void set(const std::string& dotted_key, const std::string& value);
    /// Parses "key=value" (the --set form).
    void apply_override(const std::string& assignment);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback);
    std::int64_t get_int(const std::string& key, std::int64_t fallback);
    double get_double(const std::string& key, double fallback);
    bool get_bool(const std::string& key, bool fallback);
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback);

    /// Throws schema_violation naming every key never read by a getter.
    void ensure_all_consumed() const;

    /// Stable hash of the canonical key=value serialization.
    std::string content_hash() const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

/// Everything one experiment needs, assembled from a config file plus
/// overrides. Section defaults mirror the constant-hyperparameter tables.
struct ExperimentConfig {
    std::string experiment_id;
    std::string out_dir = "runs";
    std::string manifest_path;
    int threads = 0;  // 0 = library default

    data::SynthConfig synth;
    augment::AugmentConfig augment;
    model::ArchConfig arch;
    loss::LossConfig loss;
    train::TrainConfig train;

    std::string config_hash;
};

ExperimentConfig parse_experiment(KeyValues& kv);

/// <out>/<experiment_id>/{checkpoints,reports,logs}; creates the tree.
struct RunPaths {
    std::string root;
    std::string checkpoints;
    std::string reports;
    std::string logs;
};
RunPaths make_run_paths(const ExperimentConfig& cfg);

/// Config hash + seed + code version, enough to re-execute the run.
void write_provenance(const ExperimentConfig& cfg, const std::string& path);

}  // namespace emgseq::config
