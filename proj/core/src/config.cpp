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

#include "emgseq/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace emgseq::config {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

void KeyValues::load_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "io_error", "cannot open config: " + path);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            require(line.back() == ']', "bad_config",
                    "unterminated section header at line " + std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        require(eq != std::string::npos, "bad_config",
                "expected key = value at line " + std::to_string(line_no));
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        require(!key.empty(), "bad_config", "empty key at line " + std::to_string(line_no));
        if (!section.empty() && key.find('.') == std::string::npos) {
            key = section + "." + key;
        }
        values_[key] = value;
    }
}

void KeyValues::set(const std::string& dotted_key, const std::string& value) {
    values_[dotted_key] = value;
}

void KeyValues::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    require(eq != std::string::npos, "bad_config",
            "override must look like key=value: " + assignment);
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool KeyValues::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(it->second, &pos);
        require(pos == it->second.size(), "schema_violation", "not an integer: " + key);
        return v;
    } catch (const std::exception&) {
        fail("schema_violation", "key " + key + " is not an integer: " + it->second);
    }
}

double KeyValues::get_double(const std::string& key, double fallback) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        require(pos == it->second.size(), "schema_violation", "not a number: " + key);
        return v;
    } catch (const std::exception&) {
        fail("schema_violation", "key " + key + " is not a number: " + it->second);
    }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail("schema_violation", "key " + key + " is not a boolean: " + it->second);
}

std::vector<int> KeyValues::get_int_list(const std::string& key, const std::vector<int>& fallback) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    std::stringstream ss(it->second);
    std::string field;
    while (std::getline(ss, field, ',')) {
        field = trim(field);
        if (field.empty()) continue;
        try {
            out.push_back(std::stoi(field));
        } catch (const std::exception&) {
            fail("schema_violation", "key " + key + " is not an integer list: " + it->second);
        }
    }
    return out;
}

void KeyValues::ensure_all_consumed() const {
    std::vector<std::string> unknown;
    for (const auto& [key, value] : values_) {
        if (consumed_.count(key) == 0) unknown.push_back(key);
    }
    if (!unknown.empty()) {
        std::string joined;
        for (const std::string& k : unknown) {
            if (!joined.empty()) joined += ", ";
            joined += k;
        }
        fail("schema_violation", "unknown config keys: " + joined);
    }
}

std::string KeyValues::content_hash() const {
    // FNV-1a over the canonical serialization.
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001B3ull;
        }
    };
    for (const auto& [key, value] : values_) {
        mix(key);
        mix("=");
        mix(value);
        mix("\n");
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

train::TrainMode mode_from_string(const std::string& s) {
    if (s == "supervised") return train::TrainMode::Supervised;
    if (s == "distill") return train::TrainMode::Distill;
    if (s == "personalize") return train::TrainMode::Personalize;
    fail("schema_violation", "train.mode must be supervised|distill|personalize, got " + s);
}

}  // namespace

ExperimentConfig parse_experiment(KeyValues& kv) {
    ExperimentConfig cfg;
    cfg.experiment_id = kv.get_string("experiment.id", "experiment");
    cfg.out_dir = kv.get_string("experiment.out_dir", "runs");
    cfg.threads = static_cast<int>(kv.get_int("experiment.threads", 0));
    cfg.manifest_path = kv.get_string("data.manifest", "");

    // data windowing (milliseconds accepted; must divide evenly)
    const auto rate = static_cast<std::uint32_t>(kv.get_int("data.sample_rate_hz", 2000));
    cfg.train.window_len = kv.get_int("data.window_len", 8000);
    auto pad_from = [&](const char* samples_key, const char* ms_key,
                        std::int64_t fallback) -> std::int64_t {
        const bool has_samples = kv.has(samples_key);
        const bool has_ms = kv.has(ms_key);
        require(!(has_samples && has_ms), "schema_violation",
                std::string("give ") + samples_key + " or " + ms_key + ", not both");
        if (has_ms) return data::samples_from_ms(kv.get_double(ms_key, 0.0), rate);
        kv.get_double(ms_key, 0.0);  // mark consumed either way
        return kv.get_int(samples_key, fallback);
    };
    cfg.train.pad_past = pad_from("data.pad_past", "data.pad_past_ms", 1800);
    cfg.train.pad_future = pad_from("data.pad_future", "data.pad_future_ms", 200);
    cfg.train.hop = kv.get_int("data.hop", 0);

    // synth
    cfg.synth.num_train_users = static_cast<int>(kv.get_int("synth.num_train_users", 10));
    cfg.synth.num_test_users = static_cast<int>(kv.get_int("synth.num_test_users", 2));
    cfg.synth.sessions_per_user = static_cast<int>(kv.get_int("synth.sessions_per_user", 6));
    cfg.synth.session_duration_s = kv.get_double("synth.session_duration_s", 10.0);
    cfg.synth.vocab_size = static_cast<int>(kv.get_int("synth.vocab_size", 8));
    cfg.synth.keys_per_minute = kv.get_double("synth.keys_per_minute", 150.0);
    cfg.synth.noise_std = kv.get_double("synth.noise_std", 0.2);
    cfg.synth.gain_jitter = kv.get_double("synth.gain_jitter", 0.2);
    cfg.synth.pattern_jitter = kv.get_double("synth.pattern_jitter", 0.0);
    cfg.synth.seed = static_cast<std::uint64_t>(kv.get_int("synth.seed", 0));
    cfg.synth.sample_rate_hz = rate;
    cfg.synth.num_channels = static_cast<std::uint32_t>(kv.get_int("data.num_channels", 32));
    cfg.synth.burst_ms = kv.get_double("synth.burst_ms", 100.0);
    cfg.synth.onset_grid = kv.get_int("synth.onset_grid", 0);
    cfg.synth.test_band_offset = static_cast<int>(kv.get_int("synth.test_band_offset", 0));

    // augment
    const std::string rotation = kv.get_string("augment.rotation", "pm1");
    if (rotation == "none") {
        cfg.augment.rotation_offsets.clear();
    } else if (rotation == "pm1") {
        cfg.augment.rotation_offsets = {-1, 0, 1};
    } else {
        fail("schema_violation", "augment.rotation must be none|pm1, got " + rotation);
    }
    cfg.augment.band_size = static_cast<int>(kv.get_int("augment.band_size", data::kBandSize));
    cfg.augment.mask_max_len = static_cast<int>(kv.get_int("augment.mask_len", 0));
    cfg.augment.masks_per_window = static_cast<int>(kv.get_int("augment.masks_per_window", 2));

    // model
    cfg.arch.hidden_size = static_cast<int>(kv.get_int("model.hidden_size", 1024));
    cfg.arch.num_layers = static_cast<int>(kv.get_int("model.num_layers", 8));
    cfg.arch.ff_ratio = static_cast<int>(kv.get_int("model.ff_ratio", 4));
    cfg.arch.num_heads = static_cast<int>(kv.get_int("model.num_heads", 16));
    cfg.arch.vocab_size = static_cast<int>(kv.get_int("model.vocab_size", 99));
    cfg.arch.num_channels = static_cast<int>(kv.get_int("data.num_channels", 32));
    cfg.arch.causal = kv.get_bool("model.causal", true);
    const auto dropout = static_cast<float>(kv.get_double("model.dropout", 0.2));
    cfg.arch.set_all_dropouts(dropout);
    cfg.arch.dropout_hidden = static_cast<float>(kv.get_double("model.dropout_hidden", dropout));
    cfg.arch.dropout_attention =
        static_cast<float>(kv.get_double("model.dropout_attention", dropout));
    cfg.arch.dropout_activation =
        static_cast<float>(kv.get_double("model.dropout_activation", dropout));
    cfg.arch.dropout_feature_projection =
        static_cast<float>(kv.get_double("model.dropout_feature_projection", dropout));
    cfg.arch.dropout_final_layer =
        static_cast<float>(kv.get_double("model.dropout_final_layer", dropout));
    const std::string feat_kind = kv.get_string("model.featurizer", "raw_cnn");
    if (feat_kind == "raw_cnn") {
        cfg.arch.featurizer.kind = model::FeaturizerKind::RawCnn;
    } else if (feat_kind == "spectrogram_mlp") {
        cfg.arch.featurizer.kind = model::FeaturizerKind::SpectrogramMlp;
    } else {
        fail("schema_violation", "model.featurizer must be raw_cnn|spectrogram_mlp");
    }
    cfg.arch.featurizer.cnn_channels =
        kv.get_int_list("model.featurizer_channels", {128, 64, 64});
    cfg.arch.featurizer.cnn_kernels = kv.get_int_list("model.featurizer_kernels", {11, 3, 3});
    cfg.arch.featurizer.cnn_strides = kv.get_int_list("model.featurizer_strides", {5, 2, 2});
    cfg.arch.featurizer.instance_norm_after_first =
        kv.get_bool("model.featurizer_instance_norm", true);
    cfg.arch.featurizer.fft_size = static_cast<int>(kv.get_int("model.fft_size", 64));
    cfg.arch.featurizer.mlp_dims = kv.get_int_list("model.mlp_dims", {384});
    cfg.arch.tag = kv.get_string("model.tag", "");

    // loss
    cfg.loss.alpha = kv.get_double("loss.alpha", 0.5);
    cfg.loss.beta = kv.get_double("loss.beta", 1.0);
    cfg.loss.temperature = kv.get_double("loss.temperature", 2.0);
    cfg.loss.ctc_zero_infinity = kv.get_bool("loss.ctc_zero_infinity", true);
    cfg.loss.hinton_t2_scaling = kv.get_bool("loss.hinton_t2_scaling", false);

    // train
    cfg.train.mode = mode_from_string(kv.get_string("train.mode", "supervised"));
    const int default_epochs = cfg.train.mode == train::TrainMode::Personalize ? 100 : 200;
    cfg.train.epochs = static_cast<int>(kv.get_int("train.epochs", default_epochs));
    cfg.train.effective_batch_size =
        static_cast<int>(kv.get_int("train.effective_batch_size", 640));
    cfg.train.peak_lr = kv.get_double("train.peak_lr", 1e-3);
    cfg.train.warmup_ratio = kv.get_double("train.warmup_ratio", 0.05);
    const double default_wd = cfg.train.mode == train::TrainMode::Supervised
                                  ? 0.2
                                  : (cfg.train.mode == train::TrainMode::Distill ? 0.1 : 0.0);
    cfg.train.weight_decay = kv.get_double("train.weight_decay", default_wd);
    cfg.train.grad_clip = kv.get_double("train.grad_clip", 0.1);
    cfg.train.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", 0));
    cfg.train.adam_beta1 = kv.get_double("train.adam_beta1", 0.9);
    cfg.train.adam_beta2 = kv.get_double("train.adam_beta2", 0.999);
    cfg.train.adam_eps = kv.get_double("train.adam_eps", 1e-8);
    cfg.train.teacher_checkpoint = kv.get_string("train.teacher_checkpoint", "");
    cfg.train.init_checkpoint = kv.get_string("train.init_checkpoint", "");
    cfg.train.log_grad_norms = kv.get_bool("train.log_grad_norms", false);

    kv.ensure_all_consumed();
    cfg.config_hash = kv.content_hash();
    return cfg;
}

RunPaths make_run_paths(const ExperimentConfig& cfg) {
    RunPaths paths;
    paths.root = (fs::path(cfg.out_dir) / cfg.experiment_id).string();
    paths.checkpoints = (fs::path(paths.root) / "checkpoints").string();
    paths.reports = (fs::path(paths.root) / "reports").string();
    paths.logs = (fs::path(paths.root) / "logs").string();
    fs::create_directories(paths.checkpoints);
    fs::create_directories(paths.reports);
    fs::create_directories(paths.logs);
    return paths;
}

void write_provenance(const ExperimentConfig& cfg, const std::string& path) {
    nlohmann::json j = {
        {"config_hash", cfg.config_hash},
        {"seed", cfg.train.seed},
        {"synth_seed", cfg.synth.seed},
        {"version", kVersion},
        {"experiment_id", cfg.experiment_id},
    };
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), "io_error", "cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace emgseq::config
