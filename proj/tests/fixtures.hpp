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

#include <filesystem>
#include <string>

#include <unistd.h>

#include "emgseq/data.hpp"
#include "emgseq/model.hpp"

namespace emgseq::fixtures {

inline std::string temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("emgseq-test-" + std::to_string(::getpid()) + "-" + name);
    std::filesystem::create_directories(dir);
    return dir.string();
}

/// Tiny synthetic corpus for trainer-level tests: 2 train users + 1 test
/// user, short sessions, six key symbols.
inline data::SynthConfig tiny_synth_config() {
    data::SynthConfig cfg;
    cfg.num_train_users = 2;
    cfg.num_test_users = 1;
    cfg.sessions_per_user = 3;  // 1 train, 1 val, 1 test
    cfg.session_duration_s = 4.0;
    cfg.vocab_size = 5;
    cfg.keys_per_minute = 150.0;
    cfg.noise_std = 0.15;
    cfg.gain_jitter = 0.2;
    cfg.seed = 41;
    cfg.onset_grid = 1000;
    return cfg;
}

/// Micro architecture for fast tests; pos-conv groups pin hidden sizes to
/// multiples of 16.
inline model::ArchConfig micro_arch(int hidden = 32, int layers = 2, int vocab = 5,
                                    float dropout = 0.0f) {
    model::ArchConfig arch;
    arch.hidden_size = hidden;
    arch.num_layers = layers;
    arch.num_heads = 4;
    arch.vocab_size = vocab;
    arch.set_all_dropouts(dropout);
    return arch;
}

}  // namespace emgseq::fixtures
