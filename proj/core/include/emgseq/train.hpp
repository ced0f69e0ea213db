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

#include "emgseq/augment.hpp"
#include "emgseq/checkpoint.hpp"
#include "emgseq/data.hpp"
#include "emgseq/loss.hpp"
#include "emgseq/model.hpp"

namespace emgseq::train {

enum class TrainMode { Supervised, Distill, Personalize };

std::string mode_name(TrainMode mode);

struct TrainConfig {
    TrainMode mode = TrainMode::Supervised;
    int epochs = 200;
    int effective_batch_size = 640;  // realized by gradient accumulation
    double peak_lr = 1e-3;
    double warmup_ratio = 0.05;
    double weight_decay = 0.2;
    double grad_clip = 0.1;
    std::uint64_t seed = 0;
    // Adam moments; unlisted elsewhere, pinned here.
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::string teacher_checkpoint;  // distill mode
    std::string init_checkpoint;     // personalize mode
    // training-time windowing; hop 0 means non-overlapping (hop = window_len)
    std::int64_t window_len = 8000;
    std::int64_t pad_past = 1800;
    std::int64_t pad_future = 200;
    std::int64_t hop = 0;
    bool log_grad_norms = false;
};

void validate_train_config(const TrainConfig& cfg);

/// Linear warmup to peak over the first ceil(warmup_ratio * total) steps,
/// then cosine decay from peak to zero at total_steps. Both pieces evaluate
/// to peak at the boundary.
double lr_at(std::int64_t step, std::int64_t total_steps, double peak_lr, double warmup_ratio);

/// Scales gradients so the global L2 norm is at most max_norm. Returns the
/// pre-clip norm; post-clip norm lands strictly below max_norm when engaged.
double clip_grad_norm(std::vector<MatF>& grads, double max_norm);

/// Decoupled-weight-decay Adam over the model's parameter tensors.
class AdamW {
public:
    AdamW(const model::Model& m, double beta1, double beta2, double eps);
    void step(model::Model& m, const std::vector<MatF>& grads, double lr, double weight_decay);
    std::int64_t steps_taken() const { return t_; }

private:
    std::vector<MatF> m_, v_;
    double beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_cer = 0.0;
};

struct GradNormStats {
    double pre = 0.0;
    double post = 0.0;
    bool clipped = false;
};

struct RunRecord {
    std::vector<EpochStats> epochs;
    int selected_epoch = -1;  // argmin validation CER; -1 when no epochs ran
    double best_val_cer = 0.0;
    double test_cer = 0.0;
    double wall_clock_s = 0.0;
    double peak_lr = 0.0;
    std::uint64_t seed = 0;
    std::string mode;
    std::vector<GradNormStats> grad_norms;  // populated when log_grad_norms
};

nlohmann::json record_to_json(const RunRecord& record);
void write_record_csv(const RunRecord& record, const std::string& path);

struct TrainResult {
    model::Model model;  // weights of the selected (best-validation) epoch
    RunRecord record;
    checkpoint::CheckpointMeta meta;
};

/// Runs one training job. Supervised builds a fresh model from `arch`;
/// distill additionally loads the frozen teacher (dropouts forced to zero);
/// personalize ignores `arch` and fine-tunes the init checkpoint's model.
/// Deterministic: the same config and seed reproduce the checkpoint
/// bit-exactly.
TrainResult run_training(const TrainConfig& cfg, const model::ArchConfig& arch,
                         const augment::AugmentConfig& aug, const loss::LossConfig& loss_cfg,
                         const data::ResolvedSplit& split, const std::string& run_id = "");

struct Selection {
    double chosen_lr = 0.0;
    double mean_val_cer = 0.0;
    double mean_test_cer = 0.0;
    double stdev_test_cer = 0.0;  // sample standard deviation across seeds
    std::vector<std::size_t> chosen_indices;
};

/// Averages validation CER per learning rate across seeds, picks the argmin
/// LR, and reports mean and sample stdev of the test CERs at that LR.
Selection select_best(const std::vector<RunRecord>& records);

}  // namespace emgseq::train
