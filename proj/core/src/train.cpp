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

#include "emgseq/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>

#include "emgseq/eval.hpp"

namespace emgseq::train {

std::string mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::Supervised: return "supervised";
        case TrainMode::Distill: return "distill";
        case TrainMode::Personalize: return "personalize";
    }
    return "supervised";
}

void validate_train_config(const TrainConfig& cfg) {
    require(cfg.epochs >= 0, "bad_train_config", "epochs must be >= 0");
    require(cfg.effective_batch_size > 0, "bad_train_config", "batch size must be positive");
    require(cfg.warmup_ratio > 0 && cfg.warmup_ratio < 1, "bad_train_config",
            "warmup_ratio must lie in (0, 1)");
    require(cfg.grad_clip > 0, "bad_train_config", "grad_clip must be positive");
    require(cfg.peak_lr > 0, "bad_train_config", "peak_lr must be positive");
    require(cfg.weight_decay >= 0, "bad_train_config", "weight_decay must be >= 0");
    if (cfg.mode == TrainMode::Distill) {
        require(!cfg.teacher_checkpoint.empty(), "bad_train_config",
                "distill mode needs a teacher checkpoint");
    }
    if (cfg.mode == TrainMode::Personalize) {
        require(!cfg.init_checkpoint.empty(), "bad_train_config",
                "personalize mode needs an init checkpoint");
    }
}

double lr_at(std::int64_t step, std::int64_t total_steps, double peak_lr, double warmup_ratio) {
    require(total_steps > 0, "bad_schedule", "total_steps must be positive");
    require(step >= 0 && step <= total_steps, "bad_schedule",
            "step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
    const std::int64_t warmup = static_cast<std::int64_t>(
        std::ceil(warmup_ratio * static_cast<double>(total_steps)));
    if (step <= warmup) {
        return peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
    }
    const double progress =
        static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
    return peak_lr * (0.5 * (1.0 + std::cos(3.141592653589793238462643383279502884 * progress)));
}

double clip_grad_norm(std::vector<MatF>& grads, double max_norm) {
    double sq = 0.0;
    for (const MatF& g : grads) {
        for (float v : g.v) sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / (norm + 1e-12);
        for (MatF& g : grads) {
            for (float& v : g.v) v = static_cast<float>(v * scale);
        }
    }
    return norm;
}

AdamW::AdamW(const model::Model& m, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(m.num_tensors());
    v_.reserve(m.num_tensors());
    for (std::size_t i = 0; i < m.num_tensors(); ++i) {
        m_.emplace_back(m.param(i).rows, m.param(i).cols);
        v_.emplace_back(m.param(i).rows, m.param(i).cols);
    }
}

void AdamW::step(model::Model& m, const std::vector<MatF>& grads, double lr,
                 double weight_decay) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < grads.size(); ++i) {
        MatF& w = m.param(i);
        const MatF& g = grads[i];
        MatF& mom = m_[i];
        MatF& vel = v_[i];
        for (std::size_t j = 0; j < w.v.size(); ++j) {
            const double gj = g.v[j];
            const double mj = beta1_ * mom.v[j] + (1.0 - beta1_) * gj;
            const double vj = beta2_ * vel.v[j] + (1.0 - beta2_) * gj * gj;
            mom.v[j] = static_cast<float>(mj);
            vel.v[j] = static_cast<float>(vj);
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            const double update = mhat / (std::sqrt(vhat) + eps_) + weight_decay * w.v[j];
            w.v[j] = static_cast<float>(w.v[j] - lr * update);
        }
    }
}

namespace {

struct LoadedSplit {
    std::vector<data::WindowedSample> train;
    std::vector<std::string> val_paths;
    std::vector<std::string> test_paths;
};

LoadedSplit load_training_data(const TrainConfig& cfg, int vocab_size,
                               const data::ResolvedSplit& split) {
    LoadedSplit out;
    const std::int64_t hop = cfg.hop > 0 ? cfg.hop : cfg.window_len;
    for (const std::string& path : split.train) {
        const data::Session s = data::load_session(path);
        auto windows =
            data::window_session(s, cfg.window_len, cfg.pad_past, cfg.pad_future, hop);
        for (auto& w : windows) {
            for (int tok : w.target) {
                require(tok < vocab_size, "vocab_mismatch",
                        "label symbol " + std::to_string(tok) + " does not fit a vocab of " +
                            std::to_string(vocab_size));
            }
            out.train.push_back(std::move(w));
        }
    }
    out.val_paths = split.val;
    out.test_paths = split.test;
    return out;
}

MatD to_f64(const MatF& x) {
    MatD out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.v.size(); ++i) out.v[i] = static_cast<double>(x.v[i]);
    return out;
}

std::vector<MatF> clone_params(const model::Model& m) {
    std::vector<MatF> out;
    out.reserve(m.num_tensors());
    for (std::size_t i = 0; i < m.num_tensors(); ++i) out.push_back(m.param(i));
    return out;
}

void restore_params(model::Model& m, const std::vector<MatF>& saved) {
    for (std::size_t i = 0; i < saved.size(); ++i) m.param(i) = saved[i];
}

}  // namespace

TrainResult run_training(const TrainConfig& cfg, const model::ArchConfig& arch,
                         const augment::AugmentConfig& aug, const loss::LossConfig& loss_cfg,
                         const data::ResolvedSplit& split, const std::string& run_id) {
    validate_train_config(cfg);
    augment::validate_augment_config(aug);
    loss::validate_loss_config(loss_cfg);
    const auto t_start = std::chrono::steady_clock::now();

    // Model and (for distillation) frozen teacher.
    std::optional<checkpoint::Loaded> teacher;
    std::string parent_id;
    model::Model model = [&] {
        if (cfg.mode == TrainMode::Personalize) {
            checkpoint::Loaded init = checkpoint::load(cfg.init_checkpoint);
            parent_id = init.meta.checkpoint_id;
            return std::move(init.model);
        }
        return model::Model::build(arch, Rng::derive(cfg.seed, 1));
    }();
    if (cfg.mode == TrainMode::Distill) {
        // Teacher runs eval-mode forwards only, so its dropouts never fire.
        teacher = checkpoint::load(cfg.teacher_checkpoint);
        parent_id = teacher->meta.checkpoint_id;
        require(teacher->model.config().featurizer.downsample() ==
                    model.config().featurizer.downsample(),
                "frame_mismatch", "teacher and student featurizers disagree on frame rate");
        require(teacher->model.config().vocab_size == model.config().vocab_size,
                "vocab_mismatch", "teacher and student vocab sizes differ");
    }

    const LoadedSplit dataset = load_training_data(cfg, model.config().vocab_size, split);
    require(!dataset.train.empty(), "empty_file_list", "no training windows");
    if (cfg.epochs > 0) {
        require(!dataset.val_paths.empty(), "empty_file_list", "no validation sessions");
    }

    eval::EvalOptions eval_opts;
    eval_opts.window_len = cfg.window_len;
    eval_opts.pad_past = cfg.pad_past;
    eval_opts.pad_future = cfg.pad_future;

    const std::int64_t n_train = static_cast<std::int64_t>(dataset.train.size());
    const std::int64_t steps_per_epoch =
        (n_train + cfg.effective_batch_size - 1) / cfg.effective_batch_size;
    const std::int64_t total_steps = std::max<std::int64_t>(1, cfg.epochs * steps_per_epoch);

    AdamW optimizer(model, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    std::vector<MatF> grads = model.make_grad_store();

    RunRecord record;
    record.peak_lr = cfg.peak_lr;
    record.seed = cfg.seed;
    record.mode = mode_name(cfg.mode);

    std::vector<MatF> best_params = clone_params(model);
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;

    std::vector<std::int64_t> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);

    const bool use_distill = cfg.mode == TrainMode::Distill && loss_cfg.alpha > 0.0;
    std::int64_t step_index = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng(Rng::derive(Rng::derive(cfg.seed, 2), static_cast<std::uint64_t>(epoch)));
        for (std::int64_t i = n_train - 1; i > 0; --i) {
            const std::int64_t j = static_cast<std::int64_t>(
                shuffle_rng.next_below(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        Rng aug_rng(Rng::derive(Rng::derive(cfg.seed, 3), static_cast<std::uint64_t>(epoch)));
        Rng dropout_rng(Rng::derive(Rng::derive(cfg.seed, 4), static_cast<std::uint64_t>(epoch)));

        double epoch_loss = 0.0;
        std::int64_t cursor = 0;
        while (cursor < n_train) {
            const std::int64_t batch =
                std::min<std::int64_t>(cfg.effective_batch_size, n_train - cursor);
            for (MatF& g : grads) g.fill(0.0f);

            for (std::int64_t b = 0; b < batch; ++b) {
                const data::WindowedSample& sample =
                    dataset.train[static_cast<std::size_t>(order[static_cast<std::size_t>(cursor + b)])];
                const std::int64_t frames = model.frames_for(sample.signal.rows);
                const augment::AugmentPlan plan = augment::draw_plan(aug, frames, aug_rng);

                const MatF* input = &sample.signal;
                MatF rotated;
                if (plan.rotation_offset != 0) {
                    rotated = augment::rotate_channels(sample.signal, plan.rotation_offset,
                                                       aug.band_size);
                    input = &rotated;
                }

                model::ForwardOpts opts;
                opts.train = true;
                opts.dropout_rng = &dropout_rng;
                opts.mask_spans = &plan.mask_spans;
                model::Model::Cache cache;
                const MatF logits = model.forward(*input, opts, &cache);
                const MatD logits_d = to_f64(logits);

                const loss::CtcResult ctc =
                    loss::ctc_loss(logits_d, sample.target, loss_cfg.ctc_zero_infinity);
                double sample_loss = ctc.loss;
                MatD dlogits = ctc.grad_logits;
                if (use_distill) {
                    // The teacher sees the identically augmented input.
                    model::ForwardOpts teacher_opts;
                    teacher_opts.mask_spans = &plan.mask_spans;
                    const MatF teacher_logits = teacher->model.forward(*input, teacher_opts);
                    const loss::DistillResult dist = loss::distill_loss(
                        logits_d, to_f64(teacher_logits), loss_cfg.temperature,
                        loss_cfg.hinton_t2_scaling);
                    sample_loss = loss::combined_loss(ctc.loss, dist.loss, loss_cfg);
                    const double denom = loss_cfg.alpha + loss_cfg.beta;
                    for (std::size_t i = 0; i < dlogits.v.size(); ++i) {
                        dlogits.v[i] = (loss_cfg.alpha * dist.grad_student.v[i] +
                                        loss_cfg.beta * dlogits.v[i]) /
                                       denom;
                    }
                }
                require(std::isfinite(sample_loss), "nonfinite_loss",
                        "training loss became non-finite at epoch " + std::to_string(epoch));
                epoch_loss += sample_loss;

                MatF dlogits_f(dlogits.rows, dlogits.cols);
                const float inv_batch = 1.0f / static_cast<float>(batch);
                for (std::size_t i = 0; i < dlogits.v.size(); ++i) {
                    dlogits_f.v[i] = static_cast<float>(dlogits.v[i]) * inv_batch;
                }
                model.backward(cache, dlogits_f, grads);
            }

            const double pre_norm = clip_grad_norm(grads, cfg.grad_clip);
            if (cfg.log_grad_norms) {
                GradNormStats gs;
                gs.pre = pre_norm;
                gs.clipped = pre_norm > cfg.grad_clip;
                double sq = 0.0;
                for (const MatF& g : grads) {
                    for (float v : g.v) sq += static_cast<double>(v) * v;
                }
                gs.post = std::sqrt(sq);
                record.grad_norms.push_back(gs);
            }

            ++step_index;
            const double lr = lr_at(step_index, total_steps, cfg.peak_lr, cfg.warmup_ratio);
            optimizer.step(model, grads, lr, cfg.weight_decay);
            cursor += batch;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss / static_cast<double>(n_train);
        const eval::EvalReport val_report = eval::evaluate(model, dataset.val_paths, eval_opts);
        stats.val_cer = val_report.aggregate.cer();
        record.epochs.push_back(stats);

        if (stats.val_cer < best_val) {
            best_val = stats.val_cer;
            best_epoch = epoch;
            best_params = clone_params(model);
        }
    }

    restore_params(model, best_params);
    record.selected_epoch = best_epoch;
    record.best_val_cer = best_epoch >= 0 ? best_val : std::numeric_limits<double>::quiet_NaN();
    if (!dataset.test_paths.empty()) {
        record.test_cer = eval::evaluate(model, dataset.test_paths, eval_opts).aggregate.cer();
    } else {
        record.test_cer = std::numeric_limits<double>::quiet_NaN();
    }
    record.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    TrainResult result{std::move(model), std::move(record), {}};
    result.meta.checkpoint_id = run_id.empty() ? mode_name(cfg.mode) + "-seed" +
                                                     std::to_string(cfg.seed)
                                               : run_id;
    result.meta.seed = cfg.seed;
    result.meta.parent_id = parent_id;
    switch (cfg.mode) {
        case TrainMode::Supervised: result.meta.provenance = checkpoint::Provenance::Supervised; break;
        case TrainMode::Distill: result.meta.provenance = checkpoint::Provenance::Distilled; break;
        case TrainMode::Personalize:
            result.meta.provenance = checkpoint::Provenance::Personalized;
            break;
    }
    return result;
}

nlohmann::json record_to_json(const RunRecord& record) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const EpochStats& e : record.epochs) {
        epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_cer", e.val_cer}});
    }
    nlohmann::json j = {
        {"epochs", epochs},
        {"selected_epoch", record.selected_epoch},
        {"best_val_cer", record.best_val_cer},
        {"test_cer", record.test_cer},
        {"wall_clock_s", record.wall_clock_s},
        {"peak_lr", record.peak_lr},
        {"seed", record.seed},
        {"mode", record.mode},
    };
    if (!record.grad_norms.empty()) {
        nlohmann::json norms = nlohmann::json::array();
        for (const GradNormStats& g : record.grad_norms) {
            norms.push_back({{"pre", g.pre}, {"post", g.post}, {"clipped", g.clipped}});
        }
        j["grad_norms"] = norms;
    }
    return j;
}

void write_record_csv(const RunRecord& record, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), "io_error", "cannot open for writing: " + path);
    out << "epoch,train_loss,val_cer\n";
    for (const EpochStats& e : record.epochs) {
        out << e.epoch << "," << e.train_loss << "," << e.val_cer << "\n";
    }
    require(out.good(), "io_error", "write failed: " + path);
}

Selection select_best(const std::vector<RunRecord>& records) {
    require(!records.empty(), "empty_records", "nothing to select from");
    std::map<double, std::vector<std::size_t>> by_lr;
    for (std::size_t i = 0; i < records.size(); ++i) {
        by_lr[records[i].peak_lr].push_back(i);
    }

    Selection sel;
    double best_mean_val = std::numeric_limits<double>::infinity();
    for (const auto& [lr, indices] : by_lr) {
        double mean_val = 0.0;
        for (std::size_t i : indices) mean_val += records[i].best_val_cer;
        mean_val /= static_cast<double>(indices.size());
        if (mean_val < best_mean_val) {
            best_mean_val = mean_val;
            sel.chosen_lr = lr;
            sel.mean_val_cer = mean_val;
            sel.chosen_indices = indices;
        }
    }

    double mean_test = 0.0;
    for (std::size_t i : sel.chosen_indices) mean_test += records[i].test_cer;
    mean_test /= static_cast<double>(sel.chosen_indices.size());
    double var = 0.0;
    for (std::size_t i : sel.chosen_indices) {
        const double d = records[i].test_cer - mean_test;
        var += d * d;
    }
    sel.mean_test_cer = mean_test;
    sel.stdev_test_cer = sel.chosen_indices.size() > 1
                             ? std::sqrt(var / static_cast<double>(sel.chosen_indices.size() - 1))
                             : 0.0;
    return sel;
}

}  // namespace emgseq::train
