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
#include <fstream>

#include "emgseq/train.hpp"
#include "fixtures.hpp"

using namespace emgseq;

namespace {

struct Corpus {
    std::string dir;
    data::SplitManifest manifest;
    data::ResolvedSplit generic;
};

const Corpus& corpus() {
    static const Corpus c = [] {
        Corpus out;
        out.dir = fixtures::temp_dir("train-corpus");
        out.manifest = data::synth_dataset(fixtures::tiny_synth_config(), out.dir);
        out.generic = data::split_dataset(out.manifest, data::SplitMode::Generic);
        return out;
    }();
    return c;
}

train::TrainConfig micro_train_config(int epochs, std::uint64_t seed = 5) {
    train::TrainConfig cfg;
    cfg.mode = train::TrainMode::Supervised;
    cfg.epochs = epochs;
    cfg.effective_batch_size = 4;
    cfg.peak_lr = 2e-3;
    cfg.weight_decay = 0.0;
    cfg.seed = seed;
    cfg.window_len = 1000;
    cfg.pad_past = 100;
    cfg.pad_future = 100;
    return cfg;
}

augment::AugmentConfig no_augment() {
    augment::AugmentConfig aug;
    aug.rotation_offsets.clear();
    aug.mask_max_len = 0;
    return aug;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("schedule boundary values are exact") {
    const double peak = 3e-4;
    CHECK(train::lr_at(0, 100, peak, 0.05) == 0.0);
    // warmup = ceil(0.05 * 100) = 5 steps; both pieces equal peak there
    CHECK(train::lr_at(5, 100, peak, 0.05) == peak);
    CHECK(train::lr_at(100, 100, peak, 0.05) == 0.0);
}

TEST_CASE("schedule midpoint of the cosine decay is half the peak") {
    // total 205, warmup ceil(0.05*205) = 11; decay spans 194 steps; midpoint 108
    const double peak = 1e-3;
    CHECK(train::lr_at(108, 205, peak, 0.05) == peak * 0.5);
    CHECK(train::lr_at(205, 205, peak, 0.05) == 0.0);
}

TEST_CASE("schedule ramps monotonically and rejects out-of-range steps") {
    double prev = -1.0;
    for (std::int64_t s = 0; s <= 10; ++s) {
        const double lr = train::lr_at(s, 200, 1e-3, 0.05);
        CHECK(lr > prev);
        prev = lr;
    }
    CHECK_THROWS_AS(train::lr_at(201, 200, 1e-3, 0.05), Error);
    CHECK_THROWS_AS(train::lr_at(-1, 200, 1e-3, 0.05), Error);
    CHECK_THROWS_AS(train::lr_at(0, 0, 1e-3, 0.05), Error);
}

TEST_CASE("gradient clipping caps the global norm") {
    std::vector<MatF> grads;
    grads.emplace_back(2, 3);
    grads.emplace_back(1, 4);
    Rng rng(31);
    for (auto& g : grads) {
        for (float& v : g.v) v = static_cast<float>(rng.normal() * 3.0);
    }
    const double pre = train::clip_grad_norm(grads, 0.1);
    CHECK(pre > 0.1);
    double sq = 0.0;
    for (const auto& g : grads) {
        for (float v : g.v) sq += static_cast<double>(v) * v;
    }
    CHECK(std::sqrt(sq) <= 0.1 + 1e-9);

    // Below the threshold nothing moves.
    std::vector<MatF> small;
    small.emplace_back(1, 2);
    small[0].v = {0.01f, -0.02f};
    const std::vector<float> before = small[0].v;
    train::clip_grad_norm(small, 0.1);
    CHECK(small[0].v == before);
}

TEST_CASE("adamw step matches the reference formula and decouples decay") {
    model::ArchConfig arch = fixtures::micro_arch(16, 1, 3);
    model::Model m = model::Model::build(arch, 77);
    train::AdamW opt(m, 0.9, 0.999, 1e-8);
    std::vector<MatF> grads = m.make_grad_store();
    const float w0 = m.param(0).at(0, 0);
    grads[0].at(0, 0) = 0.5f;
    opt.step(m, grads, 1e-3, 0.0);
    // First step: mhat = g, vhat = g^2 -> update ~ lr * sign(g)
    const double expected = w0 - 1e-3 * (0.5 / (std::sqrt(0.25) + 1e-8));
    CHECK(m.param(0).at(0, 0) == doctest::Approx(expected).epsilon(1e-6));

    // Pure decay shrinks weights multiplicatively.
    model::Model m2 = model::Model::build(arch, 78);
    train::AdamW opt2(m2, 0.9, 0.999, 1e-8);
    std::vector<MatF> zero = m2.make_grad_store();
    const float before = m2.param(0).at(0, 0);
    opt2.step(m2, zero, 1e-2, 0.1);
    CHECK(m2.param(0).at(0, 0) == doctest::Approx(before * (1.0 - 1e-3)).epsilon(1e-6));
}

TEST_CASE("zero epochs returns the initialization bit-exactly") {
    const auto& c = corpus();
    train::TrainConfig cfg = micro_train_config(0);
    const model::ArchConfig arch = fixtures::micro_arch();
    const train::TrainResult res =
        train::run_training(cfg, arch, no_augment(), loss::LossConfig{}, c.generic);
    const model::Model init = model::Model::build(arch, Rng::derive(cfg.seed, 1));
    REQUIRE(res.model.num_tensors() == init.num_tensors());
    for (std::size_t i = 0; i < init.num_tensors(); ++i) {
        CHECK(res.model.param(i).v == init.param(i).v);
    }
    CHECK(res.record.selected_epoch == -1);
}

TEST_CASE("two identical runs produce identical records and checkpoints") {
    const auto& c = corpus();
    train::TrainConfig cfg = micro_train_config(2);
    cfg.log_grad_norms = true;
    augment::AugmentConfig aug;  // rotation + masking on, to cover their rng paths
    aug.mask_max_len = 3;
    aug.masks_per_window = 1;
    const model::ArchConfig arch = fixtures::micro_arch();

    const std::string dir = fixtures::temp_dir("train-determinism");
    std::string paths[2];
    nlohmann::json records[2];
    for (int i = 0; i < 2; ++i) {
        const train::TrainResult res =
            train::run_training(cfg, arch, aug, loss::LossConfig{}, c.generic, "det");
        paths[i] = dir + "/run" + std::to_string(i) + ".ckpt";
        checkpoint::save(res.model, res.meta, paths[i]);
        records[i] = train::record_to_json(res.record);
        records[i].erase("wall_clock_s");  // the one legitimately varying field
    }
    CHECK(records[0].dump() == records[1].dump());
    CHECK(file_bytes(paths[0]) == file_bytes(paths[1]));
}

TEST_CASE("micro run: loss falls and grad norms respect the clip") {
    const auto& c = corpus();
    train::TrainConfig cfg = micro_train_config(2);
    cfg.log_grad_norms = true;
    const train::TrainResult res = train::run_training(cfg, fixtures::micro_arch(), no_augment(),
                                                       loss::LossConfig{}, c.generic);
    REQUIRE(res.record.epochs.size() == 2);
    CHECK(res.record.epochs[1].train_loss < res.record.epochs[0].train_loss);
    CHECK(res.record.selected_epoch >= 1);
    REQUIRE(!res.record.grad_norms.empty());
    for (const auto& g : res.record.grad_norms) {
        if (g.clipped) CHECK(g.post <= cfg.grad_clip + 1e-9);
    }
}

TEST_CASE("distillation with alpha zero matches supervised training bit for bit") {
    const auto& c = corpus();
    const std::string dir = fixtures::temp_dir("train-alpha0");
    const model::ArchConfig arch = fixtures::micro_arch();

    // teacher for the distillation run (content irrelevant at alpha = 0)
    train::TrainConfig tcfg = micro_train_config(1, 9);
    const train::TrainResult teacher = train::run_training(
        tcfg, fixtures::micro_arch(64, 1), no_augment(), loss::LossConfig{}, c.generic, "t");
    const std::string teacher_path = dir + "/teacher.ckpt";
    checkpoint::save(teacher.model, teacher.meta, teacher_path);

    train::TrainConfig sup = micro_train_config(1);
    const train::TrainResult a =
        train::run_training(sup, arch, no_augment(), loss::LossConfig{}, c.generic, "same");

    train::TrainConfig dist = sup;
    dist.mode = train::TrainMode::Distill;
    dist.teacher_checkpoint = teacher_path;
    loss::LossConfig lc;
    lc.alpha = 0.0;
    const train::TrainResult b =
        train::run_training(dist, arch, no_augment(), lc, c.generic, "same");

    for (std::size_t i = 0; i < a.model.num_tensors(); ++i) {
        CHECK(a.model.param(i).v == b.model.param(i).v);
    }
}

TEST_CASE("personalization records provenance and parent") {
    const auto& c = corpus();
    const std::string dir = fixtures::temp_dir("train-pers");
    train::TrainConfig cfg = micro_train_config(1, 3);
    const train::TrainResult generic = train::run_training(
        cfg, fixtures::micro_arch(), no_augment(), loss::LossConfig{}, c.generic, "generic-0");
    const std::string init_path = dir + "/generic.ckpt";
    checkpoint::save(generic.model, generic.meta, init_path);

    const std::string user = c.manifest.test_users.front();
    const auto user_split =
        data::split_dataset(c.manifest, data::SplitMode::Personalization, user);
    train::TrainConfig pers = micro_train_config(1, 4);
    pers.mode = train::TrainMode::Personalize;
    pers.init_checkpoint = init_path;
    pers.weight_decay = 0.0;
    const train::TrainResult res = train::run_training(pers, fixtures::micro_arch(), no_augment(),
                                                       loss::LossConfig{}, user_split, "pers-0");
    CHECK(checkpoint::provenance_name(res.meta.provenance) == "personalized");
    CHECK(res.meta.parent_id == "generic-0");

    const std::string out = dir + "/personalized.ckpt";
    checkpoint::save(res.model, res.meta, out);
    CHECK(checkpoint::load(out).meta.parent_id == "generic-0");
}

TEST_CASE("vocab mismatches are rejected up front") {
    const auto& c = corpus();
    train::TrainConfig cfg = micro_train_config(1);
    model::ArchConfig arch = fixtures::micro_arch(32, 2, 3);  // labels reach 4
    try {
        train::run_training(cfg, arch, no_augment(), loss::LossConfig{}, c.generic);
        FAIL("expected vocab_mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == "vocab_mismatch");
    }
}

TEST_CASE("select_best picks the argmin learning rate and pins the stdev convention") {
    train::RunRecord r;
    r.peak_lr = 1e-3;
    r.best_val_cer = 35.0;
    r.test_cer = 36.0;
    const auto single = train::select_best({r});
    CHECK(single.chosen_lr == 1e-3);
    CHECK(single.mean_test_cer == 36.0);
    CHECK(single.stdev_test_cer == 0.0);

    std::vector<train::RunRecord> records;
    for (const double val : {35.0, 35.5}) {
        train::RunRecord a;
        a.peak_lr = 1e-3;
        a.best_val_cer = val;
        a.test_cer = val;
        records.push_back(a);
    }
    for (const double val : {34.0, 34.2}) {
        train::RunRecord b;
        b.peak_lr = 3e-4;
        b.best_val_cer = val;
        b.test_cer = val;
        records.push_back(b);
    }
    CHECK(train::select_best(records).chosen_lr == 3e-4);

    std::vector<train::RunRecord> seeds;
    for (const double t : {30.0, 31.0, 32.0}) {
        train::RunRecord s;
        s.peak_lr = 1e-3;
        s.best_val_cer = 30.0;
        s.test_cer = t;
        seeds.push_back(s);
    }
    const auto sel = train::select_best(seeds);
    CHECK(sel.mean_test_cer == doctest::Approx(31.0).epsilon(1e-12));
    // sample standard deviation across seeds
    CHECK(sel.stdev_test_cer == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("config validation") {
    train::TrainConfig cfg = micro_train_config(1);
    cfg.warmup_ratio = 0.0;
    CHECK_THROWS_AS(train::validate_train_config(cfg), Error);
    cfg = micro_train_config(1);
    cfg.grad_clip = 0.0;
    CHECK_THROWS_AS(train::validate_train_config(cfg), Error);
    cfg = micro_train_config(1);
    cfg.mode = train::TrainMode::Distill;
    CHECK_THROWS_AS(train::validate_train_config(cfg), Error);  // missing teacher
}

}  // TEST_SUITE
