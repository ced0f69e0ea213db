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

// End-to-end checks of the command-line surface, driving the installed
// binary the way an operator would.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "emgseq/checkpoint.hpp"
#include "emgseq/eval.hpp"
#include "emgseq/model.hpp"
#include "fixtures.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

#ifndef EMGSEQ_BIN
#error "EMGSEQ_BIN must point at the CLI binary"
#endif

struct RunResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

RunResult run_cli(const std::string& args, const std::string& tag) {
    const std::string dir = emgseq::fixtures::temp_dir("cli-io");
    const std::string out_path = dir + "/" + tag + ".out";
    const std::string err_path = dir + "/" + tag + ".err";
    const std::string cmd =
        std::string(EMGSEQ_BIN) + " " + args + " >" + out_path + " 2>" + err_path;
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WEXITSTATUS(status);
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
}

std::string write_config(const std::string& dir, const std::string& manifest) {
    const std::string path = dir + "/exp.cfg";
    std::ofstream out(path, std::ios::trunc);
    out << "[experiment]\nid = cli-demo\nout_dir = " << dir << "/runs\n"
        << "[data]\nwindow_len = 1000\npad_past = 100\npad_future = 100\n";
    if (!manifest.empty()) out << "manifest = " << manifest << "\n";
    out << "[synth]\nnum_train_users = 2\nnum_test_users = 1\nsessions_per_user = 3\n"
        << "session_duration_s = 3.0\nvocab_size = 5\nkeys_per_minute = 150\n"
        << "noise_std = 0.15\ngain_jitter = 0.2\nonset_grid = 1000\nseed = 17\n"
        << "[augment]\nrotation = none\nmask_len = 0\n"
        << "[model]\nhidden_size = 32\nnum_layers = 1\nnum_heads = 4\nvocab_size = 5\n"
        << "dropout = 0.0\nfeaturizer_channels = 32,32,32\n"
        << "[train]\nepochs = 1\neffective_batch_size = 4\npeak_lr = 1e-3\nseed = 2\n"
        << "weight_decay = 0.0\n";
    return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth, train, eval, bench, pareto round trip") {
    const std::string dir = emgseq::fixtures::temp_dir("cli");
    const std::string cfg = write_config(dir, "");
    const std::string dataset = dir + "/dataset";

    // synth
    const RunResult synth = run_cli("synth --config " + cfg + " --out " + dataset, "synth");
    REQUIRE(synth.exit_code == 0);
    const json synth_json = json::parse(synth.out);
    const std::string manifest = synth_json.at("manifest").get<std::string>();
    CHECK(fs::exists(manifest));

    // train with a dotted override for epochs = 0: checkpoint equals init
    const std::string cfg2 = write_config(dir, manifest);
    const RunResult train0 =
        run_cli("train --config " + cfg2 + " --train.epochs 0", "train0");
    REQUIRE(train0.exit_code == 0);
    const json train0_json = json::parse(train0.out);
    const std::string ckpt0 = train0_json.at("checkpoint").get<std::string>();
    {
        const auto loaded = emgseq::checkpoint::load(ckpt0);
        emgseq::model::ArchConfig arch = loaded.model.config();
        const auto init = emgseq::model::Model::build(arch, emgseq::Rng::derive(2, 1));
        for (std::size_t i = 0; i < init.num_tensors(); ++i) {
            CHECK(loaded.model.param(i).v == init.param(i).v);
        }
    }

    // a real (single-epoch) training run for the remaining commands
    const RunResult train1 = run_cli("train --config " + cfg2, "train1");
    REQUIRE(train1.exit_code == 0);
    const std::string ckpt = json::parse(train1.out).at("checkpoint").get<std::string>();

    // eval determinism: identical inputs give byte-identical reports
    const std::string rep1 = dir + "/r1.json", rep2 = dir + "/r2.json";
    REQUIRE(run_cli("eval --checkpoint " + ckpt + " --manifest " + manifest +
                        " --config " + cfg2 + " --out " + rep1, "eval1").exit_code == 0);
    REQUIRE(run_cli("eval --checkpoint " + ckpt + " --manifest " + manifest +
                        " --config " + cfg2 + " --out " + rep2, "eval2").exit_code == 0);
    CHECK(slurp(rep1) == slurp(rep2));
    CHECK(json::parse(slurp(rep1)).contains("aggregate"));

    // bench emits a schema-valid timing report quickly at small runs
    const RunResult bench = run_cli("bench --checkpoint " + ckpt + " --config " + cfg2 +
                                        " --runs 3 --trials 3 --emit-last-n 2 --window 400",
                                    "bench");
    REQUIRE(bench.exit_code == 0);
    const json bench_json = json::parse(bench.out);
    CHECK(bench_json.at("trial_means_ms").size() == 3);
    CHECK(bench_json.contains("streaming"));

    // pareto on a synthetic 20-row grid table
    const std::string table = dir + "/grid.csv";
    {
        std::ofstream out(table, std::ios::trunc);
        out << "params,cer,tag\n";
        emgseq::Rng rng(3);
        const auto grid = emgseq::model::arch_grid();
        for (const auto& g : grid) {
            out << (static_cast<long long>(g.hidden_size) * g.num_layers * 100000) << ","
                << 30.0 + 40.0 * rng.next_double() << "," << g.hidden_size << "x" << g.num_layers
                << "\n";
        }
    }
    const std::string front_csv = dir + "/front.csv";
    const RunResult pareto =
        run_cli("pareto --input " + table + " --output " + front_csv, "pareto");
    REQUIRE(pareto.exit_code == 0);
    const auto points = emgseq::eval::read_points_csv(table);
    const auto front = emgseq::eval::read_points_csv(front_csv);
    REQUIRE(!front.empty());
    for (const auto& p : front) {
        for (const auto& q : points) {
            CHECK(!(q.params <= p.params && q.cer < p.cer));  // dominance-free
        }
    }
}

TEST_CASE("schema violations exit nonzero with machine-readable errors") {
    const std::string dir = emgseq::fixtures::temp_dir("cli-err");
    const std::string cfg = write_config(dir, "");
    const RunResult bad = run_cli("train --config " + cfg + " --set train.peaklr=1e-3", "bad");
    CHECK(bad.exit_code != 0);
    const json err = json::parse(bad.err);
    CHECK(err.at("code") == "schema_violation");
    CHECK(err.at("message").get<std::string>().find("train.peaklr") != std::string::npos);

    const RunResult missing = run_cli("eval --checkpoint /nonexistent.ckpt --manifest /no.json",
                                      "missing");
    CHECK(missing.exit_code != 0);
    CHECK(json::parse(missing.err).contains("code"));
}

}  // TEST_SUITE
