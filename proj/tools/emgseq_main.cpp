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

// Command-line surface: synth, train, distill, personalize, eval, grid,
// pareto, bench. Every command is a thin wrapper over the library; reports
// are JSON, tables are CSV, errors go to stderr as machine-readable JSON.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emgseq/bench.hpp"
#include "emgseq/checkpoint.hpp"
#include "emgseq/config.hpp"
#include "emgseq/data.hpp"
#include "emgseq/eval.hpp"
#include "emgseq/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace emgseq;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

config::ExperimentConfig load_experiment(const CommonArgs& args,
                                         const std::vector<std::string>& extras,
                                         config::KeyValues* out_kv = nullptr) {
    config::KeyValues kv;
    if (!args.config_path.empty()) kv.load_file(args.config_path);
    for (const std::string& o : args.overrides) kv.apply_override(o);
    // Bare dotted flags: --train.peak_lr 1e-3 or --train.peak_lr=1e-3.
    for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string tok = extras[i];
        require(tok.rfind("--", 0) == 0 && tok.find('.') != std::string::npos, "bad_flag",
                "unrecognized argument: " + tok);
        tok = tok.substr(2);
        const auto eq = tok.find('=');
        if (eq != std::string::npos) {
            kv.set(tok.substr(0, eq), tok.substr(eq + 1));
        } else {
            require(i + 1 < extras.size(), "bad_flag", "flag --" + tok + " needs a value");
            kv.set(tok, extras[++i]);
        }
    }
    config::ExperimentConfig cfg = config::parse_experiment(kv);
    if (cfg.threads > 0) threading::set_num_threads(cfg.threads);
    if (out_kv != nullptr) *out_kv = kv;
    return cfg;
}

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), "io_error", "cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

int run_train_like(const CommonArgs& args, const std::vector<std::string>& extras,
                   train::TrainMode mode, const std::string& user) {
    config::ExperimentConfig cfg = load_experiment(args, extras);
    cfg.train.mode = mode;
    require(!cfg.manifest_path.empty(), "missing_file", "data.manifest is required");
    const data::SplitManifest manifest = data::load_manifest(cfg.manifest_path);
    const data::ResolvedSplit split =
        mode == train::TrainMode::Personalize
            ? data::split_dataset(manifest, data::SplitMode::Personalization, user)
            : data::split_dataset(manifest, data::SplitMode::Generic);

    const config::RunPaths paths = config::make_run_paths(cfg);
    config::write_provenance(cfg, (fs::path(paths.root) / "provenance.json").string());

    std::string run_id = cfg.experiment_id + "-" + train::mode_name(mode) + "-seed" +
                         std::to_string(cfg.train.seed);
    if (!user.empty()) run_id += "-" + user;

    train::TrainResult result =
        train::run_training(cfg.train, cfg.arch, cfg.augment, cfg.loss, split, run_id);

    const std::string ckpt_path = (fs::path(paths.checkpoints) / (run_id + ".ckpt")).string();
    checkpoint::save(result.model, result.meta, ckpt_path);
    write_json_file(train::record_to_json(result.record),
                    (fs::path(paths.reports) / ("run-" + run_id + ".json")).string());
    train::write_record_csv(result.record,
                            (fs::path(paths.logs) / ("curve-" + run_id + ".csv")).string());

    emit(json{
        {"checkpoint", ckpt_path},
        {"selected_epoch", result.record.selected_epoch},
        {"best_val_cer", result.record.best_val_cer},
        {"test_cer", result.record.test_cer},
        {"wall_clock_s", result.record.wall_clock_s},
    });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sEMG-to-text sequence decoding toolkit"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string user;
    std::string checkpoint_path;
    std::string manifest_path;
    std::string split_name = "test";
    std::string eval_mode = "generic";
    std::string input_csv, output_csv;
    std::string grid_select = "all";
    std::string out_override;
    int runs = 1000, trials = 3, emit_last_n = 0;
    std::int64_t bench_window = 0;

    auto add_config_opts = [&](CLI::App* cmd) {
        cmd->add_option("--config", common.config_path, "experiment config file");
        cmd->add_option("--set", common.overrides, "dotted-key override, key=value")
            ->take_all();
        cmd->allow_extras();
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset + manifest");
    add_config_opts(synth);
    synth->add_option("--out", out_override, "dataset directory (default <out>/<id>/dataset)");

    CLI::App* train_cmd = app.add_subcommand("train", "supervised training");
    add_config_opts(train_cmd);
    CLI::App* distill_cmd = app.add_subcommand("distill", "distillation training");
    add_config_opts(distill_cmd);
    CLI::App* pers_cmd = app.add_subcommand("personalize", "fine-tune on one held-out user");
    add_config_opts(pers_cmd);
    pers_cmd->add_option("--user", user, "held-out user id")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "CER report for a checkpoint");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--manifest", manifest_path, "dataset manifest")->required();
    eval_cmd->add_option("--split", split_name, "train|val|test (default test)");
    eval_cmd->add_option("--mode", eval_mode, "generic|personalization");
    eval_cmd->add_option("--user", user, "user id for personalization mode");
    eval_cmd->add_option("--out", out_override, "also write the report JSON here");
    add_config_opts(eval_cmd);

    CLI::App* grid_cmd = app.add_subcommand("grid", "train architectures from the scaling grid");
    add_config_opts(grid_cmd);
    grid_cmd->add_option("--select", grid_select,
                         "all | tags/sizes, e.g. tiny,small or 128x2,256x6");

    CLI::App* pareto_cmd = app.add_subcommand("pareto", "Pareto subset of a params,cer table");
    pareto_cmd->add_option("--input", input_csv, "input CSV (params,cer,tag)")->required();
    pareto_cmd->add_option("--output", output_csv, "output CSV for the front")->required();

    CLI::App* bench_cmd = app.add_subcommand("bench", "inference timing report");
    bench_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    bench_cmd->add_option("--runs", runs, "timed runs per trial (default 1000)");
    bench_cmd->add_option("--trials", trials, "trials (default 3)");
    bench_cmd->add_option("--emit-last-n", emit_last_n,
                          "also report streaming stats at this emit width");
    bench_cmd->add_option("--window", bench_window, "window samples (default padded train window)");
    bench_cmd->add_option("--out", out_override, "also write the report JSON here");
    add_config_opts(bench_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(synth)) {
            config::ExperimentConfig cfg = load_experiment(common, synth->remaining());
            const std::string dir = !out_override.empty()
                                        ? out_override
                                        : (fs::path(cfg.out_dir) / cfg.experiment_id / "dataset")
                                              .string();
            const data::SplitManifest manifest = data::synth_dataset(cfg.synth, dir);
            config::write_provenance(cfg, (fs::path(dir) / "provenance.json").string());
            emit(json{
                {"manifest", (fs::path(dir) / "manifest.json").string()},
                {"train_users", manifest.train_users.size()},
                {"test_users", manifest.test_users.size()},
            });
            return 0;
        }
        if (app.got_subcommand(train_cmd)) {
            return run_train_like(common, train_cmd->remaining(), train::TrainMode::Supervised, "");
        }
        if (app.got_subcommand(distill_cmd)) {
            return run_train_like(common, distill_cmd->remaining(), train::TrainMode::Distill, "");
        }
        if (app.got_subcommand(pers_cmd)) {
            return run_train_like(common, pers_cmd->remaining(), train::TrainMode::Personalize,
                                  user);
        }
        if (app.got_subcommand(eval_cmd)) {
            config::ExperimentConfig cfg = load_experiment(common, eval_cmd->remaining());
            checkpoint::Loaded loaded = checkpoint::load(checkpoint_path);
            const data::SplitManifest manifest = data::load_manifest(manifest_path);
            const data::ResolvedSplit split =
                eval_mode == "personalization"
                    ? data::split_dataset(manifest, data::SplitMode::Personalization, user)
                    : data::split_dataset(manifest, data::SplitMode::Generic);
            const std::vector<std::string>* files = &split.test;
            if (split_name == "train") files = &split.train;
            else if (split_name == "val") files = &split.val;
            else require(split_name == "test", "bad_flag", "--split must be train|val|test");

            eval::EvalOptions opts;
            opts.window_len = cfg.train.window_len;
            opts.pad_past = cfg.train.pad_past;
            opts.pad_future = cfg.train.pad_future;
            const eval::EvalReport report = eval::evaluate(
                loaded.model, *files, opts, loaded.meta.checkpoint_id, eval_mode + "-" + split_name);
            const json j = eval::report_to_json(report);
            if (!out_override.empty()) write_json_file(j, out_override);
            emit(j);
            return 0;
        }
        if (app.got_subcommand(grid_cmd)) {
            config::ExperimentConfig cfg = load_experiment(common, grid_cmd->remaining());
            require(!cfg.manifest_path.empty(), "missing_file", "data.manifest is required");
            const data::SplitManifest manifest = data::load_manifest(cfg.manifest_path);
            const data::ResolvedSplit split =
                data::split_dataset(manifest, data::SplitMode::Generic);
            const config::RunPaths paths = config::make_run_paths(cfg);
            config::write_provenance(cfg, (fs::path(paths.root) / "provenance.json").string());

            std::vector<eval::ParetoPoint> rows;
            for (const model::ArchConfig& grid_arch : model::arch_grid()) {
                const std::string size_name = std::to_string(grid_arch.hidden_size) + "x" +
                                              std::to_string(grid_arch.num_layers);
                if (grid_select != "all") {
                    const bool picked =
                        grid_select.find(size_name) != std::string::npos ||
                        (!grid_arch.tag.empty() && grid_select.find(grid_arch.tag) != std::string::npos);
                    if (!picked) continue;
                }
                model::ArchConfig arch = cfg.arch;  // featurizer/vocab from config
                arch.hidden_size = grid_arch.hidden_size;
                arch.num_layers = grid_arch.num_layers;
                arch.tag = grid_arch.tag;
                const std::string run_id = cfg.experiment_id + "-grid-" + size_name;
                train::TrainResult result = train::run_training(cfg.train, arch, cfg.augment,
                                                                cfg.loss, split, run_id);
                checkpoint::save(result.model, result.meta,
                                 (fs::path(paths.checkpoints) / (run_id + ".ckpt")).string());
                write_json_file(train::record_to_json(result.record),
                                (fs::path(paths.reports) / ("run-" + run_id + ".json")).string());
                eval::ParetoPoint p;
                p.params = result.model.count_params();
                p.cer = result.record.test_cer;
                p.tag = grid_arch.tag.empty() ? size_name : grid_arch.tag;
                rows.push_back(p);
                std::cerr << "[grid] " << size_name << " params=" << p.params
                          << " test_cer=" << p.cer << "\n";
            }
            require(!rows.empty(), "bad_flag", "grid selector matched no architectures");
            const std::string table_path = (fs::path(paths.reports) / "grid.csv").string();
            eval::write_points_csv(rows, table_path);
            emit(json{{"table", table_path}, {"rows", rows.size()}});
            return 0;
        }
        if (app.got_subcommand(pareto_cmd)) {
            const auto points = eval::read_points_csv(input_csv);
            const auto front = eval::pareto_front(points);
            eval::write_points_csv(front, output_csv);
            json j = json::array();
            for (const auto& p : front) {
                j.push_back({{"params", p.params}, {"cer", p.cer}, {"tag", p.tag}});
            }
            emit(json{{"front", j}, {"kept", front.size()}, {"of", points.size()}});
            return 0;
        }
        if (app.got_subcommand(bench_cmd)) {
            config::ExperimentConfig cfg = load_experiment(common, bench_cmd->remaining());
            checkpoint::Loaded loaded = checkpoint::load(checkpoint_path);
            const std::int64_t window_samples =
                bench_window > 0 ? bench_window
                                 : cfg.train.pad_past + cfg.train.window_len + cfg.train.pad_future;
            MatF window(window_samples, loaded.model.config().num_channels);
            Rng rng(7);
            for (float& v : window.v) v = static_cast<float>(rng.normal());
            const bench::TimingReport report = bench::bench_inference(
                loaded.model, window, runs, trials, loaded.meta.checkpoint_id);
            json j = bench::timing_report_to_json(report);
            if (emit_last_n > 0) {
                const bench::StreamStats stats =
                    bench::stream_infer(loaded.model, window, cfg.train.window_len,
                                        cfg.train.pad_past, cfg.train.pad_future, emit_last_n);
                j["streaming"] = {
                    {"emit_last_n", emit_last_n},
                    {"forward_passes", stats.forward_passes},
                    {"emissions", stats.emissions.size()},
                };
            }
            if (!out_override.empty()) write_json_file(j, out_override);
            emit(j);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << json{{"code", e.code()}, {"message", e.what()}}.dump() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"code", "internal_error"}, {"message", e.what()}}.dump() << std::endl;
        return 1;
    }
    return 1;
}
