/*
 * mvi : CNN-based myelin volume index mapping on synthetic phantoms
 *
 * Copyright 2026 the mvi authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "mvi/cli/commands.hpp"

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

namespace {

mvi::pipeline::RunConfig load_config(const std::string& path, std::uint64_t seed_override,
                                     bool seed_set) {
    auto cfg = mvi::pipeline::load_run_config(path);
    if (seed_set) {
        cfg.seed = seed_override;
        cfg.phantom.seed = seed_override;
    }
    if (const char* ws = std::getenv("MVI_WORKSPACE"); ws && *ws) cfg.workspace = ws;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"myelin volume index mapping on synthetic phantoms"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    bool force = false;
    int jobs = 1;
    bool deterministic = false;
    std::string fold_id;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", config_path, "run configuration JSON");
        if (needs_config) c->required();
        sub->add_option("--seed", seed, "override the master seed (and the phantom seed)");
    };

    auto* sub_phantom = app.add_subcommand("phantom", "generate the synthetic dataset");
    add_common(sub_phantom, true);
    sub_phantom->add_flag("--force", force, "overwrite a non-empty dataset directory");

    auto* sub_run = app.add_subcommand("run", "train, infer and evaluate end to end");
    add_common(sub_run, true);
    sub_run->add_option("--jobs", jobs, "worker threads for batch items")
        ->check(CLI::Range(1, 256));
    sub_run->add_flag("--deterministic", deterministic,
                      "bit-reproducible artifacts (timing fields zeroed)");
    sub_run->add_option("--fold", fold_id, "train a single fold (subject id or index)");

    auto* sub_report = app.add_subcommand("report", "recompute statistics and reports");
    add_common(sub_report, true);

    auto* sub_verify = app.add_subcommand("verify", "run the built-in oracle suites");
    (void)sub_verify;

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(sub_verify)) return mvi::cli::cmd_verify();

        const bool seed_set = app.count("--seed") > 0 || sub_phantom->count("--seed") > 0 ||
                              sub_run->count("--seed") > 0 ||
                              sub_report->count("--seed") > 0;
        auto cfg = load_config(config_path, seed, seed_set);

        if (app.got_subcommand(sub_phantom)) return mvi::cli::cmd_phantom(cfg, force);
        if (app.got_subcommand(sub_report)) return mvi::cli::cmd_report(cfg);

        mvi::pipeline::RunOptions opt;
        opt.jobs = jobs;
        opt.deterministic = deterministic;
        if (!fold_id.empty()) {
            int idx = -1;
            // match a subject id first, else parse as a fold index
            auto folds_probe = mvi::pipeline::make_folds(
                [&] {
                    std::vector<std::string> ids;
                    const auto ds = mvi::phantom::load_dataset(cfg.workspace / "dataset");
                    ids = ds.subject_ids;
                    return ids;
                }(),
                0);
            for (std::size_t k = 0; k < folds_probe.size(); ++k)
                if (folds_probe[k].held_out == fold_id) idx = static_cast<int>(k);
            if (idx < 0) idx = std::stoi(fold_id);
            opt.only_fold = idx;
        }
        return mvi::cli::cmd_run(cfg, opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
