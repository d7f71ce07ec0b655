// Copyright 2026 The ShadowForge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>

#include <CLI11.hpp>

#include "shadowforge/cli.hpp"

int main(int argc, char **argv) {
    using namespace shadowforge;
    CLI::App app{"shadowforge: shadow-feature property learners with a synthetic-labeling engine"};
    app.require_subcommand(1);
    CliOptions opt;
    std::string out;
    std::string seeds;

    auto *gen = app.add_subcommand("gen", "build a hybrid dataset");
    gen->add_option("--config", opt.config, "experiment config")->required();
    gen->add_option("--out", out, "output directory");

    auto *run = app.add_subcommand("run", "train baselines and run the engine for each seed");
    run->add_option("--config", opt.config, "experiment config")->required();
    run->add_option("--dataset", opt.dataset, "dataset file")->required();
    run->add_option("--out", out, "output directory");
    run->add_option("--seeds", seeds, "comma-separated seed list, e.g. \"1,2,3\"");
    run->add_flag("--wallclock", opt.wallclock, "record elapsed seconds in reports");

    auto *eval = app.add_subcommand("eval", "score a model on a dataset split");
    eval->add_option("--model", opt.model, "model file")->required();
    eval->add_option("--dataset", opt.dataset, "dataset file")->required();
    eval->add_option("--split", opt.split, "val or test")->check(CLI::IsMember({"val", "test"}));

    auto *table = app.add_subcommand("table", "summarize aggregate reports");
    table->add_option("patterns", opt.patterns, "aggregate files, directories or glob patterns")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    if (!out.empty()) {
        opt.out = out;
    }
    if (!seeds.empty()) {
        opt.seeds = seeds;
    }

    if (gen->parsed()) {
        return cmd_gen(opt, std::cout, std::cerr);
    }
    if (run->parsed()) {
        return cmd_run(opt, std::cout, std::cerr);
    }
    if (eval->parsed()) {
        return cmd_eval(opt, std::cout, std::cerr);
    }
    return cmd_table(opt, std::cout, std::cerr);
}
