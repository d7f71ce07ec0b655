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

#include "shadowforge/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

#include <glob.h>

#include <nlohmann/json.hpp>

#include "shadowforge/config.hpp"
#include "shadowforge/engine.hpp"
#include "shadowforge/errors.hpp"
#include "shadowforge/parallel.hpp"

namespace shadowforge {

namespace {

using ordered_json = nlohmann::ordered_json;

/// Maps library exceptions onto exit codes.
template <typename Body> int guarded(std::ostream &err, Body &&body) {
    try {
        return body();
    } catch (const InvalidArgument &e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParseError &e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const VersionError &e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const AccessError &e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericalFailure &e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const UndefinedMetric &e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::filesystem::filesystem_error &e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception &e) {
        err << "internal error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

void write_atomically(const std::filesystem::path &path, const std::string &text) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw InvalidArgument("cannot write " + tmp.string());
        }
        f << text;
    }
    std::filesystem::rename(tmp, path);
}

RunConfig config_with_overrides(const CliOptions &opt) {
    if (opt.config.empty()) {
        throw InvalidArgument("--config is required");
    }
    RunConfig cfg = load_run_config(opt.config);
    if (opt.out) {
        cfg.out_dir = *opt.out;
    }
    if (opt.seeds) {
        cfg.seeds = parse_seed_list(*opt.seeds);
    }
    return cfg;
}

std::vector<std::vector<double>> labels_of(std::span<const DataPoint> pts) {
    std::vector<std::vector<double>> out;
    out.reserve(pts.size());
    for (const auto &p : pts) {
        if (!p.labels) {
            throw InvalidArgument("point " + std::to_string(p.id) + " has no labels");
        }
        out.push_back(*p.labels);
    }
    return out;
}

ordered_json nullable(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

} // namespace

std::pair<double, double> mean_std(const std::vector<double> &values) {
    if (values.empty()) {
        return {0.0, 0.0};
    }
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    if (values.size() < 2) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

int cmd_gen(const CliOptions &opt, std::ostream &out, std::ostream &err) {
    return guarded(err, [&] {
        const RunConfig cfg = config_with_overrides(opt);
        const auto &dc = cfg.dataset;
        const HybridDataset ds = build_hybrid_dataset(dc);
        std::filesystem::create_directories(cfg.out_dir);
        const auto path = cfg.out_dir / "dataset.jsonl";
        save_dataset(ds, path);

        out << "wrote " << path.string() << '\n';
        out << "  L " << ds.L.size() << "  U " << ds.U.size() << "  val " << ds.val.size() << "  test "
            << ds.test().size() << '\n';
        if (dc.task == Task::entropy) {
            // Worst case over purities (the bound grows with P).
            for (int j = 1; j < dc.n_qubits; ++j) {
                const int a = dc.pure_state_labels ? std::min(j, dc.n_qubits - j) : j;
                const double sd = std::sqrt(purity_variance_bound(dc.m_l, a, 1.0));
                if (sd > 0.1) {
                    out << "  warning: label entry " << j << " (estimated on " << a << " qubits) has purity std up to "
                        << std::setprecision(3) << sd << " at m_l = " << dc.m_l << '\n';
                }
            }
        }
        return kExitOk;
    });
}

int cmd_run(const CliOptions &opt, std::ostream &out, std::ostream &err) {
    return guarded(err, [&] {
        const RunConfig cfg = config_with_overrides(opt);
        if (opt.dataset.empty()) {
            throw InvalidArgument("--dataset is required");
        }
        HybridDataset train = load_dataset(opt.dataset, Access::training);
        std::filesystem::create_directories(cfg.out_dir);

        const std::size_t n_seeds = cfg.seeds.size();
        std::vector<std::optional<EngineResult>> results(n_seeds);
        std::vector<std::string> failures(n_seeds);
        std::mutex log_mutex;
        parallel_for(n_seeds, [&](std::size_t k) {
            const std::uint64_t seed = cfg.seeds[k];
            LearnerConfig lc = cfg.learner;
            lc.seed = seed;
            ConsistencyConfig cc = cfg.consistency;
            cc.seed = seed;
            try {
                auto res = run_engine(train, cfg.T, cc, lc, cfg.paradigm, opt.wallclock);
                const auto tag = "seed" + std::to_string(seed);
                save_model(res.baseline, cfg.out_dir / ("baseline_" + tag + ".model"));
                save_model(res.state.model, cfg.out_dir / ("model_" + tag + ".model"));
                std::ostringstream report;
                write_report(report, res.state.report);
                write_atomically(cfg.out_dir / ("report_" + tag + ".json"), report.str());
                results[k] = std::move(res);
            } catch (const NumericalFailure &e) {
                failures[k] = e.what();
            } catch (const UndefinedMetric &e) {
                failures[k] = e.what();
            }
        });

        // Test labels are only read once every engine run has finished.
        const HybridDataset full = load_dataset(opt.dataset, Access::evaluation);
        const auto &test = full.test();
        const auto truths = labels_of(test);

        ordered_json agg;
        agg["system"] = to_string(full.config.system);
        agg["task"] = to_string(full.config.task);
        agg["N"] = full.config.n_qubits;
        agg["n"] = full.config.n;
        agg["r"] = full.config.r;
        agg["m_l"] = full.config.m_l;
        agg["m_u"] = full.config.m_u;
        agg["paradigm"] = to_string(cfg.paradigm);
        agg["T"] = cfg.T;
        ordered_json per_seed = ordered_json::array();
        std::vector<double> base_r2;
        std::vector<double> engine_r2;
        bool failed = false;
        for (std::size_t k = 0; k < n_seeds; ++k) {
            ordered_json row;
            row["seed"] = cfg.seeds[k];
            if (!results[k]) {
                failed = true;
                row["error"] = failures[k];
                err << "seed " << cfg.seeds[k] << " failed: " << failures[k] << '\n';
                per_seed.push_back(std::move(row));
                continue;
            }
            const double b = r_squared(predict_all(results[k]->baseline, test), truths);
            const double e = r_squared(predict_all(results[k]->state.model, test), truths);
            base_r2.push_back(b);
            engine_r2.push_back(e);
            row["baseline_test_r2"] = b;
            row["engine_test_r2"] = e;
            row["iterations"] = results[k]->state.t;
            row["gate_monotone"] = gate_monotone(results[k]->state.report);
            per_seed.push_back(std::move(row));
        }
        agg["seeds"] = std::move(per_seed);
        const auto [bm, bs] = mean_std(base_r2);
        const auto [em, es] = mean_std(engine_r2);
        agg["baseline_mean"] = bm;
        agg["baseline_std"] = bs;
        agg["engine_mean"] = em;
        agg["engine_std"] = es;
        agg["delta_mean"] = em - bm;
        agg["reference"] = {{"context", "10-qubit XXZ entropy, r = 0.4, m_u = 64, transformer learner"},
                            {"baseline_r2", 0.722},
                            {"engine_r2", 0.825}};
        write_atomically(cfg.out_dir / "aggregate.json", agg.dump(2) + "\n");

        out << "seeds " << base_r2.size() << "/" << n_seeds << "  baseline " << std::fixed << std::setprecision(4) << bm
            << " +- " << bs << "  engine " << em << " +- " << es << "  delta " << (em - bm) << '\n';
        return failed ? kExitNumerical : kExitOk;
    });
}

int cmd_eval(const CliOptions &opt, std::ostream &out, std::ostream &err) {
    return guarded(err, [&] {
        if (opt.model.empty() || opt.dataset.empty()) {
            throw InvalidArgument("--model and --dataset are required");
        }
        const Model model = load_model(opt.model);
        std::vector<DataPoint> pts;
        if (opt.split == "test") {
            pts = load_dataset(opt.dataset, Access::evaluation).test();
        } else if (opt.split == "val") {
            pts = load_dataset(opt.dataset, Access::training).val;
        } else {
            throw InvalidArgument("--split must be val or test");
        }
        if (pts.empty()) {
            throw InvalidArgument("split '" + opt.split + "' is empty");
        }
        const auto truths = labels_of(pts);
        const auto preds = predict_all(model, pts);
        ordered_json j;
        j["r2"] = r_squared(preds, truths);
        ordered_json per = ordered_json::array();
        for (double v : per_entry_r_squared(preds, truths)) {
            per.push_back(nullable(v));
        }
        j["per_prefix_r2"] = std::move(per);
        j["n_points"] = pts.size();
        out << j.dump(2) << '\n';
        return kExitOk;
    });
}

int cmd_table(const CliOptions &opt, std::ostream &out, std::ostream &err) {
    return guarded(err, [&] {
        std::vector<std::filesystem::path> files;
        for (const auto &pattern : opt.patterns) {
            glob_t g{};
            if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
                for (std::size_t i = 0; i < g.gl_pathc; ++i) {
                    std::filesystem::path p(g.gl_pathv[i]);
                    files.push_back(std::filesystem::is_directory(p) ? p / "aggregate.json" : p);
                }
            }
            globfree(&g);
        }
        std::sort(files.begin(), files.end());
        files.erase(std::unique(files.begin(), files.end()), files.end());
        if (files.empty()) {
            throw InvalidArgument("no report files match");
        }

        struct Row {
            std::string system;
            std::string task;
            double r;
            std::size_t m_u;
            std::string paradigm;
            double base;
            double engine;
        };
        std::vector<Row> rows;
        for (const auto &f : files) {
            std::ifstream in(f);
            if (!in) {
                throw InvalidArgument("cannot open " + f.string());
            }
            try {
                const auto j = nlohmann::json::parse(in);
                rows.push_back(Row{j.at("system").get<std::string>(), j.at("task").get<std::string>(),
                                   j.at("r").get<double>(), j.at("m_u").get<std::size_t>(),
                                   j.at("paradigm").get<std::string>(), j.at("baseline_mean").get<double>(),
                                   j.at("engine_mean").get<double>()});
            } catch (const nlohmann::json::exception &e) {
                throw ParseError(f.string(), 0, std::string("not an aggregate report: ") + e.what());
            }
        }
        std::stable_sort(rows.begin(), rows.end(), [](const Row &a, const Row &b) {
            return std::tie(a.system, a.task, a.r, a.m_u, a.paradigm) < std::tie(b.system, b.task, b.r, b.m_u, b.paradigm);
        });

        out << std::left << std::setw(14) << "system" << std::setw(8) << "task" << std::right << std::setw(6) << "r"
            << std::setw(6) << "m_u" << "  " << std::left << std::setw(9) << "paradigm" << std::right << std::setw(10)
            << "baseline" << std::setw(10) << "engine" << std::setw(10) << "delta" << '\n';
        for (const auto &r : rows) {
            out << std::left << std::setw(14) << r.system << std::setw(8) << r.task << std::right << std::fixed
                << std::setprecision(2) << std::setw(6) << r.r << std::setw(6) << r.m_u << "  " << std::left
                << std::setw(9) << r.paradigm << std::right << std::setprecision(4) << std::setw(10) << r.base
                << std::setw(10) << r.engine << std::setw(10) << (r.engine - r.base) << '\n';
        }
        return kExitOk;
    });
}

} // namespace shadowforge
