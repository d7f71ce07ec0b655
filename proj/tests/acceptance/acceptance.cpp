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

// Runs the ten acceptance checks and prints one PASS/FAIL line per check.
// Exit status is the number of failed checks (0 when everything passes).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "shadowforge/cli.hpp"
#include "shadowforge/dataset.hpp"
#include "shadowforge/engine.hpp"
#include "shadowforge/learner.hpp"
#include "shadowforge/quantum.hpp"
#include "shadowforge/shadows.hpp"

using namespace shadowforge;
namespace fs = std::filesystem;

namespace {

// Tolerances and pass rules.
constexpr double kEnergyTol = 1e-8;
constexpr double kEnergyBudgetS = 60.0;
constexpr double kBellTol = 0.05;
constexpr int kBellPassNeeded = 19;
constexpr double kPurityTol = 0.1;
constexpr double kBoundPassRate = 0.95;
constexpr double kGradTol = 1e-4;
constexpr double kR2Tol = 1e-12;
constexpr double kMinDelta = 0.02;
constexpr int kSeedsNeeded = 4;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char *f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// 1 -------------------------------------------------------------------------
Outcome ground_state_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng = make_rng(2024);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const bool ising = uniform01(rng) < 0.5;
        // The XXZ chain alternates two couplings, so it needs an even length.
        const int n = ising ? 3 + static_cast<int>(uniform_index(rng, 8)) : 2 * (2 + static_cast<int>(uniform_index(rng, 4)));
        const double p = 2.0 * uniform01(rng);
        const auto h = ising ? build_cluster_ising(n, p, 1.0) : build_xxz(n, p, 1.0);
        const double e = ground_state(h, static_cast<std::uint64_t>(k)).energy;
        worst = std::max(worst, std::abs(e - oracle::dense_ground_energy(h)));
    }
    const double elapsed = seconds_since(t0);
    return {worst < kEnergyTol && elapsed < kEnergyBudgetS,
            "max |dE| = " + fmt("%.2e", worst) + ", " + fmt("%.1f", elapsed) + " s"};
}

// 2 -------------------------------------------------------------------------
Outcome bell_unbiasedness() {
    const auto bell = oracle::to_state(oracle::bell_state());
    const double zz = exact_correlation(bell, 0, 1, Axis::z);
    const double xx = exact_correlation(bell, 0, 1, Axis::x);
    int passed = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng = make_rng(seed, {2});
        const auto rec = sample_measurements(bell, 50000, rng);
        const bool ok = std::abs(estimate_correlation(rec, 0, 1, Axis::z) - zz) <= kBellTol &&
                        std::abs(estimate_correlation(rec, 0, 1, Axis::x) - xx) <= kBellTol;
        passed += ok ? 1 : 0;
    }
    return {passed >= kBellPassNeeded && std::abs(zz - 1.0) < 1e-12 && std::abs(xx - 1.0) < 1e-12,
            std::to_string(passed) + "/20 seeds within 0.05"};
}

// 3 -------------------------------------------------------------------------
Outcome purity_estimators() {
    const std::vector<std::pair<std::string, Eigen::VectorXcd>> states{
        {"|0000>", oracle::to_vector(QuantumState::basis_state(4, 0))}, {"GHZ4", oracle::ghz_state(4)}};
    const std::vector<std::vector<int>> subsystems{{0}, {0, 1}};
    bool ok = true;
    double worst = 0.0;
    int bound_pass = 0;
    int bound_total = 0;
    std::uint64_t stream = 0;
    for (const auto &[name, psi] : states) {
        const auto state = oracle::to_state(psi);
        for (const auto &keep : subsystems) {
            const double exact = oracle::purity(psi, 4, keep);
            const SubsystemSpec a(keep);
            Rng rng = make_rng(303, {stream++});
            const double est = estimate_purity(sample_measurements(state, 10000, rng), a);
            worst = std::max(worst, std::abs(est - exact));
            ok = ok && std::abs(est - exact) <= kPurityTol;

            // 100 trials, each the sample variance of 20 estimates at m = 500.
            const std::size_t m = 500;
            const double bound = purity_variance_bound(m, static_cast<int>(keep.size()), exact);
            for (int trial = 0; trial < 100; ++trial) {
                std::vector<double> est_k;
                for (int k = 0; k < 20; ++k) {
                    est_k.push_back(estimate_purity(sample_measurements(state, m, rng), a));
                }
                double mean = 0.0;
                for (double v : est_k) {
                    mean += v / 20.0;
                }
                double var = 0.0;
                for (double v : est_k) {
                    var += (v - mean) * (v - mean) / 19.0;
                }
                bound_pass += var < bound ? 1 : 0;
                ++bound_total;
            }
        }
    }
    const double rate = static_cast<double>(bound_pass) / bound_total;
    return {ok && rate >= kBoundPassRate,
            "max |dP| = " + fmt("%.3f", worst) + ", variance below bound in " + std::to_string(bound_pass) + "/" +
                std::to_string(bound_total) + " trials"};
}

// 4 -------------------------------------------------------------------------
Outcome pair_factors() {
    const char names[] = {'X', 'Y', 'Z'};
    int exact = 0;
    for (int ba = 0; ba < 3; ++ba) {
        for (int bb = 0; bb < 3; ++bb) {
            for (int oa = 0; oa < 2; ++oa) {
                for (int ob = 0; ob < 2; ++ob) {
                    const double trace =
                        (oracle::snapshot(names[ba], oa) * oracle::snapshot(names[bb], ob)).trace().real();
                    const double got = pair_factor(static_cast<Axis>(ba), static_cast<std::uint8_t>(oa),
                                                   static_cast<Axis>(bb), static_cast<std::uint8_t>(ob));
                    const double want = ba != bb ? 0.5 : (oa == ob ? 5.0 : -4.0);
                    exact += got == want && std::abs(trace - want) < 1e-12 ? 1 : 0;
                }
            }
        }
    }
    return {exact == 36, std::to_string(exact) + "/36 combinations match"};
}

// 5 -------------------------------------------------------------------------
Outcome learner_soundness() {
    const std::vector<int> sizes{12, 16, 16, 5};
    const std::size_t nw = mlp_weight_count(sizes);
    Rng rng = make_rng(55);
    Eigen::MatrixXd x(12, 16);
    Eigen::MatrixXd y(5, 16);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = normal01(rng);
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y.data()[i] = normal01(rng);
    }
    const double h = 1e-5;
    double worst = 0.0;
    std::vector<double> grad(nw);
    std::vector<double> scratch(nw);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> w(nw);
        for (auto &v : w) {
            v = 0.4 * normal01(rng);
        }
        mlp_loss_gradient(sizes, w, x, y, grad);
        double diff = 0.0;
        double norm = 0.0;
        for (std::size_t i = 0; i < nw; ++i) {
            auto wp = w;
            auto wm = w;
            wp[i] += h;
            wm[i] -= h;
            const double fd =
                (mlp_loss_gradient(sizes, wp, x, y, scratch) - mlp_loss_gradient(sizes, wm, x, y, scratch)) / (2 * h);
            diff += (fd - grad[i]) * (fd - grad[i]);
            norm += grad[i] * grad[i];
        }
        worst = std::max(worst, std::sqrt(diff / norm));
    }
    using V = std::vector<std::vector<double>>;
    const V truths{{1.0}, {2.0}, {3.0}};
    const bool r2 = std::abs(r_squared(truths, truths) - 1.0) <= kR2Tol &&
                    std::abs(r_squared(V{{2.0}, {2.0}, {2.0}}, truths)) <= kR2Tol &&
                    std::abs(r_squared(V{{1.0}, {2.0}, {2.0}}, truths) - 0.5) <= kR2Tol;
    return {worst < kGradTol && r2, "max gradient rel. err = " + fmt("%.2e", worst) + (r2 ? ", R^2 cases exact" : ", R^2 cases off")};
}

// 6, 7, 10 ------------------------------------------------------------------
struct PairedRun {
    std::vector<double> baseline;
    std::vector<double> engine;
    bool monotone = true;
    Model first_baseline;
};

DatasetConfig paired_config(SystemKind system) {
    DatasetConfig c;
    c.system = system;
    c.n_qubits = 8;
    c.n = 400;
    c.r = 0.4;
    c.m_l = 1024;
    c.m_u = 64;
    c.n_val = 120;
    c.n_test = 200;
    c.task = Task::entropy;
    c.seed = 1;
    return c;
}

double test_r2(const Model &model, const std::vector<DataPoint> &test) {
    std::vector<std::vector<double>> truths;
    for (const auto &pt : test) {
        truths.push_back(*pt.labels);
    }
    return r_squared(predict_all(model, test), truths);
}

PairedRun paired_experiment(SystemKind system) {
    HybridDataset full = build_hybrid_dataset(paired_config(system));
    const std::vector<DataPoint> test = full.test();
    full.seal_for_training();
    PairedRun out;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        LearnerConfig lc;
        lc.seed = seed;
        ConsistencyConfig cc;
        cc.seed = seed;
        const auto res = run_engine(full, 6, cc, lc, Paradigm::sl);
        out.baseline.push_back(test_r2(res.baseline, test));
        out.engine.push_back(test_r2(res.state.model, test));
        out.monotone = out.monotone && gate_monotone(res.state.report);
        if (seed == 1) {
            out.first_baseline = res.baseline;
        }
    }
    return out;
}

Outcome judge_paired(const PairedRun &run) {
    int wins = 0;
    double delta = 0.0;
    std::string per_seed;
    for (std::size_t k = 0; k < run.engine.size(); ++k) {
        wins += run.engine[k] >= run.baseline[k] ? 1 : 0;
        delta += (run.engine[k] - run.baseline[k]) / static_cast<double>(run.engine.size());
        per_seed += " " + fmt("%.3f", run.baseline[k]) + "->" + fmt("%.3f", run.engine[k]);
    }
    return {wins >= kSeedsNeeded && delta >= kMinDelta,
            std::to_string(wins) + "/5 seeds engine >= baseline, mean delta = " + fmt("%+.4f", delta) + " (test R^2" +
                per_seed + ")"};
}

// 8 -------------------------------------------------------------------------
Outcome variance_monotonicity(const Model &model) {
    const auto cfg = paired_config(SystemKind::xxz);
    Rng prng = make_rng(808);
    const auto params = sample_parameters(cfg, 40, prng);
    std::vector<QuantumState> states;
    for (std::size_t i = 0; i < params.size(); ++i) {
        states.push_back(ground_state(build_xxz(cfg.n_qubits, params[i][0], 1.0), i).state);
    }
    int monotone = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::vector<double> means;
        for (std::size_t m : {32, 128, 512}) {
            Rng rng = make_rng(seed, {m});
            std::vector<DataPoint> pool;
            for (std::size_t i = 0; i < states.size(); ++i) {
                DataPoint pt;
                pt.id = i;
                pt.params = params[i];
                pt.record = sample_measurements(states[i], m, rng);
                pt.visible_m = m;
                pool.push_back(std::move(pt));
            }
            ConsistencyConfig cc;
            cc.seed = seed;
            const auto v = candidate_variances(model, pool, cc, seed);
            double mean = 0.0;
            for (double x : v) {
                mean += x / static_cast<double>(v.size());
            }
            means.push_back(mean);
        }
        const bool ok = means[0] > means[1] && means[1] > means[2];
        monotone += ok ? 1 : 0;
        detail += " " + fmt("%.3g", means[0]) + ">" + fmt("%.3g", means[1]) + ">" + fmt("%.3g", means[2]) +
                  (ok ? "" : "(x)");
    }
    return {monotone >= kSeedsNeeded, std::to_string(monotone) + "/5 seeds monotone:" + detail};
}

// 9 -------------------------------------------------------------------------
std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome reproducibility() {
    const fs::path root = fs::temp_directory_path() / "shadowforge_acceptance_repro";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "run.ini") << "[dataset]\nsystem = xxz\nN = 6\nn = 120\nr = 0.4\nm_l = 512\nm_u = 32\n"
                                       "n_val = 30\nn_test = 40\ntask = entropy\nseed = 9\n\n"
                                       "[engine]\nT = 3\nseeds = 1,2,3\n";
    std::vector<std::string> produced;
    std::ostringstream sink;
    bool ok = true;
    for (const char *tag : {"a", "b"}) {
        CliOptions opt;
        opt.config = root / "run.ini";
        opt.out = root / tag;
        ok = ok && cmd_gen(opt, sink, sink) == kExitOk;
        opt.dataset = root / tag / "dataset.jsonl";
        ok = ok && cmd_run(opt, sink, sink) == kExitOk;
    }
    int identical = 0;
    int files = 0;
    for (const auto &entry : fs::directory_iterator(root / "a")) {
        const auto name = entry.path().filename();
        ++files;
        identical += fs::exists(root / "b" / name) && slurp(entry.path()) == slurp(root / "b" / name) ? 1 : 0;
    }
    fs::remove_all(root);
    return {ok && files >= 8 && identical == files,
            std::to_string(identical) + "/" + std::to_string(files) + " output files byte-identical"};
}

void report(int id, const Outcome &o, int &failures) {
    std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
}

} // namespace

int main() {
    int failures = 0;
    report(1, ground_state_oracle(), failures);
    report(2, bell_unbiasedness(), failures);
    report(3, purity_estimators(), failures);
    report(4, pair_factors(), failures);
    report(5, learner_soundness(), failures);
    const auto xxz = paired_experiment(SystemKind::xxz);
    report(6, judge_paired(xxz), failures);
    const auto ising = paired_experiment(SystemKind::cluster_ising);
    report(7, {xxz.monotone && ising.monotone, "accepted validation R^2 non-decreasing in all 10 runs"}, failures);
    report(8, variance_monotonicity(xxz.first_baseline), failures);
    report(9, reproducibility(), failures);
    report(10, judge_paired(ising), failures);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures;
}
