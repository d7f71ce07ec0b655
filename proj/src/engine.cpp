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

#include "shadowforge/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "shadowforge/errors.hpp"
#include "shadowforge/parallel.hpp"

namespace shadowforge {

std::string to_string(Selection s) { return s == Selection::quantile ? "quantile" : "threshold"; }

Selection selection_from_string(const std::string &name) {
    if (name == "quantile") {
        return Selection::quantile;
    }
    if (name == "threshold") {
        return Selection::threshold;
    }
    throw InvalidArgument("unknown selection mode '" + name + "' (expected quantile or threshold)");
}

std::string to_string(Paradigm p) {
    switch (p) {
    case Paradigm::sl:
        return "sl";
    case Paradigm::ssl:
        return "ssl";
    case Paradigm::kernel:
        return "kernel";
    }
    return "?";
}

Paradigm paradigm_from_string(const std::string &name) {
    if (name == "sl") {
        return Paradigm::sl;
    }
    if (name == "ssl") {
        return Paradigm::ssl;
    }
    if (name == "kernel") {
        return Paradigm::kernel;
    }
    throw InvalidArgument("unknown paradigm '" + name + "' (expected sl, ssl or kernel)");
}

void ConsistencyConfig::validate() const {
    if (s < 2) {
        throw InvalidArgument("consistency subset count s must be at least 2");
    }
    if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) {
        throw InvalidArgument("subset_fraction must lie in (0, 1]");
    }
    if (!(admitted_fraction > 0.0 && admitted_fraction <= 1.0)) {
        throw InvalidArgument("admitted_fraction must lie in (0, 1]");
    }
    if (max_retries < 0) {
        throw InvalidArgument("max_retries must be non-negative");
    }
    if (!(tighten > 0.0 && tighten < 1.0)) {
        throw InvalidArgument("tighten must lie in (0, 1)");
    }
    if (selection == Selection::threshold && !(tau >= 0.0)) {
        throw InvalidArgument("tau must be non-negative in threshold mode");
    }
}

ConsistencyResult consistency_variance(const Model &model, const DataPoint &pt, const ConsistencyConfig &cc,
                                       Rng &rng) {
    const std::size_t m = pt.visible_m;
    if (m < static_cast<std::size_t>(cc.s)) {
        throw InvalidArgument("point " + std::to_string(pt.id) + " has " + std::to_string(m) +
                              " snapshots, fewer than s = " + std::to_string(cc.s));
    }
    const auto k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cc.subset_fraction * static_cast<double>(m))), 1, m);
    std::vector<std::size_t> pool(m);
    std::vector<std::vector<double>> preds;
    preds.reserve(static_cast<std::size_t>(cc.s));
    for (int subset = 0; subset < cc.s; ++subset) {
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) {
            std::swap(pool[i], pool[i + uniform_index(rng, m - i)]);
        }
        std::vector<std::size_t> idx(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(idx.begin(), idx.end());
        preds.push_back(predict(model, mask_subset(pt, idx)));
    }

    ConsistencyResult res;
    res.mean.assign(preds.front().size(), 0.0);
    for (const auto &p : preds) {
        for (std::size_t e = 0; e < p.size(); ++e) {
            res.mean[e] += p[e];
        }
    }
    for (auto &v : res.mean) {
        v /= static_cast<double>(cc.s);
    }
    for (const auto &p : preds) {
        for (std::size_t e = 0; e < p.size(); ++e) {
            res.variance += (p[e] - res.mean[e]) * (p[e] - res.mean[e]);
        }
    }
    res.variance /= static_cast<double>(cc.s);
    return res;
}

std::vector<double> candidate_variances(const Model &model, std::span<const DataPoint> candidates,
                                        const ConsistencyConfig &cc, std::uint64_t seed) {
    std::vector<double> out(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t i) {
        Rng rng = make_rng(seed, {candidates[i].id});
        out[i] = consistency_variance(model, candidates[i], cc, rng).variance;
    });
    return out;
}

std::vector<LabeledPoint> admit(const Model &model, std::span<const DataPoint> candidates,
                                std::span<const double> variances, Selection selection, double admitted_fraction,
                                double tau, int iteration) {
    if (variances.size() != candidates.size()) {
        throw InvalidArgument("admit: one variance per candidate required");
    }
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (variances[a] != variances[b]) {
            return variances[a] < variances[b];
        }
        return candidates[a].id < candidates[b].id;
    });
    std::size_t count = 0;
    if (selection == Selection::quantile) {
        count = std::min(candidates.size(),
                         static_cast<std::size_t>(
                             std::ceil(admitted_fraction * static_cast<double>(candidates.size()) - 1e-9)));
    } else {
        while (count < order.size() && variances[order[count]] <= tau) {
            ++count;
        }
    }
    std::vector<LabeledPoint> out(count);
    parallel_for(count, [&](std::size_t r) {
        const auto &pt = candidates[order[r]];
        out[r].point = pt;
        out[r].label = predict(model, pt);
        out[r].admitted_at = iteration;
        out[r].variance = variances[order[r]];
    });
    return out;
}

std::vector<LabeledPoint> select_high_quality(const Model &model, std::span<const DataPoint> candidates,
                                              const ConsistencyConfig &cc, std::uint64_t seed) {
    cc.validate();
    if (candidates.empty()) {
        throw InvalidArgument("select_high_quality: no candidates");
    }
    const auto variances = candidate_variances(model, candidates, cc, seed);
    return admit(model, candidates, variances, cc.selection, cc.admitted_fraction, cc.tau, 1);
}

std::vector<Example> to_examples(std::span<const LabeledPoint> points, bool use_params) {
    std::vector<Example> out(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        out[i].x = featurize(points[i].point, use_params);
        out[i].y = points[i].label;
    });
    return out;
}

Model retrain(const Model &model, std::span<const LabeledPoint> s_h, const LearnerConfig &cfg, std::uint64_t seed) {
    if (s_h.size() < 2) {
        throw InvalidArgument("retrain needs at least 2 points");
    }
    const auto data = to_examples(s_h, model.features.use_params);
    if (model.kind == ModelKind::kernel) {
        LearnerConfig kc = cfg;
        kc.seed = seed;
        return train_kernel(data, model.features, kc);
    }
    // The original labeled points come first in S_h; they keep the holdout
    // split of the baseline fit and admitted points always train.
    const auto n_orig = static_cast<std::size_t>(
        std::count_if(s_h.begin(), s_h.end(), [](const LabeledPoint &p) { return p.admitted_at == 0; }));
    std::vector<std::uint8_t> mask(s_h.size(), 0);
    if (n_orig >= 2) {
        const auto base = holdout_mask(n_orig, cfg.holdout_fraction, cfg.seed);
        std::size_t k = 0;
        for (std::size_t i = 0; i < s_h.size(); ++i) {
            if (s_h[i].admitted_at == 0) {
                mask[i] = base[k++];
            }
        }
        return continue_training(model, data, cfg, cfg.engine_patience, seed, mask);
    }
    return continue_training(model, data, cfg, cfg.engine_patience, seed);
}

double validate(const Model &model, std::span<const DataPoint> val) {
    if (val.empty()) {
        throw InvalidArgument("validation set is empty");
    }
    std::vector<std::vector<double>> truths;
    truths.reserve(val.size());
    for (const auto &pt : val) {
        if (!pt.labels) {
            throw InvalidArgument("validation point " + std::to_string(pt.id) + " has no labels");
        }
        truths.push_back(*pt.labels);
    }
    return r_squared(predict_all(model, val), truths);
}

namespace {

constexpr std::uint64_t kSelectStream = 0x5e1ec7;
constexpr std::uint64_t kRetrainStream = 0x7e7a1;

double set_loss(const Model &model, std::span<const LabeledPoint> s_h) {
    const auto data = to_examples(s_h, model.features.use_params);
    return mean_squared_error(model, data);
}

} // namespace

EngineState engine_iteration(EngineState state, std::span<const DataPoint> pool, std::span<const DataPoint> val,
                             const ConsistencyConfig &cc, const LearnerConfig &lc) {
    cc.validate();
    if (state.val_history.empty()) {
        throw InvalidArgument("engine state has no baseline validation score");
    }
    const int t = state.t + 1;
    const double previous = state.val_history.back();
    ReportRow row;
    row.t = t;

    if (pool.empty()) {
        row.admitted_fraction = state.admitted_fraction;
        row.val_r2 = previous;
        row.train_loss = set_loss(state.model, state.s_h);
        state.report.push_back(row);
        state.t = t;
        return state;
    }

    const auto variances = candidate_variances(state.model, pool, cc, derive_seed(cc.seed, {kSelectStream,
                                                                                            static_cast<std::uint64_t>(t)}));
    double fraction = state.admitted_fraction;
    double tau = state.tau;
    for (int retry = 0; retry <= cc.max_retries; ++retry) {
        auto admitted = admit(state.model, pool, variances, cc.selection, fraction, tau, t);
        std::vector<LabeledPoint> candidate_set = state.s_h;
        candidate_set.insert(candidate_set.end(), std::make_move_iterator(admitted.begin()),
                             std::make_move_iterator(admitted.end()));
        const std::size_t n_admitted = candidate_set.size() - state.s_h.size();
        Model candidate = retrain(state.model, candidate_set, lc,
                                  derive_seed(lc.seed, {kRetrainStream, static_cast<std::uint64_t>(t),
                                                        static_cast<std::uint64_t>(retry)}));
        const double r2 = validate(candidate, val);
        row.retries = retry;
        row.admitted_count = n_admitted;
        row.admitted_fraction = cc.selection == Selection::quantile ? fraction : tau;
        row.val_r2 = r2;
        if (r2 >= previous) {
            row.accepted = true;
            row.train_loss = set_loss(candidate, candidate_set);
            state.s_h = std::move(candidate_set);
            state.model = std::move(candidate);
            state.val_history.push_back(r2);
            state.admitted_fraction = cc.admitted_fraction;
            state.tau = cc.tau;
            state.report.push_back(row);
            state.t = t;
            return state;
        }
        fraction *= cc.tighten;
        tau *= cc.tighten;
    }
    row.accepted = false;
    row.train_loss = set_loss(state.model, state.s_h);
    state.report.push_back(row);
    state.converged = true;
    state.t = t;
    return state;
}

EngineResult run_engine(const HybridDataset &ds, int T, const ConsistencyConfig &cc, const LearnerConfig &lc,
                        Paradigm paradigm, bool record_wallclock) {
    cc.validate();
    lc.validate();
    if (T < 0) {
        throw InvalidArgument("T must be non-negative");
    }
    if (ds.L.size() < 2 || ds.val.empty()) {
        throw InvalidArgument("engine needs at least 2 labeled points and a validation set");
    }
    const auto clock_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return record_wallclock
                   ? std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count()
                   : 0.0;
    };

    FeatureConfig fc;
    fc.n_qubits = ds.config.n_qubits;
    fc.use_params = ds.config.use_params_as_features;
    fc.n_params = ds.L.front().params.size();
    fc.task = ds.config.task;

    EngineState state;
    state.admitted_fraction = cc.admitted_fraction;
    state.tau = cc.tau;
    for (const auto &pt : ds.L) {
        if (!pt.labels) {
            throw InvalidArgument("labeled point " + std::to_string(pt.id) + " has no labels");
        }
        state.s_h.push_back(LabeledPoint{pt, *pt.labels, 0, 0.0});
    }
    const auto examples = to_examples(state.s_h, fc.use_params);
    switch (paradigm) {
    case Paradigm::sl:
        state.model = train_sl(examples, fc, lc);
        break;
    case Paradigm::ssl: {
        std::vector<std::vector<double>> unlabeled(ds.U.size());
        parallel_for(ds.U.size(), [&](std::size_t i) { unlabeled[i] = featurize(ds.U[i], fc.use_params); });
        state.model = train_ssl(examples, unlabeled, fc, lc);
        break;
    }
    case Paradigm::kernel:
        state.model = train_kernel(examples, fc, lc);
        break;
    }

    EngineResult result;
    result.baseline = state.model;
    ReportRow base;
    base.admitted_fraction = cc.selection == Selection::quantile ? cc.admitted_fraction : cc.tau;
    base.val_r2 = validate(state.model, ds.val);
    base.train_loss = mean_squared_error(state.model, examples);
    base.wallclock_s = elapsed();
    state.val_history.push_back(base.val_r2);
    state.report.push_back(base);

    while (state.t < T && !state.converged) {
        std::unordered_set<std::uint64_t> taken;
        for (const auto &p : state.s_h) {
            taken.insert(p.point.id);
        }
        std::vector<DataPoint> pool;
        for (const auto &pt : ds.U) {
            if (!taken.contains(pt.id)) {
                pool.push_back(pt);
            }
        }
        state = engine_iteration(std::move(state), pool, ds.val, cc, lc);
        state.report.back().wallclock_s = elapsed();
    }
    result.state = std::move(state);
    return result;
}

void write_report(std::ostream &out, std::span<const ReportRow> rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto &r : rows) {
        nlohmann::ordered_json j;
        j["t"] = r.t;
        j["accepted"] = r.accepted;
        j["retries"] = r.retries;
        j["admitted_count"] = r.admitted_count;
        j["admitted_fraction"] = r.admitted_fraction;
        j["val_r2"] = r.val_r2;
        j["train_loss"] = r.train_loss;
        j["wallclock_s"] = r.wallclock_s;
        arr.push_back(std::move(j));
    }
    out << arr.dump(2) << '\n';
}

std::vector<ReportRow> read_report(std::istream &in, const std::string &source) {
    std::vector<ReportRow> rows;
    try {
        const auto arr = nlohmann::json::parse(in);
        for (const auto &j : arr) {
            ReportRow r;
            r.t = j.at("t").get<int>();
            r.accepted = j.at("accepted").get<bool>();
            r.retries = j.at("retries").get<int>();
            r.admitted_count = j.at("admitted_count").get<std::size_t>();
            r.admitted_fraction = j.at("admitted_fraction").get<double>();
            r.val_r2 = j.at("val_r2").get<double>();
            r.train_loss = j.at("train_loss").get<double>();
            r.wallclock_s = j.at("wallclock_s").get<double>();
            rows.push_back(r);
        }
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(source, 0, e.what());
    }
    return rows;
}

bool gate_monotone(std::span<const ReportRow> rows) {
    double last = -std::numeric_limits<double>::infinity();
    for (const auto &r : rows) {
        if (!r.accepted) {
            continue;
        }
        if (r.val_r2 < last) {
            return false;
        }
        last = r.val_r2;
    }
    return true;
}

} // namespace shadowforge
