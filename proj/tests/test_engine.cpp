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

#include <catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "shadowforge/engine.hpp"
#include "shadowforge/errors.hpp"

using namespace shadowforge;
using Catch::Approx;

namespace {

DatasetConfig tiny_config() {
    DatasetConfig c;
    c.n_qubits = 4;
    c.n = 60;
    c.r = 0.3;
    c.m_l = 256;
    c.m_u = 32;
    c.n_val = 20;
    c.n_test = 0;
    c.seed = 3;
    return c;
}

const HybridDataset &tiny() {
    static const HybridDataset ds = build_hybrid_dataset(tiny_config());
    return ds;
}

LearnerConfig quick() {
    LearnerConfig c;
    c.hidden = {32, 32};
    c.max_epochs = 80;
    c.patience = 30;
    c.engine_patience = 10;
    c.seed = 5;
    return c;
}

FeatureConfig features_of(const HybridDataset &ds) {
    FeatureConfig f;
    f.n_qubits = ds.config.n_qubits;
    f.use_params = true;
    f.n_params = 1;
    f.task = ds.config.task;
    return f;
}

// A kernel model fit to a constant label predicts exactly that label.
Model constant_model(const HybridDataset &ds, std::vector<double> value) {
    std::vector<Example> data;
    for (const auto &pt : ds.L) {
        data.push_back({featurize(pt, true), value});
    }
    return train_kernel(data, features_of(ds), quick());
}

std::vector<LabeledPoint> labeled_set(const HybridDataset &ds) {
    std::vector<LabeledPoint> out;
    for (const auto &pt : ds.L) {
        out.push_back({pt, *pt.labels, 0, 0.0});
    }
    return out;
}

} // namespace

TEST_CASE("consistency config validation", "[engine]") {
    ConsistencyConfig cc;
    CHECK_NOTHROW(cc.validate());
    cc.s = 1;
    CHECK_THROWS_AS(cc.validate(), InvalidArgument);
    cc = {};
    cc.subset_fraction = 0.0;
    CHECK_THROWS_AS(cc.validate(), InvalidArgument);
    cc = {};
    cc.admitted_fraction = 1.5;
    CHECK_THROWS_AS(cc.validate(), InvalidArgument);
    cc = {};
    cc.tighten = 1.0;
    CHECK_THROWS_AS(cc.validate(), InvalidArgument);
    CHECK(paradigm_from_string(to_string(Paradigm::kernel)) == Paradigm::kernel);
    CHECK(selection_from_string(to_string(Selection::threshold)) == Selection::threshold);
    CHECK_THROWS_AS(paradigm_from_string("transformer"), InvalidArgument);
}

TEST_CASE("consistency variance", "[engine]") {
    const auto &ds = tiny();
    const auto flat = constant_model(ds, {0.5, 1.0, 0.5});
    ConsistencyConfig cc;
    Rng rng = make_rng(1);
    for (const auto &pt : ds.U) {
        const auto r = consistency_variance(flat, pt, cc, rng);
        CHECK(r.variance == 0.0);
        CHECK(r.mean == std::vector<double>{0.5, 1.0, 0.5});
    }

    const auto model = train_sl([&] {
        std::vector<Example> d;
        for (const auto &pt : ds.L) {
            d.push_back({featurize(pt, true), *pt.labels});
        }
        return d;
    }(), features_of(ds), quick());
    ConsistencyConfig same;
    same.s = 2;
    same.subset_fraction = 1.0;
    CHECK(consistency_variance(model, ds.U[0], same, rng).variance == 0.0);
    const auto noisy = consistency_variance(model, ds.U[0], cc, rng);
    CHECK(noisy.variance > 0.0);

    // Brute-force the variance from the same index draws.
    Rng a = make_rng(9);
    Rng b = make_rng(9);
    const auto got = consistency_variance(model, ds.U[1], cc, a);
    CHECK(got.variance == consistency_variance(model, ds.U[1], cc, b).variance);
    CHECK(got.mean.size() == 3);

    ConsistencyConfig many;
    many.s = 64;
    CHECK_THROWS_AS(consistency_variance(model, ds.U[0], many, rng), InvalidArgument);
}

TEST_CASE("admission rule", "[engine]") {
    const auto &ds = tiny();
    const auto flat = constant_model(ds, {0.2, 0.4, 0.6});
    std::vector<DataPoint> cands;
    std::vector<double> vars;
    for (int k = 0; k < 100; ++k) {
        DataPoint pt = ds.U[static_cast<std::size_t>(k) % ds.U.size()];
        pt.id = static_cast<std::uint64_t>(1000 + k);
        cands.push_back(pt);
        vars.push_back(static_cast<double>((k * 37) % 100));
    }
    const auto ten = admit(flat, cands, vars, Selection::quantile, 0.10, 0.0, 1);
    REQUIRE(ten.size() == 10);
    for (const auto &lp : ten) {
        CHECK(lp.variance < 10.0);
        CHECK(lp.admitted_at == 1);
        CHECK(lp.label == std::vector<double>{0.2, 0.4, 0.6});
    }
    CHECK(admit(flat, cands, vars, Selection::quantile, 1.0, 0.0, 1).size() == 100);
    CHECK(admit(flat, cands, vars, Selection::threshold, 0.1, 4.5, 1).size() == 5);

    const std::vector<double> tie{1.0, 1.0};
    std::vector<DataPoint> two{cands[1], cands[0]};
    const auto first = admit(flat, two, tie, Selection::quantile, 0.5, 0.0, 2);
    REQUIRE(first.size() == 1);
    CHECK(first[0].point.id == 1000);

    ConsistencyConfig all;
    all.admitted_fraction = 1.0;
    const auto everyone = select_high_quality(flat, ds.U, all, 4);
    CHECK(everyone.size() == ds.U.size());
}

TEST_CASE("constant model cannot beat the mean predictor", "[engine]") {
    const auto &ds = tiny();
    // R^2 pools all label entries, so the reference predictor is their grand mean.
    double grand = 0.0;
    for (const auto &pt : ds.val) {
        for (double v : *pt.labels) {
            grand += v / static_cast<double>(3 * ds.val.size());
        }
    }
    const std::vector<double> mean(3, grand);
    CHECK(validate(constant_model(ds, mean), ds.val) <= 1e-12);
    CHECK(validate(constant_model(ds, {0.0, 0.0, 0.0}), ds.val) < 0.0);
}

TEST_CASE("retraining descends", "[engine]") {
    const auto &ds = tiny();
    const auto s_h = labeled_set(ds);
    auto cfg = quick();
    const auto examples = to_examples(s_h, true);
    const auto start = train_sl(examples, features_of(ds), cfg);
    cfg.engine_patience = 0;
    const auto next = retrain(start, s_h, cfg, 11);
    CHECK(mean_squared_error(next, examples) <= mean_squared_error(start, examples));
    CHECK_THROWS_AS(retrain(start, std::span(s_h).first(1), cfg, 1), InvalidArgument);
}

TEST_CASE("empty pool and exhausted retries", "[engine]") {
    const auto &ds = tiny();
    const auto cfg = quick();
    EngineState st;
    st.s_h = labeled_set(ds);
    st.model = train_sl(to_examples(st.s_h, true), features_of(ds), cfg);
    st.val_history = {validate(st.model, ds.val)};

    const auto noop = engine_iteration(st, {}, ds.val, ConsistencyConfig{}, cfg);
    CHECK(noop.t == 1);
    CHECK(noop.model == st.model);
    CHECK(noop.s_h.size() == st.s_h.size());
    CHECK(noop.val_history == st.val_history);
    CHECK_FALSE(noop.converged);

    // No model reaches R^2 = 2, so every retry is rejected.
    auto blocked = st;
    blocked.val_history = {2.0};
    const auto done = engine_iteration(blocked, ds.U, ds.val, ConsistencyConfig{}, cfg);
    REQUIRE(done.report.size() == 1);
    CHECK_FALSE(done.report[0].accepted);
    CHECK(done.report[0].retries == 3);
    CHECK(done.report[0].admitted_fraction == Approx(0.10 * 0.125));
    CHECK(done.converged);
    CHECK(done.model == st.model);
    CHECK(done.s_h.size() == st.s_h.size());
}

TEST_CASE("full engine run", "[engine]") {
    const auto &ds = tiny();
    ConsistencyConfig cc;
    cc.seed = 2;
    const auto cfg = quick();

    const auto zero = run_engine(ds, 0, cc, cfg, Paradigm::sl);
    CHECK(zero.state.model == zero.baseline);
    REQUIRE(zero.state.report.size() == 1);
    CHECK(zero.state.report[0].t == 0);

    const auto res = run_engine(ds, 3, cc, cfg, Paradigm::sl);
    const auto &rows = res.state.report;
    REQUIRE(rows.size() >= 2);
    CHECK(rows.size() <= 4);
    CHECK(gate_monotone(rows));
    for (std::size_t i = 1; i < res.state.val_history.size(); ++i) {
        CHECK(res.state.val_history[i] >= res.state.val_history[i - 1]);
    }

    std::set<std::uint64_t> ids;
    std::set<std::uint64_t> pool;
    for (const auto &pt : ds.L) {
        pool.insert(pt.id);
    }
    for (const auto &pt : ds.U) {
        pool.insert(pt.id);
    }
    for (const auto &lp : res.state.s_h) {
        CHECK(ids.insert(lp.point.id).second);
        CHECK(pool.count(lp.point.id) == 1);
    }
    for (std::size_t i = 0; i < ds.L.size(); ++i) {
        CHECK(res.state.s_h[i].point.id == ds.L[i].id);
        CHECK(res.state.s_h[i].label == *ds.L[i].labels);
    }

    const auto again = run_engine(ds, 3, cc, cfg, Paradigm::sl);
    CHECK(again.state.report == rows);
    CHECK(again.state.model == res.state.model);

    for (auto paradigm : {Paradigm::ssl, Paradigm::kernel}) {
        const auto other = run_engine(ds, 2, cc, cfg, paradigm);
        CHECK(gate_monotone(other.state.report));
        CHECK(other.state.report[0].t == 0);
    }
}

TEST_CASE("report persistence and gate check", "[engine]") {
    std::vector<ReportRow> rows(3);
    rows[0] = {0, true, 0, 0, 0.0, 0.5, 0.1, 0.0};
    rows[1] = {1, false, 3, 4, 0.0125, 0.4, 0.1, 1.5};
    rows[2] = {2, true, 1, 6, 0.05, 0.55, 0.09, 2.25};
    std::ostringstream os;
    write_report(os, rows);
    std::istringstream is(os.str());
    CHECK(read_report(is) == rows);
    CHECK(gate_monotone(rows));
    rows[2].val_r2 = 0.45;
    CHECK_FALSE(gate_monotone(rows));
    std::istringstream bad("[{\"t\": 0}");
    CHECK_THROWS_AS(read_report(bad), ParseError);
}
