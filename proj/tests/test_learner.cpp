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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shadowforge/errors.hpp"
#include "shadowforge/learner.hpp"

using namespace shadowforge;
using Catch::Approx;

namespace {

FeatureConfig three_qubits() {
    FeatureConfig f;
    f.n_qubits = 3;
    f.use_params = false;
    f.n_params = 0;
    f.task = Task::corr_z;
    return f;
}

LearnerConfig quick(std::uint64_t seed = 1) {
    LearnerConfig c;
    c.hidden = {32, 32};
    c.max_epochs = 60;
    c.patience = 20;
    c.seed = seed;
    return c;
}

// y = W x + b with a fixed random W, x uniform in [0, 1]^18.
std::vector<Example> linear_task(std::size_t count, std::uint64_t seed) {
    Rng wr = make_rng(999);
    std::vector<double> w(2 * 18);
    for (auto &v : w) {
        v = 0.1 * normal01(wr);
    }
    Rng rng = make_rng(seed);
    std::vector<Example> out;
    for (std::size_t i = 0; i < count; ++i) {
        Example e;
        e.x.resize(18);
        for (auto &v : e.x) {
            v = uniform01(rng);
        }
        e.y = {0.1, -0.2};
        for (int k = 0; k < 2; ++k) {
            for (int j = 0; j < 18; ++j) {
                e.y[static_cast<std::size_t>(k)] += w[static_cast<std::size_t>(k * 18 + j)] * e.x[static_cast<std::size_t>(j)];
            }
        }
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace

TEST_CASE("featurize frequency blocks", "[learner]") {
    MeasurementRecord one(2);
    const std::vector<Axis> zx{Axis::z, Axis::x};
    const std::vector<std::uint8_t> o{0, 1};
    one.add_snapshot(zx, o);
    const auto f = featurize(one, {}, false);
    REQUIRE(f.size() == 12);
    CHECK(std::vector<double>(f.begin(), f.begin() + 6) == std::vector<double>{0, 0, 0, 0, 1, 0});
    CHECK(std::vector<double>(f.begin() + 6, f.end()) == std::vector<double>{0, 1, 0, 0, 0, 0});

    MeasurementRecord many(2);
    for (int k = 0; k < 7; ++k) {
        many.add_snapshot(zx, o);
    }
    CHECK(featurize(many, {}, false) == f);

    const std::vector<double> p{0.7};
    const auto with_p = featurize(one, p, true);
    REQUIRE(with_p.size() == 13);
    CHECK(with_p.back() == 0.7);

    Rng rng = make_rng(2);
    const auto zero = QuantumState::basis_state(3, 0);
    const auto big = featurize(sample_measurements(zero, 10000, rng), {}, false);
    const std::vector<double> want{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 3, 0.0};
    for (int q = 0; q < 3; ++q) {
        double sum = 0;
        for (int k = 0; k < 6; ++k) {
            const double v = big[static_cast<std::size_t>(6 * q + k)];
            CHECK(v == Approx(want[static_cast<std::size_t>(k)]).margin(0.02));
            sum += v;
        }
        CHECK(sum == Approx(1.0).margin(1e-9));
    }
    CHECK_THROWS_AS(featurize(MeasurementRecord(2), {}, false), InvalidArgument);
}

TEST_CASE("config validation", "[learner]") {
    LearnerConfig c;
    CHECK_NOTHROW(c.validate());
    c.patience = c.max_epochs + 1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = LearnerConfig{};
    c.hidden = {0};
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = LearnerConfig{};
    c.learning_rate = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("analytic gradients match finite differences", "[learner]") {
    const std::vector<int> sizes{5, 7, 6, 3};
    const std::size_t nw = mlp_weight_count(sizes);
    CHECK(nw == 5 * 7 + 7 + 7 * 6 + 6 + 6 * 3 + 3);
    Rng rng = make_rng(17);
    Eigen::MatrixXd x(5, 9);
    Eigen::MatrixXd y(3, 9);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = normal01(rng);
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y.data()[i] = normal01(rng);
    }
    const double h = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> w(nw);
        for (auto &v : w) {
            v = 0.5 * normal01(rng);
        }
        std::vector<double> grad(nw);
        const double loss = mlp_loss_gradient(sizes, w, x, y, grad);
        CHECK(loss == Approx((mlp_forward(sizes, w, x) - y).squaredNorm() / 9).epsilon(1e-12));
        double diff = 0;
        double norm = 0;
        std::vector<double> scratch(nw);
        for (std::size_t i = 0; i < nw; ++i) {
            auto wp = w;
            auto wm = w;
            wp[i] += h;
            wm[i] -= h;
            const double numeric =
                (mlp_loss_gradient(sizes, wp, x, y, scratch) - mlp_loss_gradient(sizes, wm, x, y, scratch)) / (2 * h);
            diff += (numeric - grad[i]) * (numeric - grad[i]);
            norm += grad[i] * grad[i];
        }
        CHECK(std::sqrt(diff / norm) < 1e-4);
    }
}

TEST_CASE("memorizes a single example", "[learner]") {
    Example e;
    e.x.assign(18, 0.0);
    e.x[3] = 0.4;
    e.x[10] = 0.9;
    e.y = {0.25, -0.5};
    const std::vector<Example> data(200, e);
    const auto model = train_sl(data, three_qubits(), quick());
    CHECK(mean_squared_error(model, data) < 1e-4);
    const auto p = predict_features(model, e.x);
    CHECK(p[0] == Approx(0.25).margin(1e-3));
    CHECK(p[1] == Approx(-0.5).margin(1e-3));
}

TEST_CASE("fits a linear target", "[learner]") {
    const auto train = linear_task(500, 1);
    const auto held = linear_task(200, 2);
    auto cfg = quick(3);
    cfg.max_epochs = 300;
    cfg.patience = 100;
    const auto model = train_sl(train, three_qubits(), cfg);
    CHECK(mean_squared_error(model, held) < 1e-3);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto p = predict_features(model, held[i].x);
        CHECK(p[0] == Approx(held[i].y[0]).margin(1e-2 + 0.05));
        CHECK(p[1] == Approx(held[i].y[1]).margin(1e-2 + 0.05));
    }
}

TEST_CASE("training is deterministic", "[learner]") {
    const auto data = linear_task(100, 5);
    const auto a = train_sl(data, three_qubits(), quick(9));
    const auto b = train_sl(data, three_qubits(), quick(9));
    CHECK(a == b);
    const auto c = train_sl(data, three_qubits(), quick(10));
    CHECK_FALSE(a == c);
}

TEST_CASE("semi-supervised reductions", "[learner]") {
    const auto labeled = linear_task(60, 6);
    std::vector<std::vector<double>> unlabeled;
    for (const auto &e : linear_task(140, 7)) {
        unlabeled.push_back(e.x);
    }
    auto cfg = quick(4);

    CHECK(train_ssl(labeled, {}, three_qubits(), cfg) == train_sl(labeled, three_qubits(), cfg));

    cfg.consistency_weight = 0.0;
    const std::size_t lb = ssl_labeled_batch(cfg.batch_size, labeled.size(), unlabeled.size());
    CHECK(lb == 19);
    auto sl_cfg = cfg;
    sl_cfg.batch_size = lb;
    CHECK(train_ssl(labeled, unlabeled, three_qubits(), cfg) == train_sl(labeled, three_qubits(), sl_cfg));

    cfg.consistency_weight = 1.0;
    const auto ssl = train_ssl(labeled, unlabeled, three_qubits(), cfg);
    CHECK_FALSE(ssl == train_sl(labeled, three_qubits(), sl_cfg));
    CHECK(std::isfinite(mean_squared_error(ssl, labeled)));
}

TEST_CASE("continued training does not lose ground", "[learner]") {
    const auto data = linear_task(120, 8);
    auto cfg = quick(2);
    cfg.max_epochs = 20;
    cfg.engine_patience = 10;
    const auto start = train_sl(data, three_qubits(), cfg);
    const auto mask = holdout_mask(data.size(), cfg.holdout_fraction, cfg.seed);
    const auto more = continue_training(start, data, cfg, 10, 77, mask);
    CHECK(mean_squared_error(more, data) < mean_squared_error(start, data));
    CHECK(more.input_mean == start.input_mean);
    CHECK(more.output_scale == start.output_scale);

    const auto again = holdout_mask(100, 0.1, 5);
    CHECK(std::count(again.begin(), again.end(), 1) == 10);
    CHECK(again == holdout_mask(100, 0.1, 5));
    const auto tiny = holdout_mask(2, 0.01, 5);
    CHECK(std::count(tiny.begin(), tiny.end(), 1) == 1);
}

TEST_CASE("non-finite loss is reported", "[learner]") {
    auto data = linear_task(20, 9);
    data[4].x[2] = std::numeric_limits<double>::quiet_NaN();
    try {
        (void)train_sl(data, three_qubits(), quick());
        FAIL("expected a numerical failure");
    } catch (const NumericalFailure &e) {
        CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
    }
}

TEST_CASE("kernel ridge regression", "[learner]") {
    auto cfg = quick();
    const auto one = linear_task(1, 10);
    const auto single = train_kernel(one, three_qubits(), cfg);
    CHECK(predict_features(single, one[0].x)[0] == Approx(one[0].y[0]).margin(1e-6));
    CHECK(single.kind == ModelKind::kernel);

    cfg.ridge = 1e-10;
    const auto model = train_kernel(linear_task(300, 11), three_qubits(), cfg);
    CHECK(mean_squared_error(model, linear_task(100, 12)) < 1e-8);

    auto dup = linear_task(5, 13);
    const auto copy = dup;
    dup.insert(dup.end(), copy.begin(), copy.end());
    const auto d = train_kernel(dup, three_qubits(), quick());
    CHECK(mean_squared_error(d, dup) < 1e-6);
    CHECK_THROWS_AS(train_kernel({}, three_qubits(), cfg), InvalidArgument);
}

TEST_CASE("prediction clamps and checks dimensions", "[learner]") {
    Rng rng = make_rng(3);
    const auto zero = QuantumState::basis_state(3, 0);
    std::vector<Example> data;
    std::vector<DataPoint> pts;
    for (int k = 0; k < 30; ++k) {
        DataPoint pt;
        pt.id = static_cast<std::uint64_t>(k);
        pt.record = sample_measurements(zero, 32, rng);
        pt.visible_m = 32;
        pts.push_back(pt);
        data.push_back({featurize(pt, false), {5.0, 5.0}});
    }
    auto f = three_qubits();
    const auto corr = train_kernel(data, f, quick());
    for (double v : predict(corr, pts[0])) {
        CHECK(v == 1.0);
    }
    f.task = Task::entropy;
    const auto ent = train_kernel(data, f, quick());
    CHECK(predict(ent, pts[1]) == std::vector<double>{2.0, 2.0});
    CHECK(predict(ent, pts[1]) == predict(ent, pts[1]));

    for (auto &e : data) {
        e.y = {0.3, 1.2};
    }
    auto long_run = quick();
    long_run.max_epochs = 300;
    long_run.patience = 100;
    const auto constant = train_sl(data, f, long_run);
    const auto p = predict(constant, pts[2]);
    CHECK(p[0] == Approx(0.3).margin(1e-3));
    CHECK(p[1] == Approx(1.2).margin(1e-3));
    const auto all = predict_all(constant, pts);
    REQUIRE(all.size() == pts.size());
    CHECK(all[2] == p);

    DataPoint wide;
    wide.record = sample_measurements(QuantumState::basis_state(4, 0), 8, rng);
    wide.visible_m = 8;
    CHECK_THROWS_AS(predict(constant, wide), InvalidArgument);
    CHECK_THROWS_AS(predict_features(constant, std::vector<double>(5)), InvalidArgument);
}

TEST_CASE("coefficient of determination", "[learner]") {
    using V = std::vector<std::vector<double>>;
    const V truths{{1.0}, {2.0}, {3.0}};
    CHECK(r_squared(truths, truths) == 1.0);
    CHECK(r_squared(V{{2.0}, {2.0}, {2.0}}, truths) == Approx(0.0).margin(1e-12));
    CHECK(r_squared(V{{1.0}, {2.0}, {2.0}}, truths) == Approx(0.5).margin(1e-12));
    CHECK_THROWS_AS(r_squared(V{{1.0}, {1.0}}, V{{4.0}, {4.0}}), UndefinedMetric);
    CHECK_THROWS_AS(r_squared(V{{1.0}, {1.0}}, V{{1.0}, {1.0 + 1e-15}}), UndefinedMetric);
    CHECK_THROWS_AS(r_squared(V{{1.0}}, V{{1.0}}), InvalidArgument);

    // Flattened mean over all entries.
    const V t2{{0.0, 2.0}, {2.0, 4.0}};
    const V p2{{0.0, 3.0}, {2.0, 4.0}};
    CHECK(r_squared(p2, t2) == Approx(1.0 - 1.0 / 8.0).epsilon(1e-12));

    const V p3{{1.5, 0.1}, {2.0, 3.0}, {-1.0, 0.4}, {0.2, 0.2}};
    const V t3{{1.0, 0.0}, {2.5, 2.0}, {-0.5, 0.3}, {0.0, 1.0}};
    const double base = r_squared(p3, t3);
    const V pp{p3[2], p3[0], p3[3], p3[1]};
    const V tp{t3[2], t3[0], t3[3], t3[1]};
    CHECK(r_squared(pp, tp) == Approx(base).epsilon(1e-12));

    const auto per = per_entry_r_squared(V{{1.0, 5.0}, {2.0, 5.0}}, V{{1.0, 5.0}, {2.0, 5.0}});
    CHECK(per[0] == 1.0);
    CHECK(std::isnan(per[1]));
}

TEST_CASE("model persistence", "[learner]") {
    const std::string raw = "foobar";
    const std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
    CHECK(base64_encode(bytes) == "Zm9vYmFy");
    CHECK(base64_encode(std::span(bytes).first(4)) == "Zm9vYg==");
    CHECK(base64_decode("Zm9vYg==") == std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 4));
    CHECK_THROWS_AS(base64_decode("Zm9"), InvalidArgument);

    const auto data = linear_task(50, 14);
    for (const auto &model : {train_sl(data, three_qubits(), quick()), train_kernel(data, three_qubits(), quick())}) {
        std::ostringstream os;
        write_model(os, model);
        std::istringstream is(os.str());
        const auto back = read_model(is);
        CHECK(back == model);
        std::ostringstream again;
        write_model(again, back);
        CHECK(again.str() == os.str());
    }

    std::istringstream empty("");
    CHECK_THROWS_AS(read_model(empty), ParseError);
    std::istringstream header_only("{\"kind\":\"mlp\"}\n");
    try {
        (void)read_model(header_only, "m");
        FAIL("expected a parse error");
    } catch (const ParseError &e) {
        CHECK(e.line() == 2);
    }

    const auto path = std::filesystem::temp_directory_path() / "shadowforge_test.model";
    const auto model = train_sl(data, three_qubits(), quick());
    save_model(model, path);
    CHECK(load_model(path) == model);
    std::filesystem::remove(path);
}
