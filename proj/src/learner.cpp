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

#include "shadowforge/learner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "shadowforge/errors.hpp"
#include "shadowforge/parallel.hpp"
#include "shadowforge/rng.hpp"

namespace shadowforge {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Features

std::vector<double> featurize(const MeasurementRecord &rec, std::span<const double> params, bool use_params) {
    const int n = rec.n_qubits();
    const std::size_t m = rec.m();
    if (m < 1) {
        throw InvalidArgument("featurize: record has no snapshots");
    }
    std::vector<double> f(6 * static_cast<std::size_t>(n) + (use_params ? params.size() : 0), 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        for (int q = 0; q < n; ++q) {
            const auto slot = 6 * static_cast<std::size_t>(q) + 2 * static_cast<std::size_t>(rec.basis(j, q)) +
                              rec.outcome(j, q);
            f[slot] += 1.0;
        }
    }
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < 6 * static_cast<std::size_t>(n); ++k) {
        f[k] *= inv;
    }
    if (use_params) {
        std::copy(params.begin(), params.end(), f.begin() + 6 * n);
    }
    return f;
}

std::vector<double> featurize(const DataPoint &pt, bool use_params) {
    return featurize(pt.visible_record(), pt.params, use_params);
}

// ---------------------------------------------------------------------------
// Config

void LearnerConfig::validate() const {
    if (hidden.empty() ||
        std::any_of(hidden.begin(), hidden.end(), [](int h) { return h <= 0; })) {
        throw InvalidArgument("hidden layer sizes must be positive");
    }
    if (!(learning_rate > 0.0) || batch_size == 0 || max_epochs <= 0) {
        throw InvalidArgument("learning_rate, batch_size and max_epochs must be positive");
    }
    if (patience < 0 || engine_patience < 0 || patience > max_epochs || engine_patience > max_epochs) {
        throw InvalidArgument("patience must lie in [0, max_epochs]");
    }
    if (consistency_weight < 0.0 || !(ema_decay > 0.0 && ema_decay < 1.0)) {
        throw InvalidArgument("consistency_weight must be >= 0 and ema_decay in (0, 1)");
    }
    if (!(ridge > 0.0)) {
        throw InvalidArgument("ridge must be positive");
    }
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw InvalidArgument("holdout_fraction must lie in (0, 1)");
    }
}

std::string to_string(ModelKind k) { return k == ModelKind::mlp ? "mlp" : "kernel"; }

// ---------------------------------------------------------------------------
// Network

std::size_t mlp_weight_count(std::span<const int> layer_sizes) {
    std::size_t count = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        count += static_cast<std::size_t>(layer_sizes[l + 1]) * static_cast<std::size_t>(layer_sizes[l] + 1);
    }
    return count;
}

Eigen::MatrixXd mlp_forward(std::span<const int> layer_sizes, std::span<const double> weights,
                            const Eigen::MatrixXd &inputs) {
    Eigen::MatrixXd a = inputs;
    std::size_t offset = 0;
    const std::size_t layers = layer_sizes.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = layer_sizes[l];
        const int out = layer_sizes[l + 1];
        Eigen::Map<const RowMajorMatrix> w(weights.data() + offset, out, in);
        offset += static_cast<std::size_t>(out) * static_cast<std::size_t>(in);
        Eigen::Map<const Eigen::VectorXd> b(weights.data() + offset, out);
        offset += static_cast<std::size_t>(out);
        Eigen::MatrixXd z = w * a;
        z.colwise() += b;
        if (l + 1 < layers) {
            a = z.array().tanh().matrix();
        } else {
            a = std::move(z);
        }
    }
    return a;
}

double mlp_loss_gradient(std::span<const int> layer_sizes, std::span<const double> weights,
                         const Eigen::MatrixXd &inputs, const Eigen::MatrixXd &targets, std::span<double> grad) {
    const std::size_t layers = layer_sizes.size() - 1;
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(layers + 1);
    acts.push_back(inputs);
    std::vector<std::size_t> offsets(layers);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        offsets[l] = offset;
        const int in = layer_sizes[l];
        const int out = layer_sizes[l + 1];
        Eigen::Map<const RowMajorMatrix> w(weights.data() + offset, out, in);
        Eigen::Map<const Eigen::VectorXd> b(weights.data() + offset + static_cast<std::size_t>(out * in), out);
        offset += static_cast<std::size_t>(out) * static_cast<std::size_t>(in + 1);
        Eigen::MatrixXd z = w * acts.back();
        z.colwise() += b;
        if (l + 1 < layers) {
            acts.emplace_back(z.array().tanh().matrix());
        } else {
            acts.push_back(std::move(z));
        }
    }

    const double batch = static_cast<double>(inputs.cols());
    Eigen::MatrixXd delta = acts.back() - targets;
    const double loss = delta.squaredNorm() / batch;
    delta *= 2.0 / batch;

    for (std::size_t l = layers; l-- > 0;) {
        const int in = layer_sizes[l];
        const int out = layer_sizes[l + 1];
        Eigen::Map<RowMajorMatrix> gw(grad.data() + offsets[l], out, in);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets[l] + static_cast<std::size_t>(out * in), out);
        gw.noalias() = delta * acts[l].transpose();
        gb = delta.rowwise().sum();
        if (l > 0) {
            Eigen::Map<const RowMajorMatrix> w(weights.data() + offsets[l], out, in);
            Eigen::MatrixXd back = w.transpose() * delta;
            delta = (back.array() * (1.0 - acts[l].array().square())).matrix();
        }
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Model evaluation

namespace {

Eigen::MatrixXd normalized_inputs(const Model &model, const Eigen::MatrixXd &inputs) {
    const auto d = static_cast<Eigen::Index>(model.input_mean.size());
    if (inputs.rows() != d) {
        throw InvalidArgument("feature dimension " + std::to_string(inputs.rows()) + " does not match model (" +
                              std::to_string(d) + ")");
    }
    Eigen::Map<const Eigen::VectorXd> mean(model.input_mean.data(), d);
    Eigen::Map<const Eigen::VectorXd> scale(model.input_scale.data(), d);
    Eigen::MatrixXd xn = inputs.colwise() - mean;
    xn.array().colwise() /= scale.array();
    return xn;
}

Eigen::MatrixXd normalized_targets(const Model &model, const Eigen::MatrixXd &targets) {
    const auto out = static_cast<Eigen::Index>(model.output_mean.size());
    Eigen::Map<const Eigen::VectorXd> mean(model.output_mean.data(), out);
    Eigen::Map<const Eigen::VectorXd> scale(model.output_scale.data(), out);
    Eigen::MatrixXd yn = targets.colwise() - mean;
    yn.array().colwise() /= scale.array();
    return yn;
}

Eigen::MatrixXd denormalized_outputs(const Model &model, Eigen::MatrixXd y) {
    const auto out = static_cast<Eigen::Index>(model.output_mean.size());
    Eigen::Map<const Eigen::VectorXd> mean(model.output_mean.data(), out);
    Eigen::Map<const Eigen::VectorXd> scale(model.output_scale.data(), out);
    y.array().colwise() *= scale.array();
    y.colwise() += mean;
    return y;
}

Eigen::MatrixXd as_columns(std::span<const std::vector<double>> rows, std::size_t dim) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != dim) {
            throw InvalidArgument("inconsistent vector dimensions");
        }
        m.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(rows[i].data(), static_cast<Eigen::Index>(dim));
    }
    return m;
}

} // namespace

Eigen::MatrixXd Model::raw_output(const Eigen::MatrixXd &inputs) const {
    const Eigen::MatrixXd xn = normalized_inputs(*this, inputs);
    if (kind == ModelKind::mlp) {
        return denormalized_outputs(*this, mlp_forward(layer_sizes, weights, xn));
    }
    const Eigen::Index d = xn.rows();
    const Eigen::Index out = layer_sizes.back();
    Eigen::Map<const RowMajorMatrix> coef(weights.data(), d + 1, out);
    Eigen::MatrixXd y = coef.bottomRows(d).transpose() * xn;
    y.colwise() += coef.row(0).transpose();
    return denormalized_outputs(*this, std::move(y));
}

std::vector<double> Model::raw_output(std::span<const double> x) const {
    const Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::MatrixXd y = raw_output(in);
    return {y.data(), y.data() + y.size()};
}

double mean_squared_error(const Model &model, std::span<const Example> data) {
    if (data.empty()) {
        throw InvalidArgument("mean_squared_error: empty data");
    }
    std::vector<std::vector<double>> xs;
    std::vector<std::vector<double>> ys;
    for (const auto &e : data) {
        xs.push_back(e.x);
        ys.push_back(e.y);
    }
    const Eigen::MatrixXd out = model.raw_output(as_columns(xs, model.input_mean.size()));
    const Eigen::MatrixXd y = as_columns(ys, static_cast<std::size_t>(model.layer_sizes.back()));
    return (out - y).squaredNorm() / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Training

namespace {

enum StreamTag : std::uint64_t { kInitStream = 11, kHoldoutStream = 12, kBatchStream = 13, kUnlabeledStream = 14 };

void check_examples(std::span<const Example> data, const FeatureConfig &features) {
    for (const auto &e : data) {
        if (e.x.size() != features.input_dim() || e.y.size() != features.output_dim()) {
            throw InvalidArgument("example dimensions (" + std::to_string(e.x.size()) + ", " +
                                  std::to_string(e.y.size()) + ") do not match the feature config (" +
                                  std::to_string(features.input_dim()) + ", " +
                                  std::to_string(features.output_dim()) + ")");
        }
    }
}

template <typename Get>
void column_stats(std::span<const Example> data, std::size_t dim, Get get, std::vector<double> &mean_out,
                  std::vector<double> &scale_out) {
    mean_out.assign(dim, 0.0);
    scale_out.assign(dim, 1.0);
    const double n = static_cast<double>(data.size());
    for (std::size_t k = 0; k < dim; ++k) {
        double mean = 0.0;
        for (const auto &e : data) {
            mean += get(e)[k];
        }
        mean /= n;
        double var = 0.0;
        for (const auto &e : data) {
            var += (get(e)[k] - mean) * (get(e)[k] - mean);
        }
        const double sd = std::sqrt(var / n);
        mean_out[k] = mean;
        scale_out[k] = sd > 1e-8 ? sd : 1.0;
    }
}

void fit_normalization(Model &model, std::span<const Example> data) {
    column_stats(
        data, model.features.input_dim(), [](const Example &e) -> const auto & { return e.x; }, model.input_mean,
        model.input_scale);
    // Frequencies already share a scale; dividing by their tiny spread at high
    // snapshot counts would blow up the noise of low-count records.
    std::fill(model.input_scale.begin(), model.input_scale.end(), 1.0);
    column_stats(
        data, model.features.output_dim(), [](const Example &e) -> const auto & { return e.y; }, model.output_mean,
        model.output_scale);
}

Model init_mlp(std::span<const Example> data, const FeatureConfig &features, const LearnerConfig &cfg) {
    Model model;
    model.kind = ModelKind::mlp;
    model.features = features;
    model.seed = cfg.seed;
    model.layer_sizes.push_back(static_cast<int>(features.input_dim()));
    model.layer_sizes.insert(model.layer_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    model.layer_sizes.push_back(static_cast<int>(features.output_dim()));
    fit_normalization(model, data);

    model.weights.assign(mlp_weight_count(model.layer_sizes), 0.0);
    Rng rng = make_rng(cfg.seed, {kInitStream});
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
        const int in = model.layer_sizes[l];
        const int out = model.layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (int k = 0; k < in * out; ++k) {
            model.weights[offset++] = limit * (2.0 * uniform01(rng) - 1.0);
        }
        offset += static_cast<std::size_t>(out); // biases start at zero
    }
    return model;
}

void shuffle(std::vector<std::size_t> &v, Rng &rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[uniform_index(rng, i)]);
    }
}

struct Adam {
    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> w, std::span<const double> g, double lr) {
        constexpr double b1 = 0.9;
        constexpr double b2 = 0.999;
        constexpr double eps = 1e-8;
        ++t;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }

    std::vector<double> m;
    std::vector<double> v;
    long t = 0;
};

Eigen::MatrixXd gather(const Eigen::MatrixXd &cols, std::span<const std::size_t> idx) {
    Eigen::MatrixXd out(cols.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        out.col(static_cast<Eigen::Index>(k)) = cols.col(static_cast<Eigen::Index>(idx[k]));
    }
    return out;
}

/// Shared mini-batch loop behind train_sl, train_ssl and continue_training.
Model fit_mlp(Model model, std::span<const Example> labeled, std::span<const std::vector<double>> unlabeled,
              std::span<const std::uint8_t> holdout, const LearnerConfig &cfg, int patience, std::size_t labeled_batch,
              std::uint64_t seed) {
    const std::size_t n = labeled.size();
    if (n < 2) {
        throw InvalidArgument("MLP training needs at least 2 labeled examples");
    }
    if (holdout.size() != n) {
        throw InvalidArgument("holdout mask has " + std::to_string(holdout.size()) + " entries for " +
                              std::to_string(n) + " examples");
    }
    const std::size_t d = model.features.input_dim();
    const std::size_t out = model.features.output_dim();

    std::vector<std::vector<double>> xs;
    std::vector<std::vector<double>> ys;
    xs.reserve(n);
    ys.reserve(n);
    for (const auto &e : labeled) {
        xs.push_back(e.x);
        ys.push_back(e.y);
    }
    const Eigen::MatrixXd x_all = normalized_inputs(model, as_columns(xs, d));
    const Eigen::MatrixXd y_all = normalized_targets(model, as_columns(ys, out));

    std::vector<std::size_t> hold;
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < n; ++i) {
        (holdout[i] ? hold : train).push_back(i);
    }
    if (hold.empty() || train.empty()) {
        throw InvalidArgument("holdout mask must leave both a held-out and a training part");
    }
    const std::size_t n_hold = hold.size();
    const Eigen::MatrixXd x_hold = gather(x_all, hold);
    const Eigen::MatrixXd y_hold = gather(y_all, hold);

    const bool consistency = cfg.consistency_weight > 0.0 && !unlabeled.empty() && labeled_batch < cfg.batch_size;
    const std::size_t unlabeled_batch = consistency ? cfg.batch_size - labeled_batch : 0;
    Eigen::MatrixXd x_unl;
    std::vector<std::size_t> unl_order;
    std::size_t unl_pos = 0;
    Rng unl_rng = make_rng(seed, {kUnlabeledStream});
    if (consistency) {
        x_unl = normalized_inputs(model, as_columns(unlabeled, d));
        unl_order.resize(unlabeled.size());
        std::iota(unl_order.begin(), unl_order.end(), std::size_t{0});
        shuffle(unl_order, unl_rng);
    }

    auto holdout_loss = [&](std::span<const double> w) {
        return (mlp_forward(model.layer_sizes, w, x_hold) - y_hold).squaredNorm() / static_cast<double>(n_hold);
    };

    std::vector<double> weights = model.weights;
    std::vector<double> teacher = weights;
    std::vector<double> best = weights;
    double best_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    std::vector<double> grad(weights.size());
    std::vector<double> grad_c(weights.size());
    Adam adam(weights.size());
    Rng batch_rng = make_rng(seed, {kBatchStream});
    std::vector<std::size_t> unl_idx(unlabeled_batch);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle(train, batch_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train.size(); start += labeled_batch) {
            const std::size_t stop = std::min(train.size(), start + labeled_batch);
            const std::span<const std::size_t> idx(train.data() + start, stop - start);
            epoch_loss += mlp_loss_gradient(model.layer_sizes, weights, gather(x_all, idx), gather(y_all, idx), grad) *
                          static_cast<double>(idx.size());
            if (consistency) {
                for (auto &u : unl_idx) {
                    if (unl_pos == unl_order.size()) {
                        shuffle(unl_order, unl_rng);
                        unl_pos = 0;
                    }
                    u = unl_order[unl_pos++];
                }
                const Eigen::MatrixXd xu = gather(x_unl, unl_idx);
                const Eigen::MatrixXd target = mlp_forward(model.layer_sizes, teacher, xu);
                mlp_loss_gradient(model.layer_sizes, weights, xu, target, grad_c);
                for (std::size_t i = 0; i < grad.size(); ++i) {
                    grad[i] += cfg.consistency_weight * grad_c[i];
                }
            }
            adam.step(weights, grad, cfg.learning_rate);
            if (consistency) {
                for (std::size_t i = 0; i < weights.size(); ++i) {
                    teacher[i] = cfg.ema_decay * teacher[i] + (1.0 - cfg.ema_decay) * weights[i];
                }
            }
        }
        const double loss = holdout_loss(weights);
        if (!std::isfinite(epoch_loss) || !std::isfinite(loss)) {
            throw NumericalFailure("training loss became non-finite at epoch " + std::to_string(epoch));
        }
        if (loss < best_loss) {
            best_loss = loss;
            best = weights;
            best_epoch = epoch;
        } else if (epoch - best_epoch > patience) {
            break;
        }
    }
    model.weights = std::move(best);
    return model;
}

} // namespace

std::vector<std::uint8_t> holdout_mask(std::size_t n, double fraction, std::uint64_t seed) {
    if (n < 2) {
        throw InvalidArgument("holdout_mask needs at least 2 examples");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed, {kHoldoutStream});
    shuffle(order, rng);
    const std::size_t n_hold =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n - 1);
    std::vector<std::uint8_t> mask(n, 0);
    for (std::size_t k = 0; k < n_hold; ++k) {
        mask[order[k]] = 1;
    }
    return mask;
}

Model train_sl(std::span<const Example> data, const FeatureConfig &features, const LearnerConfig &cfg) {
    cfg.validate();
    if (data.size() < 2) {
        throw InvalidArgument("train_sl needs at least 2 examples");
    }
    check_examples(data, features);
    Model model = init_mlp(data, features, cfg);
    const auto mask = holdout_mask(data.size(), cfg.holdout_fraction, cfg.seed);
    return fit_mlp(std::move(model), data, {}, mask, cfg, cfg.patience, cfg.batch_size, cfg.seed);
}

std::size_t ssl_labeled_batch(std::size_t batch_size, std::size_t n_labeled, std::size_t n_unlabeled) {
    if (n_unlabeled == 0 || batch_size < 2) {
        return batch_size;
    }
    const double share = static_cast<double>(batch_size) * static_cast<double>(n_labeled) /
                         static_cast<double>(n_labeled + n_unlabeled);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(share)), 1, batch_size - 1);
}

Model train_ssl(std::span<const Example> labeled, std::span<const std::vector<double>> unlabeled,
                const FeatureConfig &features, const LearnerConfig &cfg) {
    cfg.validate();
    if (labeled.size() < 2) {
        throw InvalidArgument("train_ssl needs at least 2 labeled examples");
    }
    check_examples(labeled, features);
    for (const auto &x : unlabeled) {
        if (x.size() != features.input_dim()) {
            throw InvalidArgument("unlabeled feature dimension does not match the feature config");
        }
    }
    Model model = init_mlp(labeled, features, cfg);
    const std::size_t lb = ssl_labeled_batch(cfg.batch_size, labeled.size(), unlabeled.size());
    const auto mask = holdout_mask(labeled.size(), cfg.holdout_fraction, cfg.seed);
    return fit_mlp(std::move(model), labeled, unlabeled, mask, cfg, cfg.patience, lb, cfg.seed);
}

Model continue_training(const Model &start, std::span<const Example> data, const LearnerConfig &cfg, int patience,
                        std::uint64_t seed, std::span<const std::uint8_t> holdout) {
    cfg.validate();
    if (start.kind != ModelKind::mlp) {
        throw InvalidArgument("continue_training applies to MLP models");
    }
    if (data.size() < 2) {
        throw InvalidArgument("continue_training needs at least 2 examples");
    }
    check_examples(data, start.features);
    if (holdout.empty()) {
        const auto mask = holdout_mask(data.size(), cfg.holdout_fraction, seed);
        return fit_mlp(start, data, {}, mask, cfg, patience, cfg.batch_size, seed);
    }
    return fit_mlp(start, data, {}, holdout, cfg, patience, cfg.batch_size, seed);
}

Model train_kernel(std::span<const Example> data, const FeatureConfig &features, const LearnerConfig &cfg) {
    if (data.empty()) {
        throw InvalidArgument("train_kernel needs at least 1 example");
    }
    check_examples(data, features);
    Model model;
    model.kind = ModelKind::kernel;
    model.features = features;
    model.seed = cfg.seed;
    model.layer_sizes = {static_cast<int>(features.input_dim()), static_cast<int>(features.output_dim())};
    fit_normalization(model, data);

    const auto n = static_cast<Eigen::Index>(data.size());
    const auto d = static_cast<Eigen::Index>(features.input_dim());
    const auto out = static_cast<Eigen::Index>(features.output_dim());
    std::vector<std::vector<double>> xs;
    std::vector<std::vector<double>> ys;
    for (const auto &e : data) {
        xs.push_back(e.x);
        ys.push_back(e.y);
    }
    const Eigen::MatrixXd xn = normalized_inputs(model, as_columns(xs, static_cast<std::size_t>(d)));
    Eigen::MatrixXd phi(n, d + 1);
    phi.col(0).setOnes();
    phi.rightCols(d) = xn.transpose();
    const Eigen::MatrixXd y = normalized_targets(model, as_columns(ys, static_cast<std::size_t>(out))).transpose();

    const double ridge = std::max(cfg.ridge, 1e-10);
    Eigen::MatrixXd gram = phi.transpose() * phi;
    gram.diagonal().tail(d).array() += ridge;
    const RowMajorMatrix coef = gram.ldlt().solve(phi.transpose() * y);
    model.weights.assign(coef.data(), coef.data() + coef.size());
    if (!std::all_of(model.weights.begin(), model.weights.end(), [](double w) { return std::isfinite(w); })) {
        throw NumericalFailure("kernel ridge solve produced non-finite coefficients");
    }
    return model;
}

// ---------------------------------------------------------------------------
// Inference

std::vector<double> predict_features(const Model &model, std::span<const double> x) {
    auto y = model.raw_output(x);
    const double lo = model.features.task == Task::entropy ? 0.0 : -1.0;
    const double hi = model.features.task == Task::entropy ? static_cast<double>(model.features.n_qubits - 1) : 1.0;
    for (auto &v : y) {
        v = std::clamp(v, lo, hi);
    }
    return y;
}

std::vector<double> predict(const Model &model, const DataPoint &pt) {
    if (pt.record.n_qubits() != model.features.n_qubits) {
        throw InvalidArgument("data point has " + std::to_string(pt.record.n_qubits()) + " qubits, model expects " +
                              std::to_string(model.features.n_qubits));
    }
    return predict_features(model, featurize(pt, model.features.use_params));
}

std::vector<std::vector<double>> predict_all(const Model &model, std::span<const DataPoint> pts) {
    std::vector<std::vector<double>> out(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { out[i] = predict(model, pts[i]); });
    return out;
}

double r_squared(std::span<const std::vector<double>> preds, std::span<const std::vector<double>> truths) {
    if (preds.size() != truths.size() || truths.size() < 2) {
        throw InvalidArgument("r_squared needs equally many predictions and truths (at least 2)");
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (preds[i].size() != truths[i].size()) {
            throw InvalidArgument("prediction and truth vectors differ in length");
        }
        for (double t : truths[i]) {
            sum += t;
            ++count;
        }
    }
    const double mean = sum / static_cast<double>(count);
    double ss_res = 0.0;
    double ss_tot = 0.0;
    double ss_raw = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        for (std::size_t k = 0; k < truths[i].size(); ++k) {
            ss_res += (truths[i][k] - preds[i][k]) * (truths[i][k] - preds[i][k]);
            ss_tot += (truths[i][k] - mean) * (truths[i][k] - mean);
            ss_raw += truths[i][k] * truths[i][k];
        }
    }
    // Spread at rounding level (e.g. exact labels that are constant in theory).
    if (ss_tot <= 1e-20 * (1.0 + ss_raw)) {
        throw UndefinedMetric("R^2 is undefined when all truth values are identical");
    }
    return 1.0 - ss_res / ss_tot;
}

std::vector<double> per_entry_r_squared(std::span<const std::vector<double>> preds,
                                        std::span<const std::vector<double>> truths) {
    if (preds.size() != truths.size() || truths.empty()) {
        throw InvalidArgument("per_entry_r_squared: size mismatch");
    }
    const std::size_t width = truths.front().size();
    std::vector<double> out(width);
    for (std::size_t k = 0; k < width; ++k) {
        std::vector<std::vector<double>> p;
        std::vector<std::vector<double>> t;
        for (std::size_t i = 0; i < truths.size(); ++i) {
            p.push_back({preds[i].at(k)});
            t.push_back({truths[i].at(k)});
        }
        try {
            out[k] = r_squared(p, t);
        } catch (const UndefinedMetric &) {
            out[k] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    if (const std::size_t rest = bytes.size() - i; rest > 0) {
        std::uint32_t v = std::uint32_t{bytes[i]} << 16;
        if (rest == 2) {
            v |= std::uint32_t{bytes[i + 1]} << 8;
        }
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string &text) {
    auto value = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') {
            return c - 'A';
        }
        if (c >= 'a' && c <= 'z') {
            return c - 'a' + 26;
        }
        if (c >= '0' && c <= '9') {
            return c - '0' + 52;
        }
        if (c == '+') {
            return 62;
        }
        if (c == '/') {
            return 63;
        }
        return -1;
    };
    if (text.size() % 4 != 0) {
        throw InvalidArgument("base64 length is not a multiple of 4");
    }
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int v[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + static_cast<std::size_t>(k)];
            if (c == '=' && i + 4 == text.size() && k >= 2) {
                v[k] = 0;
                ++pad;
            } else if (pad > 0 || (v[k] = value(c)) < 0) {
                throw InvalidArgument("invalid base64 character");
            }
        }
        const std::uint32_t w = (static_cast<std::uint32_t>(v[0]) << 18) | (static_cast<std::uint32_t>(v[1]) << 12) |
                                (static_cast<std::uint32_t>(v[2]) << 6) | static_cast<std::uint32_t>(v[3]);
        out.push_back(static_cast<std::uint8_t>(w >> 16));
        if (pad < 2) {
            out.push_back(static_cast<std::uint8_t>(w >> 8));
        }
        if (pad < 1) {
            out.push_back(static_cast<std::uint8_t>(w));
        }
    }
    return out;
}

namespace {

void append_le(std::vector<std::uint8_t> &bytes, std::span<const double> values) {
    for (double v : values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int k = 0; k < 8; ++k) {
            bytes.push_back(static_cast<std::uint8_t>(bits & 0xff));
            bits >>= 8;
        }
    }
}

std::vector<double> read_le(std::span<const std::uint8_t> bytes, std::size_t &pos, std::size_t count) {
    if (pos + 8 * count > bytes.size()) {
        throw InvalidArgument("parameter blob is shorter than the header promises");
    }
    std::vector<double> out(count);
    for (auto &v : out) {
        std::uint64_t bits = 0;
        for (int k = 7; k >= 0; --k) {
            bits = (bits << 8) | bytes[pos + static_cast<std::size_t>(k)];
        }
        v = std::bit_cast<double>(bits);
        pos += 8;
    }
    return out;
}

} // namespace

void write_model(std::ostream &out, const Model &model) {
    nlohmann::ordered_json h;
    h["kind"] = to_string(model.kind);
    h["dims"] = model.layer_sizes;
    h["feature_config"] = {{"n_qubits", model.features.n_qubits},
                           {"use_params", model.features.use_params},
                           {"n_params", model.features.n_params},
                           {"task", to_string(model.features.task)}};
    h["seed"] = model.seed;
    h["n_weights"] = model.weights.size();
    std::vector<std::uint8_t> blob;
    append_le(blob, model.input_mean);
    append_le(blob, model.input_scale);
    append_le(blob, model.output_mean);
    append_le(blob, model.output_scale);
    append_le(blob, model.weights);
    out << h.dump() << '\n' << base64_encode(blob) << '\n';
}

Model read_model(std::istream &in, const std::string &source) {
    std::string header_line;
    std::string blob_line;
    if (!std::getline(in, header_line)) {
        throw ParseError(source, 1, "missing model header");
    }
    if (!std::getline(in, blob_line)) {
        throw ParseError(source, 2, "missing parameter blob");
    }
    Model model;
    std::size_t line = 1;
    try {
        const auto h = nlohmann::json::parse(header_line);
        const auto kind = h.at("kind").get<std::string>();
        if (kind == "mlp") {
            model.kind = ModelKind::mlp;
        } else if (kind == "kernel") {
            model.kind = ModelKind::kernel;
        } else {
            throw InvalidArgument("unknown model kind '" + kind + "'");
        }
        model.layer_sizes = h.at("dims").get<std::vector<int>>();
        const auto &fc = h.at("feature_config");
        model.features.n_qubits = fc.at("n_qubits").get<int>();
        model.features.use_params = fc.at("use_params").get<bool>();
        model.features.n_params = fc.at("n_params").get<std::size_t>();
        model.features.task = task_from_string(fc.at("task").get<std::string>());
        model.seed = h.at("seed").get<std::uint64_t>();
        const auto n_weights = h.at("n_weights").get<std::size_t>();
        if (model.layer_sizes.size() < 2 ||
            static_cast<std::size_t>(model.layer_sizes.front()) != model.features.input_dim() ||
            static_cast<std::size_t>(model.layer_sizes.back()) != model.features.output_dim()) {
            throw InvalidArgument("dims do not match the feature config");
        }
        const std::size_t expected = model.kind == ModelKind::mlp
                                         ? mlp_weight_count(model.layer_sizes)
                                         : static_cast<std::size_t>(model.layer_sizes[0] + 1) *
                                               static_cast<std::size_t>(model.layer_sizes[1]);
        if (n_weights != expected) {
            throw InvalidArgument("n_weights does not match dims");
        }
        line = 2;
        const auto bytes = base64_decode(blob_line);
        std::size_t pos = 0;
        const std::size_t d = model.features.input_dim();
        model.input_mean = read_le(bytes, pos, d);
        model.input_scale = read_le(bytes, pos, d);
        model.output_mean = read_le(bytes, pos, model.features.output_dim());
        model.output_scale = read_le(bytes, pos, model.features.output_dim());
        model.weights = read_le(bytes, pos, n_weights);
        if (pos != bytes.size()) {
            throw InvalidArgument("parameter blob has trailing bytes");
        }
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(source, line, e.what());
    } catch (const InvalidArgument &e) {
        throw ParseError(source, line, e.what());
    }
    return model;
}

void save_model(const Model &model, const std::filesystem::path &path) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw InvalidArgument("cannot write " + tmp.string());
        }
        write_model(out, model);
    }
    std::filesystem::rename(tmp, path);
}

Model load_model(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open model " + path.string());
    }
    return read_model(in, path.string());
}

} // namespace shadowforge
