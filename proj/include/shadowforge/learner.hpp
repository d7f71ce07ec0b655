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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shadowforge/dataset.hpp"

namespace shadowforge {

/// Per-qubit frequencies of the six (basis, outcome) pairs in the order
/// X0 X1 Y0 Y1 Z0 Z1, followed by the physical parameters when requested.
std::vector<double> featurize(const MeasurementRecord &rec, std::span<const double> params, bool use_params);
/// Features of the point's visible record.
std::vector<double> featurize(const DataPoint &pt, bool use_params);

struct LearnerConfig {
    std::vector<int> hidden{128, 128};
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    int max_epochs = 300;
    int patience = 100;       ///< initial training
    int engine_patience = 30; ///< retraining inside the engine
    double consistency_weight = 1.0;
    double ema_decay = 0.99;
    double ridge = 1e-6;
    double holdout_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// A labeled training example in feature space.
struct Example {
    std::vector<double> x;
    std::vector<double> y;
};

enum class ModelKind : std::uint8_t { mlp, kernel };

std::string to_string(ModelKind k);

struct FeatureConfig {
    int n_qubits = 0;
    bool use_params = true;
    std::size_t n_params = 0;
    Task task = Task::entropy;

    [[nodiscard]] std::size_t input_dim() const {
        return 6 * static_cast<std::size_t>(n_qubits) + (use_params ? n_params : 0);
    }
    [[nodiscard]] std::size_t output_dim() const { return static_cast<std::size_t>(n_qubits - 1); }
    bool operator==(const FeatureConfig &) const = default;
};

/// A trained regressor. Inputs are centered (input_scale is kept for the
/// file format and is all ones for trained models) and targets z-scored;
/// `weights` act in that normalized space. For an MLP `layer_sizes` is {D, h_1, ..., out} and
/// `weights` holds (W, b) per layer, W row-major out x in. For the kernel
/// model `layer_sizes` is {D, out} and `weights` is the (D+1) x out
/// coefficient matrix, row 0 being the bias.
struct Model {
    ModelKind kind = ModelKind::mlp;
    FeatureConfig features;
    std::vector<int> layer_sizes;
    std::vector<double> input_mean;
    std::vector<double> input_scale;
    std::vector<double> output_mean;
    std::vector<double> output_scale;
    std::vector<double> weights;
    std::uint64_t seed = 0;

    /// Network output before task clamping.
    [[nodiscard]] std::vector<double> raw_output(std::span<const double> x) const;
    /// Column-wise raw outputs for a D x B matrix of unnormalized inputs.
    [[nodiscard]] Eigen::MatrixXd raw_output(const Eigen::MatrixXd &inputs) const;

    bool operator==(const Model &) const = default;
};

// -- network primitives (exposed for gradient checking) ----------------------

std::size_t mlp_weight_count(std::span<const int> layer_sizes);

/// Forward pass with tanh hidden units and a linear output layer.
Eigen::MatrixXd mlp_forward(std::span<const int> layer_sizes, std::span<const double> weights,
                            const Eigen::MatrixXd &inputs);

/// Mean over columns of ||f(x) - y||^2 and its gradient with respect to the
/// flat weight vector (grad is overwritten). Inputs and targets are taken
/// as given, no normalization is applied.
double mlp_loss_gradient(std::span<const int> layer_sizes, std::span<const double> weights,
                         const Eigen::MatrixXd &inputs, const Eigen::MatrixXd &targets, std::span<double> grad);

// -- training ----------------------------------------------------------------

/// Mean squared error summed over outputs, on raw (unclamped) outputs.
double mean_squared_error(const Model &model, std::span<const Example> data);

/// MLP fitted by mini-batch Adam with early stopping on the held-out slice
/// holdout_mask(n, holdout_fraction, seed); returns the parameters of the
/// epoch (1 or later) with the best held-out loss.
Model train_sl(std::span<const Example> data, const FeatureConfig &features, const LearnerConfig &cfg);

/// Mean-teacher training: supervised MSE plus consistency_weight times the
/// MSE between student and EMA-teacher outputs on unlabeled inputs. Each step
/// takes labeled and unlabeled examples in the dataset proportion.
Model train_ssl(std::span<const Example> labeled, std::span<const std::vector<double>> unlabeled,
                const FeatureConfig &features, const LearnerConfig &cfg);

/// Labeled share of a 64-example step for the given set sizes.
std::size_t ssl_labeled_batch(std::size_t batch_size, std::size_t n_labeled, std::size_t n_unlabeled);

/// Early-stopping split used by the trainers: round(fraction * n) entries
/// (at least one, at most n - 1) set to 1 by a seeded permutation.
std::vector<std::uint8_t> holdout_mask(std::size_t n, double fraction, std::uint64_t seed);

/// Warm-started continuation of MLP training on new data with the given
/// early-stopping patience. Normalization is kept from `start`. An empty
/// `holdout` draws a fresh mask from `seed`.
Model continue_training(const Model &start, std::span<const Example> data, const LearnerConfig &cfg, int patience,
                        std::uint64_t seed, std::span<const std::uint8_t> holdout = {});

/// Ridge least squares on [1, normalized features]; bias unpenalized.
Model train_kernel(std::span<const Example> data, const FeatureConfig &features, const LearnerConfig &cfg);

// -- inference & metrics -----------------------------------------------------

/// Task-clamped prediction: entropy into [0, N-1], correlations into [-1, 1].
std::vector<double> predict(const Model &model, const DataPoint &pt);
std::vector<double> predict_features(const Model &model, std::span<const double> x);
std::vector<std::vector<double>> predict_all(const Model &model, std::span<const DataPoint> pts);

/// 1 - SS_res / SS_tot with the mean over all entries of all truth vectors.
double r_squared(std::span<const std::vector<double>> preds, std::span<const std::vector<double>> truths);

/// R^2 restricted to one output entry (one subsystem prefix / site).
std::vector<double> per_entry_r_squared(std::span<const std::vector<double>> preds,
                                        std::span<const std::vector<double>> truths);

// -- persistence -------------------------------------------------------------

void write_model(std::ostream &out, const Model &model);
Model read_model(std::istream &in, const std::string &source = "<stream>");
void save_model(const Model &model, const std::filesystem::path &path);
Model load_model(const std::filesystem::path &path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string &text);

} // namespace shadowforge
