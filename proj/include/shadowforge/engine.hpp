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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "shadowforge/dataset.hpp"
#include "shadowforge/learner.hpp"

namespace shadowforge {

/// How candidates are admitted: the lowest-variance fraction, or every
/// candidate whose variance is at most `tau`.
enum class Selection : std::uint8_t { quantile, threshold };

std::string to_string(Selection s);
Selection selection_from_string(const std::string &name);

struct ConsistencyConfig {
    int s = 5;
    double subset_fraction = 0.25;
    double admitted_fraction = 0.10;
    int max_retries = 3;
    double tighten = 0.5;
    Selection selection = Selection::quantile;
    double tau = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class Paradigm : std::uint8_t { sl, ssl, kernel };

std::string to_string(Paradigm p);
Paradigm paradigm_from_string(const std::string &name);

struct ConsistencyResult {
    double variance = 0.0;
    std::vector<double> mean;
};

/// Spread of the model's predictions over `cc.s` random snapshot subsets of
/// the point's visible record.
ConsistencyResult consistency_variance(const Model &model, const DataPoint &pt, const ConsistencyConfig &cc, Rng &rng);

/// A point of the high-quality set together with the label it is trained
/// on. `admitted_at` is 0 for the original labeled points.
struct LabeledPoint {
    DataPoint point;
    std::vector<double> label;
    int admitted_at = 0;
    double variance = 0.0;
};

/// Consistency variance of every candidate, each from its own generator
/// derived from `seed` and the candidate id.
std::vector<double> candidate_variances(const Model &model, std::span<const DataPoint> candidates,
                                        const ConsistencyConfig &cc, std::uint64_t seed);

/// Candidates admitted under the given fraction (quantile mode) or tau
/// (threshold mode), lowest variance first, ties by ascending id. Labels are
/// the model's predictions on the full visible records.
std::vector<LabeledPoint> admit(const Model &model, std::span<const DataPoint> candidates,
                                std::span<const double> variances, Selection selection, double admitted_fraction,
                                double tau, int iteration);

std::vector<LabeledPoint> select_high_quality(const Model &model, std::span<const DataPoint> candidates,
                                              const ConsistencyConfig &cc, std::uint64_t seed);

std::vector<Example> to_examples(std::span<const LabeledPoint> points, bool use_params);

/// Warm-started MLP training (or a kernel refit) on the whole set.
Model retrain(const Model &model, std::span<const LabeledPoint> s_h, const LearnerConfig &cfg, std::uint64_t seed);

/// R^2 of predictions from the visible records against the stored labels.
double validate(const Model &model, std::span<const DataPoint> val);

struct ReportRow {
    int t = 0;
    bool accepted = true;
    int retries = 0;
    std::size_t admitted_count = 0;
    double admitted_fraction = 0.0;
    double val_r2 = 0.0;
    double train_loss = 0.0;
    double wallclock_s = 0.0;

    bool operator==(const ReportRow &) const = default;
};

struct EngineState {
    int t = 0;
    std::vector<LabeledPoint> s_h;
    Model model;
    /// Validation R^2 of the baseline and of every accepted iteration.
    std::vector<double> val_history;
    double admitted_fraction = 0.10;
    double tau = 0.0;
    bool converged = false;
    std::vector<ReportRow> report;
};

/// One select / retrain / validate round with gate retries. `pool` holds the
/// remaining low-quality candidates.
EngineState engine_iteration(EngineState state, std::span<const DataPoint> pool, std::span<const DataPoint> val,
                             const ConsistencyConfig &cc, const LearnerConfig &lc);

struct EngineResult {
    Model baseline;
    EngineState state;
};

/// Trains the baseline on S_L (plus S_U as unlabeled input for ssl) and runs
/// up to T engine iterations. Never touches the test split.
EngineResult run_engine(const HybridDataset &ds, int T, const ConsistencyConfig &cc, const LearnerConfig &lc,
                        Paradigm paradigm, bool record_wallclock = false);

void write_report(std::ostream &out, std::span<const ReportRow> rows);
std::vector<ReportRow> read_report(std::istream &in, const std::string &source = "<stream>");

/// True when the accepted rows' validation R^2 never decreases.
bool gate_monotone(std::span<const ReportRow> rows);

} // namespace shadowforge
