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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shadowforge/quantum.hpp"
#include "shadowforge/rng.hpp"

namespace shadowforge {

/// Randomized single-qubit Pauli measurements: m snapshots, each a basis
/// choice and an outcome bit per qubit. Stored snapshot-major.
class MeasurementRecord {
  public:
    MeasurementRecord() = default;
    explicit MeasurementRecord(int n_qubits) : n_qubits_(n_qubits) {}

    [[nodiscard]] int n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] std::size_t m() const noexcept { return n_qubits_ ? bases_.size() / static_cast<std::size_t>(n_qubits_) : 0; }

    [[nodiscard]] Axis basis(std::size_t snapshot, int q) const noexcept {
        return static_cast<Axis>(bases_[snapshot * static_cast<std::size_t>(n_qubits_) + static_cast<std::size_t>(q)]);
    }
    [[nodiscard]] std::uint8_t outcome(std::size_t snapshot, int q) const noexcept {
        return outcomes_[snapshot * static_cast<std::size_t>(n_qubits_) + static_cast<std::size_t>(q)];
    }

    /// Appends one snapshot; both spans must have length n_qubits.
    void add_snapshot(std::span<const Axis> bases, std::span<const std::uint8_t> outcomes);

    /// Copy keeping only the listed snapshots, in the given order.
    [[nodiscard]] MeasurementRecord select(std::span<const std::size_t> snapshots) const;
    /// Copy keeping the first k snapshots.
    [[nodiscard]] MeasurementRecord head(std::size_t k) const;

    bool operator==(const MeasurementRecord &) const = default;

  private:
    int n_qubits_ = 0;
    std::vector<std::uint8_t> bases_;
    std::vector<std::uint8_t> outcomes_;
};

/// Product of single-qubit Paulis on distinct qubits, identity elsewhere.
struct PauliObservable {
    std::vector<std::pair<int, Axis>> support;
};

enum class Task : std::uint8_t { entropy, corr_x, corr_z };

std::string to_string(Task task);
Task task_from_string(const std::string &name);

/// Outcome bits after measuring each qubit in the given basis. The state is
/// rotated qubit-by-qubit into the measurement basis and the bit string is
/// drawn by sequential conditional sampling from the Born distribution.
std::vector<std::uint8_t> measure_in_bases(const QuantumState &state, std::span<const Axis> bases, Rng &rng);

/// m snapshots with bases drawn uniformly and independently from {X, Y, Z}.
MeasurementRecord sample_measurements(const QuantumState &state, std::size_t m, Rng &rng);

/// Mean over snapshots of prod 3 * (+-1) * [basis == axis]; unbiased for Tr(rho O).
double estimate_observable(const MeasurementRecord &rec, const PauliObservable &obs);

/// Unbiased (unclamped) estimate of <sigma_i^axis sigma_j^axis>.
double estimate_correlation(const MeasurementRecord &rec, int i, int j, Axis axis);

/// Tr(shadow_a * shadow_b) for two single-qubit snapshots: 5 for equal basis
/// and bit, -4 for equal basis and different bit, 1/2 for different bases.
double pair_factor(Axis basis_a, std::uint8_t bit_a, Axis basis_b, std::uint8_t bit_b) noexcept;

/// U-statistic over all ordered snapshot pairs; unbiased for Tr(rho_A^2). m >= 2.
double estimate_purity(const MeasurementRecord &rec, const SubsystemSpec &a);

/// Purity estimates for the prefixes {0}, {0,1}, ..., {0..max_len-1} in a
/// single pass over the snapshot pairs.
std::vector<double> estimate_prefix_purities(const MeasurementRecord &rec, int max_len);

/// -log2 of the purity estimate clamped to [2^-|A|, 1]; result in [0, |A|].
double entropy_from_purity(double purity, int subsystem_size);
double estimate_entropy(const MeasurementRecord &rec, const SubsystemSpec &a);

/// Upper bound on Var(purity estimate):
/// 4 * 2^a * P / m + 2 * (2^(2a) / (m - 1))^2.
double purity_variance_bound(std::size_t m, int subsystem_size, double purity);

/// The N-1 label entries for a task, estimated from measurements.
/// entropy: prefixes {0..j-1}, j = 1..N-1; corr_*: <s_0 s_j>, j = 1..N-1.
std::vector<double> label_vector(const MeasurementRecord &rec, Task task);

/// label_vector for records of a pure state: a prefix longer than N/2 takes
/// the estimate of its complementary suffix, which has the same entropy and
/// a far smaller estimator variance. Correlation tasks are unchanged.
std::vector<double> pure_state_label_vector(const MeasurementRecord &rec, Task task);

/// Same layout as label_vector, computed exactly from the state.
std::vector<double> exact_label_vector(const QuantumState &state, Task task);

} // namespace shadowforge
