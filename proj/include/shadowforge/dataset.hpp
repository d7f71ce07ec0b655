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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shadowforge/quantum.hpp"
#include "shadowforge/shadows.hpp"

namespace shadowforge {

enum class SystemKind : std::uint8_t { xxz, cluster_ising, pauli_file };

std::string to_string(SystemKind s);
SystemKind system_from_string(const std::string &name);

/// Which part of the hybrid dataset a point belongs to. `L` is the
/// high-measurement labeled tier, `U` the low-measurement unlabeled tier.
enum class Split : std::uint8_t { L, U, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string &name);

struct DataPoint {
    std::uint64_t id = 0;
    Split split = Split::U;
    std::vector<double> params;
    MeasurementRecord record;
    std::optional<std::vector<double>> labels;
    /// Leading snapshots a learner may see. Equal to record.m() except for
    /// validation points, which keep the full high-budget record for their
    /// labels but expose only the low-budget prefix.
    std::size_t visible_m = 0;

    [[nodiscard]] MeasurementRecord visible_record() const;
    bool operator==(const DataPoint &) const = default;
};

struct DatasetConfig {
    SystemKind system = SystemKind::xxz;
    int n_qubits = 8;
    std::size_t n = 400;       ///< |S_L| + |S_U|
    double r = 0.4;            ///< |S_L| / n
    std::size_t m_l = 1024;    ///< snapshots per high-tier point
    std::size_t m_u = 64;      ///< snapshots per low-tier point
    std::size_t n_val = 120;
    std::size_t n_test = 200;
    Task task = Task::entropy;
    double param_lo = 0.0;     ///< sampled ratio J/J' or h1/h2 lies in (lo, hi)
    double param_hi = 2.0;
    bool use_params_as_features = true;
    /// Estimate long-prefix entropy labels from the complementary suffix
    /// (pure_state_label_vector) instead of the prefix itself.
    bool pure_state_labels = true;
    std::uint64_t seed = 0;
    /// pauli_file systems: H(p) = H_base + p * H_drive.
    std::filesystem::path pauli_file;
    std::filesystem::path pauli_file_drive;

    void validate() const;
    [[nodiscard]] std::size_t n_labeled() const;
    [[nodiscard]] std::size_t n_unlabeled() const { return n - n_labeled(); }
    bool operator==(const DatasetConfig &) const = default;
};

/// Builds the parameterized Hamiltonian for one parameter vector.
class HamiltonianFamily {
  public:
    explicit HamiltonianFamily(const DatasetConfig &cfg);
    [[nodiscard]] HamiltonianSpec operator()(std::span<const double> params) const;

  private:
    SystemKind system_;
    int n_qubits_;
    HamiltonianSpec base_;
    HamiltonianSpec drive_;
};

/// Which splits a loaded dataset may hand out.
enum class Access : std::uint8_t { training, evaluation };

class HybridDataset {
  public:
    DatasetConfig config;
    std::vector<DataPoint> L;
    std::vector<DataPoint> U;
    std::vector<DataPoint> val;

    /// Held-out points with exact labels. Throws AccessError when the dataset
    /// was opened for training.
    [[nodiscard]] const std::vector<DataPoint> &test() const;
    std::vector<DataPoint> &mutable_test();
    [[nodiscard]] Access access() const noexcept { return access_; }
    /// Drops the test split and forbids further access to it.
    void seal_for_training();

    bool operator==(const HybridDataset &) const = default;

  private:
    std::vector<DataPoint> test_;
    Access access_ = Access::evaluation;
};

/// One parameter vector per draw: (ratio) uniform in (param_lo, param_hi).
/// The second coupling (J' or h2) is fixed to 1 and not part of the vector.
std::vector<std::vector<double>> sample_parameters(const DatasetConfig &cfg, std::size_t count, Rng &rng);

/// Ground states, measurements and labels for every split. Points are
/// generated in parallel from per-point generators so the output does not
/// depend on the worker count.
HybridDataset build_hybrid_dataset(const DatasetConfig &cfg);

/// Copy restricted to the given snapshots (indices into the visible record);
/// labels are dropped. `indices` must be nonempty.
DataPoint mask_subset(const DataPoint &pt, std::span<const std::size_t> indices);

inline constexpr int kDatasetVersion = 1;

void write_dataset(std::ostream &out, const HybridDataset &ds);
void save_dataset(const HybridDataset &ds, const std::filesystem::path &path);
HybridDataset read_dataset(std::istream &in, Access access, const std::string &source = "<stream>");
HybridDataset load_dataset(const std::filesystem::path &path, Access access = Access::training);

/// Packs the outcome bits of one snapshot into ceil(N/4) hex digits, qubit 0
/// being the most significant bit of the N-bit value.
std::string pack_outcomes(const MeasurementRecord &rec, std::size_t snapshot);

} // namespace shadowforge
