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

#include "shadowforge/shadows.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "shadowforge/errors.hpp"

namespace shadowforge {

void MeasurementRecord::add_snapshot(std::span<const Axis> bases, std::span<const std::uint8_t> outcomes) {
    const auto n = static_cast<std::size_t>(n_qubits_);
    if (bases.size() != n || outcomes.size() != n) {
        throw InvalidArgument("snapshot width does not match the record's qubit count");
    }
    for (std::size_t q = 0; q < n; ++q) {
        bases_.push_back(static_cast<std::uint8_t>(bases[q]));
        outcomes_.push_back(outcomes[q] ? 1 : 0);
    }
}

MeasurementRecord MeasurementRecord::select(std::span<const std::size_t> snapshots) const {
    const auto n = static_cast<std::size_t>(n_qubits_);
    MeasurementRecord out(n_qubits_);
    out.bases_.reserve(snapshots.size() * n);
    out.outcomes_.reserve(snapshots.size() * n);
    const std::size_t total = m();
    for (std::size_t j : snapshots) {
        if (j >= total) {
            throw InvalidArgument("snapshot index " + std::to_string(j) + " out of range");
        }
        out.bases_.insert(out.bases_.end(), bases_.begin() + static_cast<std::ptrdiff_t>(j * n),
                          bases_.begin() + static_cast<std::ptrdiff_t>((j + 1) * n));
        out.outcomes_.insert(out.outcomes_.end(), outcomes_.begin() + static_cast<std::ptrdiff_t>(j * n),
                             outcomes_.begin() + static_cast<std::ptrdiff_t>((j + 1) * n));
    }
    return out;
}

MeasurementRecord MeasurementRecord::head(std::size_t k) const {
    if (k > m()) {
        throw InvalidArgument("head: requested more snapshots than recorded");
    }
    MeasurementRecord out(n_qubits_);
    const auto len = static_cast<std::ptrdiff_t>(k * static_cast<std::size_t>(n_qubits_));
    out.bases_.assign(bases_.begin(), bases_.begin() + len);
    out.outcomes_.assign(outcomes_.begin(), outcomes_.begin() + len);
    return out;
}

std::string to_string(Task task) {
    switch (task) {
    case Task::entropy:
        return "entropy";
    case Task::corr_x:
        return "corr_x";
    case Task::corr_z:
        return "corr_z";
    }
    return "?";
}

Task task_from_string(const std::string &name) {
    if (name == "entropy") {
        return Task::entropy;
    }
    if (name == "corr_x") {
        return Task::corr_x;
    }
    if (name == "corr_z") {
        return Task::corr_z;
    }
    throw InvalidArgument("unknown task '" + name + "' (expected entropy, corr_x or corr_z)");
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<std::uint8_t> measure_in_bases(const QuantumState &state, std::span<const Axis> bases, Rng &rng) {
    const int n = state.n_qubits();
    if (static_cast<int>(bases.size()) != n) {
        throw InvalidArgument("measure_in_bases: one basis per qubit required");
    }
    StateVector psi(state.amplitudes().begin(), state.amplitudes().end());
    const std::size_t dim = psi.size();
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    for (int q = 0; q < n; ++q) {
        const Axis a = bases[static_cast<std::size_t>(q)];
        if (a == Axis::z) {
            continue;
        }
        const std::uint64_t bit = qubit_bit(n, q);
        for (std::size_t i0 = 0; i0 < dim; ++i0) {
            if (i0 & bit) {
                continue;
            }
            const std::size_t i1 = i0 | bit;
            cplx a0 = psi[i0];
            cplx a1 = psi[i1];
            if (a == Axis::y) {
                a1 *= cplx(0.0, -1.0); // S^dagger maps |+i> to |+>
            }
            psi[i0] = (a0 + a1) * kInvSqrt2;
            psi[i1] = (a0 - a1) * kInvSqrt2;
        }
    }

    std::vector<double> prob(dim);
    double total = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        prob[i] = std::norm(psi[i]);
        total += prob[i];
    }
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(n));
    std::size_t lo = 0;
    std::size_t size = dim;
    for (int q = 0; q < n; ++q) {
        const std::size_t half = size / 2;
        double p0 = 0.0;
        for (std::size_t i = lo; i < lo + half; ++i) {
            p0 += prob[i];
        }
        const double u = uniform01(rng) * total;
        if (u < p0) {
            bits[static_cast<std::size_t>(q)] = 0;
            total = p0;
        } else {
            bits[static_cast<std::size_t>(q)] = 1;
            lo += half;
            total -= p0;
        }
        size = half;
    }
    return bits;
}

MeasurementRecord sample_measurements(const QuantumState &state, std::size_t m, Rng &rng) {
    if (m < 1) {
        throw InvalidArgument("sample_measurements: m must be >= 1");
    }
    const int n = state.n_qubits();
    MeasurementRecord rec(n);
    std::vector<Axis> bases(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < m; ++j) {
        for (auto &b : bases) {
            b = static_cast<Axis>(uniform_index(rng, 3));
        }
        const auto bits = measure_in_bases(state, bases, rng);
        rec.add_snapshot(bases, bits);
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Estimators

double estimate_observable(const MeasurementRecord &rec, const PauliObservable &obs) {
    if (obs.support.empty()) {
        throw InvalidArgument("observable support must be nonempty");
    }
    const int n = rec.n_qubits();
    for (std::size_t k = 0; k < obs.support.size(); ++k) {
        const int q = obs.support[k].first;
        if (q < 0 || q >= n) {
            throw InvalidArgument("observable qubit " + std::to_string(q) + " out of range");
        }
        for (std::size_t l = 0; l < k; ++l) {
            if (obs.support[l].first == q) {
                throw InvalidArgument("observable support repeats qubit " + std::to_string(q));
            }
        }
    }
    const std::size_t m = rec.m();
    if (m == 0) {
        throw InvalidArgument("empty measurement record");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double v = 1.0;
        for (const auto &[q, axis] : obs.support) {
            if (rec.basis(j, q) != axis) {
                v = 0.0;
                break;
            }
            v *= rec.outcome(j, q) ? -3.0 : 3.0;
        }
        sum += v;
    }
    return sum / static_cast<double>(m);
}

double estimate_correlation(const MeasurementRecord &rec, int i, int j, Axis axis) {
    if (i == j) {
        throw InvalidArgument("correlation needs two distinct qubits");
    }
    return estimate_observable(rec, PauliObservable{{{i, axis}, {j, axis}}});
}

double pair_factor(Axis basis_a, std::uint8_t bit_a, Axis basis_b, std::uint8_t bit_b) noexcept {
    if (basis_a != basis_b) {
        return 0.5;
    }
    return (bit_a == bit_b) ? 5.0 : -4.0;
}

namespace {

/// (basis, bit) -> 0..5, matching the feature block order X0 X1 Y0 Y1 Z0 Z1.
inline int local_code(const MeasurementRecord &rec, std::size_t j, int q) {
    return 2 * static_cast<int>(rec.basis(j, q)) + rec.outcome(j, q);
}

constexpr std::array<std::array<double, 6>, 6> kPairTable = [] {
    std::array<std::array<double, 6>, 6> t{};
    for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
            t[a][b] = (a / 2 != b / 2) ? 0.5 : (a == b ? 5.0 : -4.0);
        }
    }
    return t;
}();

std::vector<std::uint8_t> codes_for(const MeasurementRecord &rec, std::span<const int> qubits) {
    const std::size_t m = rec.m();
    const std::size_t w = qubits.size();
    std::vector<std::uint8_t> codes(m * w);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < w; ++k) {
            codes[j * w + k] = static_cast<std::uint8_t>(local_code(rec, j, qubits[k]));
        }
    }
    return codes;
}

} // namespace

// The pair products are of the form 5^a (-4)^b 2^-c and their partial sums stay
// well inside the 53-bit mantissa for the sizes used here, so the sums below
// are exact and independent of accumulation order.
double estimate_purity(const MeasurementRecord &rec, const SubsystemSpec &a) {
    a.check_range(rec.n_qubits());
    const std::size_t m = rec.m();
    if (m < 2) {
        throw InvalidArgument("purity estimation needs m >= 2 snapshots");
    }
    const std::size_t w = static_cast<std::size_t>(a.size());
    const auto codes = codes_for(rec, a.qubits());
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const std::uint8_t *cj = &codes[j * w];
        for (std::size_t l = j + 1; l < m; ++l) {
            const std::uint8_t *cl = &codes[l * w];
            double v = 1.0;
            for (std::size_t k = 0; k < w; ++k) {
                v *= kPairTable[cj[k]][cl[k]];
            }
            sum += v;
        }
    }
    return 2.0 * sum / (static_cast<double>(m) * static_cast<double>(m - 1));
}

std::vector<double> estimate_prefix_purities(const MeasurementRecord &rec, int max_len) {
    if (max_len < 1 || max_len > rec.n_qubits()) {
        throw InvalidArgument("prefix length out of range");
    }
    const std::size_t m = rec.m();
    if (m < 2) {
        throw InvalidArgument("purity estimation needs m >= 2 snapshots");
    }
    const auto w = static_cast<std::size_t>(max_len);
    std::vector<int> qubits(w);
    for (std::size_t k = 0; k < w; ++k) {
        qubits[k] = static_cast<int>(k);
    }
    const auto codes = codes_for(rec, qubits);
    std::vector<double> sums(w, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const std::uint8_t *cj = &codes[j * w];
        for (std::size_t l = j + 1; l < m; ++l) {
            const std::uint8_t *cl = &codes[l * w];
            double v = 1.0;
            for (std::size_t k = 0; k < w; ++k) {
                v *= kPairTable[cj[k]][cl[k]];
                sums[k] += v;
            }
        }
    }
    const double norm = 2.0 / (static_cast<double>(m) * static_cast<double>(m - 1));
    for (auto &s : sums) {
        s *= norm;
    }
    return sums;
}

double entropy_from_purity(double purity, int subsystem_size) {
    const double floor = std::ldexp(1.0, -subsystem_size);
    return -std::log2(std::clamp(purity, floor, 1.0));
}

double estimate_entropy(const MeasurementRecord &rec, const SubsystemSpec &a) {
    return entropy_from_purity(estimate_purity(rec, a), a.size());
}

double purity_variance_bound(std::size_t m, int subsystem_size, double purity) {
    if (m < 2) {
        throw InvalidArgument("purity_variance_bound needs m >= 2");
    }
    const double da = std::ldexp(1.0, subsystem_size);
    const double md = static_cast<double>(m);
    const double second = da * da / (md - 1.0);
    return 4.0 * (da * purity / md) + 2.0 * second * second;
}

std::vector<double> label_vector(const MeasurementRecord &rec, Task task) {
    const int n = rec.n_qubits();
    if (n < 2) {
        throw InvalidArgument("label vectors need at least 2 qubits");
    }
    std::vector<double> out(static_cast<std::size_t>(n - 1));
    if (task == Task::entropy) {
        const auto purities = estimate_prefix_purities(rec, n - 1);
        for (int j = 0; j < n - 1; ++j) {
            out[static_cast<std::size_t>(j)] = entropy_from_purity(purities[static_cast<std::size_t>(j)], j + 1);
        }
        return out;
    }
    const Axis axis = task == Task::corr_x ? Axis::x : Axis::z;
    for (int j = 1; j < n; ++j) {
        out[static_cast<std::size_t>(j - 1)] = estimate_correlation(rec, 0, j, axis);
    }
    return out;
}

std::vector<double> pure_state_label_vector(const MeasurementRecord &rec, Task task) {
    auto out = label_vector(rec, task);
    if (task != Task::entropy) {
        return out;
    }
    const int n = rec.n_qubits();
    for (int j = n / 2 + 1; j < n; ++j) {
        const auto suffix = SubsystemSpec::prefix(j).complement(n);
        out[static_cast<std::size_t>(j - 1)] = estimate_entropy(rec, suffix);
    }
    return out;
}

std::vector<double> exact_label_vector(const QuantumState &state, Task task) {
    const int n = state.n_qubits();
    if (n < 2) {
        throw InvalidArgument("label vectors need at least 2 qubits");
    }
    std::vector<double> out(static_cast<std::size_t>(n - 1));
    for (int j = 1; j < n; ++j) {
        double v = 0.0;
        switch (task) {
        case Task::entropy:
            v = exact_entropy(state, SubsystemSpec::prefix(j));
            break;
        case Task::corr_x:
            v = exact_correlation(state, 0, j, Axis::x);
            break;
        case Task::corr_z:
            v = exact_correlation(state, 0, j, Axis::z);
            break;
        }
        out[static_cast<std::size_t>(j - 1)] = v;
    }
    return out;
}

} // namespace shadowforge
