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

#include "shadowforge/quantum.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "shadowforge/errors.hpp"
#include "shadowforge/rng.hpp"

namespace shadowforge {

char axis_char(Axis a) noexcept {
    switch (a) {
    case Axis::x:
        return 'X';
    case Axis::y:
        return 'Y';
    case Axis::z:
        return 'Z';
    }
    return '?';
}

Axis axis_from_char(char c) {
    switch (c) {
    case 'X':
    case 'x':
        return Axis::x;
    case 'Y':
    case 'y':
        return Axis::y;
    case 'Z':
    case 'z':
        return Axis::z;
    default:
        throw InvalidArgument(std::string("not a Pauli axis: '") + c + "'");
    }
}

// ---------------------------------------------------------------------------
// Hamiltonians

void HamiltonianSpec::add_term(std::string axes, double coefficient) {
    if (coefficient == 0.0) {
        return;
    }
    terms.push_back(PauliString{std::move(axes), coefficient});
}

void HamiltonianSpec::validate() const {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw InvalidArgument("n_qubits must be in [1, " + std::to_string(kMaxQubits) + "], got " +
                              std::to_string(n_qubits));
    }
    for (const auto &t : terms) {
        if (t.n_qubits() != n_qubits) {
            throw InvalidArgument("term '" + t.axes + "' has length " + std::to_string(t.n_qubits()) +
                                  ", expected " + std::to_string(n_qubits));
        }
        if (t.axes.find_first_not_of("IXYZ") != std::string::npos) {
            throw InvalidArgument("term '" + t.axes + "' contains a symbol outside {I,X,Y,Z}");
        }
        if (!std::isfinite(t.coefficient)) {
            throw InvalidArgument("term '" + t.axes + "' has a non-finite coefficient");
        }
    }
}

namespace {

std::string local_term(int n, std::initializer_list<std::pair<int, char>> ops) {
    std::string axes(static_cast<std::size_t>(n), 'I');
    for (auto [q, c] : ops) {
        axes[static_cast<std::size_t>(q)] = c;
    }
    return axes;
}

} // namespace

HamiltonianSpec build_xxz(int n, double j, double j_prime) {
    if (n < 2 || n % 2 != 0) {
        throw InvalidArgument("XXZ chain needs an even number of qubits >= 2, got " + std::to_string(n));
    }
    if (n > kMaxQubits) {
        throw InvalidArgument("XXZ chain larger than " + std::to_string(kMaxQubits) + " qubits");
    }
    HamiltonianSpec h;
    h.n_qubits = n;
    h.params = {j, j_prime};
    for (int b = 0; b + 1 < n; ++b) {
        const double c = (b % 2 == 0) ? j : j_prime;
        for (char p : {'X', 'Y', 'Z'}) {
            h.add_term(local_term(n, {{b, p}, {b + 1, p}}), c);
        }
    }
    return h;
}

HamiltonianSpec build_cluster_ising(int n, double h1, double h2) {
    if (n < 3) {
        throw InvalidArgument("cluster-Ising chain needs at least 3 qubits, got " + std::to_string(n));
    }
    if (n > kMaxQubits) {
        throw InvalidArgument("cluster-Ising chain larger than " + std::to_string(kMaxQubits) + " qubits");
    }
    HamiltonianSpec h;
    h.n_qubits = n;
    h.params = {h1, h2};
    for (int i = 0; i + 2 < n; ++i) {
        h.add_term(local_term(n, {{i, 'Z'}, {i + 1, 'X'}, {i + 2, 'Z'}}), -1.0);
    }
    for (int i = 0; i < n; ++i) {
        h.add_term(local_term(n, {{i, 'X'}}), -h1);
    }
    for (int i = 0; i + 1 < n; ++i) {
        h.add_term(local_term(n, {{i, 'X'}, {i + 1, 'X'}}), -h2);
    }
    return h;
}

HamiltonianSpec parse_pauli_sum(std::istream &in, const std::string &source) {
    HamiltonianSpec h;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        std::istringstream fields(line);
        double coefficient = 0.0;
        std::string axes;
        std::string extra;
        if (!(fields >> coefficient >> axes)) {
            throw ParseError(source, line_no, "expected '<coefficient> <axes>'");
        }
        if (fields >> extra) {
            throw ParseError(source, line_no, "trailing token '" + extra + "'");
        }
        if (axes.find_first_not_of("IXYZ") != std::string::npos) {
            throw ParseError(source, line_no, "axes string '" + axes + "' contains a symbol outside {I,X,Y,Z}");
        }
        if (!std::isfinite(coefficient)) {
            throw ParseError(source, line_no, "non-finite coefficient");
        }
        if (h.n_qubits == 0) {
            h.n_qubits = static_cast<int>(axes.size());
        } else if (static_cast<int>(axes.size()) != h.n_qubits) {
            throw ParseError(source, line_no,
                             "axes length " + std::to_string(axes.size()) + " differs from " +
                                 std::to_string(h.n_qubits));
        }
        h.add_term(std::move(axes), coefficient);
    }
    if (h.n_qubits == 0) {
        throw ParseError(source, line_no, "no Pauli terms found");
    }
    if (h.n_qubits > kMaxQubits) {
        throw ParseError(source, line_no, "more than " + std::to_string(kMaxQubits) + " qubits");
    }
    return h;
}

HamiltonianSpec load_pauli_sum(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open Pauli-sum file " + path.string());
    }
    return parse_pauli_sum(in, path.string());
}

// ---------------------------------------------------------------------------
// States and subsystems

QuantumState::QuantumState(StateVector amplitudes) : amplitudes_(std::move(amplitudes)) {
    const std::size_t d = amplitudes_.size();
    if (d < 2 || !std::has_single_bit(d)) {
        throw InvalidArgument("state length must be a power of two >= 2, got " + std::to_string(d));
    }
    n_qubits_ = std::countr_zero(d);
    double norm2 = 0.0;
    for (const auto &a : amplitudes_) {
        norm2 += std::norm(a);
    }
    if (std::abs(norm2 - 1.0) > 1e-10) {
        throw InvalidArgument("state is not normalized (|psi|^2 = " + std::to_string(norm2) + ")");
    }
}

QuantumState QuantumState::basis_state(int n_qubits, std::uint64_t index) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw InvalidArgument("basis_state: bad qubit count");
    }
    StateVector v(std::size_t{1} << n_qubits);
    if (index >= v.size()) {
        throw InvalidArgument("basis_state: index out of range");
    }
    v[index] = 1.0;
    return QuantumState(std::move(v));
}

SubsystemSpec::SubsystemSpec(std::vector<int> qubits) : qubits_(std::move(qubits)) {
    if (qubits_.empty()) {
        throw InvalidArgument("subsystem must be nonempty");
    }
    for (std::size_t k = 0; k < qubits_.size(); ++k) {
        if (qubits_[k] < 0 || (k > 0 && qubits_[k] <= qubits_[k - 1])) {
            throw InvalidArgument("subsystem indices must be non-negative and strictly increasing");
        }
    }
}

SubsystemSpec SubsystemSpec::prefix(int len) {
    if (len < 1) {
        throw InvalidArgument("prefix subsystem needs length >= 1");
    }
    std::vector<int> q(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
        q[static_cast<std::size_t>(i)] = i;
    }
    return SubsystemSpec(std::move(q));
}

void SubsystemSpec::check_range(int n_qubits) const {
    if (qubits_.back() >= n_qubits) {
        throw InvalidArgument("subsystem qubit " + std::to_string(qubits_.back()) + " out of range for " +
                              std::to_string(n_qubits) + " qubits");
    }
}

SubsystemSpec SubsystemSpec::complement(int n_qubits) const {
    check_range(n_qubits);
    std::vector<int> rest;
    std::size_t k = 0;
    for (int q = 0; q < n_qubits; ++q) {
        if (k < qubits_.size() && qubits_[k] == q) {
            ++k;
        } else {
            rest.push_back(q);
        }
    }
    return SubsystemSpec(std::move(rest));
}

// ---------------------------------------------------------------------------
// Matvec

namespace {

struct PauliMasks {
    std::uint64_t flip = 0;  // X or Y
    std::uint64_t phase = 0; // Z or Y
    cplx scale;              // coefficient * i^(#Y)
};

PauliMasks masks_of(const PauliString &p) {
    const int n = p.n_qubits();
    PauliMasks m;
    int ny = 0;
    for (int q = 0; q < n; ++q) {
        const std::uint64_t bit = qubit_bit(n, q);
        switch (p.axes[static_cast<std::size_t>(q)]) {
        case 'X':
            m.flip |= bit;
            break;
        case 'Y':
            m.flip |= bit;
            m.phase |= bit;
            ++ny;
            break;
        case 'Z':
            m.phase |= bit;
            break;
        default:
            break;
        }
    }
    static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    m.scale = p.coefficient * kIPow[ny % 4];
    return m;
}

} // namespace

// Y|b> = i (-1)^b |b^1>, so P|b> = i^{#Y} (-1)^{popcount(b & phase)} |b ^ flip>.
void accumulate_pauli(const PauliString &p, std::span<const cplx> in, std::span<cplx> out) {
    const auto m = masks_of(p);
    const std::size_t d = in.size();
    for (std::size_t b = 0; b < d; ++b) {
        const cplx v = in[b];
        if (v == cplx{}) {
            continue;
        }
        const double sign = (std::popcount(b & m.phase) & 1U) ? -1.0 : 1.0;
        out[b ^ m.flip] += m.scale * (sign * v);
    }
}

StateVector apply_hamiltonian(const HamiltonianSpec &h, std::span<const cplx> v) {
    const std::size_t d = std::size_t{1} << h.n_qubits;
    if (v.size() != d) {
        throw InvalidArgument("apply_hamiltonian: vector length " + std::to_string(v.size()) + " != 2^" +
                              std::to_string(h.n_qubits));
    }
    StateVector out(d);
    for (const auto &t : h.terms) {
        accumulate_pauli(t, v, out);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lanczos

namespace {

cplx dot(std::span<const cplx> a, std::span<const cplx> b) {
    cplx s{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += std::conj(a[i]) * b[i];
    }
    return s;
}

double norm(std::span<const cplx> a) { return std::sqrt(std::real(dot(a, a))); }

void scale(std::span<cplx> a, double s) {
    for (auto &x : a) {
        x *= s;
    }
}

} // namespace

GroundState ground_state(const HamiltonianSpec &h, std::uint64_t seed, const LanczosOptions &options) {
    h.validate();
    const std::size_t dim = std::size_t{1} << h.n_qubits;
    const int kmax = static_cast<int>(std::min<std::size_t>(dim, static_cast<std::size_t>(options.krylov_dim)));

    Rng rng = make_rng(seed, {0x1a2c05});
    StateVector start(dim);
    for (auto &x : start) {
        x = cplx(normal01(rng), normal01(rng));
    }
    scale(start, 1.0 / norm(start));

    GroundState result;
    double last_residual = 0.0;
    double last_energy = 0.0;
    for (int restart = 0; restart <= options.max_restarts; ++restart) {
        std::vector<StateVector> basis;
        basis.reserve(static_cast<std::size_t>(kmax));
        basis.push_back(start);
        std::vector<double> alpha;
        std::vector<double> beta;

        Eigen::VectorXd ritz;
        bool have_ritz = false;

        for (int k = 0; k < kmax; ++k) {
            StateVector w = apply_hamiltonian(h, basis[static_cast<std::size_t>(k)]);
            ++result.matvecs;
            const double a = std::real(dot(basis[static_cast<std::size_t>(k)], w));
            alpha.push_back(a);
            // Two passes of classical Gram-Schmidt against the whole basis.
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto &q : basis) {
                    const cplx c = dot(q, w);
                    for (std::size_t i = 0; i < dim; ++i) {
                        w[i] -= c * q[i];
                    }
                }
            }
            const double b = norm(w);
            const bool exhausted = b < 1e-12 || k + 1 == kmax;
            if (exhausted || (k + 1) % 5 == 0) {
                const auto m = static_cast<Eigen::Index>(alpha.size());
                Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), m);
                Eigen::VectorXd sub = Eigen::VectorXd::Zero(std::max<Eigen::Index>(m - 1, 0));
                for (Eigen::Index i = 0; i + 1 < m; ++i) {
                    sub[i] = beta[static_cast<std::size_t>(i)];
                }
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
                tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
                ritz = tri.eigenvectors().col(0);
                have_ritz = true;
                if (exhausted || b * std::abs(ritz[m - 1]) < 0.1 * options.tolerance) {
                    break;
                }
            }
            beta.push_back(b);
            scale(w, 1.0 / b);
            basis.push_back(std::move(w));
        }
        if (!have_ritz) {
            break;
        }

        StateVector x(dim);
        for (Eigen::Index j = 0; j < ritz.size(); ++j) {
            const auto &q = basis[static_cast<std::size_t>(j)];
            const double c = ritz[j];
            for (std::size_t i = 0; i < dim; ++i) {
                x[i] += c * q[i];
            }
        }
        scale(x, 1.0 / norm(x));
        StateVector hx = apply_hamiltonian(h, x);
        ++result.matvecs;
        const double energy = std::real(dot(x, hx));
        double res2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            res2 += std::norm(hx[i] - energy * x[i]);
        }
        last_residual = std::sqrt(res2);
        last_energy = energy;
        if (last_residual < options.tolerance) {
            result.energy = energy;
            result.state = QuantumState(std::move(x));
            result.restarts = restart;
            result.residual = last_residual;
            return result;
        }
        start = std::move(x);
    }
    throw NumericalFailure("Lanczos did not converge after " + std::to_string(options.max_restarts) +
                           " restarts (" + std::to_string(result.matvecs) +
                           " matvecs, residual " + std::to_string(last_residual) + ", energy " +
                           std::to_string(last_energy) + ")");
}

// ---------------------------------------------------------------------------
// Exact properties

namespace {

/// The state reshaped as a 2^|A| x 2^(N-|A|) matrix: rows index A, columns
/// index the complement, each in qubit order (first qubit = MSB).
Eigen::MatrixXcd split_amplitudes(const QuantumState &state, const SubsystemSpec &a) {
    const int n = state.n_qubits();
    a.check_range(n);
    if (a.size() > 12) {
        throw InvalidArgument("subsystem larger than 12 qubits");
    }
    const int na = a.size();
    const int nb = n - na;
    std::vector<bool> in_a(static_cast<std::size_t>(n), false);
    for (int q : a.qubits()) {
        in_a[static_cast<std::size_t>(q)] = true;
    }
    Eigen::MatrixXcd psi(Eigen::Index{1} << na, Eigen::Index{1} << nb);
    for (std::size_t b = 0; b < state.dim(); ++b) {
        Eigen::Index row = 0;
        Eigen::Index col = 0;
        for (int q = 0; q < n; ++q) {
            const Eigen::Index bit = (b & qubit_bit(n, q)) ? 1 : 0;
            if (in_a[static_cast<std::size_t>(q)]) {
                row = (row << 1) | bit;
            } else {
                col = (col << 1) | bit;
            }
        }
        psi(row, col) = state[b];
    }
    return psi;
}

} // namespace

Eigen::MatrixXcd reduced_density_matrix(const QuantumState &state, const SubsystemSpec &a) {
    const Eigen::MatrixXcd psi = split_amplitudes(state, a);
    return psi * psi.adjoint();
}

double exact_purity(const QuantumState &state, const SubsystemSpec &a) {
    const Eigen::MatrixXcd psi = split_amplitudes(state, a);
    // Tr(rho_A^2) = Tr(rho_B^2); use whichever Gram matrix is smaller.
    const Eigen::MatrixXcd gram = psi.rows() <= psi.cols() ? Eigen::MatrixXcd(psi * psi.adjoint())
                                                           : Eigen::MatrixXcd(psi.adjoint() * psi);
    return gram.squaredNorm();
}

double exact_entropy(const QuantumState &state, const SubsystemSpec &a) {
    const double purity = std::min(1.0, exact_purity(state, a));
    return std::clamp(-std::log2(purity), 0.0, static_cast<double>(a.size()));
}

double pauli_expectation(const QuantumState &state, const PauliString &p) {
    if (p.n_qubits() != state.n_qubits()) {
        throw InvalidArgument("Pauli string length does not match the state");
    }
    StateVector out(state.dim());
    accumulate_pauli(p, state.amplitudes(), out);
    return std::real(dot(state.amplitudes(), out));
}

double exact_correlation(const QuantumState &state, int i, int j, Axis axis) {
    const int n = state.n_qubits();
    if (i == j) {
        throw InvalidArgument("correlation needs two distinct qubits");
    }
    if (i < 0 || j < 0 || i >= n || j >= n) {
        throw InvalidArgument("correlation qubit index out of range");
    }
    PauliString p{std::string(static_cast<std::size_t>(n), 'I'), 1.0};
    p.axes[static_cast<std::size_t>(i)] = axis_char(axis);
    p.axes[static_cast<std::size_t>(j)] = axis_char(axis);
    return pauli_expectation(state, p);
}

} // namespace shadowforge
