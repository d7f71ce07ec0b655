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

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace shadowforge {

using cplx = std::complex<double>;
using StateVector = std::vector<cplx>;

/// Largest system the statevector routines accept.
inline constexpr int kMaxQubits = 16;

/*
 * Qubit ordering convention, used by every module: qubit 0 is the first
 * character of an axes string and the most significant bit of a basis-state
 * index. For N qubits, qubit q lives at bit (N - 1 - q).
 */
constexpr std::uint64_t qubit_bit(int n_qubits, int q) noexcept {
    return std::uint64_t{1} << (n_qubits - 1 - q);
}

enum class Axis : std::uint8_t { x = 0, y = 1, z = 2 };

char axis_char(Axis a) noexcept;
Axis axis_from_char(char c);

/// A weighted tensor product of single-qubit Paulis, e.g. -0.5 * XIXZ.
struct PauliString {
    std::string axes; ///< one of I, X, Y, Z per qubit
    double coefficient = 1.0;

    [[nodiscard]] int n_qubits() const noexcept { return static_cast<int>(axes.size()); }
    bool operator==(const PauliString &) const = default;
};

/// A Hamiltonian given as a sum of Pauli strings, together with the physical
/// parameters that produced it.
struct HamiltonianSpec {
    int n_qubits = 0;
    std::vector<PauliString> terms;
    std::vector<double> params;

    /// Appends a term, dropping it when the coefficient is exactly zero.
    void add_term(std::string axes, double coefficient);
    void validate() const;
};

/// Alternating-bond Heisenberg chain: J on bonds (0,1),(2,3),..., J' on
/// (1,2),(3,4),..., each bond contributing XX+YY+ZZ. n must be even and >= 2.
HamiltonianSpec build_xxz(int n, double j, double j_prime);

/// -sum Z_i X_{i+1} Z_{i+2} - h1 sum X_i - h2 sum X_i X_{i+1}; n >= 3.
HamiltonianSpec build_cluster_ising(int n, double h1, double h2);

/// Reads `<coefficient> <axes>` lines; `#` starts a comment line. The first
/// axes string fixes N for the whole file.
HamiltonianSpec parse_pauli_sum(std::istream &in, const std::string &source = "<stream>");
HamiltonianSpec load_pauli_sum(const std::filesystem::path &path);

/// Normalized amplitudes over the 2^N computational basis states.
class QuantumState {
  public:
    QuantumState() = default;
    /// Throws InvalidArgument if the length is not a power of two or the norm
    /// deviates from 1 by more than 1e-10.
    explicit QuantumState(StateVector amplitudes);

    static QuantumState basis_state(int n_qubits, std::uint64_t index);

    [[nodiscard]] int n_qubits() const noexcept { return n_qubits_; }
    [[nodiscard]] std::size_t dim() const noexcept { return amplitudes_.size(); }
    [[nodiscard]] std::span<const cplx> amplitudes() const noexcept { return amplitudes_; }
    [[nodiscard]] const cplx &operator[](std::size_t i) const noexcept { return amplitudes_[i]; }

  private:
    int n_qubits_ = 0;
    StateVector amplitudes_;
};

/// Sorted, duplicate-free set of qubit indices.
class SubsystemSpec {
  public:
    explicit SubsystemSpec(std::vector<int> qubits);
    /// Qubits {0, ..., len-1}.
    static SubsystemSpec prefix(int len);

    [[nodiscard]] const std::vector<int> &qubits() const noexcept { return qubits_; }
    [[nodiscard]] int size() const noexcept { return static_cast<int>(qubits_.size()); }
    /// Throws InvalidArgument when any index is >= n_qubits.
    void check_range(int n_qubits) const;
    [[nodiscard]] SubsystemSpec complement(int n_qubits) const;

  private:
    std::vector<int> qubits_;
};

/// out += coefficient * P * in, for a single Pauli string P.
void accumulate_pauli(const PauliString &p, std::span<const cplx> in, std::span<cplx> out);

/// H * v without materializing H.
StateVector apply_hamiltonian(const HamiltonianSpec &h, std::span<const cplx> v);

struct LanczosOptions {
    int krylov_dim = 200;
    double tolerance = 1e-10; ///< on ||H x - E x||
    int max_restarts = 50;
};

struct GroundState {
    double energy = 0.0;
    QuantumState state;
    int matvecs = 0;
    int restarts = 0;
    double residual = 0.0;
};

/// Lowest eigenpair by restarted Lanczos with full reorthogonalization.
/// Deterministic for fixed seed. When the ground space is degenerate the
/// returned vector is whichever ground state the seeded start vector converges
/// to.
GroundState ground_state(const HamiltonianSpec &h, std::uint64_t seed, const LanczosOptions &options = {});

/// rho_A as a dense 2^|A| x 2^|A| matrix; the first qubit of A is the most
/// significant bit of the row index.
Eigen::MatrixXcd reduced_density_matrix(const QuantumState &state, const SubsystemSpec &a);

/// Tr(rho_A^2), computed without forming rho_A explicitly.
double exact_purity(const QuantumState &state, const SubsystemSpec &a);

/// Renyi-2 entropy in bits: -log2 Tr(rho_A^2).
double exact_entropy(const QuantumState &state, const SubsystemSpec &a);

/// <psi| P |psi> for a Pauli string (coefficient included).
double pauli_expectation(const QuantumState &state, const PauliString &p);

/// <sigma_i^axis sigma_j^axis>; i != j.
double exact_correlation(const QuantumState &state, int i, int j, Axis axis);

} // namespace shadowforge
