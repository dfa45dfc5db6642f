// Deterministic synthetic Hamiltonian blocks and boundary projectors.
//
// H = Q^T D Q with D drawn uniformly from the case's pole range and Q a
// random orthogonal matrix, so the spectrum of every block is known before
// it is diagonalized. B has orthonormal rows, which makes w = B V satisfy
// sum_k w_ik w_jk = delta_ij.
//
// Random numbers come from std::mt19937_64 (bit-exact by the standard) with
// hand-rolled uniform/normal transforms; the std distributions are
// implementation-defined and would break cross-platform reproducibility.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rmx/core.hpp"

namespace rmx::synth {

/// Orthonormal-row n_channels x n_poles matrix.
struct BoundaryProjector {
  Matrix b;
  friend bool operator==(const BoundaryProjector&, const BoundaryProjector&) = default;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Marsaglia polar method).
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// The n_poles diagonal energies drawn for `c`, in draw order.
std::vector<double> draw_pole_energies(const CaseDefinition& c);

/// Thin Q factor (m x n, m >= n) of a Householder QR of `a`, with columns
/// sign-flipped so that diag(R) is non-negative.
Matrix orthonormal_columns(const Matrix& a);

SymmetricMatrix build_hamiltonian(const CaseDefinition& c);

BoundaryProjector build_boundary_projector(const CaseDefinition& c);

/// Synthetic per-initial-state dipole amplitude blocks for D-file tests and
/// the CLI. State s has 1 + (s mod n_channels) rows of n_poles values.
std::vector<Matrix> build_dipole_states(const CaseDefinition& c, std::size_t n_states);

// Case files: one `key = value` per line, `#` starts a comment.
//   n_channels, n_poles, pole_energy_low, pole_energy_high (Ry),
//   boundary_seed, hamiltonian_seed
CaseDefinition parse_case(const std::string& text);
std::string format_case(const CaseDefinition& c);
CaseDefinition read_case_file(const std::filesystem::path& path);
void write_case_file(const std::filesystem::path& path, const CaseDefinition& c);

}  // namespace rmx::synth
