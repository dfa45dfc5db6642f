// Full diagonalization of Hamiltonian blocks and boundary amplitudes.
//
// Every eigenpair is computed (divide and conquer, LAPACK dsyevd). The
// result is checked against two hard postconditions before it is returned:
//   residual     max_k ||H v_k - E_k v_k||_2 / (1 + |E_k|) <= 1e-9
//   orthogonality max |V^T V - I| <= 1e-10
// Eigenvectors are sign-normalized so that their largest-magnitude component
// is positive (lowest index wins ties).

#pragma once

#include <span>
#include <string>
#include <vector>

#include "rmx/core.hpp"
#include "rmx/synth.hpp"

namespace rmx::eigen {

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kResidualTolerance = 1e-9;
inline constexpr double kOrthogonalityTolerance = 1e-10;

/// Failure to produce a complete, orthogonal eigendecomposition.
class EigenError : public Error {
 public:
  using Error::Error;
};

EigenSystem diagonalize_block(const Matrix& h, const std::string& block_name = "block");
EigenSystem diagonalize_block(const SymmetricMatrix& h, const std::string& block_name = "block");

/// Diagonalizes independent blocks on up to `n_workers` threads. Results are
/// in input order and identical to calling diagonalize_block one by one.
std::vector<EigenSystem> diagonalize_blocks(std::span<const SymmetricMatrix> blocks,
                                            std::size_t n_workers);

/// w = B V.
SurfaceAmplitudes surface_amplitudes(const synth::BoundaryProjector& b, const EigenSystem& es);

/// max_k ||H v_k - E_k v_k||_2 / (1 + |E_k|).
double residual_error(const Matrix& h, const EigenSystem& es);

/// Flips each eigenvector so its largest-magnitude entry is positive.
void normalize_signs(Matrix& eigenvectors);

}  // namespace rmx::eigen
