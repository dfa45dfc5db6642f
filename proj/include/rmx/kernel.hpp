// R-matrix formation from eigenpairs:
//
//   R_ij(E) = sum_k w_ik w_jk / (E - E_k)
//
// either summed directly (naive) or as the product R = X Y with
// X_ik = w_ik / (E - E_k) and Y = w^T. Only X depends on E, so batched
// evaluation builds Y once.

#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rmx/core.hpp"

namespace rmx::kernel {

/// Energies closer than this to a pole are rejected.
inline constexpr double kPoleGuard = 1e-10;

class KernelVariant {
 public:
  enum class Kind { naive, gemm, gemm_blocked };

  static KernelVariant naive() { return KernelVariant(Kind::naive, 0); }
  static KernelVariant gemm() { return KernelVariant(Kind::gemm, 0); }
  /// Throws InvalidArgument unless tile >= 8.
  static KernelVariant gemm_blocked(std::size_t tile);

  /// Accepts "naive", "gemm", "gemm_blocked:<tile>" (also "blocked<tile>").
  static KernelVariant parse(const std::string& tag);

  Kind kind() const { return kind_; }
  std::size_t tile() const { return tile_; }
  std::string name() const;

  friend bool operator==(const KernelVariant&, const KernelVariant&) = default;

 private:
  KernelVariant(Kind k, std::size_t tile) : kind_(k), tile_(tile) {}
  Kind kind_;
  std::size_t tile_;
};

/// Throws PoleProximity if `e` is inside kPoleGuard of any pole.
void check_pole_distance(std::span<const double> poles, double e,
                         std::optional<std::size_t> mesh_index = std::nullopt);

RMatrix form_rmatrix_naive(const SurfaceAmplitudes& w, std::span<const double> poles, double e);

RMatrix form_rmatrix_gemm(const SurfaceAmplitudes& w, std::span<const double> poles, double e,
                          const KernelVariant& variant);

/// Per-energy kernel with Y = w^T prepared once. Not thread-safe: use one
/// evaluator per worker.
class RMatrixEvaluator {
 public:
  RMatrixEvaluator(const SurfaceAmplitudes& w, std::span<const double> poles,
                   KernelVariant variant);

  /// Fills `r` (n_channels x n_channels) with R(e). The pole guard is not
  /// checked here.
  void evaluate(double e, Matrix& r);

  std::size_t n_channels() const { return w_.rows(); }

 private:
  const Matrix& w_;
  std::span<const double> poles_;
  KernelVariant variant_;
  Matrix y_;  // n_poles x n_channels
  Matrix x_;  // n_channels x n_poles
};

/// Calls sink(index, R) for every mesh point, split across `n_workers`
/// threads in contiguous ranges. `sink` must tolerate concurrent calls for
/// distinct indices. Every mesh point is checked against the pole guard
/// before any work starts; the lowest offending index is reported.
void for_each_rmatrix(const SurfaceAmplitudes& w, std::span<const double> poles,
                      const EnergyMesh& mesh, const KernelVariant& variant,
                      std::size_t n_workers,
                      const std::function<void(std::size_t, const Matrix&)>& sink);

std::vector<RMatrix> form_rmatrix_batch(const SurfaceAmplitudes& w, std::span<const double> poles,
                                        const EnergyMesh& mesh, const KernelVariant& variant,
                                        std::size_t n_workers = 1);

/// Relative Frobenius distance ||a - b||_F / ||b||_F (absolute if b = 0).
double relative_frobenius(const Matrix& a, const Matrix& b);

// ---------------------------------------------------------------------------
// Kernel benchmark
// ---------------------------------------------------------------------------

struct KernelShape {
  std::size_t n_channels;
  std::size_t n_poles;
  std::string name() const;
  friend bool operator==(const KernelShape&, const KernelShape&) = default;
};

/// Parses "267x258".
KernelShape parse_shape(const std::string& text);

struct KernelBenchRow {
  KernelShape shape;
  std::string variant;
  double median_seconds;
  /// naive median / variant median.
  double ratio_vs_naive;
  double max_relative_error;
  /// Median shorter than 100 ticks of the steady clock.
  bool flagged;
};

inline constexpr double kEquivalenceTolerance = 1e-12;

/// Times every (shape, variant) pair on seeded random amplitudes and poles.
/// Each variant is first checked against the naive kernel; a disagreement
/// beyond kEquivalenceTolerance throws before any timing is recorded.
std::vector<KernelBenchRow> bench_kernels(std::span<const KernelShape> shapes,
                                          std::span<const KernelVariant> variants,
                                          std::size_t repeats, std::uint64_t seed = 1);

/// CSV with header shape,variant,median_seconds,ratio_vs_naive.
std::string render_kernel_csv(std::span<const KernelBenchRow> rows);

}  // namespace rmx::kernel
