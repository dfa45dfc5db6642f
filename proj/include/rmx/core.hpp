// Shared domain types for the outer-region R-matrix pipeline.
//
// All energies are carried in Rydberg. Conversion to eV happens only where
// data leaves the process (CSV files, CLI flags).

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rmx {

inline constexpr double kRydbergEv = 13.605693;

inline double ry_to_ev(double ry) { return ry * kRydbergEv; }
inline double ev_to_ry(double ev) { return ev / kRydbergEv; }

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Evaluation energy lies inside the pole guard of eigenvalue `pole_index`.
class PoleProximity : public Error {
 public:
  PoleProximity(std::size_t pole_index, double distance,
                std::optional<std::size_t> mesh_index = std::nullopt);

  std::size_t pole_index() const { return pole_index_; }
  double distance() const { return distance_; }
  std::optional<std::size_t> mesh_index() const { return mesh_index_; }

 private:
  std::size_t pole_index_;
  double distance_;
  std::optional<std::size_t> mesh_index_;
};

// ---------------------------------------------------------------------------
// Dense row-major matrix
// ---------------------------------------------------------------------------

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<const double> values() const { return data_; }

  Matrix transposed() const;
  double max_abs() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Real symmetric matrix holding only its upper triangle (packed, row-wise).
/// Reads below the diagonal mirror the upper entry, so the matrix is exactly
/// symmetric.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(std::size_t n) : n_(n), packed_(n * (n + 1) / 2, 0.0) {}

  std::size_t size() const { return n_; }

  double operator()(std::size_t i, std::size_t j) const {
    return i <= j ? packed_[index(i, j)] : packed_[index(j, i)];
  }
  /// Writes to (i, j) and (j, i) at once.
  void set(std::size_t i, std::size_t j, double v) {
    if (i <= j) packed_[index(i, j)] = v;
    else packed_[index(j, i)] = v;
  }

  Matrix to_dense() const;
  std::span<const double> packed() const { return packed_; }

  friend bool operator==(const SymmetricMatrix&, const SymmetricMatrix&) = default;

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    return i * n_ - i * (i + 1) / 2 + j;
  }

  std::size_t n_ = 0;
  std::vector<double> packed_;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct EnergyRange {
  double low = 0.0;
  double high = 0.0;
  friend bool operator==(const EnergyRange&, const EnergyRange&) = default;
};

/// Synthetic coupled-channel scattering case.
struct CaseDefinition {
  std::uint32_t n_channels = 20;
  std::uint32_t n_poles = 200;
  EnergyRange pole_energy_range{-2.0, 8.0};
  std::uint64_t boundary_seed = 0;
  std::uint64_t hamiltonian_seed = 0;

  /// Throws InvalidArgument describing the first violated invariant.
  void validate() const;

  friend bool operator==(const CaseDefinition&, const CaseDefinition&) = default;
};

/// Uniform energy grid. Point i is start + i * spacing with a single rounding.
class EnergyMesh {
 public:
  EnergyMesh(double start, double stop, std::size_t n_points);

  double start() const { return start_; }
  double stop() const { return stop_; }
  std::size_t size() const { return n_points_; }
  double spacing() const { return spacing_; }
  double operator[](std::size_t i) const;

  std::vector<double> points() const;

  friend bool operator==(const EnergyMesh&, const EnergyMesh&) = default;

 private:
  double start_;
  double stop_;
  std::size_t n_points_;
  double spacing_;
};

/// All eigenpairs of one Hamiltonian block; column k of `eigenvectors`
/// belongs to eigenvalues[k]. Eigenvalues ascending.
struct EigenSystem {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;

  std::size_t size() const { return eigenvalues.size(); }
  friend bool operator==(const EigenSystem&, const EigenSystem&) = default;
};

/// Reduced-width amplitudes w_ik, n_channels x n_poles.
struct SurfaceAmplitudes {
  Matrix w;

  std::size_t n_channels() const { return w.rows(); }
  std::size_t n_poles() const { return w.cols(); }
  friend bool operator==(const SurfaceAmplitudes&, const SurfaceAmplitudes&) = default;
};

struct RMatrix {
  Matrix entries;
  double energy = 0.0;
};

struct Spectrum {
  EnergyMesh mesh;
  std::vector<double> values;
  std::string label;

  /// Throws InvalidArgument if values do not match the mesh or are not finite.
  void validate() const;
};

/// Shortest decimal text that parses back to exactly `v`.
std::string format_roundtrip(double v);

/// Parses a whole string as a double; throws InvalidArgument naming `what`.
double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_u64(std::string_view text, std::string_view what);

/// max |A^T A - I| over all entries.
double orthogonality_error(const Matrix& v);

/// max |R_ij - R_ji|.
double asymmetry(const Matrix& m);

}  // namespace rmx
