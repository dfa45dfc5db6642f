#include "rmx/eigen.hpp"

#include <lapacke.h>

#include <cmath>
#include <sstream>

#include "rmx/parallel.hpp"

namespace rmx::eigen {

namespace {

std::string format_tolerance_failure(const std::string& block, const char* what, double got,
                                     double limit) {
  std::ostringstream os;
  os << block << ": " << what << " " << got << " exceeds " << limit;
  return os.str();
}

}  // namespace

void normalize_signs(Matrix& v) {
  for (std::size_t k = 0; k < v.cols(); ++k) {
    std::size_t best = 0;
    double best_abs = -1.0;
    for (std::size_t m = 0; m < v.rows(); ++m) {
      const double a = std::abs(v(m, k));
      if (a > best_abs) {
        best_abs = a;
        best = m;
      }
    }
    if (v.rows() > 0 && v(best, k) < 0.0)
      for (std::size_t m = 0; m < v.rows(); ++m) v(m, k) = -v(m, k);
  }
}

double residual_error(const Matrix& h, const EigenSystem& es) {
  const std::size_t n = h.rows();
  const Matrix vt = es.eigenvectors.transposed();
  double worst = 0.0;
  for (std::size_t k = 0; k < es.size(); ++k) {
    const auto vk = vt.row(k);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto hi = h.row(i);
      double hv = 0.0;
      for (std::size_t m = 0; m < n; ++m) hv += hi[m] * vk[m];
      const double r = hv - es.eigenvalues[k] * vk[i];
      norm2 += r * r;
    }
    worst = std::max(worst, std::sqrt(norm2) / (1.0 + std::abs(es.eigenvalues[k])));
  }
  return worst;
}

EigenSystem diagonalize_block(const Matrix& h, const std::string& block_name) {
  const std::size_t n = h.rows();
  if (n == 0 || h.cols() != n)
    throw InvalidArgument(block_name + ": Hamiltonian block must be square and non-empty");
  const double scale = h.max_abs();
  if (!std::isfinite(scale)) throw InvalidArgument(block_name + ": non-finite entries");
  const double asym = asymmetry(h);
  if (asym > kSymmetryTolerance * (1.0 + scale)) {
    std::ostringstream os;
    os << block_name << ": not symmetric (max |H_ij - H_ji| = " << asym << ")";
    throw InvalidArgument(os.str());
  }

  // Symmetric input: row-major storage is also a valid column-major copy.
  EigenSystem es;
  es.eigenvalues.resize(n);
  es.eigenvectors = h;
  const auto ld = static_cast<lapack_int>(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_ROW_MAJOR, 'V', 'U', ld, es.eigenvectors.data(),
                                         ld, es.eigenvalues.data());
  if (info != 0) {
    std::ostringstream os;
    os << block_name << ": eigensolver did not converge (dsyevd info=" << info << ")";
    throw EigenError(os.str());
  }
  normalize_signs(es.eigenvectors);

  const double orth = orthogonality_error(es.eigenvectors);
  if (!(orth <= kOrthogonalityTolerance))
    throw EigenError(
        format_tolerance_failure(block_name, "eigenvector orthogonality error", orth,
                                 kOrthogonalityTolerance));
  const double res = residual_error(h, es);
  if (!(res <= kResidualTolerance))
    throw EigenError(
        format_tolerance_failure(block_name, "eigenpair residual", res, kResidualTolerance));
  return es;
}

EigenSystem diagonalize_block(const SymmetricMatrix& h, const std::string& block_name) {
  return diagonalize_block(h.to_dense(), block_name);
}

std::vector<EigenSystem> diagonalize_blocks(std::span<const SymmetricMatrix> blocks,
                                            std::size_t n_workers) {
  std::vector<EigenSystem> out(blocks.size());
  const auto ranges = partition_range(blocks.size(), std::max<std::size_t>(1, n_workers));
  run_on_ranges(ranges, [&](std::size_t, IndexRange r) {
    for (std::size_t b = r.begin; b < r.end; ++b)
      out[b] = diagonalize_block(blocks[b], "block " + std::to_string(b));
  });
  return out;
}

SurfaceAmplitudes surface_amplitudes(const synth::BoundaryProjector& b, const EigenSystem& es) {
  const Matrix& bm = b.b;
  const Matrix& v = es.eigenvectors;
  if (bm.cols() != v.rows() || v.rows() != v.cols()) {
    std::ostringstream os;
    os << "surface_amplitudes: projector is " << bm.rows() << "x" << bm.cols()
       << " but eigenvectors are " << v.rows() << "x" << v.cols();
    throw InvalidArgument(os.str());
  }
  const std::size_t nchan = bm.rows();
  const std::size_t n = v.cols();
  SurfaceAmplitudes w{Matrix(nchan, n)};
  for (std::size_t i = 0; i < nchan; ++i) {
    const auto bi = bm.row(i);
    for (std::size_t m = 0; m < n; ++m) {
      const double bim = bi[m];
      const auto vm = v.row(m);
      for (std::size_t k = 0; k < n; ++k) w.w(i, k) += bim * vm[k];
    }
  }
  return w;
}

}  // namespace rmx::eigen
