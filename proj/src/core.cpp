#include "rmx/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace rmx {

namespace {

std::string pole_message(std::size_t k, double distance, std::optional<std::size_t> mesh_index) {
  std::ostringstream os;
  os << "energy within pole guard of eigenvalue " << k << " (|E - E_k| = " << distance << " Ry)";
  if (mesh_index) os << " at mesh index " << *mesh_index;
  return os.str();
}

}  // namespace

PoleProximity::PoleProximity(std::size_t pole_index, double distance,
                             std::optional<std::size_t> mesh_index)
    : Error(pole_message(pole_index, distance, mesh_index)),
      pole_index_(pole_index),
      distance_(distance),
      mesh_index_(mesh_index) {}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Matrix SymmetricMatrix::to_dense() const {
  Matrix m(n_, n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) m(i, j) = (*this)(i, j);
  return m;
}

void CaseDefinition::validate() const {
  if (n_channels == 0) throw InvalidArgument("case: n_channels must be positive");
  if (n_poles == 0) throw InvalidArgument("case: n_poles must be positive");
  if (n_poles < n_channels) {
    std::ostringstream os;
    os << "case: n_poles (" << n_poles << ") must be >= n_channels (" << n_channels << ")";
    throw InvalidArgument(os.str());
  }
  const auto [low, high] = pole_energy_range;
  if (!std::isfinite(low) || !std::isfinite(high))
    throw InvalidArgument("case: pole_energy_range must be finite");
  // low == high is a degenerate but valid range (all poles coincide).
  if (low > high) throw InvalidArgument("case: pole_energy_range.low must not exceed high");
}

EnergyMesh::EnergyMesh(double start, double stop, std::size_t n_points)
    : start_(start), stop_(stop), n_points_(n_points), spacing_(0.0) {
  if (n_points < 2) throw InvalidArgument("energy mesh needs at least 2 points");
  if (!std::isfinite(start) || !std::isfinite(stop) || !(start < stop))
    throw InvalidArgument("energy mesh needs finite start < stop");
  spacing_ = (stop - start) / static_cast<double>(n_points - 1);
  if (!(spacing_ > 0.0)) throw InvalidArgument("energy mesh spacing underflows");
}

double EnergyMesh::operator[](std::size_t i) const {
  return std::fma(static_cast<double>(i), spacing_, start_);
}

std::vector<double> EnergyMesh::points() const {
  std::vector<double> p(n_points_);
  for (std::size_t i = 0; i < n_points_; ++i) p[i] = (*this)[i];
  return p;
}

void Spectrum::validate() const {
  if (values.size() != mesh.size()) {
    std::ostringstream os;
    os << "spectrum '" << label << "': " << values.size() << " values for " << mesh.size()
       << " mesh points";
    throw InvalidArgument(os.str());
  }
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("spectrum '" + label + "': non-finite value");
}

std::string format_roundtrip(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || text.empty())
    throw InvalidArgument(std::string(what) + ": not a number: '" + std::string(text) + "'");
  return v;
}

std::uint64_t parse_u64(std::string_view text, std::string_view what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw InvalidArgument(std::string(what) + ": not an unsigned integer: '" + std::string(text) +
                          "'");
  return v;
}

double orthogonality_error(const Matrix& v) {
  // Work on rows of the transpose so the dot products are contiguous.
  const Matrix t = v.transposed();
  const std::size_t n = t.rows();
  double worst = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const auto ra = t.row(a);
    for (std::size_t b = a; b < n; ++b) {
      const auto rb = t.row(b);
      double dot = 0.0;
      for (std::size_t m = 0; m < ra.size(); ++m) dot += ra[m] * rb[m];
      worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

double asymmetry(const Matrix& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
  return worst;
}

}  // namespace rmx
