#include "rmx/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rmx/parallel.hpp"
#include "rmx/synth.hpp"

namespace rmx::kernel {

namespace {

void check_shapes(const SurfaceAmplitudes& w, std::span<const double> poles) {
  if (w.n_channels() == 0 || w.n_poles() == 0)
    throw InvalidArgument("R-matrix kernel: empty amplitude matrix");
  if (w.n_poles() != poles.size()) {
    std::ostringstream os;
    os << "R-matrix kernel: " << w.n_poles() << " amplitude columns but " << poles.size()
       << " poles";
    throw InvalidArgument(os.str());
  }
}

void naive_into(const Matrix& w, std::span<const double> poles, double e, Matrix& r) {
  const std::size_t nchan = w.rows();
  const std::size_t n = w.cols();
  for (std::size_t i = 0; i < nchan; ++i) {
    const auto wi = w.row(i);
    for (std::size_t j = i; j < nchan; ++j) {
      const auto wj = w.row(j);
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) sum += wi[k] * wj[k] / (e - poles[k]);
      r(i, j) = sum;
      r(j, i) = sum;
    }
  }
}

void gemm_into(const Matrix& x, const Matrix& y, Matrix& r) {
  const std::size_t rows = x.rows();
  const std::size_t inner = x.cols();
  const std::size_t cols = y.cols();
  std::fill(r.data(), r.data() + rows * cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double* ri = r.row(i).data();
    const auto xi = x.row(i);
    for (std::size_t k = 0; k < inner; ++k) {
      const double xik = xi[k];
      const double* yk = y.row(k).data();
      for (std::size_t j = 0; j < cols; ++j) ri[j] += xik * yk[j];
    }
  }
}

void gemm_blocked_into(const Matrix& x, const Matrix& y, Matrix& r, std::size_t tile) {
  const std::size_t rows = x.rows();
  const std::size_t inner = x.cols();
  const std::size_t cols = y.cols();
  std::fill(r.data(), r.data() + rows * cols, 0.0);
  for (std::size_t i0 = 0; i0 < rows; i0 += tile) {
    const std::size_t i1 = std::min(i0 + tile, rows);
    for (std::size_t k0 = 0; k0 < inner; k0 += tile) {
      const std::size_t k1 = std::min(k0 + tile, inner);
      for (std::size_t j0 = 0; j0 < cols; j0 += tile) {
        const std::size_t j1 = std::min(j0 + tile, cols);
        for (std::size_t i = i0; i < i1; ++i) {
          double* ri = r.row(i).data();
          const auto xi = x.row(i);
          for (std::size_t k = k0; k < k1; ++k) {
            const double xik = xi[k];
            const double* yk = y.row(k).data();
            for (std::size_t j = j0; j < j1; ++j) ri[j] += xik * yk[j];
          }
        }
      }
    }
  }
}

void symmetrize(Matrix& r) {
  for (std::size_t i = 0; i < r.rows(); ++i)
    for (std::size_t j = i + 1; j < r.cols(); ++j) {
      const double s = 0.5 * (r(i, j) + r(j, i));
      r(i, j) = s;
      r(j, i) = s;
    }
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

KernelVariant KernelVariant::gemm_blocked(std::size_t tile) {
  if (tile < 8)
    throw InvalidArgument("gemm_blocked tile must be >= 8 (got " + std::to_string(tile) + ")");
  return KernelVariant(Kind::gemm_blocked, tile);
}

KernelVariant KernelVariant::parse(const std::string& tag) {
  if (tag == "naive") return naive();
  if (tag == "gemm") return gemm();
  std::string_view tile_text;
  if (tag.starts_with("gemm_blocked:")) tile_text = std::string_view(tag).substr(13);
  else if (tag.starts_with("blocked")) tile_text = std::string_view(tag).substr(7);
  else throw InvalidArgument("unknown kernel variant '" + tag + "'");
  return gemm_blocked(parse_u64(tile_text, "kernel tile"));
}

std::string KernelVariant::name() const {
  switch (kind_) {
    case Kind::naive: return "naive";
    case Kind::gemm: return "gemm";
    case Kind::gemm_blocked: return "gemm_blocked:" + std::to_string(tile_);
  }
  return "?";
}

void check_pole_distance(std::span<const double> poles, double e,
                         std::optional<std::size_t> mesh_index) {
  for (std::size_t k = 0; k < poles.size(); ++k) {
    const double d = std::abs(e - poles[k]);
    if (d < kPoleGuard) throw PoleProximity(k, d, mesh_index);
  }
}

RMatrix form_rmatrix_naive(const SurfaceAmplitudes& w, std::span<const double> poles, double e) {
  check_shapes(w, poles);
  check_pole_distance(poles, e);
  RMatrix r{Matrix(w.n_channels(), w.n_channels()), e};
  naive_into(w.w, poles, e, r.entries);
  return r;
}

RMatrixEvaluator::RMatrixEvaluator(const SurfaceAmplitudes& w, std::span<const double> poles,
                                   KernelVariant variant)
    : w_(w.w), poles_(poles), variant_(variant) {
  check_shapes(w, poles);
  if (variant_.kind() != KernelVariant::Kind::naive) {
    y_ = w_.transposed();
    x_ = Matrix(w_.rows(), w_.cols());
  }
}

void RMatrixEvaluator::evaluate(double e, Matrix& r) {
  const std::size_t nchan = w_.rows();
  if (r.rows() != nchan || r.cols() != nchan) r = Matrix(nchan, nchan);
  if (variant_.kind() == KernelVariant::Kind::naive) {
    naive_into(w_, poles_, e, r);
    return;
  }
  const std::size_t n = w_.cols();
  for (std::size_t i = 0; i < nchan; ++i) {
    const auto wi = w_.row(i);
    const auto xi = x_.row(i);
    for (std::size_t k = 0; k < n; ++k) xi[k] = wi[k] / (e - poles_[k]);
  }
  if (variant_.kind() == KernelVariant::Kind::gemm) gemm_into(x_, y_, r);
  else gemm_blocked_into(x_, y_, r, variant_.tile());
  symmetrize(r);
}

RMatrix form_rmatrix_gemm(const SurfaceAmplitudes& w, std::span<const double> poles, double e,
                          const KernelVariant& variant) {
  check_shapes(w, poles);
  check_pole_distance(poles, e);
  RMatrixEvaluator eval(w, poles, variant);
  RMatrix r{Matrix(w.n_channels(), w.n_channels()), e};
  eval.evaluate(e, r.entries);
  return r;
}

void for_each_rmatrix(const SurfaceAmplitudes& w, std::span<const double> poles,
                      const EnergyMesh& mesh, const KernelVariant& variant,
                      std::size_t n_workers,
                      const std::function<void(std::size_t, const Matrix&)>& sink) {
  check_shapes(w, poles);
  for (std::size_t i = 0; i < mesh.size(); ++i) check_pole_distance(poles, mesh[i], i);

  const auto ranges = partition_range(mesh.size(), std::max<std::size_t>(1, n_workers));
  run_on_ranges(ranges, [&](std::size_t, IndexRange range) {
    RMatrixEvaluator eval(w, poles, variant);
    Matrix r(w.n_channels(), w.n_channels());
    for (std::size_t i = range.begin; i < range.end; ++i) {
      eval.evaluate(mesh[i], r);
      sink(i, r);
    }
  });
}

std::vector<RMatrix> form_rmatrix_batch(const SurfaceAmplitudes& w, std::span<const double> poles,
                                        const EnergyMesh& mesh, const KernelVariant& variant,
                                        std::size_t n_workers) {
  std::vector<RMatrix> out(mesh.size());
  for_each_rmatrix(w, poles, mesh, variant, n_workers, [&](std::size_t i, const Matrix& r) {
    out[i] = RMatrix{r, mesh[i]};
  });
  return out;
}

double relative_frobenius(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidArgument("relative_frobenius: shape mismatch");
  double diff = 0.0, ref = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    diff += (av[i] - bv[i]) * (av[i] - bv[i]);
    ref += bv[i] * bv[i];
  }
  return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
}

std::string KernelShape::name() const {
  return std::to_string(n_channels) + "x" + std::to_string(n_poles);
}

KernelShape parse_shape(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw InvalidArgument("shape must look like 267x258: '" + text + "'");
  KernelShape s{parse_u64(std::string_view(text).substr(0, x), "shape rows"),
                parse_u64(std::string_view(text).substr(x + 1), "shape cols")};
  if (s.n_channels == 0 || s.n_poles == 0) throw InvalidArgument("shape dimensions must be positive");
  return s;
}

std::vector<KernelBenchRow> bench_kernels(std::span<const KernelShape> shapes,
                                          std::span<const KernelVariant> variants,
                                          std::size_t repeats, std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  if (repeats == 0) throw InvalidArgument("bench_kernels: repeats must be positive");
  const double tick = static_cast<double>(Clock::period::num) / Clock::period::den;

  auto time_variant = [&](RMatrixEvaluator& eval, double e, Matrix& r) {
    std::vector<double> samples;
    samples.reserve(repeats);
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      const auto t0 = Clock::now();
      eval.evaluate(e, r);
      const auto t1 = Clock::now();
      samples.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    return median_of(std::move(samples));
  };

  std::vector<KernelBenchRow> rows;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    const KernelShape shape = shapes[s];
    synth::Rng rng(seed, s);
    SurfaceAmplitudes w{Matrix(shape.n_channels, shape.n_poles)};
    const double scale = 1.0 / std::sqrt(static_cast<double>(shape.n_poles));
    for (std::size_t i = 0; i < shape.n_channels; ++i)
      for (std::size_t k = 0; k < shape.n_poles; ++k) w.w(i, k) = scale * rng.normal();
    std::vector<double> poles(shape.n_poles);
    for (double& p : poles) p = -2.0 + 10.0 * rng.uniform();

    // Evaluate mid-gap inside the spectrum, where terms of both signs mix.
    std::vector<double> sorted = poles;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    const double e = sorted.size() > 1 ? 0.5 * (sorted[mid - 1] + sorted[mid]) : sorted[0] + 1.0;
    check_pole_distance(poles, e);

    Matrix reference(shape.n_channels, shape.n_channels);
    naive_into(w.w, poles, e, reference);

    RMatrixEvaluator naive_eval(w, poles, KernelVariant::naive());
    Matrix r;
    const double naive_median = time_variant(naive_eval, e, r);

    for (const KernelVariant& v : variants) {
      RMatrixEvaluator eval(w, poles, v);
      eval.evaluate(e, r);
      const double err = relative_frobenius(r, reference);
      if (!(err <= kEquivalenceTolerance)) {
        std::ostringstream os;
        os << "bench_kernels: variant " << v.name() << " on " << shape.name()
           << " disagrees with naive kernel (relative error " << err << ")";
        throw Error(os.str());
      }
      const double median =
          v.kind() == KernelVariant::Kind::naive ? naive_median : time_variant(eval, e, r);
      rows.push_back({shape, v.name(), median,
                      median > 0.0 ? naive_median / median : 0.0, err, median < 100.0 * tick});
    }
  }
  return rows;
}

std::string render_kernel_csv(std::span<const KernelBenchRow> rows) {
  std::ostringstream os;
  os << "shape,variant,median_seconds,ratio_vs_naive\n";
  for (const auto& r : rows)
    os << r.shape.name() << ',' << r.variant << ',' << format_roundtrip(r.median_seconds) << ','
       << format_roundtrip(r.ratio_vs_naive) << '\n';
  return os.str();
}

}  // namespace rmx::kernel
