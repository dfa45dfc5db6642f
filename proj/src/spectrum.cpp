#include "rmx/spectrum.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace rmx::spectrum {

namespace {

bool collides(const EnergyMesh& mesh, const std::vector<double>& sorted_poles) {
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double e = mesh[i];
    auto it = std::lower_bound(sorted_poles.begin(), sorted_poles.end(), e);
    if (it != sorted_poles.end() && std::abs(*it - e) < kernel::kPoleGuard) return true;
    if (it != sorted_poles.begin() && std::abs(*std::prev(it) - e) < kernel::kPoleGuard)
      return true;
  }
  return false;
}

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<Vec4, 4>;

// Gaussian elimination with partial pivoting; false if singular.
bool solve4(Mat4 a, Vec4 b, Vec4& x) {
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (a[pivot][col] == 0.0 || !std::isfinite(a[pivot][col])) return false;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (int r = 3; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 4; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return true;
}

}  // namespace

EnergyMesh mesh_avoiding_poles(double start, double stop, std::size_t n_points,
                               std::span<const double> poles) {
  EnergyMesh mesh(start, stop, n_points);
  std::vector<double> sorted(poles.begin(), poles.end());
  std::sort(sorted.begin(), sorted.end());
  if (!collides(mesh, sorted)) return mesh;

  const double shift = 0.5 * mesh.spacing();
  EnergyMesh shifted(start + shift, stop + shift, n_points);
  if (collides(shifted, sorted)) {
    std::ostringstream os;
    os << "mesh of " << n_points << " points on [" << start << ", " << stop
       << "] hits a pole before and after a half-spacing shift; change the point count";
    throw MeshCollision(os.str());
  }
  return shifted;
}

double response_of(const Matrix& r) {
  double sum = 0.0;
  for (double v : r.values()) sum += v * v;
  return sum;
}

Spectrum sweep_response(const SurfaceAmplitudes& w, std::span<const double> poles,
                        const EnergyMesh& mesh, const kernel::KernelVariant& variant,
                        std::size_t n_workers) {
  Spectrum s{mesh, std::vector<double>(mesh.size()), "response"};
  kernel::for_each_rmatrix(w, poles, mesh, variant, n_workers,
                           [&](std::size_t i, const Matrix& r) { s.values[i] = response_of(r); });
  return s;
}

double fwhm_to_sigma(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2)); }

Spectrum convolve_gaussian(const Spectrum& s, double fwhm) {
  s.validate();
  const double h = s.mesh.spacing();
  if (!(fwhm >= 2.0 * h)) {
    std::ostringstream os;
    os << "Gaussian FWHM " << fwhm << " Ry is below two mesh spacings (" << 2.0 * h << " Ry)";
    throw UnderResolvedKernel(os.str());
  }
  const double sigma = fwhm_to_sigma(fwhm);
  const auto half = static_cast<std::ptrdiff_t>(std::floor(5.0 * sigma / h));

  std::vector<double> g(2 * half + 1);
  for (std::ptrdiff_t m = -half; m <= half; ++m) {
    const double x = static_cast<double>(m) * h / sigma;
    g[m + half] = std::exp(-0.5 * x * x);
  }

  const auto n = static_cast<std::ptrdiff_t>(s.values.size());
  Spectrum out{s.mesh, std::vector<double>(s.values.size()), s.label};
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max(-half, -i);
    const std::ptrdiff_t hi = std::min(half, n - 1 - i);
    double norm = 0.0;
    for (std::ptrdiff_t m = lo; m <= hi; ++m) norm += g[m + half];
    // Accumulate deviations from the centre value: exact for constant input.
    const double centre = s.values[i];
    double acc = 0.0;
    for (std::ptrdiff_t m = lo; m <= hi; ++m) acc += g[m + half] * (s.values[i + m] - centre);
    out.values[i] = centre + acc / norm;
  }
  return out;
}

Spectrum admix(std::span<const Spectrum> spectra, std::span<const double> weights) {
  if (spectra.empty()) throw InvalidArgument("admix: no spectra");
  if (spectra.size() != weights.size()) throw InvalidArgument("admix: one weight per spectrum");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("admix: weights must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument("admix: weights sum to zero");
  for (const auto& s : spectra) {
    s.validate();
    if (!(s.mesh == spectra.front().mesh))
      throw InvalidArgument("admix: spectrum '" + s.label + "' is on a different mesh");
  }

  Spectrum out{spectra.front().mesh, std::vector<double>(spectra.front().values.size(), 0.0),
               "admixture"};
  for (std::size_t m = 0; m < spectra.size(); ++m) {
    const double f = weights[m] / total;
    const auto& v = spectra[m].values;
    for (std::size_t i = 0; i < v.size(); ++i) out.values[i] += f * v[i];
  }
  return out;
}

std::vector<double> rydberg_series(double threshold, double quantum_defect, double z_eff,
                                   int n_min, int n_max) {
  if (!std::isfinite(threshold)) throw InvalidArgument("rydberg_series: threshold must be finite");
  if (!(z_eff > 0.0)) throw InvalidArgument("rydberg_series: z_eff must be positive");
  if (n_min > n_max) throw InvalidArgument("rydberg_series: empty n range");
  if (!(n_min > quantum_defect)) {
    std::ostringstream os;
    os << "rydberg_series: n = " << n_min << " does not exceed quantum defect " << quantum_defect;
    throw InvalidArgument(os.str());
  }
  std::vector<double> e;
  e.reserve(static_cast<std::size_t>(n_max - n_min + 1));
  for (int n = n_min; n <= n_max; ++n) {
    const double nu = n - quantum_defect;
    e.push_back(threshold - z_eff * z_eff / (nu * nu));
  }
  return e;
}

double lorentzian(double e, double center, double gamma, double peak, double background) {
  const double hw = 0.5 * gamma;
  const double dx = e - center;
  return background + peak * hw * hw / (dx * dx + hw * hw);
}

ResonanceFit fit_resonance(const Spectrum& s, double window_low, double window_high) {
  s.validate();
  std::vector<double> x, y;
  for (std::size_t i = 0; i < s.mesh.size(); ++i) {
    const double e = s.mesh[i];
    if (e >= window_low && e <= window_high) {
      x.push_back(e);
      y.push_back(s.values[i]);
    }
  }
  const std::size_t n = x.size();
  if (n < 7) {
    std::ostringstream os;
    os << "fit window [" << window_low << ", " << window_high << "] holds " << n
       << " mesh points, need at least 7";
    throw InvalidArgument(os.str());
  }

  std::size_t n_max = 0, peak_at = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (y[i] > y[i - 1] && y[i] >= y[i + 1]) {
      ++n_max;
      peak_at = i;
    }
  }
  if (n_max != 1) {
    std::ostringstream os;
    os << "fit window [" << window_low << ", " << window_high << "] has " << n_max
       << " interior maxima, need exactly one";
    throw AmbiguousWindow(os.str());
  }

  // Work in offsets from the sampled peak to keep the centre well scaled.
  const double origin = x[peak_at];
  for (double& xi : x) xi -= origin;

  const double bg0 = 0.5 * (y.front() + y.back());
  const double amp0 = y[peak_at] - bg0;
  const double level = bg0 + 0.5 * amp0;
  auto crossing = [&](int dir) {
    std::size_t i = peak_at;
    while (true) {
      const std::size_t next = dir < 0 ? i - 1 : i + 1;
      if (y[next] <= level) {
        const double t = (y[i] - level) / (y[i] - y[next]);
        return x[i] + t * (x[next] - x[i]);
      }
      i = next;
      if (i == 0 || i == n - 1) return x[i];
    }
  };
  const double spacing = s.mesh.spacing();
  const double gamma0 = std::max(crossing(+1) - crossing(-1), spacing);

  // p = {centre offset, half width, peak, background}
  Vec4 p{0.0, 0.5 * gamma0, amp0, bg0};
  auto residuals = [&](const Vec4& q, std::vector<double>& r) {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = x[i] - q[0];
      const double hw2 = q[1] * q[1];
      r[i] = y[i] - (q[3] + q[2] * hw2 / (dx * dx + hw2));
      cost += r[i] * r[i];
    }
    return cost;
  };

  std::vector<double> r(n), r_trial(n);
  double cost = residuals(p, r);
  double lambda = 1e-3;
  constexpr int kMaxIterations = 500;
  bool converged = false;
  int iter = 0;

  auto to_fit = [&](const Vec4& q, double c, int it) {
    return ResonanceFit{origin + q[0], 2.0 * std::abs(q[1]), q[2], q[3],
                        std::sqrt(c / static_cast<double>(n)), it};
  };

  for (; iter < kMaxIterations && !converged; ++iter) {
    Mat4 jtj{};
    Vec4 jtr{};
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = x[i] - p[0];
      const double hw = p[1];
      const double den = dx * dx + hw * hw;
      const double den2 = den * den;
      const Vec4 j{p[2] * hw * hw * 2.0 * dx / den2, p[2] * 2.0 * hw * dx * dx / den2,
                   hw * hw / den, 1.0};
      for (int a = 0; a < 4; ++a) {
        jtr[a] += j[a] * r[i];
        for (int b = 0; b < 4; ++b) jtj[a][b] += j[a] * j[b];
      }
    }

    bool stepped = false;
    while (lambda < 1e12) {
      Mat4 a = jtj;
      for (int d = 0; d < 4; ++d) a[d][d] += lambda * jtj[d][d];
      Vec4 delta{};
      if (!solve4(a, jtr, delta)) {
        lambda *= 10.0;
        continue;
      }
      Vec4 trial{p[0] + delta[0], p[1] + delta[1], p[2] + delta[2], p[3] + delta[3]};
      const double trial_cost = residuals(trial, r_trial);
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        double rel_step = 0.0;
        const Vec4 scale{std::abs(p[1]), std::abs(p[1]), std::abs(p[2]) + std::abs(p[3]),
                         std::abs(p[2]) + std::abs(p[3])};
        for (int d = 0; d < 4; ++d)
          rel_step = std::max(rel_step, std::abs(delta[d]) / (scale[d] > 0 ? scale[d] : 1.0));
        const double improvement = cost - trial_cost;
        p = trial;
        std::swap(r, r_trial);
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-15);
        stepped = true;
        if (rel_step < 1e-13 || improvement <= 1e-15 * cost) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    // No downhill step at any damping: the iterate is stationary to rounding.
    if (!stepped) converged = true;
  }

  const ResonanceFit fit = to_fit(p, cost, iter);
  if (!converged || !std::isfinite(cost) || !(fit.gamma > 0.0)) {
    std::ostringstream os;
    os << "Lorentzian fit did not converge after " << iter << " iterations";
    throw FitDiverged(os.str(), fit);
  }
  return fit;
}

std::string format_spectrum_csv(const Spectrum& s) {
  s.validate();
  std::ostringstream os;
  os << "# label=" << s.label << '\n'
     << "# mesh_start=" << format_roundtrip(s.mesh.start())
     << ",mesh_stop=" << format_roundtrip(s.mesh.stop()) << ",mesh_points=" << s.mesh.size()
     << '\n'
     << "energy_ry,energy_ev,value\n";
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double e = s.mesh[i];
    os << format_roundtrip(e) << ',' << format_roundtrip(ry_to_ev(e)) << ','
       << format_roundtrip(s.values[i]) << '\n';
  }
  return os.str();
}

Spectrum parse_spectrum_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line, label;
  std::optional<double> start, stop;
  std::optional<std::size_t> points;
  std::vector<double> energies, values;
  bool header_seen = false;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string body = line.substr(line.find_first_not_of("# "));
      if (body.starts_with("label=")) {
        label = body.substr(6);
      } else if (body.starts_with("mesh_start=")) {
        std::istringstream fields(body);
        std::string field;
        while (std::getline(fields, field, ',')) {
          const auto eq = field.find('=');
          if (eq == std::string::npos) continue;
          const std::string key = field.substr(0, eq);
          const std::string_view value = std::string_view(field).substr(eq + 1);
          if (key == "mesh_start") start = parse_double(value, key);
          else if (key == "mesh_stop") stop = parse_double(value, key);
          else if (key == "mesh_points") points = parse_u64(value, key);
        }
      }
      continue;
    }
    if (!header_seen) {
      if (line != "energy_ry,energy_ev,value")
        throw InvalidArgument("spectrum CSV: expected header energy_ry,energy_ev,value");
      header_seen = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw InvalidArgument("spectrum CSV: malformed row '" + line + "'");
    energies.push_back(parse_double(std::string_view(line).substr(0, c1), "energy_ry"));
    values.push_back(parse_double(std::string_view(line).substr(c2 + 1), "value"));
  }
  if (energies.size() < 2) throw InvalidArgument("spectrum CSV: need at least two rows");

  EnergyMesh mesh = (start && stop && points)
                        ? EnergyMesh(*start, *stop, *points)
                        : EnergyMesh(energies.front(), energies.back(), energies.size());
  if (mesh.size() != values.size())
    throw InvalidArgument("spectrum CSV: row count disagrees with mesh_points");
  for (std::size_t i = 0; i < energies.size(); ++i) {
    if (std::abs(energies[i] - mesh[i]) > 1e-9 * (1.0 + std::abs(mesh[i])))
      throw InvalidArgument("spectrum CSV: energy column is not the declared uniform mesh (row " +
                            std::to_string(i) + ")");
  }
  Spectrum s{mesh, std::move(values), label};
  s.validate();
  return s;
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write spectrum " + path.string());
  out << format_spectrum_csv(s);
  if (!out) throw Error("write failed for spectrum " + path.string());
}

Spectrum read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open spectrum " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spectrum_csv(buf.str());
}

}  // namespace rmx::spectrum
