// Energy meshes, response sweeps and spectral post-processing: Gaussian
// instrument broadening, statistical admixture, Rydberg series positions and
// Lorentzian resonance fits.
//
// The swept response is a surrogate observable, the squared Frobenius norm
// of R(E). It keeps the pole structure of the R-matrix, which is what the
// mesh and broadening machinery has to resolve; it is not a physical cross
// section.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmx/core.hpp"
#include "rmx/kernel.hpp"

namespace rmx::spectrum {

class MeshCollision : public Error {
 public:
  using Error::Error;
};

class UnderResolvedKernel : public Error {
 public:
  using Error::Error;
};

class AmbiguousWindow : public Error {
 public:
  using Error::Error;
};

struct ResonanceFit {
  double center = 0.0;      // Ry
  double gamma = 0.0;       // FWHM, Ry
  double peak = 0.0;
  double background = 0.0;
  double rms_residual = 0.0;
  int iterations = 0;
};

class FitDiverged : public Error {
 public:
  FitDiverged(const std::string& what, ResonanceFit best) : Error(what), best_(best) {}
  const ResonanceFit& best() const { return best_; }

 private:
  ResonanceFit best_;
};

/// Uniform mesh on [start, stop]. If any point lands inside the pole guard,
/// the whole mesh moves up by half a spacing once; a second collision throws
/// MeshCollision.
EnergyMesh mesh_avoiding_poles(double start, double stop, std::size_t n_points,
                               std::span<const double> poles);

/// values[i] = sum_ij R_ij(E_i)^2.
Spectrum sweep_response(const SurfaceAmplitudes& w, std::span<const double> poles,
                        const EnergyMesh& mesh, const kernel::KernelVariant& variant,
                        std::size_t n_workers = 1);

/// Frobenius norm squared, summed row-major.
double response_of(const Matrix& r);

double fwhm_to_sigma(double fwhm);

/// Normalized Gaussian broadening truncated at +-5 sigma. Near the edges the
/// partial kernel is renormalized, so a constant spectrum stays constant.
Spectrum convolve_gaussian(const Spectrum& s, double fwhm);

/// Weighted mix over spectra sharing one mesh; weights are normalized to
/// sum 1 first, so 2:1 means 2/3 and 1/3.
Spectrum admix(std::span<const Spectrum> spectra, std::span<const double> weights);

/// E_n = threshold - z_eff^2 / (n - mu)^2 (Ry) for n in [n_min, n_max].
std::vector<double> rydberg_series(double threshold, double quantum_defect, double z_eff,
                                   int n_min, int n_max);

/// background + peak (G/2)^2 / ((E - center)^2 + (G/2)^2)
double lorentzian(double e, double center, double gamma, double peak, double background);

/// Least-squares Lorentzian fit (Levenberg-Marquardt) over the mesh points
/// in [window_low, window_high]. The window needs at least 7 points and
/// exactly one interior local maximum.
ResonanceFit fit_resonance(const Spectrum& s, double window_low, double window_high);

// Spectrum CSV:
//   # label=<text>
//   # mesh_start=<Ry>,mesh_stop=<Ry>,mesh_points=<n>
//   energy_ry,energy_ev,value
//   ...
std::string format_spectrum_csv(const Spectrum& s);
Spectrum parse_spectrum_csv(const std::string& text);
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s);
Spectrum read_spectrum_csv(const std::filesystem::path& path);

}  // namespace rmx::spectrum
