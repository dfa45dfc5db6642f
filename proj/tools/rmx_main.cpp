// rmx: command-line front end for the R-matrix pipeline.
//
// Every subcommand reads files, calls one library routine and writes files.
// Exit status: 0 success, 1 pipeline error, 2 usage error.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rmx/core.hpp"
#include "rmx/eigen.hpp"
#include "rmx/kernel.hpp"
#include "rmx/rmxio.hpp"
#include "rmx/sched.hpp"
#include "rmx/spectrum.hpp"
#include "rmx/synth.hpp"

namespace {

using namespace rmx;

void log(const std::string& msg) { std::cerr << "rmx: " << msg << '\n'; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed for " + path);
}

void log_stripe(const std::string& path, std::uint64_t bytes) {
  const auto policy = io::StripePolicy::from_environment();
  log("wrote " + path + " (" + std::to_string(bytes) + " bytes, stripe count " +
      std::to_string(io::stripe_count_for_size(bytes, policy)) + ")");
}

struct GenArgs {
  std::string case_file;
  std::uint32_t channels = 20;
  std::uint32_t poles = 200;
  std::uint64_t seed = 7;
  std::optional<std::uint64_t> boundary_seed;
  double emin = -2.0;
  double emax = 8.0;
  std::string out = "case.h";
  std::string dipole_out;
  std::size_t dipole_states = 10;
};

void cmd_gen(const GenArgs& a) {
  CaseDefinition c;
  if (!a.case_file.empty()) {
    c = synth::read_case_file(a.case_file);
  } else {
    c.n_channels = a.channels;
    c.n_poles = a.poles;
    c.pole_energy_range = {a.emin, a.emax};
    c.hamiltonian_seed = a.seed;
    c.boundary_seed = a.boundary_seed.value_or(a.seed);
  }
  c.validate();
  const auto es = eigen::diagonalize_block(synth::build_hamiltonian(c), "hamiltonian");
  const auto w = eigen::surface_amplitudes(synth::build_boundary_projector(c), es);
  log_stripe(a.out, io::write_hfile(a.out, c, es, w));
  if (!a.dipole_out.empty()) {
    const auto states = synth::build_dipole_states(c, a.dipole_states);
    log_stripe(a.dipole_out, io::write_dipole(a.dipole_out, c.n_poles, states));
  }
}

struct DiagArgs {
  std::string in;
  std::string out;
};

int cmd_diag(const DiagArgs& a) {
  const auto stored = io::read_hfile(a.in);
  const auto h = synth::build_hamiltonian(stored.case_def);
  const auto es = eigen::diagonalize_block(h, "hamiltonian");
  const auto w = eigen::surface_amplitudes(synth::build_boundary_projector(stored.case_def), es);

  double value_diff = 0.0;
  for (std::size_t k = 0; k < es.size(); ++k)
    value_diff = std::max(value_diff, std::abs(es.eigenvalues[k] - stored.eigen.eigenvalues[k]));
  const double orth = orthogonality_error(stored.eigen.eigenvectors);
  const double residual = eigen::residual_error(h.to_dense(), stored.eigen);
  std::ostringstream os;
  os << "max |dE| = " << value_diff << " Ry, orthogonality = " << orth
     << ", residual = " << residual;
  log(os.str());

  if (!a.out.empty()) log_stripe(a.out, io::write_hfile(a.out, stored.case_def, es, w));
  const bool ok = value_diff <= 1e-10 && orth <= eigen::kOrthogonalityTolerance &&
                  residual <= eigen::kResidualTolerance;
  if (!ok) {
    log("stored eigendata fails the check against the regenerated Hamiltonian");
    return 1;
  }
  return 0;
}

struct SweepArgs {
  std::string in = "case.h";
  std::optional<double> start, stop;
  std::size_t points = 4096;
  std::size_t workers = 1;
  std::string variant = "gemm";
  std::string read_mode = "root";
  std::string out = "sweep.csv";
};

void cmd_sweep(const SweepArgs& a) {
  const auto mode = io::parse_read_mode(a.read_mode);
  const auto data = io::read_hfile_distributed(a.in, mode, a.workers).front();
  const auto& poles = data.eigen.eigenvalues;
  const double start = a.start.value_or(data.case_def.pole_energy_range.low);
  const double stop = a.stop.value_or(data.case_def.pole_energy_range.high);
  const auto mesh = spectrum::mesh_avoiding_poles(start, stop, a.points, poles);
  const auto s = spectrum::sweep_response(data.amplitudes, poles, mesh,
                                          kernel::KernelVariant::parse(a.variant), a.workers);
  spectrum::write_spectrum_csv(a.out, s);
  log("wrote " + a.out + " (" + std::to_string(mesh.size()) + " points)");
}

struct ConvolveArgs {
  std::string in, out = "convolved.csv";
  double fwhm_mev = 60.0;
};

void cmd_convolve(const ConvolveArgs& a) {
  const auto s = spectrum::read_spectrum_csv(a.in);
  const double fwhm_ry = ev_to_ry(a.fwhm_mev * 1e-3);
  auto out = spectrum::convolve_gaussian(s, fwhm_ry);
  out.label = s.label + " convolved " + format_roundtrip(a.fwhm_mev) + " meV FWHM";
  spectrum::write_spectrum_csv(a.out, out);
}

struct AdmixArgs {
  std::vector<std::string> in;
  std::vector<double> weights;
  std::string out = "admix.csv";
};

void cmd_admix(const AdmixArgs& a) {
  std::vector<Spectrum> spectra;
  for (const auto& path : a.in) spectra.push_back(spectrum::read_spectrum_csv(path));
  spectrum::write_spectrum_csv(a.out, spectrum::admix(spectra, a.weights));
}

struct FitArgs {
  std::string in, out = "fit.txt";
  std::vector<double> window;
};

void cmd_fit(const FitArgs& a) {
  if (a.window.size() != 2) throw InvalidArgument("--window takes lo,hi");
  const auto fit =
      spectrum::fit_resonance(spectrum::read_spectrum_csv(a.in), a.window[0], a.window[1]);
  std::ostringstream os;
  os << "center_ry=" << format_roundtrip(fit.center) << '\n'
     << "center_ev=" << format_roundtrip(ry_to_ev(fit.center)) << '\n'
     << "gamma_ry=" << format_roundtrip(fit.gamma) << '\n'
     << "gamma_mev=" << format_roundtrip(ry_to_ev(fit.gamma) * 1e3) << '\n'
     << "peak=" << format_roundtrip(fit.peak) << '\n'
     << "background=" << format_roundtrip(fit.background) << '\n'
     << "rms_residual=" << format_roundtrip(fit.rms_residual) << '\n';
  spit(a.out, os.str());
}

struct ReduceArgs {
  std::string in, out = "reduced.d";
  std::vector<std::size_t> keep;
};

void cmd_reduce(const ReduceArgs& a) {
  log_stripe(a.out, io::reduce_dipole(a.in, a.keep, a.out));
}

struct BenchScaleArgs {
  std::string in = "case.h";
  std::size_t points = 200000;
  std::vector<std::size_t> workers{1, 2, 4};
  std::size_t repeats = 3;
  std::string variant = "gemm";
  std::string out = "scaling.csv";
};

void cmd_bench_scale(const BenchScaleArgs& a) {
  const auto data = io::read_hfile(a.in);
  const auto& poles = data.eigen.eigenvalues;
  const auto mesh = spectrum::mesh_avoiding_poles(data.case_def.pole_energy_range.low,
                                                  data.case_def.pole_energy_range.high, a.points,
                                                  poles);
  sched::ScalingOptions options;
  options.variant = kernel::KernelVariant::parse(a.variant);
  options.repeats = a.repeats;
  const auto report = sched::run_scaling_bench(data.amplitudes, poles, mesh, a.workers, options);
  spit(a.out, sched::render_report(report, sched::ReportFormat::csv));
  std::cout << sched::render_report(report, sched::ReportFormat::text);
}

struct BenchKernelArgs {
  std::vector<std::string> shapes{"267x258", "308x300"};
  std::vector<std::string> variants{"naive", "gemm", "gemm_blocked:16"};
  std::size_t repeats = 3;
  std::string out = "kernels.csv";
};

void cmd_bench_kernel(const BenchKernelArgs& a) {
  std::vector<kernel::KernelShape> shapes;
  for (const auto& s : a.shapes) shapes.push_back(kernel::parse_shape(s));
  std::vector<kernel::KernelVariant> variants;
  for (const auto& v : a.variants) variants.push_back(kernel::KernelVariant::parse(v));
  const auto rows = kernel::bench_kernels(shapes, variants, a.repeats);
  for (const auto& r : rows)
    if (r.flagged)
      log("warning: " + r.shape.name() + " " + r.variant + " median below 100 timer ticks");
  spit(a.out, kernel::render_kernel_csv(rows));
  std::cout << kernel::render_kernel_csv(rows);
}

struct ReportArgs {
  std::string in;
  std::string format = "text";
  std::string out;
};

void cmd_report(const ReportArgs& a) {
  const auto timings = sched::parse_timings_csv(slurp(a.in));
  const auto text = sched::render_report(sched::TimingReport::from_timings(timings),
                                         sched::parse_report_format(a.format));
  if (a.out.empty()) std::cout << text;
  else spit(a.out, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rmx - outer-region R-matrix pipeline"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* sc_gen = app.add_subcommand("gen", "Generate a synthetic case and write its H-file");
  sc_gen->add_option("--case", gen.case_file, "Case definition file (key = value)");
  sc_gen->add_option("--channels", gen.channels, "Number of channels");
  sc_gen->add_option("--poles", gen.poles, "Number of poles (Hamiltonian size)");
  sc_gen->add_option("--seed", gen.seed, "Hamiltonian seed");
  sc_gen->add_option("--boundary-seed", gen.boundary_seed, "Boundary seed (default: --seed)");
  sc_gen->add_option("--emin", gen.emin, "Lowest pole energy (Ry)");
  sc_gen->add_option("--emax", gen.emax, "Highest pole energy (Ry)");
  sc_gen->add_option("--out", gen.out, "H-file to write");
  sc_gen->add_option("--dipole-out", gen.dipole_out, "Also write a synthetic D-file");
  sc_gen->add_option("--dipole-states", gen.dipole_states, "States in the D-file");

  DiagArgs diag;
  auto* sc_diag = app.add_subcommand("diag", "Check stored eigendata against a fresh solve");
  sc_diag->add_option("--in", diag.in, "H-file")->required();
  sc_diag->add_option("--out", diag.out, "Write regenerated eigendata here");

  SweepArgs sweep;
  auto* sc_sweep = app.add_subcommand("sweep", "Sweep the response over an energy mesh");
  sc_sweep->add_option("--in", sweep.in, "H-file");
  sc_sweep->add_option("--start", sweep.start, "Mesh start (Ry)");
  sc_sweep->add_option("--stop", sweep.stop, "Mesh stop (Ry)");
  sc_sweep->add_option("--points", sweep.points, "Mesh points")->check(CLI::Range(2UL, 1UL << 40));
  sc_sweep->add_option("--workers", sweep.workers, "Worker threads")->check(CLI::PositiveNumber);
  sc_sweep->add_option("--variant", sweep.variant, "naive | gemm | gemm_blocked:<tile>");
  sc_sweep->add_option("--read-mode", sweep.read_mode, "H-file read mode: root | all");
  sc_sweep->add_option("--out", sweep.out, "Spectrum CSV to write");

  ConvolveArgs conv;
  auto* sc_conv = app.add_subcommand("convolve", "Gaussian instrument broadening");
  sc_conv->add_option("--in", conv.in, "Spectrum CSV")->required();
  sc_conv->add_option("--fwhm-mev", conv.fwhm_mev, "Gaussian FWHM (meV)");
  sc_conv->add_option("--out", conv.out, "Spectrum CSV to write");

  AdmixArgs mix;
  auto* sc_mix = app.add_subcommand("admix", "Statistical admixture of spectra");
  sc_mix->add_option("--in", mix.in, "Spectrum CSVs (repeat or comma-separate)")
      ->required()
      ->delimiter(',');
  sc_mix->add_option("--weights", mix.weights, "Weights, e.g. 2,1")->required()->delimiter(',');
  sc_mix->add_option("--out", mix.out, "Spectrum CSV to write");

  FitArgs fit;
  auto* sc_fit = app.add_subcommand("fit", "Fit a Lorentzian resonance");
  sc_fit->add_option("--in", fit.in, "Spectrum CSV")->required();
  sc_fit->add_option("--window", fit.window, "lo,hi (Ry)")->required()->delimiter(',');
  sc_fit->add_option("--out", fit.out, "Fit result file (key=value)");

  ReduceArgs red;
  auto* sc_red = app.add_subcommand("reduce", "Keep selected initial states of a D-file");
  sc_red->add_option("--in", red.in, "D-file")->required();
  sc_red->add_option("--keep", red.keep, "State indices, e.g. 0,1")->required()->delimiter(',');
  sc_red->add_option("--out", red.out, "Reduced D-file");

  BenchScaleArgs bs;
  auto* sc_bs = app.add_subcommand("bench-scale", "Strong-scaling timing of the sweep");
  sc_bs->add_option("--in", bs.in, "H-file");
  sc_bs->add_option("--points", bs.points, "Mesh points");
  sc_bs->add_option("--workers", bs.workers, "Worker counts, ascending")->delimiter(',');
  sc_bs->add_option("--repeats", bs.repeats, "Timed repeats per count");
  sc_bs->add_option("--variant", bs.variant, "Kernel variant");
  sc_bs->add_option("--out", bs.out, "Report CSV");

  BenchKernelArgs bk;
  auto* sc_bk = app.add_subcommand("bench-kernel", "Time R-matrix kernel variants");
  sc_bk->add_option("--shapes", bk.shapes, "Shapes, e.g. 267x258,308x300")->delimiter(',');
  sc_bk->add_option("--variants", bk.variants, "Variants")->delimiter(',');
  sc_bk->add_option("--repeats", bk.repeats, "Timed repeats");
  sc_bk->add_option("--out", bk.out, "CSV to write");

  ReportArgs rep;
  auto* sc_rep = app.add_subcommand("report", "Render a scaling report from timings");
  sc_rep->add_option("--in", rep.in, "CSV with workers,wall_seconds")->required();
  sc_rep->add_option("--format", rep.format, "text | csv");
  sc_rep->add_option("--out", rep.out, "Write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "rmx: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*sc_gen) cmd_gen(gen);
    else if (*sc_diag) return cmd_diag(diag);
    else if (*sc_sweep) cmd_sweep(sweep);
    else if (*sc_conv) cmd_convolve(conv);
    else if (*sc_mix) cmd_admix(mix);
    else if (*sc_fit) cmd_fit(fit);
    else if (*sc_red) cmd_reduce(red);
    else if (*sc_bs) cmd_bench_scale(bs);
    else if (*sc_bk) cmd_bench_kernel(bk);
    else if (*sc_rep) cmd_report(rep);
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return 1;
  }
  return 0;
}
