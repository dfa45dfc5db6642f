#include "rmx/sched.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <iomanip>
#include <sstream>

#include "rmx/eigen.hpp"
#include "rmx/spectrum.hpp"
#include "rmx/synth.hpp"

namespace rmx::sched {

std::vector<BlockIndex> enumerate_blocks(std::size_t nchan) {
  if (nchan == 0) throw InvalidArgument("enumerate_blocks: nchan must be >= 1");
  std::vector<BlockIndex> blocks;
  blocks.reserve(nchan * (nchan + 1) / 2);
  for (std::size_t i = 0; i < nchan; ++i)
    for (std::size_t j = i; j < nchan; ++j) blocks.push_back({i, j});
  return blocks;
}

std::vector<IndexRange> partition_energies(std::size_t n_points, std::size_t n_workers) {
  return partition_range(n_points, n_workers);
}

TimingReport TimingReport::from_timings(std::span<const std::pair<std::size_t, double>> timings) {
  if (timings.empty()) throw InvalidArgument("timing report needs at least one row");
  std::vector<std::pair<std::size_t, double>> sorted(timings.begin(), timings.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [workers, seconds] : sorted)
    if (workers == 0 || !(seconds > 0.0))
      throw InvalidArgument("timing rows need positive worker counts and wall times");

  const double baseline = sorted.front().second;
  TimingReport report;
  for (const auto& [workers, seconds] : sorted)
    report.rows.push_back(
        {workers, seconds, baseline / seconds, static_cast<double>(workers) * seconds / 3600.0});
  return report;
}

TimingReport run_scaling_bench(const SurfaceAmplitudes& w, std::span<const double> poles,
                               const EnergyMesh& mesh, std::span<const std::size_t> worker_counts,
                               const ScalingOptions& options) {
  using Clock = std::chrono::steady_clock;
  if (worker_counts.empty()) throw InvalidArgument("run_scaling_bench: no worker counts");
  if (!std::is_sorted(worker_counts.begin(), worker_counts.end()))
    throw InvalidArgument("run_scaling_bench: worker counts must be ascending");
  if (options.repeats == 0) throw InvalidArgument("run_scaling_bench: repeats must be positive");

  std::vector<std::pair<std::size_t, double>> timings;
  std::vector<double> reference;
  for (std::size_t workers : worker_counts) {
    if (workers == 0) throw InvalidArgument("run_scaling_bench: worker count must be positive");
    if (options.warm_up) spectrum::sweep_response(w, poles, mesh, options.variant, workers);

    std::vector<double> samples;
    for (std::size_t rep = 0; rep < options.repeats; ++rep) {
      const auto t0 = Clock::now();
      Spectrum s = spectrum::sweep_response(w, poles, mesh, options.variant, workers);
      const auto t1 = Clock::now();
      samples.push_back(std::chrono::duration<double>(t1 - t0).count());

      if (reference.empty()) {
        reference = std::move(s.values);
      } else if (s.values.size() != reference.size() ||
                 std::memcmp(s.values.data(), reference.data(),
                             reference.size() * sizeof(double)) != 0) {
        throw Error("run_scaling_bench: spectrum with " + std::to_string(workers) +
                    " workers differs from the reference run");
      }
    }
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    const double median = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    timings.emplace_back(workers, median);
  }
  return TimingReport::from_timings(timings);
}

TimingReport run_scaling_bench(const CaseDefinition& c, const EnergyMesh& mesh,
                               std::span<const std::size_t> worker_counts,
                               const ScalingOptions& options) {
  const auto es = eigen::diagonalize_block(synth::build_hamiltonian(c), "hamiltonian");
  const auto w = eigen::surface_amplitudes(synth::build_boundary_projector(c), es);
  return run_scaling_bench(w, es.eigenvalues, mesh, worker_counts, options);
}

ReportFormat parse_report_format(const std::string& text) {
  if (text == "text" || text == "text-table") return ReportFormat::text;
  if (text == "csv") return ReportFormat::csv;
  throw InvalidArgument("unknown report format '" + text + "' (use text or csv)");
}

std::string render_report(const TimingReport& report, ReportFormat format) {
  if (report.rows.empty()) throw InvalidArgument("render_report: empty report");
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  if (format == ReportFormat::csv) {
    os << "workers,wall_seconds,speedup,core_hours\n";
    for (const auto& r : report.rows)
      os << r.workers << ',' << r.wall_seconds << ',' << r.speedup << ',' << r.core_hours << '\n';
    return os.str();
  }
  os << std::setw(10) << "Workers" << "  " << std::setw(20) << "Absolute timing (s)" << "  "
     << std::setw(16) << "Speed Up Factor" << "  " << std::setw(17) << "Total Core hours"
     << '\n';
  for (const auto& r : report.rows)
    os << std::setw(10) << r.workers << "  " << std::setw(20) << r.wall_seconds << "  "
       << std::setw(16) << r.speedup << "  " << std::setw(17) << r.core_hours << '\n';
  return os.str();
}

std::vector<std::pair<std::size_t, double>> parse_timings_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<std::size_t, double>> out;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      if (!line.starts_with("workers,wall_seconds"))
        throw InvalidArgument("timing CSV: expected header starting workers,wall_seconds");
      header = false;
      continue;
    }
    const auto c1 = line.find(',');
    if (c1 == std::string::npos) throw InvalidArgument("timing CSV: malformed row '" + line + "'");
    auto c2 = line.find(',', c1 + 1);
    if (c2 == std::string::npos) c2 = line.size();
    out.emplace_back(parse_u64(std::string_view(line).substr(0, c1), "workers"),
                     parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1),
                                  "wall_seconds"));
  }
  return out;
}

}  // namespace rmx::sched
