// Work partitioning, strong-scaling timing runs and speed-up reports.
//
// Speed-up is measured against the smallest worker count in the report, not
// against a serial run; core-hours are derived as workers * seconds / 3600.

#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rmx/core.hpp"
#include "rmx/kernel.hpp"
#include "rmx/parallel.hpp"

namespace rmx::sched {

struct BlockIndex {
  std::size_t row;
  std::size_t col;
  friend bool operator==(const BlockIndex&, const BlockIndex&) = default;
};

/// Upper-triangle channel pairs (i <= j) in row-major order;
/// nchan (nchan + 1) / 2 entries.
std::vector<BlockIndex> enumerate_blocks(std::size_t nchan);

std::vector<IndexRange> partition_energies(std::size_t n_points, std::size_t n_workers);

struct TimingRow {
  std::size_t workers;
  double wall_seconds;
  double speedup;
  double core_hours;
};

struct TimingReport {
  std::vector<TimingRow> rows;

  /// Builds the derived columns from (workers, seconds) pairs. Rows are
  /// sorted by worker count.
  static TimingReport from_timings(std::span<const std::pair<std::size_t, double>> timings);
};

struct ScalingOptions {
  kernel::KernelVariant variant = kernel::KernelVariant::gemm();
  std::size_t repeats = 3;
  bool warm_up = true;
};

/// Runs the response sweep once per worker count (plus a discarded warm-up)
/// and records the median wall time. Throws Error if any worker count
/// produces a spectrum that is not bitwise identical to the first.
TimingReport run_scaling_bench(const SurfaceAmplitudes& w, std::span<const double> poles,
                               const EnergyMesh& mesh, std::span<const std::size_t> worker_counts,
                               const ScalingOptions& options = {});

/// Builds the case (Hamiltonian, eigensolve, amplitudes) and benchmarks it.
TimingReport run_scaling_bench(const CaseDefinition& c, const EnergyMesh& mesh,
                               std::span<const std::size_t> worker_counts,
                               const ScalingOptions& options = {});

enum class ReportFormat { text, csv };

ReportFormat parse_report_format(const std::string& text);

/// Columns: workers, absolute timing (s), speed-up factor, total core-hours;
/// four decimals for all real-valued cells.
std::string render_report(const TimingReport& report, ReportFormat format);

/// Reads a report CSV back (header workers,wall_seconds,speedup,core_hours or
/// just workers,wall_seconds) as raw timings.
std::vector<std::pair<std::size_t, double>> parse_timings_csv(const std::string& text);

}  // namespace rmx::sched
