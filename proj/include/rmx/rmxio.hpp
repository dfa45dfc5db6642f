// Sequential binary files for eigendata (H-file) and per-state dipole
// amplitudes (D-file), their distribution to workers, dipole-file reduction
// and a stripe-count policy.
//
// Both formats use Fortran-style sequential records, little-endian:
//
//   [u32 payload length][payload][u32 payload length]
//
// H-file records, in order:
//   header      "RMXH" u32 version=1, u32 n_channels, u32 n_poles,
//               f64 pole_energy_low, f64 pole_energy_high,
//               u64 boundary_seed, u64 hamiltonian_seed           (48 bytes)
//   eigenvalues f64 x n_poles
//   n_poles records, eigenvector column k (f64 x n_poles)
//   n_channels records, amplitude row i (f64 x n_poles)
//
// D-file records:
//   header      "RMXD" u32 version=1, u32 n_initial_states, u32 n_poles,
//               u64 x n_initial_states absolute offsets of the state records
//   one record per state: u32 n_rows, f64 x n_rows x n_poles (row-major)

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmx/core.hpp"

namespace rmx::io {

inline constexpr std::uint32_t kFormatVersion = 1;

class FormatError : public Error {
 public:
  using Error::Error;
};

class CorruptRecord : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// File layer (injectable so tests can count opens)
// ---------------------------------------------------------------------------

class FileSource {
 public:
  virtual ~FileSource() = default;
  /// Opens `path` for binary reading or throws IoError.
  virtual std::unique_ptr<std::istream> open(const std::filesystem::path& path) = 0;
};

class DiskFileSource : public FileSource {
 public:
  std::unique_ptr<std::istream> open(const std::filesystem::path& path) override;
};

/// Forwards to another source and counts opens; safe under concurrent use.
class CountingFileSource : public FileSource {
 public:
  explicit CountingFileSource(FileSource& inner) : inner_(inner) {}
  std::unique_ptr<std::istream> open(const std::filesystem::path& path) override;
  std::size_t opens() const { return opens_.load(); }

 private:
  FileSource& inner_;
  std::atomic<std::size_t> opens_{0};
};

DiskFileSource& disk();

// ---------------------------------------------------------------------------
// H-file
// ---------------------------------------------------------------------------

struct HFileHeader {
  std::uint32_t version = kFormatVersion;
  CaseDefinition case_def;
};

struct HFileData {
  CaseDefinition case_def;
  EigenSystem eigen;
  SurfaceAmplitudes amplitudes;
  friend bool operator==(const HFileData&, const HFileData&) = default;
};

/// Returns the total number of bytes written.
std::uint64_t write_hfile(const std::filesystem::path& path, const CaseDefinition& c,
                          const EigenSystem& es, const SurfaceAmplitudes& w);

HFileData read_hfile(const std::filesystem::path& path, FileSource& files = disk());

enum class ReadMode { all_ranks_read, root_read_broadcast };

ReadMode parse_read_mode(const std::string& text);

/// Delivers the H-file contents to each of `n_workers` workers. In
/// all_ranks_read every worker opens and parses the file; in
/// root_read_broadcast worker 0 reads and the others receive copies.
std::vector<HFileData> read_hfile_distributed(const std::filesystem::path& path, ReadMode mode,
                                              std::size_t n_workers,
                                              FileSource& files = disk());

// ---------------------------------------------------------------------------
// D-file
// ---------------------------------------------------------------------------

struct DipoleFileHeader {
  std::uint32_t version = kFormatVersion;
  std::uint32_t n_poles = 0;
  std::vector<std::uint64_t> offsets;

  std::size_t n_initial_states() const { return offsets.size(); }
};

/// Each state block is n_rows x n_poles; row counts may differ per state.
std::uint64_t write_dipole(const std::filesystem::path& path, std::uint32_t n_poles,
                           std::span<const Matrix> states);

DipoleFileHeader read_dipole_header(const std::filesystem::path& path, FileSource& files = disk());

Matrix read_dipole_state(const std::filesystem::path& path, std::size_t state_index,
                         FileSource& files = disk());

/// Raw payload bytes of one state record (for bit-level comparisons).
std::vector<std::uint8_t> read_dipole_payload(const std::filesystem::path& path,
                                              std::size_t state_index,
                                              FileSource& files = disk());

/// Writes only the states in `keep` (strictly increasing) to `out_path`,
/// re-indexed from 0. Returns the new file size in bytes.
std::uint64_t reduce_dipole(const std::filesystem::path& in_path,
                            std::span<const std::size_t> keep,
                            const std::filesystem::path& out_path);

// ---------------------------------------------------------------------------
// Striping model
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kGiB = std::uint64_t{1} << 30;

struct StripeBand {
  std::uint64_t lower_bytes;          // inclusive
  std::optional<std::uint32_t> count;  // nullopt: platform default
};

struct StripePolicy {
  std::uint32_t default_count = 2;
  /// Ascending, first band starts at 0.
  std::vector<StripeBand> bands{{0, std::nullopt},
                                {1 * kGiB, 20},
                                {10 * kGiB, 60},
                                {100 * kGiB, 120}};

  /// Default policy with default_count taken from RMX_STRIPE_DEFAULT if set.
  static StripePolicy from_environment();
};

std::uint32_t stripe_count_for_size(std::uint64_t size_bytes, const StripePolicy& policy);

struct TraceEntry {
  std::size_t reader;
  std::uint64_t offset;
  std::uint64_t length;
  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct ChunkedRead {
  std::vector<std::uint8_t> bytes;
  /// One entry per chunk, in file order.
  std::vector<TraceEntry> trace;
};

/// Reads the file in `chunk_size` pieces assigned round-robin to
/// `n_readers` concurrent readers, then reassembles it.
ChunkedRead chunked_read(const std::filesystem::path& path, std::uint64_t chunk_size,
                         std::size_t n_readers, FileSource& files = disk());

/// CSV with header reader,offset,length.
std::string render_trace_csv(std::span<const TraceEntry> trace);

std::vector<std::uint8_t> read_all_bytes(const std::filesystem::path& path,
                                         FileSource& files = disk());

}  // namespace rmx::io
