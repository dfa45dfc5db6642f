#include "rmx/rmxio.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rmx/parallel.hpp"

namespace rmx::io {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

class Payload {
 public:
  void put_magic(const char (&m)[5]) { bytes_.insert(bytes_.end(), m, m + 4); }
  void put_u32(std::uint32_t v) { put_raw(to_little(v)); }
  void put_u64(std::uint64_t v) { put_raw(to_little(v)); }
  void put_f64(double v) { put_raw(to_little(std::bit_cast<std::uint64_t>(v))); }
  void put_f64s(std::span<const double> vs) {
    for (double v : vs) put_f64(v);
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  template <typename T>
  void put_raw(T v) {
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.insert(bytes_.end(), buf, buf + sizeof(T));
  }
  std::vector<std::uint8_t> bytes_;
};

class Cursor {
 public:
  Cursor(std::span<const std::uint8_t> bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  void expect_magic(const char (&m)[5]) {
    need(4);
    if (std::memcmp(bytes_.data() + at_, m, 4) != 0)
      throw FormatError(context_ + ": bad magic, expected " + std::string(m, 4));
    at_ += 4;
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  void f64s(std::span<double> out) {
    for (double& v : out) v = f64();
  }
  std::size_t remaining() const { return bytes_.size() - at_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError(context_ + ": payload too short");
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + at_, sizeof(T));
    at_ += sizeof(T);
    return to_little(v);
  }

  std::span<const std::uint8_t> bytes_;
  std::string context_;
  std::size_t at_ = 0;
};

class RecordWriter {
 public:
  explicit RecordWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot create " + path.string());
  }

  void write(std::span<const std::uint8_t> payload) {
    if (payload.size() > UINT32_MAX) fail("record payload exceeds 4 GiB");
    const auto len = to_little(static_cast<std::uint32_t>(payload.size()));
    out_.write(reinterpret_cast<const char*>(&len), 4);
    out_.write(reinterpret_cast<const char*>(payload.data()),
               static_cast<std::streamsize>(payload.size()));
    out_.write(reinterpret_cast<const char*>(&len), 4);
    if (!out_) fail("write failed");
    bytes_ += 8 + payload.size();
    ++record_;
  }
  void write(const Payload& p) { write(p.bytes()); }

  std::uint64_t finish() {
    out_.close();
    if (!out_) fail("close failed");
    return bytes_;
  }
  std::uint64_t position() const { return bytes_; }

 private:
  [[noreturn]] void fail(const std::string& what) {
    throw IoError(path_.string() + ": record " + std::to_string(record_) + ": " + what);
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::uint64_t bytes_ = 0;
  std::size_t record_ = 0;
};

class RecordReader {
 public:
  RecordReader(std::istream& in, std::filesystem::path path) : in_(in), path_(std::move(path)) {
    in_.seekg(0, std::ios::end);
    size_ = static_cast<std::uint64_t>(in_.tellg());
    in_.seekg(0, std::ios::beg);
  }

  std::uint64_t file_size() const { return size_; }

  void seek(std::uint64_t offset, const std::string& name) {
    if (offset + 8 > size_) corrupt(name, "record offset beyond end of file");
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(offset));
    pos_ = offset;
  }

  std::vector<std::uint8_t> read(const std::string& name) {
    std::uint32_t head = 0;
    if (pos_ + 4 > size_ || !in_.read(reinterpret_cast<char*>(&head), 4))
      corrupt(name, "framing mismatch: missing length prefix");
    head = to_little(head);
    if (pos_ + 8 + std::uint64_t{head} > size_)
      corrupt(name, "framing mismatch: record length " + std::to_string(head) +
                        " runs past end of file");
    std::vector<std::uint8_t> payload(head);
    std::uint32_t tail = 0;
    if (!in_.read(reinterpret_cast<char*>(payload.data()), head) ||
        !in_.read(reinterpret_cast<char*>(&tail), 4))
      corrupt(name, "framing mismatch: short read");
    tail = to_little(tail);
    if (tail != head)
      corrupt(name, "framing mismatch: prefix " + std::to_string(head) + " vs suffix " +
                        std::to_string(tail));
    pos_ += 8 + head;
    ++record_;
    return payload;
  }

  std::string context(const std::string& name) const {
    return path_.string() + ": record " + std::to_string(record_) + " (" + name + ")";
  }

 private:
  [[noreturn]] void corrupt(const std::string& name, const std::string& what) {
    throw CorruptRecord(context(name) + ": " + what);
  }

  std::istream& in_;
  std::filesystem::path path_;
  std::uint64_t size_ = 0;
  std::uint64_t pos_ = 0;
  std::size_t record_ = 0;
};

void check_payload_size(const std::vector<std::uint8_t>& p, std::size_t expected,
                        const std::string& context) {
  if (p.size() != expected)
    throw CorruptRecord(context + ": payload is " + std::to_string(p.size()) +
                        " bytes, expected " + std::to_string(expected));
}

struct DipoleFile {
  std::unique_ptr<std::istream> stream;
  std::unique_ptr<RecordReader> reader;
  DipoleFileHeader header;
};

DipoleFile open_dipole(const std::filesystem::path& path, FileSource& files) {
  DipoleFile f;
  f.stream = files.open(path);
  f.reader = std::make_unique<RecordReader>(*f.stream, path);
  const auto payload = f.reader->read("dipole header");
  Cursor c(payload, f.reader->context("dipole header"));
  c.expect_magic("RMXD");
  f.header.version = c.u32();
  if (f.header.version != kFormatVersion)
    throw FormatError(path.string() + ": unsupported D-file version " +
                      std::to_string(f.header.version));
  const std::uint32_t n_states = c.u32();
  f.header.n_poles = c.u32();
  if (c.remaining() != std::size_t{n_states} * 8)
    throw CorruptRecord(path.string() + ": dipole header index length disagrees with state count");
  f.header.offsets.resize(n_states);
  for (auto& off : f.header.offsets) off = c.u64();
  for (std::size_t s = 1; s < n_states; ++s)
    if (f.header.offsets[s] <= f.header.offsets[s - 1])
      throw CorruptRecord(path.string() + ": dipole offsets not strictly increasing at state " +
                          std::to_string(s));
  return f;
}

std::vector<std::uint8_t> read_state_payload(DipoleFile& f, const std::filesystem::path& path,
                                             std::size_t state_index) {
  if (state_index >= f.header.n_initial_states()) {
    std::ostringstream os;
    os << path.string() << ": state index " << state_index << " out of range (file holds "
       << f.header.n_initial_states() << " states)";
    throw InvalidArgument(os.str());
  }
  const std::string name = "state " + std::to_string(state_index);
  f.reader->seek(f.header.offsets[state_index], name);
  auto payload = f.reader->read(name);
  if (payload.size() < 4)
    throw CorruptRecord(path.string() + ": " + name + ": payload shorter than row count");
  std::uint32_t rows = 0;
  std::memcpy(&rows, payload.data(), 4);
  rows = to_little(rows);
  check_payload_size(payload, 4 + std::size_t{rows} * f.header.n_poles * 8,
                     path.string() + ": " + name);
  return payload;
}

std::uint64_t write_dipole_payloads(const std::filesystem::path& path, std::uint32_t n_poles,
                                    const std::vector<std::vector<std::uint8_t>>& states) {
  const std::uint64_t header_record = 8 + 16 + 8 * states.size();
  Payload header;
  header.put_magic("RMXD");
  header.put_u32(kFormatVersion);
  header.put_u32(static_cast<std::uint32_t>(states.size()));
  header.put_u32(n_poles);
  std::uint64_t offset = header_record;
  for (const auto& s : states) {
    header.put_u64(offset);
    offset += 8 + s.size();
  }
  RecordWriter w(path);
  w.write(header);
  for (const auto& s : states) w.write(s);
  return w.finish();
}

}  // namespace

// ---------------------------------------------------------------------------

std::unique_ptr<std::istream> DiskFileSource::open(const std::filesystem::path& path) {
  auto in = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*in) throw IoError("cannot open " + path.string());
  return in;
}

std::unique_ptr<std::istream> CountingFileSource::open(const std::filesystem::path& path) {
  opens_.fetch_add(1);
  return inner_.open(path);
}

DiskFileSource& disk() {
  static DiskFileSource source;
  return source;
}

std::uint64_t write_hfile(const std::filesystem::path& path, const CaseDefinition& c,
                          const EigenSystem& es, const SurfaceAmplitudes& w) {
  const std::size_t n = es.size();
  if (n != c.n_poles || es.eigenvectors.rows() != n || es.eigenvectors.cols() != n ||
      w.n_poles() != n || w.n_channels() != c.n_channels)
    throw InvalidArgument(path.string() + ": eigendata dimensions disagree with the case");

  RecordWriter out(path);
  Payload header;
  header.put_magic("RMXH");
  header.put_u32(kFormatVersion);
  header.put_u32(c.n_channels);
  header.put_u32(c.n_poles);
  header.put_f64(c.pole_energy_range.low);
  header.put_f64(c.pole_energy_range.high);
  header.put_u64(c.boundary_seed);
  header.put_u64(c.hamiltonian_seed);
  out.write(header);

  Payload values;
  values.put_f64s(es.eigenvalues);
  out.write(values);

  std::vector<double> column(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t m = 0; m < n; ++m) column[m] = es.eigenvectors(m, k);
    Payload p;
    p.put_f64s(column);
    out.write(p);
  }
  for (std::size_t i = 0; i < w.n_channels(); ++i) {
    Payload p;
    p.put_f64s(w.w.row(i));
    out.write(p);
  }
  return out.finish();
}

HFileData read_hfile(const std::filesystem::path& path, FileSource& files) {
  auto stream = files.open(path);
  RecordReader reader(*stream, path);

  HFileData d;
  {
    const auto payload = reader.read("header");
    Cursor c(payload, reader.context("header"));
    c.expect_magic("RMXH");
    const std::uint32_t version = c.u32();
    if (version != kFormatVersion)
      throw FormatError(path.string() + ": unsupported H-file version " + std::to_string(version));
    check_payload_size(payload, 48, reader.context("header"));
    d.case_def.n_channels = c.u32();
    d.case_def.n_poles = c.u32();
    d.case_def.pole_energy_range.low = c.f64();
    d.case_def.pole_energy_range.high = c.f64();
    d.case_def.boundary_seed = c.u64();
    d.case_def.hamiltonian_seed = c.u64();
    try {
      d.case_def.validate();
    } catch (const InvalidArgument& e) {
      throw FormatError(path.string() + ": header: " + e.what());
    }
  }
  const std::size_t n = d.case_def.n_poles;
  const std::size_t nchan = d.case_def.n_channels;

  {
    const auto payload = reader.read("eigenvalues");
    check_payload_size(payload, 8 * n, reader.context("eigenvalues"));
    d.eigen.eigenvalues.resize(n);
    Cursor(payload, reader.context("eigenvalues")).f64s(d.eigen.eigenvalues);
  }
  d.eigen.eigenvectors = Matrix(n, n);
  std::vector<double> column(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::string name = "eigenvector " + std::to_string(k);
    const auto payload = reader.read(name);
    check_payload_size(payload, 8 * n, reader.context(name));
    Cursor(payload, reader.context(name)).f64s(column);
    for (std::size_t m = 0; m < n; ++m) d.eigen.eigenvectors(m, k) = column[m];
  }
  d.amplitudes.w = Matrix(nchan, n);
  for (std::size_t i = 0; i < nchan; ++i) {
    const std::string name = "amplitude row " + std::to_string(i);
    const auto payload = reader.read(name);
    check_payload_size(payload, 8 * n, reader.context(name));
    Cursor(payload, reader.context(name)).f64s(d.amplitudes.w.row(i));
  }
  return d;
}

ReadMode parse_read_mode(const std::string& text) {
  if (text == "all" || text == "all_ranks_read") return ReadMode::all_ranks_read;
  if (text == "root" || text == "root_read_broadcast") return ReadMode::root_read_broadcast;
  throw InvalidArgument("unknown read mode '" + text + "' (use all or root)");
}

std::vector<HFileData> read_hfile_distributed(const std::filesystem::path& path, ReadMode mode,
                                              std::size_t n_workers, FileSource& files) {
  if (n_workers == 0) throw InvalidArgument("read_hfile_distributed: need at least one worker");
  std::vector<HFileData> out(n_workers);
  if (mode == ReadMode::root_read_broadcast) {
    out[0] = read_hfile(path, files);
    for (std::size_t w = 1; w < n_workers; ++w) out[w] = out[0];
    return out;
  }
  run_on_ranges(partition_range(n_workers, n_workers), [&](std::size_t, IndexRange r) {
    for (std::size_t w = r.begin; w < r.end; ++w) out[w] = read_hfile(path, files);
  });
  return out;
}

std::uint64_t write_dipole(const std::filesystem::path& path, std::uint32_t n_poles,
                           std::span<const Matrix> states) {
  std::vector<std::vector<std::uint8_t>> payloads;
  payloads.reserve(states.size());
  for (std::size_t s = 0; s < states.size(); ++s) {
    if (states[s].cols() != n_poles)
      throw InvalidArgument(path.string() + ": state " + std::to_string(s) + " has " +
                            std::to_string(states[s].cols()) + " columns, expected " +
                            std::to_string(n_poles));
    Payload p;
    p.put_u32(static_cast<std::uint32_t>(states[s].rows()));
    p.put_f64s(states[s].values());
    payloads.push_back(p.bytes());
  }
  return write_dipole_payloads(path, n_poles, payloads);
}

DipoleFileHeader read_dipole_header(const std::filesystem::path& path, FileSource& files) {
  return open_dipole(path, files).header;
}

std::vector<std::uint8_t> read_dipole_payload(const std::filesystem::path& path,
                                              std::size_t state_index, FileSource& files) {
  auto f = open_dipole(path, files);
  return read_state_payload(f, path, state_index);
}

Matrix read_dipole_state(const std::filesystem::path& path, std::size_t state_index,
                         FileSource& files) {
  auto f = open_dipole(path, files);
  const auto payload = read_state_payload(f, path, state_index);
  Cursor c(payload, path.string() + ": state " + std::to_string(state_index));
  const std::uint32_t rows = c.u32();
  Matrix m(rows, f.header.n_poles);
  for (std::size_t i = 0; i < rows; ++i) c.f64s(m.row(i));
  return m;
}

std::uint64_t reduce_dipole(const std::filesystem::path& in_path,
                            std::span<const std::size_t> keep,
                            const std::filesystem::path& out_path) {
  if (keep.empty()) throw InvalidArgument("reduce_dipole: keep list is empty");
  for (std::size_t i = 1; i < keep.size(); ++i)
    if (keep[i] <= keep[i - 1])
      throw InvalidArgument("reduce_dipole: keep indices must be strictly increasing");

  auto f = open_dipole(in_path, disk());
  if (keep.back() >= f.header.n_initial_states())
    throw InvalidArgument("reduce_dipole: state " + std::to_string(keep.back()) +
                          " out of range (file holds " +
                          std::to_string(f.header.n_initial_states()) + " states)");
  std::vector<std::vector<std::uint8_t>> payloads;
  payloads.reserve(keep.size());
  for (std::size_t s : keep) payloads.push_back(read_state_payload(f, in_path, s));
  return write_dipole_payloads(out_path, f.header.n_poles, payloads);
}

StripePolicy StripePolicy::from_environment() {
  StripePolicy p;
  if (const char* env = std::getenv("RMX_STRIPE_DEFAULT"); env && *env) {
    const auto v = parse_u64(env, "RMX_STRIPE_DEFAULT");
    if (v == 0 || v > UINT32_MAX) throw InvalidArgument("RMX_STRIPE_DEFAULT must be positive");
    p.default_count = static_cast<std::uint32_t>(v);
  }
  return p;
}

std::uint32_t stripe_count_for_size(std::uint64_t size_bytes, const StripePolicy& policy) {
  if (policy.bands.empty() || policy.bands.front().lower_bytes != 0)
    throw InvalidArgument("stripe policy bands must start at 0 bytes");
  std::optional<std::uint32_t> count;
  for (const auto& band : policy.bands) {
    if (size_bytes < band.lower_bytes) break;
    count = band.count;
  }
  return count.value_or(policy.default_count);
}

std::vector<std::uint8_t> read_all_bytes(const std::filesystem::path& path, FileSource& files) {
  auto in = files.open(path);
  in->seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in->tellg());
  in->seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  if (!in->read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
    throw IoError(path.string() + ": read failed");
  return bytes;
}

ChunkedRead chunked_read(const std::filesystem::path& path, std::uint64_t chunk_size,
                         std::size_t n_readers, FileSource& files) {
  if (chunk_size == 0) throw InvalidArgument("chunked_read: chunk_size must be positive");
  if (n_readers == 0) throw InvalidArgument("chunked_read: need at least one reader");
  const std::uint64_t size = std::filesystem::file_size(path);

  ChunkedRead result;
  result.bytes.resize(size);
  const std::uint64_t n_chunks = size == 0 ? 0 : (size + chunk_size - 1) / chunk_size;
  result.trace.resize(n_chunks);
  for (std::uint64_t c = 0; c < n_chunks; ++c) {
    const std::uint64_t offset = c * chunk_size;
    result.trace[c] = {static_cast<std::size_t>(c % n_readers), offset,
                       std::min(chunk_size, size - offset)};
  }

  run_on_ranges(partition_range(n_readers, n_readers), [&](std::size_t, IndexRange r) {
    for (std::size_t reader = r.begin; reader < r.end; ++reader) {
      auto in = files.open(path);
      for (std::uint64_t c = reader; c < n_chunks; c += n_readers) {
        const auto& t = result.trace[c];
        in->seekg(static_cast<std::streamoff>(t.offset));
        if (!in->read(reinterpret_cast<char*>(result.bytes.data() + t.offset),
                      static_cast<std::streamsize>(t.length)))
          throw IoError(path.string() + ": read failed at offset " + std::to_string(t.offset));
      }
    }
  });
  return result;
}

std::string render_trace_csv(std::span<const TraceEntry> trace) {
  std::ostringstream os;
  os << "reader,offset,length\n";
  for (const auto& t : trace) os << t.reader << ',' << t.offset << ',' << t.length << '\n';
  return os.str();
}

}  // namespace rmx::io
