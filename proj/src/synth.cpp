#include "rmx/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace rmx::synth {

namespace {

constexpr std::uint64_t kHamiltonianStream = 0x48414d494c544f4eULL;  // "HAMILTON"
constexpr std::uint64_t kBoundaryStream = 0x424f554e44415259ULL;     // "BOUNDARY"
constexpr std::uint64_t kDipoleStream = 0x4449504f4c450000ULL;       // "DIPOLE"

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(splitmix64(seed ^ splitmix64(stream))) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::vector<double> draw_pole_energies(const CaseDefinition& c) {
  c.validate();
  Rng rng(c.hamiltonian_seed, kHamiltonianStream);
  const auto [low, high] = c.pole_energy_range;
  std::vector<double> d(c.n_poles);
  for (double& e : d) e = low + (high - low) * rng.uniform();
  return d;
}

Matrix orthonormal_columns(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (n > m) throw InvalidArgument("orthonormal_columns: more columns than rows");

  // Column-oriented work: row j of `cols` is column j of the input.
  Matrix cols = a.transposed();
  std::vector<std::vector<double>> reflectors(n);
  std::vector<double> diag(n);

  for (std::size_t k = 0; k < n; ++k) {
    const auto ck = cols.row(k);
    double norm2 = 0.0;
    for (std::size_t i = k; i < m; ++i) norm2 += ck[i] * ck[i];
    const double norm = std::sqrt(norm2);
    const double alpha = ck[k] >= 0.0 ? -norm : norm;
    diag[k] = alpha;

    std::vector<double> v(ck.begin() + k, ck.end());
    v[0] -= alpha;
    double vnorm2 = 0.0;
    for (double x : v) vnorm2 += x * x;
    if (vnorm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(vnorm2);
      for (double& x : v) x *= inv;
      for (std::size_t j = k; j < n; ++j) {
        const auto cj = cols.row(j);
        double dot = 0.0;
        for (std::size_t i = k; i < m; ++i) dot += v[i - k] * cj[i];
        for (std::size_t i = k; i < m; ++i) cj[i] -= 2.0 * dot * v[i - k];
      }
    } else {
      // Column already zero below the diagonal: identity reflector.
      std::fill(v.begin(), v.end(), 0.0);
    }
    reflectors[k] = std::move(v);
  }

  // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
  Matrix qt(n, m);
  for (std::size_t j = 0; j < n; ++j) qt(j, j) = 1.0;
  for (std::size_t kk = n; kk-- > 0;) {
    const auto& v = reflectors[kk];
    for (std::size_t j = 0; j < n; ++j) {
      const auto qj = qt.row(j);
      double dot = 0.0;
      for (std::size_t i = kk; i < m; ++i) dot += v[i - kk] * qj[i];
      if (dot == 0.0) continue;
      for (std::size_t i = kk; i < m; ++i) qj[i] -= 2.0 * dot * v[i - kk];
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    if (diag[j] < 0.0)
      for (double& x : qt.row(j)) x = -x;
  }
  return qt.transposed();
}

SymmetricMatrix build_hamiltonian(const CaseDefinition& c) {
  c.validate();
  const std::size_t n = c.n_poles;

  Rng rng(c.hamiltonian_seed, kHamiltonianStream);
  const auto [low, high] = c.pole_energy_range;
  std::vector<double> d(n);
  for (double& e : d) e = low + (high - low) * rng.uniform();

  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g(i, j) = rng.normal();

  // Rows of qt are the columns of Q; H_ij = sum_m Q_mi d_m Q_mj.
  const Matrix qt = orthonormal_columns(g).transposed();
  Matrix scaled = qt;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m < n; ++m) scaled(i, m) *= d[m];

  SymmetricMatrix h(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto si = scaled.row(i);
    for (std::size_t j = i; j < n; ++j) {
      const auto qj = qt.row(j);
      double sum = 0.0;
      for (std::size_t m = 0; m < n; ++m) sum += si[m] * qj[m];
      h.set(i, j, sum);
    }
  }
  return h;
}

BoundaryProjector build_boundary_projector(const CaseDefinition& c) {
  c.validate();
  Rng rng(c.boundary_seed, kBoundaryStream);
  // Columns of g become the rows of B after orthonormalization.
  Matrix g(c.n_poles, c.n_channels);
  for (std::size_t i = 0; i < c.n_channels; ++i)
    for (std::size_t m = 0; m < c.n_poles; ++m) g(m, i) = rng.normal();
  return {orthonormal_columns(g).transposed()};
}

std::vector<Matrix> build_dipole_states(const CaseDefinition& c, std::size_t n_states) {
  c.validate();
  std::vector<Matrix> states;
  states.reserve(n_states);
  for (std::size_t st = 0; st < n_states; ++st) {
    Rng rng(c.hamiltonian_seed ^ c.boundary_seed, kDipoleStream + st);
    Matrix m(1 + st % c.n_channels, c.n_poles);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (double& v : m.row(i)) v = rng.normal();
    states.push_back(std::move(m));
  }
  return states;
}

CaseDefinition parse_case(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("case file line " + std::to_string(line_no) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  CaseDefinition c;
  for (const auto& [key, value] : kv) {
    if (key == "n_channels") {
      c.n_channels = static_cast<std::uint32_t>(parse_u64(value, key));
    } else if (key == "n_poles") {
      c.n_poles = static_cast<std::uint32_t>(parse_u64(value, key));
    } else if (key == "pole_energy_low") {
      c.pole_energy_range.low = parse_double(value, key);
    } else if (key == "pole_energy_high") {
      c.pole_energy_range.high = parse_double(value, key);
    } else if (key == "boundary_seed") {
      c.boundary_seed = parse_u64(value, key);
    } else if (key == "hamiltonian_seed") {
      c.hamiltonian_seed = parse_u64(value, key);
    } else {
      throw InvalidArgument("case file: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

std::string format_case(const CaseDefinition& c) {
  std::ostringstream os;
  os << "# synthetic R-matrix case (energies in Rydberg)\n"
     << "n_channels = " << c.n_channels << '\n'
     << "n_poles = " << c.n_poles << '\n'
     << "pole_energy_low = " << format_roundtrip(c.pole_energy_range.low) << '\n'
     << "pole_energy_high = " << format_roundtrip(c.pole_energy_range.high) << '\n'
     << "boundary_seed = " << c.boundary_seed << '\n'
     << "hamiltonian_seed = " << c.hamiltonian_seed << '\n';
  return os.str();
}

CaseDefinition read_case_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open case file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_case(buf.str());
}

void write_case_file(const std::filesystem::path& path, const CaseDefinition& c) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write case file " + path.string());
  out << format_case(c);
  if (!out) throw Error("write failed for case file " + path.string());
}

}  // namespace rmx::synth
