#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "rmx/synth.hpp"

using namespace rmx;

namespace {

CaseDefinition make_case(std::uint32_t nchan, std::uint32_t n, std::uint64_t seed) {
  CaseDefinition c;
  c.n_channels = nchan;
  c.n_poles = n;
  c.hamiltonian_seed = seed;
  c.boundary_seed = seed;
  return c;
}

double max_abs_diff_identity(const Matrix& bbt) {
  double worst = 0.0;
  for (std::size_t i = 0; i < bbt.rows(); ++i)
    for (std::size_t j = 0; j < bbt.cols(); ++j)
      worst = std::max(worst, std::abs(bbt(i, j) - (i == j ? 1.0 : 0.0)));
  return worst;
}

}  // namespace

TEST(BuildHamiltonian, OneByOneForcedValue) {
  CaseDefinition c = make_case(1, 1, 0);
  c.pole_energy_range = {2.0, 2.0};
  const auto h = synth::build_hamiltonian(c);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h(0, 0), 2.0);
}

TEST(BuildHamiltonian, DeterministicBytes) {
  const auto c = make_case(5, 40, 123);
  EXPECT_EQ(synth::build_hamiltonian(c), synth::build_hamiltonian(c));
  auto other = c;
  other.hamiltonian_seed = 124;
  EXPECT_NE(synth::build_hamiltonian(c), synth::build_hamiltonian(other));
}

TEST(BuildHamiltonian, ExactlySymmetric) {
  const auto h = synth::build_hamiltonian(make_case(3, 30, 2)).to_dense();
  EXPECT_EQ(asymmetry(h), 0.0);
}

TEST(BuildHamiltonian, SpectrumEqualsSeededDraws) {
  // Oracle: an independent dense eigensolve of the constructed matrix.
  for (std::uint32_t n : {4u, 17u, 64u}) {
    const auto c = make_case(1, n, 7);
    auto draws = synth::draw_pole_energies(c);
    std::sort(draws.begin(), draws.end());
    const auto ev = oracle::eigenvalues_reference(synth::build_hamiltonian(c).to_dense());
    ASSERT_EQ(ev.size(), draws.size());
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(ev[k], draws[k], 1e-10) << "n=" << n;
  }
}

TEST(BuildHamiltonian, DrawsStayInRange) {
  auto c = make_case(2, 100, 99);
  c.pole_energy_range = {-1.5, 0.5};
  for (double d : synth::draw_pole_energies(c)) {
    EXPECT_GE(d, -1.5);
    EXPECT_LT(d, 0.5);
  }
}

TEST(BuildBoundaryProjector, UnitRowForOneByOne) {
  const auto b = synth::build_boundary_projector(make_case(1, 1, 4)).b;
  ASSERT_EQ(b.rows(), 1u);
  EXPECT_EQ(std::abs(b(0, 0)), 1.0);
}

TEST(BuildBoundaryProjector, RowsOrthonormal) {
  for (auto [nchan, n] : {std::pair{1u, 10u}, {20u, 200u}, {32u, 32u}, {7u, 300u}}) {
    const auto b = synth::build_boundary_projector(make_case(nchan, n, nchan * 31 + n)).b;
    EXPECT_LE(max_abs_diff_identity(oracle::product(b, b.transposed())), 1e-10);
  }
}

TEST(BuildBoundaryProjector, SeedsGiveDistinctReproducibleMatrices) {
  auto c1 = make_case(3, 12, 1);
  c1.boundary_seed = 2;
  auto c2 = c1;
  c2.boundary_seed = 3;
  const auto b1 = synth::build_boundary_projector(c1);
  const auto b2 = synth::build_boundary_projector(c2);
  EXPECT_NE(b1, b2);
  EXPECT_EQ(b1, synth::build_boundary_projector(c1));
  EXPECT_EQ(b2, synth::build_boundary_projector(c2));
}

TEST(BuildBoundaryProjector, RejectsMoreChannelsThanPoles) {
  CaseDefinition c = make_case(5, 4, 0);
  EXPECT_THROW(synth::build_boundary_projector(c), InvalidArgument);
}

TEST(OrthonormalColumns, QTimesRReproducesInput) {
  synth::Rng rng(5, 5);
  Matrix a(9, 4);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 4; ++j) a(i, j) = rng.normal();
  const Matrix q = synth::orthonormal_columns(a);
  EXPECT_LE(orthogonality_error(q), 1e-14);
  // R = Q^T A must be upper triangular with a non-negative diagonal.
  const Matrix r = oracle::product(q.transposed(), a);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_GE(r(i, i), 0.0);
    for (std::size_t j = 0; j < i; ++j) EXPECT_NEAR(r(i, j), 0.0, 1e-13);
  }
}

TEST(CaseFile, RoundTripAndComments) {
  CaseDefinition c = make_case(4, 9, 77);
  c.boundary_seed = 18446744073709551615ULL;
  c.pole_energy_range = {-0.1, 3.3};
  EXPECT_EQ(synth::parse_case(synth::format_case(c)), c);

  const auto parsed = synth::parse_case(
      "# comment\n n_channels = 2 # trailing\nn_poles=3\npole_energy_low=-1\npole_energy_high=1\n");
  EXPECT_EQ(parsed.n_channels, 2u);
  EXPECT_EQ(parsed.n_poles, 3u);
  EXPECT_THROW(synth::parse_case("bogus = 1\n"), InvalidArgument);
  EXPECT_THROW(synth::parse_case("n_channels 2\n"), InvalidArgument);
  EXPECT_THROW(synth::parse_case("n_channels = 5\nn_poles = 4\n"), InvalidArgument);
}
