#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qtomo/harness.hpp"

using namespace qtomo;

namespace {

SweepSpec small_spec(QubitState s, Family f, std::vector<ProtocolKind> protocols,
                     std::vector<Shots> grid, int reps, unsigned workers) {
  SweepSpec spec;
  spec.state = s;
  spec.state_id = "t";
  spec.measurement = f;
  spec.protocols = std::move(protocols);
  spec.n_grid = std::move(grid);
  spec.repetitions = reps;
  spec.seed = 2024;
  spec.workers = workers;
  return spec;
}

}  // namespace

TEST(LogGrid, EndpointsAndDedup) {
  const auto g = log_grid(2.0, 4.5, 12);
  EXPECT_EQ(g.front(), 100);
  EXPECT_EQ(g.back(), 31623);
  EXPECT_EQ(g.size(), 12u);
  EXPECT_EQ(log_grid(0.0, 0.1, 20).size(), 1u);
  EXPECT_THROW(log_grid(2, 1, 4), std::invalid_argument);
}

TEST(Sweep, IdenticalForAnyWorkerCount) {
  const auto grid = std::vector<Shots>{100, 400, 1600};
  const auto all = std::vector<ProtocolKind>{ProtocolKind::Static, ProtocolKind::Adaptive,
                                             ProtocolKind::KnownBasis};
  const auto a = run_sweep(small_spec(states::rho2_pure(), Family::Mub, all, grid, 40, 1));
  const auto b = run_sweep(small_spec(states::rho2_pure(), Family::Mub, all, grid, 40, 4));
  ASSERT_EQ(a.rows.size(), 9u);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].mean_infidelity, b.rows[i].mean_infidelity);
    EXPECT_EQ(a.rows[i].std_error, b.rows[i].std_error);
  }
}

TEST(Sweep, RejectsBadSpecs) {
  auto s = small_spec(states::mixed(), Family::Sic, {ProtocolKind::Static}, {100}, 0, 1);
  EXPECT_THROW(run_sweep(s), std::invalid_argument);
  s.repetitions = 10;
  s.n_grid = {};
  EXPECT_THROW(run_sweep(s), std::invalid_argument);
  s.n_grid = {2};
  EXPECT_THROW(run_sweep(s), std::invalid_argument);
}

TEST(Sweep, MixedStaticSicNearTwoOverN) {
  // The statistics-limited value is 9/(4N) by the Fisher information; the 2/N
  // law is its rounded form.
  const Shots n = 1000;
  const auto r = run_sweep(
      small_spec(states::mixed(), Family::Sic, {ProtocolKind::Static}, {n}, 4000, default_workers()));
  const auto& row = r.at(ProtocolKind::Static, n);
  EXPECT_NEAR(row.mean_infidelity, 2.25e-3, 4 * row.std_error + 1e-4);
  EXPECT_EQ(row.excluded, 0);
}

TEST(Sweep, PureKnownBasisSic) {
  const Shots n = 10000;
  const auto r = run_sweep(
      small_spec(states::rho1_pure(), Family::Sic, {ProtocolKind::KnownBasis}, {n}, 1000, default_workers()));
  const auto& row = r.at(ProtocolKind::KnownBasis, n);
  EXPECT_NEAR(row.mean_infidelity, 5e-5, 4 * row.std_error);
  EXPECT_THROW(r.at(ProtocolKind::Static, n), std::out_of_range);
}

TEST(PowerLaw, RecoversNoiselessLaw) {
  std::vector<double> n, y;
  for (double x = 100; x < 1e5; x *= 2) {
    n.push_back(x);
    y.push_back(2.0 / x);
  }
  const auto f = fit_power_law(n, y);
  EXPECT_NEAR(f.alpha, -1.0, 1e-12);
  EXPECT_NEAR(f.c, 2.0, 1e-10);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(f.alpha_stderr, 0.0, 1e-10);
  const std::vector<double> two{1, 2};
  EXPECT_THROW(fit_power_law(two, two), std::invalid_argument);
  const std::vector<double> bad{1, 0, 1};
  EXPECT_THROW(fit_power_law(std::vector<double>{1, 2, 3}, bad), std::invalid_argument);
}

TEST(TurningRegion, FindsKneeOfSyntheticCurve) {
  std::vector<SweepRow> rows;
  const double lambda = 0.002;
  for (Shots n : log_grid(1.5, 5.0, 15)) {
    const double y = n < 1000 ? lambda + 1.0 / (2.0 * n) : 2.0 / n;
    rows.push_back({ProtocolKind::KnownBasis, n, y, 0.0, 100, 0});
  }
  const auto t = turning_region(rows);
  ASSERT_TRUE(t);
  EXPECT_LE(t->first, 1000);
  EXPECT_GE(t->second, 1000);
  const auto slopes = local_slopes(rows);
  EXPECT_GT(slopes[5], -0.6);
  EXPECT_NEAR(slopes.back(), -1.0, 1e-9);
}

TEST(ExactOracle, MixedStateSmallEnumeration) {
  // N = 4: 35 count vectors. Direct enumeration here as an independent check.
  const auto m = canonical_sic();
  const QubitState mixed = states::mixed();
  double expect = 0.0;
  int vectors = 0;
  for (Shots a = 0; a <= 4; ++a)
    for (Shots b = 0; a + b <= 4; ++b)
      for (Shots c = 0; a + b + c <= 4; ++c) {
        const Shots d = 4 - a - b - c;
        const double w = 24.0 / (std::tgamma(a + 1.0) * std::tgamma(b + 1.0) * std::tgamma(c + 1.0) *
                                 std::tgamma(d + 1.0)) /
                         256.0;
        expect += w * infidelity(mixed, mle(MeasurementModel{m}, make_record({{a, b, c, d}})).mle);
        ++vectors;
      }
  EXPECT_EQ(vectors, 35);
  EXPECT_NEAR(exact_expected_infidelity(mixed, m, ProtocolKind::Static, 4), expect, 1e-12);
}

TEST(ExactOracle, PureKnownBasisScale) {
  const double e = exact_expected_infidelity(states::rho1_pure(), canonical_sic(), ProtocolKind::KnownBasis, 30);
  EXPECT_NEAR(e, 1.0 / 60.0, 0.3 / 60.0);
}

TEST(ExactOracle, AgreesWithMonteCarlo) {
  const QubitState s{{0.1, -0.3, 0.5}};
  for (Family f : {Family::Sic, Family::Mub}) {
    const auto m = canonical_model(f);
    const Shots n = 24;
    const double exact = exact_expected_infidelity(s, m, ProtocolKind::Static, n);
    double sum = 0, sum2 = 0;
    const int reps = 40000;
    for (int r = 0; r < reps; ++r) {
      RngStream rng(77, task_stream_id(r, 0));
      const double x = run_static(s, m, n, rng).infidelity;
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
    EXPECT_NEAR(mean, exact, 4 * se) << to_string(f);
  }
}

TEST(ExactOracle, Bounds) {
  EXPECT_THROW(exact_expected_infidelity(states::mixed(), canonical_sic(), ProtocolKind::Static, 201),
               std::out_of_range);
  EXPECT_THROW(exact_expected_infidelity(states::mixed(), canonical_mub(), ProtocolKind::Static, 183),
               std::out_of_range);
  EXPECT_THROW(exact_expected_infidelity(states::mixed(), canonical_sic(), ProtocolKind::Adaptive, 20),
               std::invalid_argument);
}

TEST(FigurePlan, TagsAndErrors) {
  ReproduceOptions opt;
  for (const auto& tag : figure_tags()) EXPECT_FALSE(figure_plan(tag, opt).empty()) << tag;
  EXPECT_THROW(figure_plan("fig6", opt), std::invalid_argument);
  EXPECT_EQ(figure_plan("fig9b", opt).size(), 5u);
  opt.scale = Scale::Paper;
  const auto near = figure_plan("fig7a", opt);
  EXPECT_DOUBLE_EQ(near[0].lambda, 0.0002);
  EXPECT_NEAR(near[0].spec.state.smaller_eigenvalue(), 0.0002, 1e-15);
  EXPECT_EQ(parse_scale("desk"), Scale::Desk);
  EXPECT_THROW(parse_scale("huge"), std::invalid_argument);
}

TEST(States, MisalignedGeometry) {
  const auto s = states::misaligned(0.9996, 0.0);
  EXPECT_NEAR(s.bloch().z, -0.9996, 1e-15);
  EXPECT_NEAR(s.bloch().norm(), 1.0, 1e-15);
  const auto t = states::misaligned(1.0, 0.0002);
  EXPECT_NEAR(t.smaller_eigenvalue(), 0.0002, 1e-15);
}
