#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "qtomo/sampler.hpp"

using namespace qtomo;

namespace {

double binomial_pmf(Shots n, Shots k, double p) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                  k * std::log(p) + (n - k) * std::log1p(-p));
}

// Pearson statistic of `draws` samples against the exact pmf, bins with
// expected count < 5 pooled into the tails. Returns (chi2, degrees of freedom).
std::pair<double, int> chi_square(Shots n, double p, int draws, std::uint64_t stream) {
  RngStream rng(99, stream);
  std::map<Shots, int> hist;
  for (int i = 0; i < draws; ++i) ++hist[sample_binomial(n, p, rng)];
  double chi2 = 0.0;
  int bins = 0;
  double pooled_expected = 0.0;
  int pooled_observed = 0;
  for (Shots k = 0; k <= n; ++k) {
    const double e = draws * binomial_pmf(n, k, p);
    const int o = hist.count(k) ? hist[k] : 0;
    if (e < 5.0) {
      pooled_expected += e;
      pooled_observed += o;
      continue;
    }
    chi2 += (o - e) * (o - e) / e;
    ++bins;
  }
  if (pooled_expected > 0.0) {
    chi2 += (pooled_observed - pooled_expected) * (pooled_observed - pooled_expected) / pooled_expected;
    ++bins;
  }
  return {chi2, bins - 1};
}

}  // namespace

TEST(SampleCounts, Examples) {
  RngStream rng(1, 2);
  const std::vector<double> p{0.5, 1.0 / 6, 1.0 / 6, 1.0 / 6};
  EXPECT_EQ(sample_counts(p, 0, rng), (std::vector<Shots>{0, 0, 0, 0}));
  const std::vector<double> sure{1, 0, 0, 0};
  EXPECT_EQ(sample_counts(sure, 12345, rng), (std::vector<Shots>{12345, 0, 0, 0}));
  const std::vector<double> last{0, 0, 0, 1};
  EXPECT_EQ(sample_counts(last, 7, rng), (std::vector<Shots>{0, 0, 0, 7}));
}

TEST(SampleCounts, RejectsBadProbabilities) {
  RngStream rng(1, 2);
  const std::vector<double> short_sum{0.5, 0.4};
  const std::vector<double> negative{1.5, -0.5};
  EXPECT_THROW(sample_counts(short_sum, 10, rng), std::invalid_argument);
  EXPECT_THROW(sample_counts(negative, 10, rng), std::invalid_argument);
  EXPECT_THROW(sample_counts(std::vector<double>{}, 10, rng), std::invalid_argument);
}

TEST(SampleCounts, MeanOfFirstFrequency) {
  const std::vector<double> p{0.5, 1.0 / 6, 1.0 / 6, 1.0 / 6};
  const Shots n = 100000;
  const int reps = 1000;
  double sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    RngStream rng(5, task_stream_id(r, 1));
    const auto c = sample_counts(p, n, rng);
    ASSERT_EQ(c[0] + c[1] + c[2] + c[3], n);
    sum += static_cast<double>(c[0]) / n;
  }
  EXPECT_NEAR(sum / reps, 0.5, 3.0 * std::sqrt(0.25 / n / reps));
}

TEST(SampleCounts, FrequencyMomentsMatchBinomial) {
  // <f_i> = p_i, std(f_i) = sqrt(p_i (1 - p_i) / N), within 4 standard errors.
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  const Shots n = 500;
  const int reps = 20000;
  std::vector<double> s1(4), s2(4);
  for (int r = 0; r < reps; ++r) {
    RngStream rng(6, task_stream_id(r, 2));
    const auto c = sample_counts(p, n, rng);
    for (int i = 0; i < 4; ++i) {
      const double f = static_cast<double>(c[i]) / n;
      s1[i] += f;
      s2[i] += f * f;
    }
  }
  for (int i = 0; i < 4; ++i) {
    const double mean = s1[i] / reps;
    const double var = s2[i] / reps - mean * mean;
    const double sigma2 = p[i] * (1 - p[i]) / n;
    EXPECT_NEAR(mean, p[i], 4.0 * std::sqrt(sigma2 / reps));
    // Standard error of a sample variance ~ sigma^2 sqrt(2 / reps).
    EXPECT_NEAR(var, sigma2, 4.0 * sigma2 * std::sqrt(2.0 / reps));
  }
}

TEST(SampleBinomial, MatchesExactPmfInversionRegime) {
  for (auto [n, p] : {std::pair<Shots, double>{20, 0.1}, {1000, 0.002}, {7, 0.5}, {30, 0.9}}) {
    const auto [chi2, dof] = chi_square(n, p, 200000, static_cast<std::uint64_t>(n));
    // 99.99% quantile of chi^2 is below dof + 6 sqrt(2 dof) + 10 for these dof.
    EXPECT_LT(chi2, dof + 6.0 * std::sqrt(2.0 * dof) + 10.0) << "n=" << n << " p=" << p;
  }
}

TEST(SampleBinomial, MatchesExactPmfRejectionRegime) {
  for (auto [n, p] : {std::pair<Shots, double>{100, 0.3}, {1000, 0.5}, {5000, 0.01}, {200, 0.75}}) {
    const auto [chi2, dof] = chi_square(n, p, 200000, static_cast<std::uint64_t>(n) + 7);
    EXPECT_LT(chi2, dof + 6.0 * std::sqrt(2.0 * dof) + 10.0) << "n=" << n << " p=" << p;
  }
}

TEST(SampleBinomial, EdgeCasesAndErrors) {
  RngStream rng(3, 4);
  EXPECT_EQ(sample_binomial(0, 0.3, rng), 0);
  EXPECT_EQ(sample_binomial(10, 0.0, rng), 0);
  EXPECT_EQ(sample_binomial(10, 1.0, rng), 10);
  EXPECT_THROW(sample_binomial(-1, 0.3, rng), std::invalid_argument);
  EXPECT_THROW(sample_binomial(10, 1.3, rng), std::invalid_argument);
  const Shots big = 10000000;
  const Shots k = sample_binomial(big, 0.25, rng);
  EXPECT_NEAR(static_cast<double>(k), 0.25 * big, 6.0 * std::sqrt(big * 0.1875));
}

TEST(AllocateShots, Examples) {
  EXPECT_EQ(allocate_shots(9, 3), (std::vector<Shots>{3, 3, 3}));
  EXPECT_EQ(allocate_shots(10, 3), (std::vector<Shots>{4, 3, 3}));
  EXPECT_EQ(allocate_shots(11, 3), (std::vector<Shots>{4, 4, 3}));
  EXPECT_EQ(allocate_shots(0, 3), (std::vector<Shots>{0, 0, 0}));
  EXPECT_THROW(allocate_shots(5, 0), std::invalid_argument);
}

TEST(Frequencies, Examples) {
  const auto a = frequencies(make_record({{0, 10, 10, 10}}));
  EXPECT_DOUBLE_EQ(a[0][0], 0.0);
  EXPECT_DOUBLE_EQ(a[0][1], 1.0 / 3);
  const auto b = frequencies(make_record({{15, 5, 5, 5}}));
  EXPECT_DOUBLE_EQ(b[0][0], 0.5);
  EXPECT_DOUBLE_EQ(b[0][3], 1.0 / 6);
  const auto m = frequencies(make_record({{7, 3}, {5, 5}, {10, 0}}));
  EXPECT_DOUBLE_EQ(m[0][0], 0.7);
  EXPECT_DOUBLE_EQ(m[1][1], 0.5);
  EXPECT_DOUBLE_EQ(m[2][0], 1.0);
  EXPECT_THROW(frequencies(make_record({{0, 0}, {1, 1}, {2, 0}})), std::invalid_argument);
}

TEST(SampleRecord, DeterministicPerStream) {
  const auto m = canonical_model(Family::Mub);
  RngStream a(42, 17), b(42, 17), c(42, 18);
  const auto ra = sample_record(m, {0.1, 0.2, 0.3}, 1001, a);
  const auto rb = sample_record(m, {0.1, 0.2, 0.3}, 1001, b);
  const auto rc = sample_record(m, {0.1, 0.2, 0.3}, 1001, c);
  EXPECT_EQ(ra, rb);
  EXPECT_NE(ra, rc);
  EXPECT_TRUE(ra.valid());
  EXPECT_EQ(ra.shots, (std::vector<Shots>{334, 334, 333}));
}

TEST(RngStream, PinnedOutput) {
  // mt19937_64 and seed_seq are fully specified by the standard and the
  // binomial samplers are our own, so the raw words hold on every platform and
  // the counts wherever libm agrees. A change here changes every sweep.
  RngStream a(2024, task_stream_id(0, 0));
  EXPECT_EQ(a.next(), 0x89b6f70ea35cef37ULL);
  EXPECT_EQ(a.next(), 0x8a05a64c01565778ULL);
  EXPECT_EQ(a.next(), 0x7cb8c18d7a33f783ULL);
  RngStream b(2024, task_stream_id(3, (2ULL << 56) ^ 1000));
  const std::vector<double> p{0.5, 1.0 / 6, 1.0 / 6, 1.0 / 6};
  EXPECT_EQ(sample_counts(p, 1000000, b), (std::vector<Shots>{499429, 166763, 167111, 166697}));
}

TEST(RngStream, UniformOpenInterval) {
  RngStream u(7, 7);
  for (int i = 0; i < 100000; ++i) {
    const double x = u.uniform();
    ASSERT_GT(x, 0.0);
    ASSERT_LT(x, 1.0);
  }
  EXPECT_EQ(task_stream_id(1, 0), kStreamMultiplier);
  EXPECT_EQ(task_stream_id(0, 5), 5u);
}

TEST(KnownBasisPureState, RareOutcomeNeverObserved) {
  const auto m = align_optimal(canonical_model(Family::Sic), {0.6, 0.0, 0.8});
  for (int r = 0; r < 200; ++r) {
    RngStream rng(8, task_stream_id(r, 3));
    const auto rec = sample_record(m, {0.6, 0.0, 0.8}, 10000, rng);
    ASSERT_EQ(rec.settings[0][0], 0);
  }
}
