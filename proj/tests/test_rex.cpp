#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "rexcap/montecarlo.hpp"
#include "rexcap/rex.hpp"

namespace rexcap {
namespace {

ProblemDims dims(std::int64_t d, std::int64_t p) { return ProblemDims::from_count(d, p); }

TEST(RexBound, ComposesWithSaber) {
  EXPECT_DOUBLE_EQ(rex_bound(dims(11, 8000)), std::sqrt(11.0) * saber(dims(11, 8000)));
  for (std::int64_t d : {2, 5, 30, 400}) {
    for (std::int64_t p : {2, 90, 8000, 1000000}) {
      const double b = rex_bound(dims(d, p));
      const double d_real = static_cast<double>(d);
      EXPECT_NEAR(b * b, d_real * (1.0 - std::pow(static_cast<double>(p), -2.0 / (d_real - 1.0))),
                  4e-16 * d_real);
    }
  }
}

TEST(RexBound, CriticalScalingLimit) {
  const std::int64_t d = 1000000;
  const auto dm = ProblemDims::from_log_p(d, static_cast<double>(d));
  EXPECT_NEAR(rex_bound(dm) / std::sqrt(static_cast<double>(d)), std::sqrt(1.0 - std::exp(-2.0)), 1e-6);
}

TEST(RexBound, CustomLawScalesByRootU) {
  const auto law = NormLaw::custom(7.5, 2.0);
  EXPECT_DOUBLE_EQ(rex_bound(dims(11, 8000), law), std::sqrt(7.5) * saber(dims(11, 8000)));
}

TEST(RexBound, BoundaryPolicy) {
  EXPECT_THROW(rex_bound(dims(5, 1)), DomainError);
  EXPECT_THROW(dims(1, 100), DomainError);
  EXPECT_THROW(rex_bound(dims(11, 8000), NormLaw::gaussian(12)), UsageError);
  EXPECT_THROW(NormLaw::custom(0.0, 1.0), DomainError);
}

TEST(HighRankCheck, RegimeQuantity) {
  EXPECT_TRUE(highrank_bound_check(dims(1000000, 1000000)));
  EXPECT_FALSE(highrank_bound_check(dims(2, 1000000)));
  EXPECT_FALSE(highrank_bound_check(dims(1000000, 1000000), std::numeric_limits<double>::infinity()));
  const double lp = std::log(1e6);
  EXPECT_NEAR(highrank_regime_quantity(dims(2, 1000000)), std::log(lp) * std::log(lp) * 2.0 / (lp * lp), 1e-15);
  EXPECT_THROW(highrank_regime_quantity(dims(5, 2)), DomainError);
}

TEST(RankPhaseRatio, SmoothDecreasingWithRangeZeroTwo) {
  double prev = 2.0;
  for (double beta = 1e-6; beta < 1e3; beta *= 1.1) {
    const double f = rank_phase_ratio(beta);
    ASSERT_LT(f, prev) << beta;
    ASSERT_GT(f, 0.0);
    prev = f;
  }
  EXPECT_NEAR(rank_phase_ratio(1e-9), 2.0, 1e-8);
  EXPECT_LT(rank_phase_ratio(1e6), 1e-5);
  EXPECT_THROW(rank_phase_ratio(0.0), DomainError);
}

TEST(RexMoments, ReferenceValues) {
  const auto mom = rex_moments(dims(11, 8000));
  EXPECT_NEAR(mom.m, 0.80220494387340758274, 1e-13);
  EXPECT_NEAR(mom.v_small, 0.0020525917548353786158, 1e-15);
  EXPECT_NEAR(mom.E, 8.8242543826074834101, 1e-12);
  EXPECT_NEAR(mom.V, 14.451241604390073362, 1e-11);
}

TEST(RexMoments, InternalConsistency) {
  for (std::int64_t d : {2, 3, 11, 16, 21, 300}) {
    for (std::int64_t p : {2, 1000, 8000, 100000}) {
      const auto mom = rex_moments(dims(d, p));
      const double dd = static_cast<double>(d);
      EXPECT_GT(mom.m, 0.0);
      EXPECT_LT(mom.m, 1.0);
      EXPECT_GE(mom.v_small, 0.0);
      EXPECT_DOUBLE_EQ(mom.E, dd * mom.m);
      EXPECT_DOUBLE_EQ(mom.V, 2.0 * dd * (mom.v_small + mom.m * mom.m) + dd * dd * mom.v_small);
    }
  }
}

TEST(RexMoments, ExpectationIncreasingInRank) {
  for (std::int64_t p : {1000, 8000, 100000}) {
    double prev = 0.0;
    for (std::int64_t d = 2; d <= 10000; d += (d < 200 ? 1 : 37)) {
      const double e = rex_moments(dims(d, p)).E;
      ASSERT_GT(e, prev) << d << " " << p;
      prev = e;
    }
  }
}

TEST(RexMoments, HugePLimit) {
  for (std::int64_t d : {3, 11, 50}) {
    const auto mom = rex_moments(ProblemDims::from_log_p(d, 1e5 * static_cast<double>(d)));
    EXPECT_NEAR(mom.m, 1.0, 1e-9);
    EXPECT_NEAR(mom.E, static_cast<double>(d), 1e-7 * static_cast<double>(d));
  }
}

TEST(RexMoments, MatchMonteCarloAtSmallSize) {
  // (p, d) = (200, 5): 1e5 brute-force draws of K with explicit loadings.
  auto rng = stream_rng(2024, 0);
  const int draws = 100000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double k = sample_max_inner(200, 5, rng).k;
    sum += k;
    sum_sq += k * k;
  }
  const double mean = sum / draws;
  const double var = (sum_sq - draws * mean * mean) / (draws - 1);
  const auto mom = rex_moments(dims(5, 200));
  EXPECT_NEAR(mean, mom.E, 0.01 * mom.E);
  EXPECT_NEAR(var, mom.V, 0.05 * mom.V);
}

TEST(ClassifyRegime, Cases) {
  EXPECT_EQ(classify_k_regime(std::log(8000.0), 11, true).tag, KLimitRegime::Tag::kFixedD);
  const double lp = std::log(1e6);
  const auto mix = classify_k_regime(lp, 2.0 * lp * lp, false);
  ASSERT_EQ(mix.tag, KLimitRegime::Tag::kMixture);
  EXPECT_NEAR(*mix.c, 0.5, 1e-12);
  const auto maxdom = classify_k_regime(std::log(100.0), 1e6, false);
  EXPECT_EQ(maxdom.tag, KLimitRegime::Tag::kMaxDominated);
  EXPECT_NEAR(k_regime_ratio(std::log(100.0), 1e6), 2.1e-5, 1e-6);
  EXPECT_EQ(classify_k_regime(lp, 1.0, false).tag, KLimitRegime::Tag::kNormDominated);
  RegimeCutoffs wide{1e9, 1e-9};
  EXPECT_EQ(classify_k_regime(lp, 1.0, false, wide).tag, KLimitRegime::Tag::kMixture);
}

// Trapezoid on a wide window with a fine step: independent of the
// Gauss-Legendre panels used by the library.
double mixture_trapezoid(double x, double c) {
  const double lo = -8.0;
  const double hi = 40.0;
  const int steps = 200000;
  const double h = (hi - lo) / steps;
  double sum = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double t = lo + i * h;
    const double f = 0.5 * std::erfc(-(x - t / std::sqrt(2.0 * c)) / std::sqrt(2.0)) * std::exp(-t - std::exp(-t));
    sum += (i == 0 || i == steps) ? 0.5 * f : f;
  }
  return sum * h;
}

TEST(KLimitCdf, RegimeDelegation) {
  const auto dm = dims(11, 8000);
  EXPECT_DOUBLE_EQ(k_limit_cdf(9.0, dm, KLimitRegime::fixed_d()), chi2_cdf(9.0, 11));
  EXPECT_EQ(k_limit_cdf(-1.0, dm, KLimitRegime::fixed_d()), 0.0);
  EXPECT_DOUBLE_EQ(k_limit_cdf(0.7, dm, KLimitRegime::norm_dominated()), gauss_cdf(0.7));
  EXPECT_NEAR(k_limit_cdf(0.0, dm, KLimitRegime::max_dominated()), std::exp(-1.0), 1e-16);
}

TEST(KLimitCdf, MixtureConvolution) {
  for (double c : {0.05, 0.5, 3.0}) {
    for (double x : {-2.0, 0.0, 0.8, 3.0}) {
      EXPECT_NEAR(gauss_gumbel_mixture_cdf(x, c), mixture_trapezoid(x, c), 1e-6) << c << " " << x;
    }
  }
  for (double x : {-2.5, -0.3, 0.0, 1.0, 2.2}) {
    EXPECT_NEAR(k_limit_cdf(x, dims(400, 8000), KLimitRegime::mixture(1e8)), gauss_cdf(x), 1e-3);
  }
}

TEST(KLimitCdf, MixtureIsCdf) {
  double prev = 0.0;
  for (double x = -12.0; x <= 40.0; x += 0.05) {
    const double f = gauss_gumbel_mixture_cdf(x, 0.3);
    ASSERT_GE(f, prev - 1e-12);
    ASSERT_LE(f, 1.0 + 1e-9);
    prev = f;
  }
  EXPECT_NEAR(prev, 1.0, 1e-6);
}

TEST(KLimitCdf, MalformedRegimeIsUsageError) {
  const auto dm = dims(11, 8000);
  EXPECT_THROW(k_limit_cdf(0.0, dm, {KLimitRegime::Tag::kMixture, std::nullopt}), UsageError);
  EXPECT_THROW(k_limit_cdf(0.0, dm, {KLimitRegime::Tag::kMixture, -1.0}), UsageError);
  EXPECT_THROW(k_limit_cdf(0.0, dm, {KLimitRegime::Tag::kMaxDominated, 2.0}), UsageError);
  EXPECT_THROW(standardize_k(1.0, dims(11, 1), KLimitRegime::max_dominated()), UsageError);
}

TEST(KLimitCdf, StandardizeCoordinates) {
  const auto dm = dims(16, 8000);
  const auto k = std_constants(dm);
  EXPECT_DOUBLE_EQ(standardize_k(5.0, dm, KLimitRegime::fixed_d()), 5.0);
  EXPECT_DOUBLE_EQ(standardize_k(16.0 * k.a, dm, KLimitRegime::norm_dominated()), 0.0);
  EXPECT_DOUBLE_EQ(standardize_k(16.0 * (k.a + k.b), dm, KLimitRegime::max_dominated()), 1.0);
}

TEST(Decomposition, MaxNormFactorsThroughUnitVector) {
  auto rng = stream_rng(5, 3);
  std::normal_distribution<double> normal;
  for (std::int64_t d : {1, 2, 7, 40}) {
    const std::int64_t p = 300;
    const auto loadings = sample_loadings(p, d, rng);
    std::vector<double> z(static_cast<std::size_t>(d));
    double z_sq = 0.0;
    for (double& v : z) {
      v = normal(rng);
      z_sq += v * v;
    }
    const double z_norm = std::sqrt(z_sq);
    double max_raw = 0.0;
    double max_unit = 0.0;
    for (std::int64_t j = 0; j < p; ++j) {
      double dot = 0.0;
      for (std::int64_t k = 0; k < d; ++k) dot += loadings[j * d + k] * z[k];
      max_raw = std::max(max_raw, std::fabs(dot));
      max_unit = std::max(max_unit, std::fabs(dot / z_norm));
    }
    EXPECT_NEAR(max_raw, z_norm * max_unit, 1e-12 * max_raw);
    EXPECT_NEAR(max_raw * max_raw, z_sq * max_unit * max_unit, 1e-12 * max_raw * max_raw);
  }
}

TEST(Decomposition, SampledKEqualsNormTimesMaxSquared) {
  auto rng = stream_rng(8, 1);
  for (int i = 0; i < 200; ++i) {
    const auto s = sample_max_inner(50, 6, rng);
    EXPECT_GE(s.m, 0.0);
    EXPECT_LE(s.m, 1.0);
    EXPECT_GE(s.k, 0.0);
  }
}

// Ratio max_j |<L_j, Z>| / rex_bound for Gaussian Z, sampled exactly as
// sqrt(chi2_d * M^2).
std::vector<double> sharpness_ratios(std::int64_t d, double log_p, int replicates, std::uint64_t seed) {
  auto rng = stream_rng(seed, 0);
  std::chi_squared_distribution<double> norm_sq(static_cast<double>(d));
  const double p = std::exp(log_p);
  const double bound = rex_bound(ProblemDims::from_log_p(d, log_p));
  std::vector<double> out(static_cast<std::size_t>(replicates));
  for (double& r : out) r = std::sqrt(norm_sq(rng) * sample_max_inner_sq_inverse(p, d, rng)) / bound;
  return out;
}

double fraction_within(const std::vector<double>& v, double lo, double hi) {
  double hits = 0.0;
  for (double x : v) hits += (x >= lo && x <= hi) ? 1.0 : 0.0;
  return hits / static_cast<double>(v.size());
}

TEST(Sharpness, RatioConcentratesAtOneAsRankGrows) {
  // The ratio's spread is driven by |Z|/sqrt(d), whose sd is about 1/sqrt(2d):
  // at d = 50 only ~60% of draws land in [0.9, 1.1], at d = 500 nearly all.
  const double beta = std::log(1e5) / 50.0;
  const auto small = sharpness_ratios(50, std::log(1e5), 10000, 1);
  const auto large = sharpness_ratios(500, beta * 500.0, 10000, 2);
  double mean_small = 0.0;
  for (double r : small) mean_small += r / static_cast<double>(small.size());
  EXPECT_NEAR(mean_small, 1.0, 0.06);
  const double frac_small = fraction_within(small, 0.9, 1.1);
  const double frac_large = fraction_within(large, 0.9, 1.1);
  EXPECT_GT(frac_small, 0.5);
  EXPECT_GE(frac_large, 0.95);
  EXPECT_GT(frac_large, frac_small);
}

}  // namespace
}  // namespace rexcap
