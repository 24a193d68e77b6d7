#pragma once

// Rank-extreme bounds and limit laws for the maximum magnitude of a rank-d
// vector X = L^T Z with unit-norm columns L_j. Writing Z = |Z| U turns
// max_j |X_j| into |Z| times a maximal inner product on S^{d-1}, so every
// function here reuses the packing quantities with the sphere dimension set
// to the rank d.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include "rexcap/errors.hpp"
#include "rexcap/packing.hpp"
#include "rexcap/specfun.hpp"

namespace rexcap {

/// Centering u_d and scaling v_d of |Z|^2, with (|Z|^2 - u_d)/v_d converging
/// to a law F_inf. Only the Gaussian case ships a concrete F_inf (standard
/// normal, from the chi-square CLT).
struct NormLaw {
  enum class Kind { kGaussian, kCustom };

  Kind kind;
  double u;
  double v;

  static NormLaw gaussian(std::int64_t d) {
    detail::require_domain(d >= 1, "NormLaw", "rank must be >= 1");
    const double dd = static_cast<double>(d);
    return {Kind::kGaussian, dd, std::sqrt(2.0 * dd)};
  }

  static NormLaw custom(double u, double v) {
    detail::require_domain(u > 0.0 && v > 0.0, "NormLaw", "u and v must be positive");
    return {Kind::kCustom, u, v};
  }
};

/// sqrt(u_d (1 - p^{-2/(d-1)})). `dims.n()` is the rank d.
inline double rex_bound(const ProblemDims& dims, const NormLaw& law) {
  detail::require_domain(dims.log_p() >= std::log(2.0), "rex_bound", "p must be >= 2");
  if (law.kind == NormLaw::Kind::kGaussian && law.u != static_cast<double>(dims.n())) {
    throw UsageError("rex_bound: Gaussian norm law built for a different rank");
  }
  return std::sqrt(law.u) * saber(dims);
}

inline double rex_bound(const ProblemDims& dims) { return rex_bound(dims, NormLaw::gaussian(dims.n())); }

/// (log log p)^2 d / (log p)^2; the Gaussian bound holds without slack once
/// this diverges.
inline double highrank_regime_quantity(const ProblemDims& dims) {
  detail::require_domain(dims.log_p() > 1.0, "highrank_regime_quantity", "requires log p > 1 (p >= 3)");
  const double lp = dims.log_p();
  const double llp = std::log(lp);
  return llp * llp * static_cast<double>(dims.n()) / (lp * lp);
}

inline bool highrank_bound_check(const ProblemDims& dims, double threshold = 10.0) {
  return highrank_regime_quantity(dims) > threshold;
}

/// f(beta) = (1 - e^{-2 beta}) / beta. With log p / d -> beta the Gaussian
/// maximum over sqrt(log p) tends to sqrt(f(beta)). Decreasing from 2 to 0.
inline double rank_phase_ratio(double beta) {
  detail::require_domain(beta > 0.0, "rank_phase_ratio", "beta must be positive");
  return -std::expm1(-2.0 * beta) / beta;
}

/// Moment approximations for M^2 (m, v_small) and K = |Z|^2 M^2 (E, V) in the
/// Gaussian case.
struct RexMoments {
  double m;
  double v_small;
  double E;
  double V;
};

namespace detail {

// Continuous in d >= 2 so that E can be inverted by bisection.
inline RexMoments rex_moments_real(double d, double log_p) {
  const auto k = std_constants_real(d, log_p);
  const double x = 2.0 / (d - 1.0);
  double g2;
  double one_minus_g2;
  double spread;  // Gamma(1 + 2x) - Gamma(1 + x)^2
  if (x <= 0.1) {
    // Both gamma values tend to 1 here; work with their logs.
    const double lg = log_gamma_1p_small(x);
    g2 = std::exp(lg);
    one_minus_g2 = -std::expm1(lg);
    spread = g2 * g2 * std::expm1(log_gamma_doubling_gap_small(x));
  } else {
    g2 = gamma_fn(1.0 + x);
    one_minus_g2 = 1.0 - g2;
    spread = gamma_fn(1.0 + 2.0 * x) - g2 * g2;
  }
  const double m = k.a + 0.5 * (d - 1.0) * one_minus_g2 * k.b;
  const double v_small = 0.25 * (d - 1.0) * (d - 1.0) * k.b * k.b * spread;
  return {m, v_small, d * m, 2.0 * d * (v_small + m * m) + d * d * v_small};
}

}  // namespace detail

inline RexMoments rex_moments(const ProblemDims& dims) {
  detail::require_domain(dims.log_p() >= std::log(2.0), "rex_moments", "p must be >= 2");
  return detail::rex_moments_real(static_cast<double>(dims.n()), dims.log_p());
}

/// Which limit law K follows, keyed by r = (log p)^2 / d.
struct KLimitRegime {
  enum class Tag { kFixedD, kNormDominated, kMixture, kMaxDominated };

  Tag tag;
  std::optional<double> c;

  static KLimitRegime fixed_d() { return {Tag::kFixedD, std::nullopt}; }
  static KLimitRegime norm_dominated() { return {Tag::kNormDominated, std::nullopt}; }
  static KLimitRegime mixture(double c) { return {Tag::kMixture, c}; }
  static KLimitRegime max_dominated() { return {Tag::kMaxDominated, std::nullopt}; }
};

// Heuristic cutoffs on r; only the limits r -> inf, c, 0 are theory.
struct RegimeCutoffs {
  double norm_dominated_above = 100.0;
  double max_dominated_below = 0.01;
};

inline double k_regime_ratio(double log_p, double d) {
  detail::require_domain(d >= 1.0, "k_regime_ratio", "d must be >= 1");
  return log_p * log_p / d;
}

inline KLimitRegime classify_k_regime(double log_p, double d, bool fixed_d, const RegimeCutoffs& cutoffs = {}) {
  detail::require_domain(log_p >= std::log(2.0), "classify_k_regime", "p must be >= 2");
  if (fixed_d) return KLimitRegime::fixed_d();
  const double r = k_regime_ratio(log_p, d);
  if (r > cutoffs.norm_dominated_above) return KLimitRegime::norm_dominated();
  if (r < cutoffs.max_dominated_below) return KLimitRegime::max_dominated();
  return KLimitRegime::mixture(r);
}

namespace detail {

inline void validate_regime(const KLimitRegime& regime, const ProblemDims& dims) {
  const bool has_c = regime.c.has_value();
  if ((regime.tag == KLimitRegime::Tag::kMixture) != has_c) {
    throw UsageError("k_limit: c must be present exactly for the mixture regime");
  }
  if (has_c && !(*regime.c > 0.0 && std::isfinite(*regime.c))) {
    throw UsageError("k_limit: mixture constant c must be positive and finite");
  }
  if (dims.log_p() < std::log(2.0)) throw UsageError("k_limit: p must be >= 2");
}

// 5-point Gauss-Legendre on [-1, 1].
inline constexpr std::array<double, 5> kGl5Nodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                                    0.5384693101056831, 0.9061798459386640};
inline constexpr std::array<double, 5> kGl5Weights = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                      0.4786286704993665, 0.2369268850561891};

}  // namespace detail

/// CDF of G + H / sqrt(2c) with G standard normal and H standard Gumbel,
/// by quadrature of Phi(x - h/sqrt(2c)) against the Gumbel density on
/// [-10, 25] (80 panels of 5-point Gauss-Legendre).
inline double gauss_gumbel_mixture_cdf(double x, double c) {
  detail::require_domain(c > 0.0, "gauss_gumbel_mixture_cdf", "c must be positive");
  constexpr double lo = -10.0;
  constexpr double hi = 25.0;
  constexpr int panels = 80;
  const double scale = 1.0 / std::sqrt(2.0 * c);
  const double width = (hi - lo) / panels;
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double mid = lo + (i + 0.5) * width;
    for (std::size_t k = 0; k < detail::kGl5Nodes.size(); ++k) {
      const double h = mid + 0.5 * width * detail::kGl5Nodes[k];
      total += detail::kGl5Weights[k] * gauss_cdf(x - h * scale) * gumbel_pdf(h);
    }
  }
  return 0.5 * width * total;
}

/// Maps a raw K value to the coordinate in which the regime's limit law is
/// stated. Identity for fixed d.
inline double standardize_k(double k_value, const ProblemDims& dims, const KLimitRegime& regime) {
  detail::validate_regime(regime, dims);
  if (regime.tag == KLimitRegime::Tag::kFixedD) return k_value;
  const double d = static_cast<double>(dims.n());
  const auto sc = std_constants(dims);
  if (regime.tag == KLimitRegime::Tag::kMaxDominated) return (k_value - d * sc.a) / (d * sc.b);
  return (k_value - d * sc.a) / (std::sqrt(2.0 * d) * sc.a);
}

/// Limit CDF of K for Gaussian Z. `x` is on the raw K scale for fixed d and
/// in the standardize_k coordinate otherwise.
inline double k_limit_cdf(double x, const ProblemDims& dims, const KLimitRegime& regime) {
  detail::validate_regime(regime, dims);
  switch (regime.tag) {
    case KLimitRegime::Tag::kFixedD:
      return x <= 0.0 ? 0.0 : chi2_cdf(x, static_cast<double>(dims.n()));
    case KLimitRegime::Tag::kNormDominated:
      return gauss_cdf(x);
    case KLimitRegime::Tag::kMixture:
      return gauss_gumbel_mixture_cdf(x, *regime.c);
    case KLimitRegime::Tag::kMaxDominated:
      return gumbel_cdf(x);
  }
  throw UsageError("k_limit_cdf: unknown regime");
}

}  // namespace rexcap
