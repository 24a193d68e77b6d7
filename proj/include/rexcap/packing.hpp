#pragma once

// Maximal inner products between p unit vectors and an independent uniform
// unit vector on S^{n-1}: the universal high-probability bound, its finite
// sample tail inequality, and the adaptive extreme-value standardization.
//
// The count p enters every formula through log p, so all quantities accept
// p far beyond the range of any integer type.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>

#include "rexcap/errors.hpp"
#include "rexcap/specfun.hpp"

namespace rexcap {

/// Sphere dimension n (the vectors live on S^{n-1} in R^n) and the number p
/// of unit vectors, held as log p.
class ProblemDims {
 public:
  static ProblemDims from_count(std::int64_t n, std::int64_t p) {
    detail::require_domain(p >= 1, "ProblemDims", "p must be >= 1");
    return ProblemDims(n, std::log(static_cast<double>(p)));
  }

  static ProblemDims from_log_p(std::int64_t n, double log_p) {
    detail::require_domain(std::isfinite(log_p) && log_p >= 0.0, "ProblemDims", "log p must be finite and >= 0");
    return ProblemDims(n, log_p);
  }

  std::int64_t n() const { return n_; }
  double log_p() const { return log_p_; }

 private:
  ProblemDims(std::int64_t n, double log_p) : n_(n), log_p_(log_p) {
    detail::require_domain(n >= 2, "ProblemDims", "n must be >= 2");
  }

  std::int64_t n_;
  double log_p_;
};

namespace detail {

// 1 - p^{-2/(n-1)} for a real dimension n.
inline double packing_gap(double n, double log_p) { return -std::expm1(-2.0 * log_p / (n - 1.0)); }

inline double saber_real(double n, double log_p) { return std::sqrt(packing_gap(n, log_p)); }

}  // namespace detail

/// sqrt(1 - p^{-2/(n-1)}): with high probability no inner product between the
/// p vectors and an independent uniform unit vector exceeds this in magnitude.
inline double saber(const ProblemDims& dims) {
  return detail::saber_real(static_cast<double>(dims.n()), dims.log_p());
}

/// Spurious-correlation version: sample correlations from n observations live
/// on a sphere of one dimension less after centering.
inline double sabre(std::int64_t n, double log_p) {
  detail::require_domain(n >= 3, "sabre", "n must be >= 3");
  return saber(ProblemDims::from_log_p(n - 1, log_p));
}

inline double sabre(std::int64_t n, std::int64_t p) {
  detail::require_domain(p >= 1, "sabre", "p must be >= 1");
  return sabre(n, std::log(static_cast<double>(p)));
}

/// (n-1)(p^{2/(n-1)} - 1). Diverges as p grows, uniformly in n.
inline double packing_divergence(const ProblemDims& dims) {
  const double m = static_cast<double>(dims.n() - 1);
  return m * std::expm1(2.0 * dims.log_p() / m);
}

/// Upper bound on P(M > sqrt((1+delta)(1 - p^{-2/(n-1)}))), valid for any
/// configuration of the p vectors. Infinite (vacuous) for p = 1.
inline double saber_tail_bound(const ProblemDims& dims, double delta) {
  detail::require_domain(delta > 0.0 && std::isfinite(delta), "saber_tail_bound", "delta must be positive");
  const double t = packing_divergence(dims);
  if (t <= 0.0) return std::numeric_limits<double>::infinity();
  const double m = static_cast<double>(dims.n() - 1);
  const double log_bound = 0.5 * std::log(2.0) + dims.log_p() / m - 0.5 * delta * t -
                           0.5 * std::log(std::numbers::pi * (1.0 + delta) * t);
  return std::exp(log_bound);
}

/// Location a, scale b and correction c such that (M^2 - a)/b converges to an
/// explicit extreme-value law uniformly in n.
struct StdConstants {
  double a;
  double b;
  double c;
};

namespace detail {

inline StdConstants std_constants_real(double n, double log_p) {
  const double k = 2.0 / (n - 1.0);
  const double log_c = k * (std::log((n - 1.0) / 2.0) + log_beta(0.5, (n - 1.0) / 2.0) +
                            0.5 * std::log(packing_gap(n, log_p)));
  // shrink * c -> 1 for large n, so a is formed from its log.
  const double log_shrunk = log_c - k * log_p;
  return {-std::expm1(log_shrunk), k * std::exp(log_shrunk), std::exp(log_c)};
}

}  // namespace detail

inline StdConstants std_constants(const ProblemDims& dims) {
  detail::require_domain(dims.log_p() >= std::log(2.0), "std_constants", "p must be >= 2");
  return detail::std_constants_real(static_cast<double>(dims.n()), dims.log_p());
}

/// Limit CDF F_n of (M^2 - a)/b: exp(-(1 - 2x/(n-1))^{(n-1)/2}) below the
/// right endpoint (n-1)/2, and 1 from there on. Tends to the Gumbel CDF as
/// n grows.
inline double msq_limit_cdf(double x, double n) {
  detail::require_domain(n >= 2.0, "msq_limit_cdf", "n must be >= 2");
  const double half = (n - 1.0) / 2.0;
  if (x >= half) return 1.0;
  return std::exp(-std::exp(half * std::log1p(-x / half)));
}

inline double msq_limit_cdf(double x, std::int64_t n) { return msq_limit_cdf(x, static_cast<double>(n)); }

/// Closed-form inverse of msq_limit_cdf.
inline double msq_limit_cdf_inverse(double q, double n) {
  detail::require_domain(q > 0.0 && q < 1.0, "msq_limit_quantile", "q must lie in (0,1)");
  const double half = (n - 1.0) / 2.0;
  return half * -std::expm1(std::log(-std::log(q)) / half);
}

/// q-quantile of M^2 implied by the limit law: a + b F_n^{-1}(q).
inline double msq_limit_quantile(double q, const ProblemDims& dims) {
  const auto k = std_constants(dims);
  return k.a + k.b * msq_limit_cdf_inverse(q, static_cast<double>(dims.n()));
}

/// Same quantile on the scale of M itself.
inline double m_limit_quantile(double q, const ProblemDims& dims) {
  return std::sqrt(std::max(0.0, msq_limit_quantile(q, dims)));
}

/// Limit of log p / n along the sequence: infinite, a constant beta, or zero.
struct PhaseRegime {
  enum class Tag { kDense, kCritical, kSparse };

  Tag tag;
  std::optional<double> beta;

  static PhaseRegime dense() { return {Tag::kDense, std::nullopt}; }
  static PhaseRegime critical(double beta) { return {Tag::kCritical, beta}; }
  static PhaseRegime sparse() { return {Tag::kSparse, std::nullopt}; }
};

struct PhaseLimit {
  double limit;
  // In the sparse regime M -> 0, and M / sqrt(2 log p / n) -> 1 is the
  // informative statement; see sparse_rate().
  bool rate_normalized;
};

inline PhaseLimit phase_limit(const PhaseRegime& regime) {
  switch (regime.tag) {
    case PhaseRegime::Tag::kDense:
      if (regime.beta) throw UsageError("phase_limit: dense regime carries no beta");
      return {1.0, false};
    case PhaseRegime::Tag::kCritical: {
      if (!regime.beta) throw UsageError("phase_limit: critical regime requires beta");
      const double beta = *regime.beta;
      detail::require_domain(beta > 0.0 && std::isfinite(beta), "phase_limit", "beta must be positive");
      return {std::sqrt(-std::expm1(-2.0 * beta)), false};
    }
    case PhaseRegime::Tag::kSparse:
      if (regime.beta) throw UsageError("phase_limit: sparse regime carries no beta");
      return {0.0, true};
  }
  throw UsageError("phase_limit: unknown regime");
}

inline double sparse_rate(const ProblemDims& dims) {
  return std::sqrt(2.0 * dims.log_p() / static_cast<double>(dims.n()));
}

}  // namespace rexcap
