#pragma once

// Scalar special functions: log-gamma, Beta, regularized incomplete beta and
// gamma, chi-square, Gaussian and Gumbel distributions.
//
// Everything here is a pure function of its arguments. std::lgamma is avoided
// on purpose: glibc's implementation writes the global `signgam`.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "rexcap/errors.hpp"

namespace rexcap {

namespace detail {

inline constexpr double kTiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
inline constexpr double kEps = std::numeric_limits<double>::epsilon();

// Godfrey's g = 607/128 coefficient set, 15 terms.
inline constexpr double kLanczosG = 607.0 / 128.0;
inline constexpr std::array<double, 15> kLanczosCoef = {
    0.99999999999999709182,     57.156235665862923517,     -59.597960355475491248,
    14.136097974741747174,      -0.49191381609762019978,   .33994649984811888699e-4,
    .46523628927048575665e-4,   -.98374475304879564677e-4, .15808870322491248884e-3,
    -.21026444172410488319e-3,  .21743961811521264320e-3,  -.16431810653676389022e-3,
    .84418223983852743293e-4,   -.26190838401581408670e-4, .36899182659531622704e-5};

inline double lanczos_log_gamma(double x) {
  // Valid for x >= 0.5.
  const double z = x - 1.0;
  double sum = kLanczosCoef[0];
  for (std::size_t i = 1; i < kLanczosCoef.size(); ++i) sum += kLanczosCoef[i] / (z + static_cast<double>(i));
  const double t = z + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(sum);
}

// Continued fraction for I_x(a,b), modified Lentz. Converges quickly for
// x below the mean a/(a+b).
inline double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  // 300 iterations cover shape parameters up to a few thousand; beyond that
  // the required count grows like sqrt(a + b).
  const int max_iter = 300 + static_cast<int>(4.0 * std::sqrt(a + b));
  for (int m = 1; m <= max_iter; ++m) {
    const double dm = static_cast<double>(m);
    const double m2 = 2.0 * dm;
    double aa = dm * (b - dm) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + dm) * (qab + dm) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) return h;
  }
  return h;
}

}  // namespace detail

inline double log_gamma(double x) {
  detail::require_domain(x > 0.0 && std::isfinite(x), "log_gamma", "argument must be positive and finite");
  if (x == 1.0 || x == 2.0) return 0.0;
  if (x < 0.5) {
    // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - detail::lanczos_log_gamma(1.0 - x);
  }
  return detail::lanczos_log_gamma(x);
}

inline double gamma_fn(double x) { return std::exp(log_gamma(x)); }

namespace detail {

inline double zeta_int(int k) {
  static constexpr std::array<double, 9> low = {
      1.6449340668482264365, 1.2020569031595942854, 1.0823232337111381915, 1.0369277551433699263,
      1.0173430619844491397, 1.0083492773819228268, 1.0040773561979443394, 1.0020083928260822144,
      1.0009945751278180853};
  if (k <= 10) return low[static_cast<std::size_t>(k - 2)];
  double s = 1.0;
  for (int n = 2; n <= 30; ++n) s += std::pow(static_cast<double>(n), -k);
  return s;
}

inline constexpr double kSmallGammaArg = 0.1;

}  // namespace detail

/// log Gamma(1 + x) for |x| <= 0.1 by its Maclaurin series, accurate in
/// relative terms down to x = 0.
inline double log_gamma_1p_small(double x) {
  detail::require_domain(std::fabs(x) <= detail::kSmallGammaArg, "log_gamma_1p_small", "need |x| <= 0.1");
  double sum = -std::numbers::egamma * x;
  double xk = -x;  // (-x)^k
  for (int k = 2; k <= 40; ++k) {
    xk *= -x;
    sum += detail::zeta_int(k) * xk / k;
  }
  return sum;
}

/// log Gamma(1 + 2x) - 2 log Gamma(1 + x) for |x| <= 0.1, summed termwise so
/// nothing cancels as x -> 0.
inline double log_gamma_doubling_gap_small(double x) {
  detail::require_domain(std::fabs(x) <= detail::kSmallGammaArg, "log_gamma_doubling_gap_small", "need |x| <= 0.1");
  double sum = 0.0;
  double xk = -x;  // (-x)^k
  for (int k = 2; k <= 40; ++k) {
    xk *= -x;
    sum += detail::zeta_int(k) * (std::ldexp(1.0, k) - 2.0) * xk / k;
  }
  return sum;
}

namespace detail {

// Stirling remainder log Gamma(x) - [(x - 1/2) log x - x + log(2 pi)/2], x >= 20.
inline double stirling_remainder(double x) {
  const double r = 1.0 / x;
  const double r2 = r * r;
  return r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))));
}

}  // namespace detail

inline double log_beta(double s, double t) {
  detail::require_domain(s > 0.0 && t > 0.0, "log_beta", "arguments must be positive");
  const double small = std::min(s, t);
  const double big = std::max(s, t);
  if (big < 20.0) return log_gamma(s) + log_gamma(t) - log_gamma(s + t);
  // log Gamma(big) - log Gamma(big + small) without cancelling two large values.
  const double ratio = -(big - 0.5) * std::log1p(small / big) - small * std::log(big + small) + small +
                       detail::stirling_remainder(big) - detail::stirling_remainder(big + small);
  return log_gamma(small) + ratio;
}

inline double beta_fn(double s, double t) {
  detail::require_domain(s > 0.0 && t > 0.0, "beta_fn", "arguments must be positive");
  return std::exp(log_beta(s, t));
}

/// Both tails of the regularized incomplete beta function. Whichever tail is
/// evaluated directly keeps full relative accuracy; the other is 1 - it.
struct BetaTails {
  double lower;  // I_x(a,b)
  double upper;  // 1 - I_x(a,b)
};

inline BetaTails incomplete_beta_tails(double a, double b, double x) {
  detail::require_domain(a > 0.0 && b > 0.0, "incomplete_beta", "shape parameters must be positive");
  detail::require_domain(x >= 0.0 && x <= 1.0, "incomplete_beta", "x must lie in [0,1]");
  if (x == 0.0) return {0.0, 1.0};
  if (x == 1.0) return {1.0, 0.0};
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  if (x < a / (a + b)) {
    const double lower = std::exp(log_front) * detail::beta_continued_fraction(a, b, x) / a;
    return {lower, 1.0 - lower};
  }
  const double upper = std::exp(log_front) * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
  return {1.0 - upper, upper};
}

inline double incomplete_beta(double a, double b, double x) { return incomplete_beta_tails(a, b, x).lower; }

/// CDF of |<L,U>|^2 ~ Beta(1/2, (n-1)/2) for U uniform on S^{n-1}. `n` is real
/// so that callers can use continuous-dimension extensions.
inline double inner_sq_cdf(double w, double n) {
  detail::require_domain(n >= 2.0, "inner_sq_cdf", "dimension n must be >= 2");
  detail::require_domain(w >= 0.0 && w <= 1.0, "inner_sq_cdf", "w must lie in [0,1]");
  return incomplete_beta_tails(0.5, (n - 1.0) / 2.0, w).lower;
}

inline double inner_sq_sf(double w, double n) {
  detail::require_domain(n >= 2.0, "inner_sq_sf", "dimension n must be >= 2");
  detail::require_domain(w >= 0.0 && w <= 1.0, "inner_sq_sf", "w must lie in [0,1]");
  return incomplete_beta_tails(0.5, (n - 1.0) / 2.0, w).upper;
}

/// Exact CDF of the maximum of p i.i.d. Beta(1/2,(n-1)/2) variables, i.e. of
/// M^2 when the p unit vectors are i.i.d. uniform.
inline double max_inner_sq_cdf(double w, double n, double p) {
  const double sf = inner_sq_sf(w, n);
  if (sf >= 1.0) return 0.0;
  return std::exp(p * std::log1p(-sf));
}

/// The integral of s^{-1/2}(1-s)^{(n-3)/2} over [w,1] together with the
/// closed-form lower and upper bounds obtained by integrating by parts.
struct BetaTailBounds {
  double lower;
  double exact;
  double upper;
  double normalizer;  // B(1/2,(n-1)/2); exact / normalizer is a probability

  double exact_probability() const { return exact / normalizer; }
};

inline BetaTailBounds lemma1_bounds(double w, std::int64_t n) {
  detail::require_domain(n >= 3, "lemma1_bounds", "n must be >= 3");
  detail::require_domain(w > 0.0 && w <= 1.0, "lemma1_bounds", "w must lie in (0,1]");
  const double nd = static_cast<double>(n);
  const double half_shape = (nd - 1.0) / 2.0;
  const double normalizer = beta_fn(0.5, half_shape);
  if (w == 1.0) return {0.0, 0.0, 0.0, normalizer};
  const double tail_factor = std::exp(half_shape * std::log1p(-w));
  const double lower = 2.0 * ((nd + 2.0) * w - 1.0) / (nd * nd - 1.0) * std::pow(w, -1.5) * tail_factor;
  const double upper = 2.0 / (nd - 1.0) / std::sqrt(w) * tail_factor;
  const double exact = normalizer * inner_sq_sf(w, nd);
  return {lower, exact, upper, normalizer};
}

/// Regularized lower incomplete gamma P(a, x) and its complement.
struct GammaTails {
  double lower;
  double upper;
};

inline GammaTails incomplete_gamma_tails(double a, double x) {
  detail::require_domain(a > 0.0, "incomplete_gamma", "shape must be positive");
  detail::require_domain(x >= 0.0, "incomplete_gamma", "x must be nonnegative");
  if (x == 0.0) return {0.0, 1.0};
  if (std::isinf(x)) return {1.0, 0.0};
  const double log_front = a * std::log(x) - x - log_gamma(a);
  const int max_iter = 1000 + static_cast<int>(10.0 * std::sqrt(a + x));
  if (x < a + 1.0) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int i = 0; i < max_iter; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    const double lower = sum * std::exp(log_front);
    return {lower, 1.0 - lower};
  }
  double b = x + 1.0 - a;
  double c = 1.0 / detail::kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= max_iter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < detail::kTiny) d = detail::kTiny;
    c = b + an / c;
    if (std::fabs(c) < detail::kTiny) c = detail::kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  const double upper = std::exp(log_front) * h;
  return {1.0 - upper, upper};
}

inline double chi2_cdf(double x, double d) {
  detail::require_domain(d > 0.0, "chi2_cdf", "degrees of freedom must be positive");
  detail::require_domain(x >= 0.0, "chi2_cdf", "x must be nonnegative");
  return incomplete_gamma_tails(d / 2.0, x / 2.0).lower;
}

inline double chi2_sf(double x, double d) {
  detail::require_domain(d > 0.0, "chi2_sf", "degrees of freedom must be positive");
  detail::require_domain(x >= 0.0, "chi2_sf", "x must be nonnegative");
  return incomplete_gamma_tails(d / 2.0, x / 2.0).upper;
}

/// Inverts chi2_cdf by bracketing and bisection on x. Iterates until the
/// bracket is at the resolution of doubles, which is well inside 1e-10 in
/// probability.
inline double chi2_quantile(double q, double d) {
  detail::require_domain(d > 0.0, "chi2_quantile", "degrees of freedom must be positive");
  detail::require_domain(q > 0.0 && q < 1.0, "chi2_quantile", "q must lie in (0,1)");
  double lo = 0.0;
  double hi = std::max(1.0, d);
  while (chi2_cdf(hi, d) < q) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 2000 && hi - lo > 4.0 * detail::kEps * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (chi2_cdf(mid, d) < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double gauss_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double gauss_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Acklam's rational approximation followed by one Halley step on the CDF.
inline double gauss_quantile(double q) {
  detail::require_domain(q > 0.0 && q < 1.0, "gauss_quantile", "q must lie in (0,1)");
  static constexpr std::array<double, 6> a = {-3.969683028665376e+01, 2.209460984245205e+02,
                                              -2.759285104469687e+02, 1.383577518672690e+02,
                                              -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b = {-5.447609879822406e+01, 1.615858368580409e+02,
                                              -1.556989798598866e+02, 6.680131188771972e+01,
                                              -1.328068155288572e+01};
  static constexpr std::array<double, 6> c = {-7.784894002430293e-03, -3.223964580411365e-01,
                                              -2.400758277161838e+00, -2.549732539343734e+00,
                                              4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d = {7.784695709041462e-03, 3.224671290700398e-01,
                                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double q_low = 0.02425;
  double x;
  if (q < q_low) {
    const double t = std::sqrt(-2.0 * std::log(q));
    x = (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  } else if (q <= 1.0 - q_low) {
    const double u = q - 0.5;
    const double r = u * u;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double t = std::sqrt(-2.0 * std::log1p(-q));
    x = -(((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  }
  // Halley refinement. The residual Phi(x) - q is formed on the smaller tail.
  const double residual = (x < 0.0) ? gauss_cdf(x) - q : (1.0 - q) - gauss_cdf(-x);
  const double u = residual * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

inline double gumbel_cdf(double x) { return std::exp(-std::exp(-x)); }

inline double gumbel_pdf(double x) {
  const double t = std::exp(-x);
  return t * std::exp(-t);
}

inline double gumbel_quantile(double q) {
  detail::require_domain(q > 0.0 && q < 1.0, "gumbel_quantile", "q must lie in (0,1)");
  return -std::log(-std::log(q));
}

}  // namespace rexcap
