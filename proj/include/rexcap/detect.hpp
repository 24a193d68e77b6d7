#pragma once

// Rank detection from row maxima. Each row of an n x p data matrix from a
// rank-d factor model yields one draw of K = max_j W_ij^2; the mean of those
// draws is matched against E_{p,d}, and the delta-method inequality on
// sqrt(Kbar) gives a left-sided confidence bound for d.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rexcap/errors.hpp"
#include "rexcap/packing.hpp"
#include "rexcap/rex.hpp"
#include "rexcap/specfun.hpp"

namespace rexcap {

/// Row-major n x p matrix of finite observations; rows are observations.
class DataMatrix {
 public:
  DataMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows_ < 1) throw UsageError("DataMatrix: need at least one row");
    if (cols_ < 2) throw UsageError("DataMatrix: need at least two columns");
    if (values_.size() != rows_ * cols_) throw UsageError("DataMatrix: value count does not match shape");
    for (double v : values_) {
      if (!std::isfinite(v)) throw UsageError("DataMatrix: entries must be finite");
    }
  }

  DataMatrix(std::size_t rows, std::size_t cols) : DataMatrix(rows, cols, std::vector<double>(rows * cols, 0.0)) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }

  std::span<const double> values() const { return values_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

/// K_i = max_j W_ij^2 for each row, together with the column count p.
struct RowMaxima {
  std::vector<double> k;
  std::int64_t p;

  std::size_t n() const { return k.size(); }

  double mean() const {
    if (k.empty()) throw UsageError("RowMaxima: empty");
    return std::accumulate(k.begin(), k.end(), 0.0) / static_cast<double>(k.size());
  }
};

inline RowMaxima row_maxima(const DataMatrix& w) {
  RowMaxima out{std::vector<double>(w.rows()), static_cast<std::int64_t>(w.cols())};
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double best = 0.0;
    for (double v : w.row(i)) {
      const double sq = v * v;
      if (sq > best) best = sq;
    }
    out.k[i] = best;
  }
  return out;
}

struct SearchOptions {
  double d_cap = 1e6;
  double d_tolerance = 1e-6;
};

struct RankEstimate {
  double d_hat_real;
  std::int64_t d_hat;
  bool solved;
};

namespace detail {

inline std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5)); }

inline double expected_k(double d, double log_p) { return rex_moments_real(d, log_p).E; }

inline double ci_threshold_real(double d, double log_p, double n, double z) {
  const auto mom = rex_moments_real(d, log_p);
  const double shift = z * std::sqrt(mom.V / (4.0 * n * mom.E));
  const double root_e = std::sqrt(mom.E);
  // A negative root means the inequality on sqrt(Kbar) holds for every Kbar.
  if (shift + root_e <= 0.0) return 0.0;
  // Expanded square, so z = 0 returns E exactly.
  return mom.E + shift * (2.0 * root_e + shift);
}

}  // namespace detail

/// Solves Kbar = E_{p,d} for d with E extended to real d >= 2. Unsolvable
/// inputs (Kbar below E_{p,2}, or beyond E at the cap) are flagged, not thrown;
/// d_hat_real is then the bracket edge.
inline RankEstimate estimate_rank(const RowMaxima& km, const SearchOptions& opts = {}) {
  const double kbar = km.mean();
  detail::require_domain(kbar > 0.0, "estimate_rank", "mean row maximum must be positive");
  detail::require_domain(km.p >= 2, "estimate_rank", "p must be >= 2");
  const double log_p = std::log(static_cast<double>(km.p));
  if (kbar < detail::expected_k(2.0, log_p)) return {2.0, 2, false};
  double lo = 2.0;
  double hi = 4.0;
  while (detail::expected_k(std::min(hi, opts.d_cap), log_p) < kbar) {
    if (hi >= opts.d_cap) return {opts.d_cap, detail::round_half_up(opts.d_cap), false};
    lo = hi;
    hi *= 2.0;
  }
  hi = std::min(hi, opts.d_cap);
  while (hi - lo > opts.d_tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (detail::expected_k(mid, log_p) < kbar) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double root = 0.5 * (lo + hi);
  return {root, detail::round_half_up(root), true};
}

/// (z_alpha sqrt(V / (4 n E)) + sqrt(E))^2 at rank d, where z_alpha is the
/// alpha-quantile of the standard normal. Clamped at 0 when the bracket is
/// negative.
inline double ci_threshold(const ProblemDims& dims, std::int64_t n, double alpha) {
  detail::require_domain(alpha > 0.0 && alpha < 1.0, "ci_threshold", "alpha must lie in (0,1)");
  detail::require_domain(n >= 1, "ci_threshold", "n must be >= 1");
  detail::require_domain(dims.log_p() >= std::log(2.0), "ci_threshold", "p must be >= 2");
  return detail::ci_threshold_real(static_cast<double>(dims.n()), dims.log_p(), static_cast<double>(n),
                                   gauss_quantile(alpha));
}

struct CiUpper {
  std::optional<std::int64_t> upper;
  std::optional<double> upper_real;  // continuous root of Kbar = threshold(d)
  bool solved;
};

/// Largest d <= d_cap with Kbar >= threshold(d), searched over the integers,
/// plus the continuous crossing point. Throws std::logic_error if threshold is
/// found to decrease in d along the search path.
inline CiUpper rank_ci_upper(const RowMaxima& km, double alpha, const SearchOptions& opts = {}) {
  detail::require_domain(alpha > 0.0 && alpha < 1.0, "rank_ci_upper", "alpha must lie in (0,1)");
  detail::require_domain(km.p >= 2, "rank_ci_upper", "p must be >= 2");
  const double kbar = km.mean();
  const double log_p = std::log(static_cast<double>(km.p));
  const double n = static_cast<double>(km.n());
  const double z = gauss_quantile(alpha);
  const auto threshold = [&](double d) { return detail::ci_threshold_real(d, log_p, n, z); };
  const auto check_order = [](double t_lo, double t_mid, double t_hi) {
    if (t_lo > t_mid || t_mid > t_hi) throw std::logic_error("rank_ci_upper: threshold not monotone in d");
  };

  const auto cap = static_cast<std::int64_t>(std::floor(opts.d_cap));
  double t_lo = threshold(2.0);
  if (kbar < t_lo) return {std::nullopt, std::nullopt, false};

  std::int64_t lo = 2;
  std::int64_t hi = 4;
  double t_hi = threshold(static_cast<double>(std::min(hi, cap)));
  while (t_hi <= kbar) {
    if (hi >= cap) return {cap, static_cast<double>(cap), true};
    if (t_hi < t_lo) throw std::logic_error("rank_ci_upper: threshold not monotone in d");
    lo = hi;
    t_lo = t_hi;
    hi = std::min(hi * 2, cap);
    t_hi = threshold(static_cast<double>(hi));
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    const double t_mid = threshold(static_cast<double>(mid));
    check_order(t_lo, t_mid, t_hi);
    if (t_mid <= kbar) {
      lo = mid;
      t_lo = t_mid;
    } else {
      hi = mid;
      t_hi = t_mid;
    }
  }

  double r_lo = static_cast<double>(lo);
  double r_hi = static_cast<double>(hi);
  while (r_hi - r_lo > opts.d_tolerance) {
    const double mid = 0.5 * (r_lo + r_hi);
    if (threshold(mid) <= kbar) {
      r_lo = mid;
    } else {
      r_hi = mid;
    }
  }
  return {lo, r_lo, true};
}

struct Standardized {
  DataMatrix values;
  double scale;
};

/// Column-centers W, then divides by the sample standard deviation (n p - 1
/// denominator) of all centered entries pooled together.
inline Standardized standardize(const DataMatrix& w) {
  const std::size_t n = w.rows();
  const std::size_t p = w.cols();
  if (n < 2) throw DegenerateInputError("standardize: centering needs at least two rows");
  std::vector<double> col_mean(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = w.row(i);
    for (std::size_t j = 0; j < p; ++j) col_mean[j] += r[j];
  }
  for (double& m : col_mean) m /= static_cast<double>(n);

  DataMatrix centered(n, p);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = w.row(i);
    auto dst = centered.row(i);
    for (std::size_t j = 0; j < p; ++j) {
      dst[j] = src[j] - col_mean[j];
      total += dst[j];
    }
  }
  const double count = static_cast<double>(n * p);
  const double pooled_mean = total / count;
  double ss = 0.0;
  for (double v : centered.values()) ss += (v - pooled_mean) * (v - pooled_mean);
  const double s = std::sqrt(ss / (count - 1.0));
  if (!(s > 0.0)) throw DegenerateInputError("standardize: all columns are constant");
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : centered.row(i)) v /= s;
  }
  return {std::move(centered), s};
}

struct DetectionResult {
  double d_hat_real;
  std::int64_t d_hat;
  std::optional<std::int64_t> ci_upper;
  std::optional<double> ci_upper_real;
  double alpha;
  bool estimate_solved;
  bool ci_solved;
  double scale;  // pooled sd removed by standardization; 1 when skipped

  bool operator==(const DetectionResult&) const = default;
};

inline DetectionResult detect_from_maxima(const RowMaxima& km, double alpha, double scale,
                                          const SearchOptions& opts = {}) {
  const auto est = estimate_rank(km, opts);
  const auto ci = rank_ci_upper(km, alpha, opts);
  return {est.d_hat_real, est.d_hat, ci.upper, ci.upper_real, alpha, est.solved, ci.solved, scale};
}

/// Full pipeline: optional standardization, row maxima, point estimate and
/// (1 - alpha) left-sided upper bound.
inline DetectionResult detect(const DataMatrix& w, bool pre_standardized, double alpha,
                              const SearchOptions& opts = {}) {
  detail::require_domain(alpha > 0.0 && alpha < 1.0, "detect", "alpha must lie in (0,1)");
  if (pre_standardized) return detect_from_maxima(row_maxima(w), alpha, 1.0, opts);
  const auto st = standardize(w);
  return detect_from_maxima(row_maxima(st.values), alpha, st.scale, opts);
}

}  // namespace rexcap
