#pragma once

// Samplers and the replicate harness for the factor-model experiments.
//
// Every replicate draws from its own generator, seeded from (master seed,
// replicate index), so reports do not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "rexcap/detect.hpp"
#include "rexcap/errors.hpp"
#include "rexcap/ks.hpp"
#include "rexcap/packing.hpp"
#include "rexcap/specfun.hpp"

namespace rexcap {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for stream `index` under `seed`.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t index) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

/// Uniform point on S^{d-1} by normalizing a standard Gaussian vector.
inline std::vector<double> sample_sphere(std::int64_t d, Rng& rng) {
  detail::require_domain(d >= 1, "sample_sphere", "d must be >= 1");
  std::normal_distribution<double> normal;
  if (d == 1) return {normal(rng) < 0.0 ? -1.0 : 1.0};
  std::vector<double> v(static_cast<std::size_t>(d));
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm_sq += x * x;
    }
  } while (norm_sq == 0.0);
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& x : v) x *= inv;
  return v;
}

struct MaxInner {
  double m;  // max_j |<L_j, U>|
  double k;  // max_j <L_j, Z>^2 = |Z|^2 m^2
};

/// Draws Z ~ N(0, I_d) and p i.i.d. uniform unit vectors L_j, streaming the
/// L_j so memory stays O(d).
inline MaxInner sample_max_inner(std::int64_t p, std::int64_t d, Rng& rng) {
  detail::require_domain(p >= 1 && d >= 1, "sample_max_inner", "p and d must be >= 1");
  std::normal_distribution<double> normal;
  const auto dd = static_cast<std::size_t>(d);
  std::vector<double> z(dd);
  double z_sq = 0.0;
  for (double& x : z) {
    x = normal(rng);
    z_sq += x * x;
  }
  const double z_norm = std::sqrt(z_sq);
  std::vector<double> l(dd);
  double best = 0.0;
  for (std::int64_t j = 0; j < p; ++j) {
    double l_sq = 0.0;
    double dot = 0.0;
    for (std::size_t k = 0; k < dd; ++k) {
      l[k] = normal(rng);
      l_sq += l[k] * l[k];
      dot += l[k] * z[k];
    }
    const double c = std::fabs(dot) / (std::sqrt(l_sq) * z_norm);
    best = std::max(best, c);
  }
  best = std::min(best, 1.0);
  return {best, z_sq * best * best};
}

/// Max of p i.i.d. Beta(1/2,(n-1)/2) draws, each formed as g^2 / (g^2 + X)
/// with g standard normal and X ~ chi-square(n-1). Equal in law to M^2 for
/// uniform L_j but costs O(1) per vector regardless of n.
inline double sample_max_inner_sq_streaming(std::int64_t p, std::int64_t n, Rng& rng) {
  detail::require_domain(p >= 1 && n >= 2, "sample_max_inner_sq_streaming", "need p >= 1 and n >= 2");
  std::normal_distribution<double> normal;
  std::gamma_distribution<double> gamma(0.5 * static_cast<double>(n - 1), 2.0);
  double best = 0.0;
  for (std::int64_t j = 0; j < p; ++j) {
    const double g = normal(rng);
    const double g2 = g * g;
    const double w = g2 / (g2 + gamma(rng));
    best = std::max(best, w);
  }
  return best;
}

/// Max of p i.i.d. Beta(1/2,(n-1)/2) draws by inverting its exact CDF
/// (inner_sq_cdf)^p at one uniform. O(log) cost, any p.
inline double sample_max_inner_sq_inverse(double p, std::int64_t n, Rng& rng) {
  detail::require_domain(p >= 1.0 && std::isfinite(p) && n >= 2, "sample_max_inner_sq_inverse",
                         "need finite p >= 1 and n >= 2");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = 0.0;
  while (u == 0.0) u = unif(rng);
  // Solve P(M^2 > w) = 1 - u, i.e. sf(w) = 1 - u^{1/p}.
  const double target_sf = -std::expm1(std::log(u) / p);
  const double nd = static_cast<double>(n);
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (inner_sq_sf(mid, nd) > target_sf) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct FactorModelParams {
  std::int64_t n = 20;
  std::int64_t p = 8000;
  std::int64_t d = 11;
  std::vector<double> mu;  // empty means zero mean
  double tau = 1.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || p < 2 || d < 1) throw UsageError("FactorModelParams: need n >= 1, p >= 2, d >= 1");
    if (!(tau > 0.0)) throw UsageError("FactorModelParams: tau must be positive");
    if (!(sigma >= 0.0)) throw UsageError("FactorModelParams: sigma must be nonnegative");
    if (!mu.empty() && mu.size() != static_cast<std::size_t>(p)) {
      throw UsageError("FactorModelParams: mu must have length p");
    }
  }
};

/// mu_j = -5 + 10 (j-1)/(p-1), j = 1..p.
inline std::vector<double> ramp_mean(std::int64_t p, double from = -5.0, double to = 5.0) {
  detail::require_domain(p >= 2, "ramp_mean", "p must be >= 2");
  std::vector<double> mu(static_cast<std::size_t>(p));
  for (std::size_t j = 0; j < mu.size(); ++j) {
    mu[j] = from + (to - from) * static_cast<double>(j) / static_cast<double>(p - 1);
  }
  return mu;
}

/// p x d row-major: row j is the unit loading vector L_j.
using Loadings = std::vector<double>;

inline Loadings sample_loadings(std::int64_t p, std::int64_t d, Rng& rng) {
  Loadings out;
  out.reserve(static_cast<std::size_t>(p * d));
  for (std::int64_t j = 0; j < p; ++j) {
    const auto v = sample_sphere(d, rng);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

/// W = 1 mu^T + tau Z L + sigma G with the given loadings.
inline DataMatrix generate_dataset_with_loadings(const FactorModelParams& params, std::span<const double> loadings,
                                                 Rng& rng) {
  params.validate();
  const auto n = static_cast<std::size_t>(params.n);
  const auto p = static_cast<std::size_t>(params.p);
  const auto d = static_cast<std::size_t>(params.d);
  if (loadings.size() != p * d) throw UsageError("generate_dataset: loadings must be p x d");
  std::normal_distribution<double> normal;
  std::vector<double> z(n * d);
  for (double& x : z) x = normal(rng);

  DataMatrix w(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    const double* zi = z.data() + i * d;
    auto row = w.row(i);
    for (std::size_t j = 0; j < p; ++j) {
      const double* lj = loadings.data() + j * d;
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += zi[k] * lj[k];
      row[j] = params.tau * dot;
    }
  }
  if (params.sigma > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : w.row(i)) v += params.sigma * normal(rng);
    }
  }
  if (!params.mu.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = w.row(i);
      for (std::size_t j = 0; j < p; ++j) row[j] += params.mu[j];
    }
  }
  return w;
}

/// Fresh uniform loadings, then the factor-model draw.
inline DataMatrix generate_dataset(const FactorModelParams& params, Rng& rng) {
  params.validate();
  const auto loadings = sample_loadings(params.p, params.d, rng);
  return generate_dataset_with_loadings(params, loadings, rng);
}

struct ExperimentConfig {
  FactorModelParams params;
  std::int64_t replicates = 1000;
  double alpha = 0.05;
  bool noiseless = true;  // known mu = 0, sigma = 0, tau = 1: skip standardization
  SearchOptions search = {};

  void validate() const {
    params.validate();
    if (replicates < 1) throw UsageError("ExperimentConfig: need at least one replicate");
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("ExperimentConfig: alpha must lie in (0,1)");
  }
};

/// Noiseless setting: mu = 0, sigma = 0, tau = 1.
inline ExperimentConfig noiseless_config(std::int64_t n, std::int64_t p, std::int64_t d, std::int64_t replicates,
                                         std::uint64_t seed, double alpha = 0.05) {
  ExperimentConfig cfg;
  cfg.params = {n, p, d, {}, 1.0, 0.0, seed};
  cfg.replicates = replicates;
  cfg.alpha = alpha;
  cfg.noiseless = true;
  return cfg;
}

/// Equal-variance setting: sigma = (n/p)^{1/4}, tau = 2, mu a ramp from -5 to 5.
inline ExperimentConfig equal_variance_config(std::int64_t n, std::int64_t p, std::int64_t d,
                                              std::int64_t replicates, std::uint64_t seed, double alpha = 0.05) {
  ExperimentConfig cfg;
  const double sigma = std::pow(static_cast<double>(n) / static_cast<double>(p), 0.25);
  cfg.params = {n, p, d, ramp_mean(p), 2.0, sigma, seed};
  cfg.replicates = replicates;
  cfg.alpha = alpha;
  cfg.noiseless = false;
  return cfg;
}

struct ReplicateRecord {
  std::int64_t replicate;
  DetectionResult result;
};

struct SimulationReport {
  std::int64_t replicates;
  double mse;
  double coverage;
  // Over solved intervals, using the continuous crossing point.
  double mean_upper;
  double median_upper;
  // Same summaries over the integer bounds.
  double mean_upper_integer;
  double median_upper_integer;
  std::int64_t unsolved_ci_count;
  std::int64_t unsolved_est_count;
};

struct ExperimentResult {
  SimulationReport report;
  std::vector<ReplicateRecord> records;
};

inline DetectionResult run_replicate(const ExperimentConfig& cfg, std::int64_t index) {
  auto rng = stream_rng(cfg.params.seed, static_cast<std::uint64_t>(index));
  const auto w = generate_dataset(cfg.params, rng);
  return detect(w, cfg.noiseless, cfg.alpha, cfg.search);
}

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return (v.size() % 2 == 1) ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Unsolved estimates enter the MSE at their bracket edge; unsolved intervals
/// count as not covering and are left out of the upper-bound summaries.
inline SimulationReport summarize(std::int64_t true_d, const std::vector<ReplicateRecord>& records) {
  if (records.empty()) throw UsageError("summarize: no replicates");
  double se_sum = 0.0;
  std::int64_t covered = 0;
  std::int64_t unsolved_ci = 0;
  std::int64_t unsolved_est = 0;
  std::vector<double> uppers;
  std::vector<double> uppers_int;
  for (const auto& rec : records) {
    const auto& r = rec.result;
    const double err = static_cast<double>(r.d_hat - true_d);
    se_sum += err * err;
    if (!r.estimate_solved) ++unsolved_est;
    if (r.ci_solved) {
      if (*r.ci_upper >= true_d) ++covered;
      uppers.push_back(*r.ci_upper_real);
      uppers_int.push_back(static_cast<double>(*r.ci_upper));
    } else {
      ++unsolved_ci;
    }
  }
  const auto n = static_cast<double>(records.size());
  return {static_cast<std::int64_t>(records.size()),
          se_sum / n,
          static_cast<double>(covered) / n,
          detail::mean_of(uppers),
          detail::median_of(uppers),
          detail::mean_of(uppers_int),
          detail::median_of(uppers_int),
          unsolved_ci,
          unsolved_est};
}

/// Runs all replicates on up to `threads` workers (0 = hardware concurrency).
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const auto count = static_cast<std::size_t>(cfg.replicates);
  std::vector<std::optional<DetectionResult>> results(count);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      results[i] = run_replicate(cfg, static_cast<std::int64_t>(i));
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  }

  std::vector<ReplicateRecord> records;
  records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) records.push_back({static_cast<std::int64_t>(i), *results[i]});
  return {summarize(cfg.params.d, records), std::move(records)};
}

struct Prop1Diagnostic {
  double ks;
  bool sparse_warning;  // log p < d: far from the dense regime where chi2_d is the limit
};

/// KS distance between draws of K = max_j <L_j, Z>^2 (uniform L_j, Gaussian Z)
/// and the chi-square(d) CDF. K is drawn as chi2_d times the maximal squared
/// inner product; the latter is sampled exactly by CDF inversion for d >= 2.
inline Prop1Diagnostic prop1_diagnostic(double p, std::int64_t d, std::int64_t replicates, Rng& rng) {
  detail::require_domain(p >= 2.0 && d >= 1 && replicates >= 1, "prop1_diagnostic",
                         "need p >= 2, d >= 1, replicates >= 1");
  std::chi_squared_distribution<double> norm_sq(static_cast<double>(d));
  std::vector<double> draws(static_cast<std::size_t>(replicates));
  for (double& k : draws) {
    const double r2 = norm_sq(rng);
    const double m2 = (d == 1) ? 1.0 : sample_max_inner_sq_inverse(p, d, rng);
    k = r2 * m2;
  }
  const double dd = static_cast<double>(d);
  const double ks = ks_distance(std::move(draws), [dd](double x) { return x <= 0.0 ? 0.0 : chi2_cdf(x, dd); });
  return {ks, std::log(p) < dd};
}

}  // namespace rexcap
