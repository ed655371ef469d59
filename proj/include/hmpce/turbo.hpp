#pragma once

// Structured turbo loop (module A <-> module B), NMSE, and the scalar
// state-evolution predictor with a Monte-Carlo MMSE oracle.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmpce/channel_lab.hpp"
#include "hmpce/dist_kernel.hpp"
#include "hmpce/estimator_a.hpp"
#include "hmpce/estimator_b.hpp"
#include "hmpce/rng.hpp"

namespace hmpce {

inline double nmse(const CMatrix& estimate, const CMatrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw ConfigError("nmse: dimension mismatch");
  }
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw DomainError("nmse: truth is identically zero");
  return (estimate - truth).squaredNorm() / denom;
}

inline double to_db(double ratio) { return 10.0 * std::log10(ratio); }

inline double nmse_db(const CMatrix& estimate, const CMatrix& truth) { return to_db(nmse(estimate, truth)); }

struct AlgoConfig {
  PriorConfig prior;
  EstimatorOptions options;
  int max_iters{20};
  bool early_stop{true};
  double early_stop_tol{1e-6};
  bool reset_beliefs{false};
  double extrinsic_cap{kDefaultExtrinsicCap};
  /// Module-A prior variance at the first iteration.
  double initial_variance{1.0};
};

struct TurboIteration {
  double nmse{0.0};
  Eigen::VectorXd v_A_ext;
  Eigen::VectorXd v_B_ext;
  /// Largest relative mismatch of gaussian_multiply(ext, pri) against post
  /// over both modules and all subcarriers with an unclamped extrinsic.
  double roundtrip_error{0.0};
  int clamped_extrinsics{0};
};

struct TurboTrace {
  std::vector<TurboIteration> iterations;
  bool early_stopped{false};
};

struct TurboResult {
  TurboTrace trace;
  CMatrix estimate;
  EstimatorBState state;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double vector_roundtrip_error(const ExtrinsicPair& ext, const ExtrinsicPair& pri, const ExtrinsicPair& post) {
  const double v = 1.0 / (1.0 / ext.variance + 1.0 / pri.variance);
  const CVector m = v * (ext.mean / ext.variance + pri.mean / pri.variance);
  const double mean_scale = std::max(post.mean.norm(), std::sqrt(post.variance * post.mean.size()));
  const double mean_err = (m - post.mean).norm() / mean_scale;
  const double var_err = std::abs(v - post.variance) / post.variance;
  return std::max(mean_err, var_err);
}

inline bool all_finite(const CMatrix& m) { return m.allFinite(); }

}  // namespace detail

/// Runs the turbo loop. NMSE is tracked against `truth` when given (it also
/// drives early stopping); without a truth only max_iters applies.
template <SensingOperator Op>
TurboResult run_turbo(const MeasurementSet& meas, const std::vector<Op>& pilots, const AlgoConfig& cfg,
                      const CMatrix* truth = nullptr) {
  const int p_count = static_cast<int>(meas.Y.cols());
  if (static_cast<int>(pilots.size()) != p_count) throw ConfigError("run_turbo: one pilot per subcarrier required");
  if (cfg.max_iters < 1) throw ConfigError("run_turbo: max_iters must be at least 1");
  const int n = pilots.front().cols();
  const double sigma2 = meas.noise_variance;

  TurboResult res;
  res.state = init_state(n, p_count, cfg.prior);
  std::vector<ExtrinsicPair> pri_a(static_cast<std::size_t>(p_count),
                                   ExtrinsicPair{CVector::Zero(n), cfg.initial_variance});
  CMatrix h_b_pri(n, p_count);
  Eigen::VectorXd v_b_pri(p_count);
  double prev_nmse = std::numeric_limits<double>::quiet_NaN();

  for (int it = 0; it < cfg.max_iters; ++it) {
    TurboIteration rec;
    rec.v_A_ext.resize(p_count);
    rec.v_B_ext.resize(p_count);
    std::vector<ExtrinsicPair> post_a(static_cast<std::size_t>(p_count));
    for (int p = 0; p < p_count; ++p) {
      post_a[p] = lmmse_update(CVector(meas.Y.col(p)), pilots[p], pri_a[p], sigma2);
      const auto ext = extrinsic_a(post_a[p], pri_a[p], cfg.extrinsic_cap);
      if (ext.clamped) {
        ++rec.clamped_extrinsics;
      } else {
        rec.roundtrip_error = std::max(rec.roundtrip_error, detail::vector_roundtrip_error(ext.pair, pri_a[p], post_a[p]));
      }
      h_b_pri.col(p) = ext.pair.mean;
      v_b_pri[p] = ext.pair.variance;
      rec.v_A_ext[p] = ext.pair.variance;
    }
    if (!detail::all_finite(h_b_pri) || !v_b_pri.allFinite()) {
      throw NonFiniteError("non-finite module A output at iteration " + std::to_string(it + 1));
    }
    if (cfg.reset_beliefs) reset_beliefs(res.state, cfg.prior);
    const ModuleBOutput out = run_module_b(h_b_pri, v_b_pri, res.state, cfg.prior, cfg.options);
    if (!detail::all_finite(out.h_post) || !out.v_post.allFinite()) {
      throw NonFiniteError("non-finite module B output at iteration " + std::to_string(it + 1));
    }
    res.estimate = out.h_post;
    for (int p = 0; p < p_count; ++p) {
      const ExtrinsicPair post{out.h_post.col(p), out.v_post[p]};
      const ExtrinsicPair pri{h_b_pri.col(p), v_b_pri[p]};
      const auto ext = extrinsic_a(post, pri, cfg.extrinsic_cap);
      if (ext.clamped) {
        ++rec.clamped_extrinsics;
      } else {
        rec.roundtrip_error = std::max(rec.roundtrip_error, detail::vector_roundtrip_error(ext.pair, pri, post));
      }
      pri_a[p] = ext.pair;
      rec.v_B_ext[p] = ext.pair.variance;
    }
    if (truth != nullptr) rec.nmse = nmse(out.h_post, *truth);
    res.trace.iterations.push_back(rec);
    if (truth != nullptr && cfg.early_stop && it > 0 && std::abs(rec.nmse - prev_nmse) < cfg.early_stop_tol) {
      res.trace.early_stopped = true;
      break;
    }
    prev_nmse = rec.nmse;
  }
  return res;
}

// State evolution.

/// Signal model for the MMSE oracle. Each support draw is active with
/// probability `lambda` and is shared by `support_group` elements (the
/// subcarriers that see a common support). Active elements draw their
/// precision log-uniformly from `spread` when `varying_large` is set and have
/// variance `large_variance` otherwise; inactive ones have `small_variance`,
/// where 0 is a spike at zero.
struct ScalarPrior {
  double lambda{0.2};
  PrecisionSpread spread{};
  bool varying_large{true};
  double large_variance{1.0};
  double small_variance{0.01};
  int support_group{1};

  double mean_large_variance() const {
    return varying_large ? hmpce::mean_large_variance(spread) : large_variance;
  }
  double power() const { return lambda * mean_large_variance() + (1.0 - lambda) * small_variance; }
};

struct MmseEstimate {
  double mmse{0.0};
  double std_error{0.0};
};

/// Posterior mean of h from r = h + xi, xi ~ CN(0, noise), under the
/// two-component mixture lambda CN(0, v_l) + (1 - lambda) CN(0, v_s).
inline cplx mixture_posterior_mean(cplx r, double noise, double lambda, double v_l, double v_s) {
  const double log_l = std::log(lambda) + cgauss_log_pdf(r, 0.0, v_l + noise);
  const double log_s = std::log1p(-lambda) + cgauss_log_pdf(r, 0.0, v_s + noise);
  const double w = sigmoid(log_l - log_s);
  return w * (v_l / (v_l + noise)) * r + (1.0 - w) * (v_s / (v_s + noise)) * r;
}

/// Monte-Carlo E|h - E[h | r]|^2 with r = h + xi, xi ~ CN(0, 1/eta), over
/// roughly `num_samples` elements. The posterior mean is the two-component
/// mixture formula with the mean large variance; with support_group > 1 the
/// activation weight pools the evidence of the whole group.
inline MmseEstimate mmse_oracle(double eta, const ScalarPrior& prior, int num_samples, std::uint64_t seed) {
  if (!(eta > 0.0)) throw DomainError("mmse_oracle: eta must be positive");
  if (prior.support_group < 1) throw ConfigError("mmse_oracle: support_group must be at least 1");
  const int group = prior.support_group;
  const int groups = (num_samples + group - 1) / group;
  if (groups < 2) throw ConfigError("mmse_oracle: need at least two support draws");
  Rng rng(seed);
  const double noise = 1.0 / eta;
  const double v_l = prior.mean_large_variance();
  const double v_s = prior.small_variance;
  const double gain_l = v_l / (v_l + noise);
  const double gain_s = v_s / (v_s + noise);
  const double log_lo = std::log(prior.spread.min);
  const double log_span = std::log(prior.spread.max) - log_lo;
  const double prior_logit = std::log(prior.lambda) - std::log1p(-prior.lambda);
  std::vector<cplx> h(static_cast<std::size_t>(group));
  std::vector<cplx> r(static_cast<std::size_t>(group));
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int g = 0; g < groups; ++g) {
    const bool large = uniform01(rng) < prior.lambda;
    double llr = prior_logit;
    for (int k = 0; k < group; ++k) {
      const double u = uniform01(rng);
      double var = v_s;
      if (large) var = prior.varying_large ? 1.0 / std::exp(log_lo + log_span * u) : v_l;
      h[k] = var > 0.0 ? complex_normal(rng, var) : cplx{0.0, 0.0};
      r[k] = h[k] + complex_normal(rng, noise);
      llr += cgauss_log_pdf(r[k], 0.0, v_l + noise) - cgauss_log_pdf(r[k], 0.0, v_s + noise);
    }
    const double w = sigmoid(llr);
    const double gain = w * gain_l + (1.0 - w) * gain_s;
    double e = 0.0;
    for (int k = 0; k < group; ++k) e += std::norm(h[k] - gain * r[k]);
    e /= group;
    sum += e;
    sum_sq += e * e;
  }
  const double mean = sum / groups;
  const double var = std::max(sum_sq / groups - mean * mean, 0.0);
  return {mean, std::sqrt(var / (groups - 1))};
}

class SeUndefinedError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct SeStep {
  double eta{0.0};
  double mmse{0.0};
  double v_next{0.0};
};

struct SeOptions {
  int num_samples{200000};
  std::uint64_t seed{0x5e5e5e5eULL};
  double extrinsic_cap{kDefaultExtrinsicCap};
};

/// Module-A map eta = 1/((N/M)(v + sigma2) - v).
inline double se_eta(double v, double sigma2, int n, int m) {
  const double denom = static_cast<double>(n) / m * (v + sigma2) - v;
  if (!(denom > 0.0)) throw SeUndefinedError("SE map undefined: (N/M)(v + sigma2) - v <= 0");
  return 1.0 / denom;
}

inline SeStep se_step(double v, double sigma2, int n, int m, const ScalarPrior& prior, const SeOptions& opt = {}) {
  SeStep s;
  s.eta = se_eta(v, sigma2, n, m);
  s.mmse = mmse_oracle(s.eta, prior, opt.num_samples, opt.seed).mmse;
  const double prec = 1.0 / s.mmse - s.eta;
  s.v_next = prec > 1.0 / opt.extrinsic_cap ? 1.0 / prec : opt.extrinsic_cap;
  return s;
}

struct SeRow {
  int iter{0};
  double v{0.0};
  double eta{0.0};
  double predicted_nmse{0.0};
};

/// Runs the recursion from v = prior power until |dv|/v < tol or max_steps.
/// Row t holds the module-A prior variance entering iteration t, the
/// resulting eta and mmse(eta) normalized by the prior power.
inline std::vector<SeRow> se_trace(double sigma2, int n, int m, const ScalarPrior& prior, int max_steps = 100,
                                   double tol = 1e-8, const SeOptions& opt = {}) {
  std::vector<SeRow> rows;
  double v = prior.power();
  for (int t = 1; t <= max_steps; ++t) {
    SeStep s;
    try {
      s = se_step(v, sigma2, n, m, prior, opt);
    } catch (const SeUndefinedError& e) {
      throw SeUndefinedError(std::string(e.what()) + " at step " + std::to_string(t));
    }
    rows.push_back({t, v, s.eta, s.mmse / prior.power()});
    const double dv = std::abs(s.v_next - v) / v;
    v = s.v_next;
    if (dv < tol) break;
  }
  return rows;
}

}  // namespace hmpce
