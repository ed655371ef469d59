#pragma once

// Module B: the hybrid message-passing denoiser for the TSGM-LVD prior with a
// Markov-chain common support, plus the TSGM and Bernoulli-Gaussian variants.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "hmpce/channel_lab.hpp"
#include "hmpce/dist_kernel.hpp"

namespace hmpce {

enum class PriorVariant { kTsgmLvd, kTsgm, kBg };

inline std::string_view to_string(PriorVariant v) {
  switch (v) {
    case PriorVariant::kTsgmLvd:
      return "hmp-tsgm-lvd";
    case PriorVariant::kTsgm:
      return "hmp-tsgm";
    case PriorVariant::kBg:
      return "hmp-bg";
  }
  return "unknown";
}

inline PriorVariant parse_prior_variant(std::string_view name) {
  if (name == "hmp-tsgm-lvd") return PriorVariant::kTsgmLvd;
  if (name == "hmp-tsgm") return PriorVariant::kTsgm;
  if (name == "hmp-bg") return PriorVariant::kBg;
  throw ConfigError("unknown algorithm '" + std::string(name) + "' (expected hmp-tsgm-lvd, hmp-tsgm or hmp-bg)");
}

struct PriorConfig {
  PriorVariant variant{PriorVariant::kTsgmLvd};
  double eps0{1.0};
  double eta0{1.0};
  double alpha0{1.0};
  double beta0{0.01};
  double e0{1.0};
  double f0{1.0};
  double c0{1.0};
  double d0{1.0};
  int max_iters{20};

  void validate() const {
    for (double x : {eps0, eta0, alpha0, beta0, e0, f0, c0, d0}) {
      if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError("prior parameters must be positive and finite");
    }
    if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  }
};

/// Weight attached to each Gaussian component of the right-going message.
enum class GammaWeight {
  kPrinted,   ///< e^{psi(shape)} / shape
  kStandard,  ///< e^{psi(shape)} / rate
};

/// Which end of the chain starts at 1/2 in the upward pass.
enum class UpwardInit {
  kMessage,  ///< lambda_up_N = 1/2, lambda_Up_N carries the local evidence
  kBelief,   ///< lambda_Up_N = 1/2
};

struct EstimatorOptions {
  DigammaMode digamma{DigammaMode::kApprox};
  GammaWeight gamma_weight{GammaWeight::kPrinted};
  UpwardInit upward_init{UpwardInit::kMessage};
};

/// All per-(n,p), per-n and hyperparameter quantities of one module-B pass.
/// Probabilities are stored clamped to [kProbFloor, 1 - kProbFloor].
struct EstimatorBState {
  int N{0};
  int P{0};

  Eigen::MatrixXd pi_right;  ///< N x P
  Eigen::MatrixXd pi_left;   ///< N x P
  Eigen::VectorXd lam_down;  ///< message from the chain above into s_n
  Eigen::VectorXd lam_Down;  ///< s_n towards the chain below
  Eigen::VectorXd lam_up;    ///< message from the chain below into s_n
  Eigen::VectorXd lam_Up;    ///< s_n towards the chain above

  Eigen::MatrixXd eps_hat;  ///< Gamma shape of v_L, N x P
  Eigen::MatrixXd eta_hat;  ///< Gamma rate of v_L, N x P
  Eigen::VectorXd alpha_hat;
  Eigen::VectorXd beta_hat;
  BetaBelief beta_10;
  BetaBelief beta_01;

  double B_s1{0.5};
  /// Rows 00, 01, 10, 11 (first digit s_n, second s_{n-1}); column n-1 holds
  /// the pair (s_{n+1}, s_n) in zero-based terms. Columns sum to 1.
  Eigen::Matrix<double, 4, Eigen::Dynamic> B_pair;
  Eigen::MatrixXd B_hs;  ///< support belief used by the hyperparameter updates
  Eigen::MatrixXd B_h;   ///< support weight of the output belief

  CMatrix mu_L;
  Eigen::MatrixXd var_L;
  CMatrix mu_S;
  Eigen::VectorXd var_S;

  GammaBelief gamma_L(int n, int p) const { return {eps_hat(n, p), eta_hat(n, p)}; }
  GammaBelief gamma_S(int p) const { return {alpha_hat[p], beta_hat[p]}; }
};

inline void reset_beliefs(EstimatorBState& s, const PriorConfig& prior) {
  s.eps_hat.setConstant(s.N, s.P, prior.eps0);
  s.eta_hat.setConstant(s.N, s.P, prior.eta0);
  s.alpha_hat.setConstant(s.P, prior.alpha0);
  s.beta_hat.setConstant(s.P, prior.beta0);
  s.beta_10 = BetaBelief{prior.e0, prior.f0};
  s.beta_01 = BetaBelief{prior.c0, prior.d0};
}

inline EstimatorBState init_state(int n, int p, const PriorConfig& prior) {
  if (n < 1 || p < 1) throw ConfigError("estimator state needs N >= 1 and P >= 1");
  prior.validate();
  EstimatorBState s;
  s.N = n;
  s.P = p;
  s.pi_right.setConstant(n, p, 0.5);
  s.pi_left.setConstant(n, p, 0.5);
  s.lam_down.setConstant(n, 0.5);
  s.lam_Down.setConstant(n, 0.5);
  s.lam_up.setConstant(n, 0.5);
  s.lam_Up.setConstant(n, 0.5);
  s.B_pair.setConstant(4, std::max(n - 1, 0), 0.25);
  s.B_hs.setConstant(n, p, 0.5);
  s.B_h.setConstant(n, p, 0.5);
  s.mu_L.setZero(n, p);
  s.var_L.setZero(n, p);
  s.mu_S.setZero(n, p);
  s.var_S.setZero(p);
  reset_beliefs(s, prior);
  return s;
}

namespace detail {

inline const double kMaxLogit = logit(1.0 - kProbFloor);

inline double clamp_logit(double x) { return std::clamp(x, -kMaxLogit, kMaxLogit); }

inline double prob_from_logit(double x) { return clamp_prob(sigmoid(x)); }

inline double logit_of(double p) { return logit(clamp_prob(p)); }

/// Sum over subcarriers of logit(pi_right): the log-likelihood ratio that the
/// P right-going messages give to s_n = 1.
inline Eigen::VectorXd support_llr(const EstimatorBState& s) {
  Eigen::VectorXd llr(s.N);
  for (int n = 0; n < s.N; ++n) {
    double acc = 0.0;
    for (int p = 0; p < s.P; ++p) acc += logit_of(s.pi_right(n, p));
    llr[n] = acc;
  }
  return llr;
}

struct ChainConstants {
  double con1, con2, con3, con4;  // <(1-p01)>, <p10>, <(1-p10)>, <p01> in exp-log form
};

inline ChainConstants chain_constants(const EstimatorBState& s, DigammaMode mode) {
  const auto [ln_p10, ln_1mp10] = beta_log_expectations(s.beta_10, mode);
  const auto [ln_p01, ln_1mp01] = beta_log_expectations(s.beta_01, mode);
  return {std::exp(ln_1mp01), std::exp(ln_p10), std::exp(ln_1mp10), std::exp(ln_p01)};
}

inline double log_component_weight(double shape, double rate, const EstimatorOptions& opt) {
  const double denom = opt.gamma_weight == GammaWeight::kPrinted ? shape : rate;
  return psi(shape, opt.digamma) - std::log(denom);
}

}  // namespace detail

/// Right-going support messages for the Bernoulli-Gaussian prior: the slab
/// CN(0, 1/precision_L) against a spike at zero.
inline double bg_variant_pi(cplx h_pri, double v_pri, double precision_L) {
  const double z = cgauss_log_pdf(h_pri, 0.0, v_pri + 1.0 / precision_L) - cgauss_log_pdf(h_pri, 0.0, v_pri);
  return detail::prob_from_logit(detail::clamp_logit(z));
}

namespace detail {

inline double pi_right_logit(const EstimatorBState& s, const PriorConfig& prior, const EstimatorOptions& opt,
                             cplx h, double v, int n, int p) {
  const double eps = s.eps_hat(n, p);
  const double eta = s.eta_hat(n, p);
  if (prior.variant == PriorVariant::kBg) {
    return clamp_logit(cgauss_log_pdf(h, 0.0, v + eta / eps) - cgauss_log_pdf(h, 0.0, v));
  }
  const double a = s.alpha_hat[p];
  const double b = s.beta_hat[p];
  const double large = log_component_weight(eps, eta, opt) + cgauss_log_pdf(h, 0.0, v + eta / eps);
  const double small = log_component_weight(a, b, opt) + cgauss_log_pdf(h, 0.0, v + b / a);
  return clamp_logit(large - small);
}

inline void check_inputs(const CMatrix& h_pri, const Eigen::VectorXd& v_pri, const EstimatorBState& s) {
  if (h_pri.rows() != s.N || h_pri.cols() != s.P || v_pri.size() != s.P) {
    throw ConfigError("module B: input dimensions disagree with the estimator state");
  }
  for (int p = 0; p < s.P; ++p) {
    if (!(v_pri[p] > 0.0) || !std::isfinite(v_pri[p])) {
      throw DomainError("module B: prior variance must be positive and finite");
    }
  }
}

}  // namespace detail

inline void part1_pi_right(const CMatrix& h_pri, const Eigen::VectorXd& v_pri, EstimatorBState& s,
                           const PriorConfig& prior, const EstimatorOptions& opt = {}) {
  detail::check_inputs(h_pri, v_pri, s);
  for (int p = 0; p < s.P; ++p) {
    for (int n = 0; n < s.N; ++n) {
      s.pi_right(n, p) = detail::prob_from_logit(detail::pi_right_logit(s, prior, opt, h_pri(n, p), v_pri[p], n, p));
    }
  }
}

/// Forward pass of the support chain.
inline void part2_downward(EstimatorBState& s, const EstimatorOptions& opt = {}) {
  const auto c = detail::chain_constants(s, opt.digamma);
  const Eigen::VectorXd llr = detail::support_llr(s);
  s.lam_down[0] = clamp_prob(c.con2 / (c.con2 + c.con3));
  s.lam_Down[0] = detail::prob_from_logit(detail::logit_of(s.lam_down[0]) + llr[0]);
  for (int n = 1; n < s.N; ++n) {
    const double ld = s.lam_Down[n - 1];
    const double num = ld * c.con1 + (1.0 - ld) * c.con2;
    const double den = ld * (c.con1 + c.con4) + (1.0 - ld) * (c.con2 + c.con3);
    s.lam_down[n] = clamp_prob(num / den);
    s.lam_Down[n] = detail::prob_from_logit(detail::logit_of(s.lam_down[n]) + llr[n]);
  }
}

/// Backward pass of the support chain.
inline void part3_upward(EstimatorBState& s, const EstimatorOptions& opt = {}) {
  const auto c = detail::chain_constants(s, opt.digamma);
  const Eigen::VectorXd llr = detail::support_llr(s);
  const int last = s.N - 1;
  s.lam_up[last] = 0.5;
  s.lam_Up[last] = opt.upward_init == UpwardInit::kBelief ? 0.5 : detail::prob_from_logit(llr[last]);
  for (int n = last - 1; n >= 0; --n) {
    const double lu = s.lam_Up[n + 1];
    const double num = lu * c.con1 + (1.0 - lu) * c.con4;
    const double den = lu * (c.con1 + c.con2) + (1.0 - lu) * (c.con3 + c.con4);
    s.lam_up[n] = clamp_prob(num / den);
    s.lam_Up[n] = detail::prob_from_logit(detail::logit_of(s.lam_up[n]) + llr[n]);
  }
}

/// Belief of s_1 and the normalized pair beliefs of (s_n, s_{n-1}).
inline void compute_support_beliefs(EstimatorBState& s, const EstimatorOptions& opt = {}) {
  const auto c = detail::chain_constants(s, opt.digamma);
  const Eigen::VectorXd llr = detail::support_llr(s);
  s.B_s1 = detail::prob_from_logit(detail::logit_of(s.lam_up[0]) + detail::logit_of(s.lam_down[0]) + llr[0]);
  s.B_pair.resize(4, std::max(s.N - 1, 0));
  for (int n = 1; n < s.N; ++n) {
    const double up = s.lam_Up[n];
    const double dn = s.lam_Down[n - 1];
    const double b00 = (1.0 - up) * (1.0 - dn) * c.con3;
    const double b01 = (1.0 - up) * dn * c.con4;
    const double b10 = up * (1.0 - dn) * c.con2;
    const double b11 = up * dn * c.con1;
    const double rho = b00 + b01 + b10 + b11;
    s.B_pair.col(n - 1) << b00 / rho, b01 / rho, b10 / rho, b11 / rho;
  }
}

/// Beta belief updates of p10 and p01 from the current support beliefs.
inline void update_transitions(EstimatorBState& s, const PriorConfig& prior) {
  const Eigen::Vector4d sums = s.B_pair.rowwise().sum();
  s.beta_10 = BetaBelief{prior.e0 + s.B_s1 + sums[2], prior.f0 + 1.0 - s.B_s1 + sums[0]};
  s.beta_01 = BetaBelief{prior.c0 + sums[1], prior.d0 + sums[3]};
}

/// Support beliefs and transition updates, followed by one more forward,
/// backward and transition pass under the updated Beta beliefs.
inline void part4_update_transitions(EstimatorBState& s, const PriorConfig& prior, const EstimatorOptions& opt = {}) {
  compute_support_beliefs(s, opt);
  update_transitions(s, prior);
  part2_downward(s, opt);
  part3_upward(s, opt);
  compute_support_beliefs(s, opt);
  update_transitions(s, prior);
}

/// Left-going support messages: everything the chain and the other
/// subcarriers say about s_n, leaving out subcarrier p's own message.
inline void part5_pi_left(EstimatorBState& s) {
  const Eigen::VectorXd llr = detail::support_llr(s);
  for (int n = 0; n < s.N; ++n) {
    const double base = detail::logit_of(s.lam_up[n]) + detail::logit_of(s.lam_down[n]) + llr[n];
    for (int p = 0; p < s.P; ++p) {
      s.pi_left(n, p) = detail::prob_from_logit(detail::clamp_logit(base - detail::logit_of(s.pi_right(n, p))));
    }
  }
}

namespace detail {

/// Component posteriors of h given h_pri and the current Gamma beliefs.
inline void component_posteriors(const CMatrix& h_pri, const Eigen::VectorXd& v_pri, EstimatorBState& s,
                                 const PriorConfig& prior) {
  for (int p = 0; p < s.P; ++p) {
    const double v = v_pri[p];
    if (prior.variant == PriorVariant::kBg) {
      s.var_S[p] = 0.0;
    } else {
      s.var_S[p] = 1.0 / (1.0 / v + s.alpha_hat[p] / s.beta_hat[p]);
    }
    for (int n = 0; n < s.N; ++n) {
      const double var_l = 1.0 / (1.0 / v + s.eps_hat(n, p) / s.eta_hat(n, p));
      s.var_L(n, p) = var_l;
      s.mu_L(n, p) = var_l * h_pri(n, p) / v;
      s.mu_S(n, p) = s.var_S[p] * h_pri(n, p) / v;
    }
  }
}

}  // namespace detail

/// Support belief of (h, s), component posteriors and the Gamma belief
/// updates of the large and small precisions.
inline void part5_update_precisions(const CMatrix& h_pri, const Eigen::VectorXd& v_pri, EstimatorBState& s,
                                    const PriorConfig& prior) {
  detail::check_inputs(h_pri, v_pri, s);
  for (int p = 0; p < s.P; ++p) {
    for (int n = 0; n < s.N; ++n) {
      s.B_hs(n, p) = detail::prob_from_logit(detail::logit_of(s.pi_right(n, p)) + detail::logit_of(s.pi_left(n, p)));
    }
  }
  detail::component_posteriors(h_pri, v_pri, s, prior);
  for (int p = 0; p < s.P; ++p) {
    if (prior.variant == PriorVariant::kTsgmLvd) {
      for (int n = 0; n < s.N; ++n) {
        const double b = s.B_hs(n, p);
        s.eps_hat(n, p) = prior.eps0 + b;
        s.eta_hat(n, p) = prior.eta0 + b * (std::norm(s.mu_L(n, p)) + s.var_L(n, p));
      }
    } else {
      double shape = prior.eps0;
      double rate = prior.eta0;
      for (int n = 0; n < s.N; ++n) {
        const double b = s.B_hs(n, p);
        shape += b;
        rate += b * (std::norm(s.mu_L(n, p)) + s.var_L(n, p));
      }
      s.eps_hat.col(p).setConstant(shape);
      s.eta_hat.col(p).setConstant(rate);
    }
    if (prior.variant != PriorVariant::kBg) {
      double shape = prior.alpha0;
      double rate = prior.beta0;
      for (int n = 0; n < s.N; ++n) {
        const double w = 1.0 - s.B_hs(n, p);
        shape += w;
        rate += w * (std::norm(s.mu_S(n, p)) + s.var_S[p]);
      }
      s.alpha_hat[p] = shape;
      s.beta_hat[p] = rate;
    }
  }
}

struct ModuleBOutput {
  CMatrix h_post;
  Eigen::VectorXd v_post;
};

/// Mean and antenna-averaged variance of the two-component output belief,
/// with the support weights and component posteriors recomputed from the
/// updated Gamma beliefs.
inline ModuleBOutput posterior_output(const CMatrix& h_pri, const Eigen::VectorXd& v_pri, EstimatorBState& s,
                                      const PriorConfig& prior, const EstimatorOptions& opt = {}) {
  detail::check_inputs(h_pri, v_pri, s);
  for (int p = 0; p < s.P; ++p) {
    for (int n = 0; n < s.N; ++n) {
      const double z = detail::pi_right_logit(s, prior, opt, h_pri(n, p), v_pri[p], n, p);
      s.B_h(n, p) = detail::prob_from_logit(z + detail::logit_of(s.pi_left(n, p)));
    }
  }
  detail::component_posteriors(h_pri, v_pri, s, prior);
  ModuleBOutput out;
  out.h_post.resize(s.N, s.P);
  out.v_post.resize(s.P);
  for (int p = 0; p < s.P; ++p) {
    double acc = 0.0;
    for (int n = 0; n < s.N; ++n) {
      const double b = s.B_h(n, p);
      const cplx mean = b * s.mu_L(n, p) + (1.0 - b) * s.mu_S(n, p);
      out.h_post(n, p) = mean;
      const double second = b * (std::norm(s.mu_L(n, p)) + s.var_L(n, p)) +
                            (1.0 - b) * (std::norm(s.mu_S(n, p)) + s.var_S[p]);
      acc += std::max(second - std::norm(mean), 0.0);
    }
    out.v_post[p] = std::max(acc / s.N, kVarianceFloor);
  }
  return out;
}

/// One full module-B pass: parts 1 to 5 and the output belief.
inline ModuleBOutput run_module_b(const CMatrix& h_pri, const Eigen::VectorXd& v_pri, EstimatorBState& s,
                                  const PriorConfig& prior, const EstimatorOptions& opt = {}) {
  part1_pi_right(h_pri, v_pri, s, prior, opt);
  part2_downward(s, opt);
  part3_upward(s, opt);
  part4_update_transitions(s, prior, opt);
  part5_pi_left(s);
  part5_update_precisions(h_pri, v_pri, s, prior);
  return posterior_output(h_pri, v_pri, s, prior, opt);
}

}  // namespace hmpce
