#pragma once

// Scalar distribution algebra shared by the estimators: complex Gaussian
// messages, Gamma/Beta belief parameters and their log-expectations.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include <boost/math/special_functions/digamma.hpp>

namespace hmpce {

using cplx = std::complex<double>;

/// Smallest variance carried by any Gaussian message. A perfectly determined
/// measurement yields a zero posterior variance; it is floored here so that
/// precisions stay finite.
inline constexpr double kVarianceFloor = 1e-200;

/// Default cap on extrinsic variances produced by Gaussian division.
inline constexpr double kDefaultExtrinsicCap = 1e8;

/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before ratios.
inline constexpr double kProbFloor = 1e-12;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Gaussian division where the posterior carries no more information than
/// the prior.
class NonInformativePosterior : public std::domain_error {
 public:
  NonInformativePosterior()
      : std::domain_error("non-informative posterior: posterior variance is not below prior variance") {}
};

struct GaussianMsg {
  cplx mean{0.0, 0.0};
  double variance{1.0};

  GaussianMsg() = default;
  GaussianMsg(cplx m, double v) : mean(m), variance(v) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("GaussianMsg variance must be positive and finite, got " + std::to_string(v));
    }
  }
};

/// Gamma belief over a precision, parametrized by (shape, rate).
struct GammaBelief {
  double shape{1.0};
  double rate{1.0};

  GammaBelief() = default;
  GammaBelief(double a, double b) : shape(a), rate(b) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("GammaBelief parameters must be positive");
  }
  double mean() const { return shape / rate; }
};

/// Beta belief over a probability, parametrized by pseudo-counts (a, b).
struct BetaBelief {
  double a{1.0};
  double b{1.0};

  BetaBelief() = default;
  BetaBelief(double a_, double b_) : a(a_), b(b_) {
    if (!(a_ > 0.0) || !(b_ > 0.0)) throw DomainError("BetaBelief parameters must be positive");
  }
};

/// Which function stands in for the digamma function in Gamma/Beta
/// log-expectations.
enum class DigammaMode {
  kApprox,  ///< ln x - 1/(2x), the default
  kExact,   ///< true digamma
};

/// psi_hat(x) = ln x - 1/(2x).
inline double psi_hat(double x) {
  if (!(x > 0.0)) throw DomainError("psi_hat: argument must be positive");
  return std::log(x) - 0.5 / x;
}

inline double digamma(double x) {
  if (!(x > 0.0)) throw DomainError("digamma: argument must be positive");
  return boost::math::digamma(x);
}

inline double psi(double x, DigammaMode mode) {
  return mode == DigammaMode::kExact ? digamma(x) : psi_hat(x);
}

/// Precision-weighted product of two Gaussian messages.
inline GaussianMsg gaussian_multiply(const GaussianMsg& a, const GaussianMsg& b) {
  const double prec = 1.0 / a.variance + 1.0 / b.variance;
  const double v = 1.0 / prec;
  return GaussianMsg{v * (a.mean / a.variance + b.mean / b.variance), v};
}

/// Divides a posterior by a prior: v_ext^-1 = v_post^-1 - v_pri^-1 and
/// m_ext = v_ext (m_post / v_post - m_pri / v_pri). Throws
/// NonInformativePosterior unless v_post < v_pri.
inline GaussianMsg gaussian_extrinsic(const GaussianMsg& post, const GaussianMsg& pri) {
  if (!(post.variance < pri.variance)) throw NonInformativePosterior();
  const double prec = 1.0 / post.variance - 1.0 / pri.variance;
  const double v = 1.0 / prec;
  return GaussianMsg{v * (post.mean / post.variance - pri.mean / pri.variance), v};
}

struct ClampedExtrinsic {
  GaussianMsg msg;
  bool clamped{false};
};

/// Extrinsic extraction with the variance capped at `cap`.
///
/// When v_ext would exceed the cap, the variance is set to the cap and the
/// precision-weighted mean difference is kept. A non-informative posterior
/// (v_post >= v_pri) yields (m_post, cap).
inline ClampedExtrinsic gaussian_extrinsic_clamped(const GaussianMsg& post, const GaussianMsg& pri,
                                                   double cap = kDefaultExtrinsicCap) {
  if (!(post.variance < pri.variance)) return {GaussianMsg{post.mean, cap}, true};
  const double prec = 1.0 / post.variance - 1.0 / pri.variance;
  const cplx weighted = post.mean / post.variance - pri.mean / pri.variance;
  if (!(prec > 1.0 / cap)) return {GaussianMsg{cap * weighted, cap}, true};
  const double v = std::max(1.0 / prec, kVarianceFloor);
  return {GaussianMsg{v * weighted, v}, false};
}

/// log CN(x; mean, variance) = -ln(pi v) - |x - mean|^2 / v.
inline double cgauss_log_pdf(cplx x, cplx mean, double variance) {
  if (!(variance > 0.0)) throw DomainError("cgauss_pdf: variance must be positive");
  return -std::log(std::numbers::pi * variance) - std::norm(x - mean) / variance;
}

inline double cgauss_pdf(cplx x, cplx mean, double variance) {
  return std::exp(cgauss_log_pdf(x, mean, variance));
}

/// (<ln p>, <ln(1-p)>) under Beta(a, b).
inline std::pair<double, double> beta_log_expectations(const BetaBelief& b,
                                                       DigammaMode mode = DigammaMode::kApprox) {
  const double total = psi(b.a + b.b, mode);
  return {psi(b.a, mode) - total, psi(b.b, mode) - total};
}

/// <ln v> under Gamma(shape, rate).
inline double gamma_log_expectation(const GammaBelief& g, DigammaMode mode = DigammaMode::kApprox) {
  return psi(g.shape, mode) - std::log(g.rate);
}

inline double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// ln(e^a + e^b) without overflow.
inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace hmpce
