#pragma once

// Natural-parameter algebra for the three parametric families the engine
// supports. A density is proportional to exp(theta . t(x)) with respect to
// Lebesgue measure on the family's support:
//   Gamma:            t = (ln x, x)
//   Beta:             t = (ln p, ln(1 - p))
//   complex Gaussian: t = (|x|^2, Re x, Im x)

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hmpce/dist_kernel.hpp"

namespace hmpce::hmp {

enum class Family { kGamma, kBeta, kComplexGaussian };

inline int stat_count(Family f) { return f == Family::kComplexGaussian ? 3 : 2; }

inline const char* family_name(Family f) {
  switch (f) {
    case Family::kGamma:
      return "Gamma";
    case Family::kBeta:
      return "Beta";
    case Family::kComplexGaussian:
      return "complex Gaussian";
  }
  return "?";
}

namespace stat {
inline constexpr int kLog = 0;      // Gamma ln x, Beta ln p
inline constexpr int kValue = 1;    // Gamma x
inline constexpr int kLog1m = 1;    // Beta ln(1 - p)
inline constexpr int kSqAbs = 0;    // complex Gaussian |x|^2
inline constexpr int kReal = 1;     // complex Gaussian Re x
inline constexpr int kImag = 2;     // complex Gaussian Im x
}  // namespace stat

struct NaturalParams {
  Family family{Family::kGamma};
  std::array<double, 3> theta{0.0, 0.0, 0.0};

  NaturalParams operator+(const NaturalParams& o) const {
    if (o.family != family) throw std::invalid_argument("natural parameters of different families");
    NaturalParams r = *this;
    for (int i = 0; i < 3; ++i) r.theta[i] += o.theta[i];
    return r;
  }
};

class ImproperDensity : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline bool is_proper(const NaturalParams& np) {
  const auto& t = np.theta;
  switch (np.family) {
    case Family::kGamma:
      return t[0] > -1.0 && t[1] < 0.0;
    case Family::kBeta:
      return t[0] > -1.0 && t[1] > -1.0;
    case Family::kComplexGaussian:
      return t[0] < 0.0;
  }
  return false;
}

inline void require_proper(const NaturalParams& np, const std::string& where) {
  if (!is_proper(np)) {
    throw ImproperDensity(where + ": " + family_name(np.family) + " density is not normalizable");
  }
}

/// ln of the integral of exp(theta . t(x)).
inline double log_partition(const NaturalParams& np) {
  require_proper(np, "log_partition");
  const auto& t = np.theta;
  switch (np.family) {
    case Family::kGamma:
      return std::lgamma(t[0] + 1.0) - (t[0] + 1.0) * std::log(-t[1]);
    case Family::kBeta:
      return std::lgamma(t[0] + 1.0) + std::lgamma(t[1] + 1.0) - std::lgamma(t[0] + t[1] + 2.0);
    case Family::kComplexGaussian: {
      const double lam = -t[0];
      const double m_re = t[1] / (2.0 * lam);
      const double m_im = t[2] / (2.0 * lam);
      return std::log(std::numbers::pi) - std::log(lam) + lam * (m_re * m_re + m_im * m_im);
    }
  }
  return 0.0;
}

/// E[t(x)] under the normalized density.
inline std::array<double, 3> mean_stats(const NaturalParams& np, DigammaMode mode = DigammaMode::kExact) {
  require_proper(np, "mean_stats");
  const auto& t = np.theta;
  switch (np.family) {
    case Family::kGamma: {
      const double shape = t[0] + 1.0;
      const double rate = -t[1];
      return {psi(shape, mode) - std::log(rate), shape / rate, 0.0};
    }
    case Family::kBeta: {
      const auto [lp, l1mp] = beta_log_expectations(BetaBelief{t[0] + 1.0, t[1] + 1.0}, mode);
      return {lp, l1mp, 0.0};
    }
    case Family::kComplexGaussian: {
      const double lam = -t[0];
      const double m_re = t[1] / (2.0 * lam);
      const double m_im = t[2] / (2.0 * lam);
      return {m_re * m_re + m_im * m_im + 1.0 / lam, m_re, m_im};
    }
  }
  return {0.0, 0.0, 0.0};
}

inline NaturalParams gamma_natural(double shape, double rate) {
  return {Family::kGamma, {shape - 1.0, -rate, 0.0}};
}

inline NaturalParams beta_natural(double a, double b) { return {Family::kBeta, {a - 1.0, b - 1.0, 0.0}}; }

inline NaturalParams cgauss_natural(cplx mean, double variance) {
  return {Family::kComplexGaussian, {-1.0 / variance, 2.0 * mean.real() / variance, 2.0 * mean.imag() / variance}};
}

inline GammaBelief to_gamma(const NaturalParams& np) {
  require_proper(np, "to_gamma");
  return {np.theta[0] + 1.0, -np.theta[1]};
}

inline BetaBelief to_beta(const NaturalParams& np) {
  require_proper(np, "to_beta");
  return {np.theta[0] + 1.0, np.theta[1] + 1.0};
}

inline GaussianMsg to_gaussian(const NaturalParams& np) {
  require_proper(np, "to_gaussian");
  const double lam = -np.theta[0];
  return {cplx{np.theta[1], np.theta[2]} / (2.0 * lam), 1.0 / lam};
}

}  // namespace hmpce::hmp
