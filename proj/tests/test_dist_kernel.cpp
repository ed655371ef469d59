#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hmpce/dist_kernel.hpp"
#include "hmpce/rng.hpp"

namespace hmpce {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(PsiHat, KnownValues) {
  EXPECT_NEAR(psi_hat(1.0), -0.5, 1e-15);
  EXPECT_NEAR(psi_hat(2.0), std::log(2.0) - 0.25, 1e-15);
  EXPECT_NEAR(psi_hat(0.5), std::log(0.5) - 1.0, 1e-15);
}

TEST(PsiHat, RejectsNonPositive) {
  EXPECT_THROW(psi_hat(0.0), DomainError);
  EXPECT_THROW(psi_hat(-1.0), DomainError);
  EXPECT_THROW(digamma(0.0), DomainError);
}

TEST(PsiHat, ApproachesDigammaForLargeArguments) {
  // digamma(x) = ln x - 1/(2x) - 1/(12x^2) + O(x^-4)
  for (double x : {10.0, 50.0, 200.0}) {
    EXPECT_NEAR(psi_hat(x) - digamma(x), 1.0 / (12.0 * x * x), 2.0 / (120.0 * x * x * x * x));
  }
  EXPECT_NEAR(digamma(1.0), -0.5772156649015329, 1e-14);
}

TEST(GaussianMultiply, Examples) {
  auto r = gaussian_multiply({0.0, 1.0}, {0.0, 1.0});
  EXPECT_NEAR(std::abs(r.mean), 0.0, 1e-15);
  EXPECT_NEAR(r.variance, 0.5, 1e-15);
  r = gaussian_multiply({1.0, 1.0}, {1.0, 1.0});
  EXPECT_NEAR(std::abs(r.mean - cplx(1.0)), 0.0, 1e-15);
  EXPECT_NEAR(r.variance, 0.5, 1e-15);
  r = gaussian_multiply({2.0, 1.0}, {0.0, 1.0});
  EXPECT_NEAR(std::abs(r.mean - cplx(1.0)), 0.0, 1e-15);
  EXPECT_NEAR(r.variance, 0.5, 1e-15);
}

TEST(GaussianMultiply, CommutativeAndAssociative) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    GaussianMsg a{complex_normal(rng, 4.0), 0.1 + 5.0 * uniform01(rng)};
    GaussianMsg b{complex_normal(rng, 4.0), 0.1 + 5.0 * uniform01(rng)};
    GaussianMsg c{complex_normal(rng, 4.0), 0.1 + 5.0 * uniform01(rng)};
    const auto ab = gaussian_multiply(a, b);
    const auto ba = gaussian_multiply(b, a);
    EXPECT_LE(std::abs(ab.mean - ba.mean), 1e-12 * (1.0 + std::abs(ab.mean)));
    EXPECT_NEAR(ab.variance, ba.variance, 1e-12 * ab.variance);
    const auto l = gaussian_multiply(ab, c);
    const auto r = gaussian_multiply(a, gaussian_multiply(b, c));
    EXPECT_LE(std::abs(l.mean - r.mean), 1e-12 * (1.0 + std::abs(l.mean)));
    EXPECT_NEAR(l.variance, r.variance, 1e-12 * l.variance);
  }
}

TEST(GaussianMsg, RejectsBadVariance) {
  EXPECT_THROW((GaussianMsg{0.0, 0.0}), DomainError);
  EXPECT_THROW((GaussianMsg{0.0, -1.0}), DomainError);
  EXPECT_THROW((GaussianMsg{0.0, std::numeric_limits<double>::infinity()}), DomainError);
}

TEST(GaussianExtrinsic, Examples) {
  auto e = gaussian_extrinsic({1.0, 0.5}, {0.0, 1.0});
  EXPECT_NEAR(std::abs(e.mean - cplx(2.0)), 0.0, 1e-14);
  EXPECT_NEAR(e.variance, 1.0, 1e-14);
  const cplx m{0.3, -1.2};
  e = gaussian_extrinsic({m, 0.7}, {m, 1.4});
  EXPECT_NEAR(std::abs(e.mean - m), 0.0, 1e-14);
  EXPECT_NEAR(e.variance, 1.4, 1e-14);
  EXPECT_THROW(gaussian_extrinsic({m, 0.7}, {m, 0.7}), NonInformativePosterior);
  EXPECT_THROW(gaussian_extrinsic({m, 0.9}, {m, 0.7}), NonInformativePosterior);
}

TEST(GaussianExtrinsic, RoundTrip) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const double v_pri = 0.01 + 10.0 * uniform01(rng);
    const double v_post = v_pri * (0.01 + 0.98 * uniform01(rng));
    const GaussianMsg pri{complex_normal(rng, 2.0), v_pri};
    const GaussianMsg post{complex_normal(rng, 2.0), v_post};
    const auto back = gaussian_multiply(gaussian_extrinsic(post, pri), pri);
    EXPECT_LE(std::abs(back.mean - post.mean), 1e-10 * (1.0 + std::abs(post.mean)));
    EXPECT_NEAR(back.variance, post.variance, 1e-10 * post.variance);
  }
}

TEST(GaussianExtrinsic, ClampedVariant) {
  const auto ok = gaussian_extrinsic_clamped({1.0, 0.5}, {0.0, 1.0}, 1e8);
  EXPECT_FALSE(ok.clamped);
  EXPECT_NEAR(ok.msg.variance, 1.0, 1e-14);
  const auto flat = gaussian_extrinsic_clamped({1.0, 1.0}, {0.0, 1.0}, 1e8);
  EXPECT_TRUE(flat.clamped);
  EXPECT_EQ(flat.msg.variance, 1e8);
  const auto nearly = gaussian_extrinsic_clamped({1.0, 1.0 - 1e-12}, {0.0, 1.0}, 1e4);
  EXPECT_TRUE(nearly.clamped);
  EXPECT_EQ(nearly.msg.variance, 1e4);
  EXPECT_TRUE(std::isfinite(std::abs(nearly.msg.mean)));
}

TEST(CGaussPdf, Examples) {
  EXPECT_NEAR(cgauss_pdf(0.0, 0.0, 1.0), 1.0 / kPi, 1e-15);
  EXPECT_NEAR(cgauss_pdf(1.0, 1.0, 2.0), 1.0 / (2.0 * kPi), 1e-15);
  EXPECT_NEAR(cgauss_pdf(1.0, 0.0, 1.0), std::exp(-1.0) / kPi, 1e-15);
  EXPECT_NEAR(cgauss_log_pdf(cplx(0.5, -0.5), cplx(0.1, 0.2), 0.3),
              std::log(cgauss_pdf(cplx(0.5, -0.5), cplx(0.1, 0.2), 0.3)), 1e-13);
  EXPECT_THROW(cgauss_pdf(0.0, 0.0, 0.0), DomainError);
}

TEST(CGaussPdf, IntegratesToOne) {
  const double v = 0.7;
  const cplx mu{0.3, -0.4};
  const double sd = std::sqrt(v / 2.0);
  const double r = 6.0 * sd;
  const int n = 600;
  const double h = 2.0 * r / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const cplx x = mu + cplx(-r + (i + 0.5) * h, -r + (j + 0.5) * h);
      sum += cgauss_pdf(x, mu, v) * h * h;
    }
  }
  EXPECT_NEAR(sum, 1.0, 1e-3);
}

TEST(BetaLogExpectations, Examples) {
  const auto [a, b] = beta_log_expectations({1.0, 1.0});
  EXPECT_NEAR(a, psi_hat(1.0) - psi_hat(2.0), 1e-15);
  EXPECT_NEAR(a, -0.9431471805599453, 1e-12);
  EXPECT_NEAR(b, a, 1e-15);
  const auto [c, d] = beta_log_expectations({2.0, 2.0});
  EXPECT_NEAR(c, d, 1e-15);
  const auto [e, f] = beta_log_expectations({3.0, 1.0});
  EXPECT_GT(e, f);
}

TEST(BetaLogExpectations, SwapSymmetry) {
  for (auto mode : {DigammaMode::kApprox, DigammaMode::kExact}) {
    const auto [a, b] = beta_log_expectations({2.5, 7.0}, mode);
    const auto [c, d] = beta_log_expectations({7.0, 2.5}, mode);
    EXPECT_NEAR(a, d, 1e-15);
    EXPECT_NEAR(b, c, 1e-15);
  }
}

TEST(BetaLogExpectations, ExactModeMatchesQuadrature) {
  // E[ln p] under Beta(2, 3) by the midpoint rule.
  const int n = 200000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = (i + 0.5) / n;
    s += std::log(p) * 12.0 * p * (1.0 - p) * (1.0 - p) / n;
  }
  EXPECT_NEAR(beta_log_expectations({2.0, 3.0}, DigammaMode::kExact).first, s, 1e-6);
}

TEST(GammaLogExpectation, MatchesPsiDefinition) {
  EXPECT_NEAR(gamma_log_expectation({3.0, 2.0}), psi_hat(3.0) - std::log(2.0), 1e-15);
  EXPECT_NEAR(gamma_log_expectation({3.0, 2.0}, DigammaMode::kExact), digamma(3.0) - std::log(2.0), 1e-15);
}

TEST(Beliefs, RejectNonPositiveParameters) {
  EXPECT_THROW((GammaBelief{0.0, 1.0}), DomainError);
  EXPECT_THROW((GammaBelief{1.0, -1.0}), DomainError);
  EXPECT_THROW((BetaBelief{0.0, 1.0}), DomainError);
  EXPECT_THROW((BetaBelief{1.0, 0.0}), DomainError);
}

TEST(LogDomain, HelpersAreStable) {
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-16);
  EXPECT_NEAR(sigmoid(800.0), 1.0, 1e-16);
  EXPECT_GE(sigmoid(-800.0), 0.0);
  EXPECT_NEAR(logit(sigmoid(3.7)), 3.7, 1e-12);
  EXPECT_NEAR(log_add_exp(1000.0, 1000.0), 1000.0 + std::log(2.0), 1e-12);
  EXPECT_EQ(log_add_exp(-std::numeric_limits<double>::infinity(), 2.0), 2.0);
}

}  // namespace
}  // namespace hmpce
