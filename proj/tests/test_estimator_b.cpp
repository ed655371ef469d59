#include <gtest/gtest.h>

#include <cmath>

#include "hmpce/estimator_b.hpp"
#include "hmpce/rng.hpp"
#include "markov_oracle.hpp"

namespace hmpce {
namespace {

using testing::enumerate_chain;
using testing::random_chain_state;

void run_chain(EstimatorBState& s, const EstimatorOptions& opt) {
  part2_downward(s, opt);
  part3_upward(s, opt);
  compute_support_beliefs(s, opt);
}

TEST(SupportChain, MatchesEnumeration) {
  Rng rng(11);
  for (DigammaMode mode : {DigammaMode::kApprox, DigammaMode::kExact}) {
    for (int rep = 0; rep < 50; ++rep) {
      EstimatorBState s = random_chain_state(rng, 8, 2);
      EstimatorOptions opt;
      opt.digamma = mode;
      run_chain(s, opt);
      const auto ref = enumerate_chain(s, mode);
      for (int n = 0; n < 8; ++n) {
        EXPECT_NEAR(s.lam_Down[n], ref.filtered[n], 1e-10) << "n=" << n;
        EXPECT_NEAR(s.lam_Up[n], ref.backward[n], 1e-10) << "n=" << n;
      }
      EXPECT_NEAR(s.B_s1, ref.s1, 1e-10);
      for (int n = 1; n < 8; ++n) {
        for (int r = 0; r < 4; ++r) EXPECT_NEAR(s.B_pair(r, n - 1), ref.pair[n - 1][r], 1e-10);
      }
    }
  }
}

TEST(SupportChain, PairBeliefsAreConsistentWithS1) {
  Rng rng(12);
  EstimatorBState s = random_chain_state(rng, 10, 3);
  run_chain(s, {});
  EXPECT_NEAR(s.B_pair(1, 0) + s.B_pair(3, 0), s.B_s1, 1e-12);
  for (int n = 1; n + 1 < 10; ++n) {
    // Marginal of s_n from two adjacent pairs.
    EXPECT_NEAR(s.B_pair(2, n - 1) + s.B_pair(3, n - 1), s.B_pair(1, n) + s.B_pair(3, n), 1e-12);
  }
}

TEST(SupportChain, UpwardInitialisation) {
  Rng rng(13);
  EstimatorBState s = random_chain_state(rng, 6, 2);
  EstimatorOptions opt;
  part3_upward(s, opt);
  const double llr = std::log(s.pi_right(5, 0) / (1 - s.pi_right(5, 0))) +
                     std::log(s.pi_right(5, 1) / (1 - s.pi_right(5, 1)));
  EXPECT_EQ(s.lam_up[5], 0.5);
  EXPECT_NEAR(s.lam_Up[5], 1.0 / (1.0 + std::exp(-llr)), 1e-14);
  opt.upward_init = UpwardInit::kBelief;
  part3_upward(s, opt);
  EXPECT_EQ(s.lam_Up[5], 0.5);
}

TEST(SupportChain, TransitionUpdateCounts) {
  Rng rng(14);
  const PriorConfig prior;
  EstimatorBState s = random_chain_state(rng, 9, 2);
  run_chain(s, {});
  update_transitions(s, prior);
  const double total = s.beta_10.a + s.beta_10.b + s.beta_01.a + s.beta_01.b;
  EXPECT_NEAR(total, prior.e0 + prior.f0 + prior.c0 + prior.d0 + 9.0, 1e-12);
  double row10 = 0.0;
  for (int k = 0; k < 8; ++k) row10 += s.B_pair(2, k);
  EXPECT_NEAR(s.beta_10.a, prior.e0 + s.B_s1 + row10, 1e-12);
}

TEST(PiLeft, LeavesOutOwnMessage) {
  Rng rng(15);
  EstimatorBState s = random_chain_state(rng, 7, 4);
  run_chain(s, {});
  part5_pi_left(s);
  auto lg = [](double p) { return std::log(p) - std::log1p(-p); };
  for (int n = 0; n < 7; ++n) {
    double llr = 0.0;
    for (int p = 0; p < 4; ++p) llr += lg(s.pi_right(n, p));
    for (int p = 0; p < 4; ++p) {
      EXPECT_NEAR(lg(s.pi_left(n, p)) + lg(s.pi_right(n, p)), lg(s.lam_up[n]) + lg(s.lam_down[n]) + llr, 1e-9);
    }
  }
}

TEST(PiRight, KnownValueAndWeightModes) {
  const PriorConfig prior;  // eps = eta = alpha = 1, beta = 0.01
  EstimatorBState s = init_state(1, 1, prior);
  CMatrix h(1, 1);
  h(0, 0) = {0.3, -0.2};
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, 0.05);
  EstimatorOptions opt;
  part1_pi_right(h, v, s, prior, opt);
  const double expected = cgauss_log_pdf(h(0, 0), 0.0, 1.05) - cgauss_log_pdf(h(0, 0), 0.0, 0.06);
  EXPECT_NEAR(logit(s.pi_right(0, 0)), expected, 1e-12);

  opt.gamma_weight = GammaWeight::kStandard;
  part1_pi_right(h, v, s, prior, opt);
  EXPECT_NEAR(logit(s.pi_right(0, 0)), expected - std::log(100.0), 1e-12);
}

TEST(PiRight, BernoulliGaussianSlabAgainstSpike) {
  const cplx h{0.5, 0.1};
  const double z = cgauss_log_pdf(h, 0.0, 0.1 + 0.5) - cgauss_log_pdf(h, 0.0, 0.1);
  EXPECT_NEAR(logit(bg_variant_pi(h, 0.1, 2.0)), z, 1e-12);
  EXPECT_LT(bg_variant_pi(cplx{0.0, 0.0}, 0.1, 2.0), 0.5);
}

TEST(Precisions, PerElementAndSharedUpdates) {
  Rng rng(16);
  const int n = 6;
  const int p = 2;
  CMatrix h(n, p);
  for (auto& x : h.reshaped()) x = complex_normal(rng, 1.0);
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(p, 0.2);
  for (PriorVariant variant : {PriorVariant::kTsgmLvd, PriorVariant::kTsgm}) {
    PriorConfig prior;
    prior.variant = variant;
    EstimatorBState s = random_chain_state(rng, n, p);
    run_chain(s, {});
    part5_pi_left(s);
    part5_update_precisions(h, v, s, prior);
    for (int k = 0; k < p; ++k) {
      double shape = prior.eps0;
      double small_shape = prior.alpha0;
      for (int i = 0; i < n; ++i) {
        shape += s.B_hs(i, k);
        small_shape += 1.0 - s.B_hs(i, k);
        if (variant == PriorVariant::kTsgmLvd) EXPECT_NEAR(s.eps_hat(i, k), prior.eps0 + s.B_hs(i, k), 1e-14);
      }
      if (variant == PriorVariant::kTsgm) {
        for (int i = 0; i < n; ++i) EXPECT_NEAR(s.eps_hat(i, k), shape, 1e-12);
      }
      EXPECT_NEAR(s.alpha_hat[k], small_shape, 1e-12);
    }
  }
}

TEST(ModuleB, OutputIsAConvexShrinkage) {
  Rng rng(17);
  const int n = 32;
  const int p = 4;
  CMatrix h(n, p);
  for (auto& x : h.reshaped()) x = complex_normal(rng, 0.5);
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(p, 0.1);
  for (PriorVariant variant : {PriorVariant::kTsgmLvd, PriorVariant::kTsgm, PriorVariant::kBg}) {
    PriorConfig prior;
    prior.variant = variant;
    EstimatorBState s = init_state(n, p, prior);
    const auto out = run_module_b(h, v, s, prior);
    ASSERT_TRUE(out.h_post.allFinite());
    for (int k = 0; k < p; ++k) {
      EXPECT_GT(out.v_post[k], 0.0);
      EXPECT_LT(out.v_post[k], v[k]);
      for (int i = 0; i < n; ++i) EXPECT_LE(std::abs(out.h_post(i, k)), std::abs(h(i, k)) + 1e-15);
    }
    if (variant == PriorVariant::kBg) {
      for (int i = 0; i < n; ++i) EXPECT_NEAR(std::abs(out.h_post(i, 0) - s.B_h(i, 0) * s.mu_L(i, 0)), 0.0, 1e-15);
    }
  }
}

TEST(ModuleB, RejectsBadInputs) {
  const PriorConfig prior;
  EstimatorBState s = init_state(4, 2, prior);
  EXPECT_THROW(run_module_b(CMatrix::Zero(4, 3), Eigen::VectorXd::Ones(3), s, prior), ConfigError);
  EXPECT_THROW(run_module_b(CMatrix::Zero(4, 2), Eigen::VectorXd::Zero(2), s, prior), DomainError);
  EXPECT_THROW(init_state(0, 2, prior), ConfigError);
  PriorConfig bad;
  bad.beta0 = -1.0;
  EXPECT_THROW(init_state(4, 2, bad), ConfigError);
  EXPECT_THROW(parse_prior_variant("hmp-foo"), ConfigError);
  EXPECT_EQ(parse_prior_variant("hmp-tsgm"), PriorVariant::kTsgm);
}

}  // namespace
}  // namespace hmpce
