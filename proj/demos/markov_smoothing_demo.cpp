// Runs the support-chain passes of module B on hand-made right-going
// messages and prints the resulting beliefs next to the messages.

#include <cstdio>

#include "hmpce/estimator_b.hpp"

int main() {
  using namespace hmpce;
  const int n = 12;
  const int p = 2;
  PriorConfig prior;
  EstimatorBState s = init_state(n, p, prior);
  s.beta_10 = BetaBelief{2.0, 30.0};
  s.beta_01 = BetaBelief{3.0, 12.0};
  const double evidence[n] = {0.1, 0.2, 0.1, 0.7, 0.9, 0.8, 0.6, 0.3, 0.1, 0.1, 0.2, 0.1};
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < p; ++k) s.pi_right(i, k) = evidence[i];
  }
  part2_downward(s);
  part3_upward(s);
  compute_support_beliefs(s);

  std::printf(" n  pi_right  lam_Down  lam_Up  belief\n");
  for (int i = 0; i < n; ++i) {
    // Marginal of s_n from the forward and backward quantities.
    const double fw = s.lam_down[i] * s.lam_Up[i];
    const double belief = fw / (fw + (1.0 - s.lam_down[i]) * (1.0 - s.lam_Up[i]));
    std::printf("%2d  %8.3f  %8.4f  %6.4f  %6.4f\n", i + 1, evidence[i], s.lam_Down[i], s.lam_Up[i], belief);
  }
  std::printf("B(s_1 = 1) = %.4f\n", s.B_s1);
  return 0;
}
