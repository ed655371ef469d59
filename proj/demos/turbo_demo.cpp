// One synthetic channel, one SNR, the three prior variants side by side.

#include <cstdio>

#include "hmpce/channel_lab.hpp"
#include "hmpce/turbo.hpp"

int main() {
  using namespace hmpce;
  const int n = 256;
  const int m = 103;
  const int p = 32;
  const double snr_db = 30.0;
  const double p10 = 0.05;
  const double p01 = 0.2;
  const PrecisionSpread spread{};

  const auto support = sample_support(n, p10, p01, 11);
  const ChannelRealization ch = sample_channel(support, p, spread, 100.0, 12);
  const auto pilots = make_pilot_set(n, m, p, 13);
  const MeasurementSet meas = synthesize_measurements(ch, pilots, snr_db, 14);

  ScalarPrior gen;
  gen.lambda = stationary_activation(p10, p01);
  gen.spread = spread;

  for (auto variant : {PriorVariant::kTsgmLvd, PriorVariant::kTsgm, PriorVariant::kBg}) {
    AlgoConfig cfg;
    cfg.prior.variant = variant;
    cfg.max_iters = 15;
    cfg.early_stop = false;
    cfg.initial_variance = gen.power();
    const TurboResult r = run_turbo(meas, pilots, cfg, &ch.H_a);
    std::printf("%-12s", std::string(to_string(variant)).c_str());
    for (const auto& it : r.trace.iterations) std::printf(" %7.2f", to_db(it.nmse));
    std::printf("\n");
  }
  return 0;
}
