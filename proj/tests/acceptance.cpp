// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. argv[1] is the path of the hmpce_sim binary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "hmpce/experiment.hpp"
#include "hmpce/hmp.hpp"
#include "markov_oracle.hpp"
#include "toy_graphs.hpp"

namespace {

using namespace hmpce;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass{false};
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

Outcome markov_smoothing() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  double err = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    EstimatorBState s = testing::random_chain_state(rng, 8, 2);
    const EstimatorOptions opt;
    part2_downward(s, opt);
    part3_upward(s, opt);
    compute_support_beliefs(s, opt);
    const auto ref = testing::enumerate_chain(s, opt.digamma);
    for (int n = 0; n < 8; ++n) {
      err = std::max({err, std::abs(s.lam_Down[n] - ref.filtered[n]), std::abs(s.lam_Up[n] - ref.backward[n])});
    }
    err = std::max(err, std::abs(s.B_s1 - ref.s1));
    for (int n = 0; n < 7; ++n) {
      for (int r = 0; r < 4; ++r) err = std::max(err, std::abs(s.B_pair(r, n) - ref.pair[n][r]));
    }
  }
  const double secs = seconds_since(t0);
  return {err < 1e-10 && secs < 5.0, fmt("max abs error %.3e over 50 instances, %.2f s", err, secs)};
}

Outcome lmmse_oracle() {
  const auto t0 = Clock::now();
  Rng rng(20240602);
  const int n = 32;
  const int m = 13;
  double err = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto a = make_pdft_rp(n, m, derive_seed(7, {static_cast<std::uint64_t>(rep)}));
    CVector mean(n);
    for (auto& x : mean) x = complex_normal(rng, 0.5);
    CVector y(m);
    for (auto& x : y) x = complex_normal(rng, 1.0);
    const ExtrinsicPair pri{mean, 0.05 + uniform01(rng)};
    const double sigma2 = 1e-3 + 0.5 * uniform01(rng);
    const auto post = lmmse_update(y, a, pri, sigma2);

    const Eigen::MatrixXcd ad = a.dense();
    const Eigen::MatrixXcd gram = pri.variance * ad * ad.adjoint() + sigma2 * Eigen::MatrixXcd::Identity(m, m);
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(gram);
    const CVector ref_mean = pri.mean + pri.variance * ad.adjoint() * lu.solve(y - ad * pri.mean);
    const Eigen::MatrixXcd cov = pri.variance * Eigen::MatrixXcd::Identity(n, n) -
                                 pri.variance * pri.variance * ad.adjoint() * lu.solve(ad);
    const double ref_var = cov.diagonal().real().mean();
    err = std::max({err, (post.mean - ref_mean).cwiseAbs().maxCoeff(), std::abs(post.variance - ref_var)});
  }
  const double secs = seconds_since(t0);
  return {err < 1e-8 && secs < 5.0, fmt("max abs error %.3e over 100 instances, %.2f s", err, secs)};
}

Outcome hmp_degeneracy() {
  const auto t0 = Clock::now();
  Rng rng(20240603);
  double bp_err = 0.0;
  double stretch_err = 0.0;
  bool converged = true;
  for (int rep = 0; rep < 20; ++rep) {
    const auto g = testing::random_tree_graph(rng, hmp::EdgeTag::kBP);
    const auto exact = testing::enumerate_marginals(g);
    for (auto sched : {hmp::Schedule::kSynchronous, hmp::Schedule::kSequential}) {
      hmp::HmpEngine e(g, hmp::EngineOptions{DigammaMode::kExact, sched, 1e-14, 2000});
      converged = e.run().converged && converged;
      for (int v = 0; v < g.num_variables(); ++v) {
        const auto& b = std::get<hmp::Discrete>(e.belief(v)).p;
        for (std::size_t k = 0; k < b.size(); ++k) bp_err = std::max(bp_err, std::abs(b[k] - exact[v][k]));
      }
    }
    int hybrid = -1;
    const auto h = testing::random_hybrid_graph(rng, hybrid);
    const auto rep_h = hmp::stretched_graph_equivalence_check(h, hybrid);
    converged = rep_h.all_converged() && converged;
    stretch_err = std::max({stretch_err, rep_h.max_message_discrepancy, rep_h.max_belief_discrepancy});
  }
  const double secs = seconds_since(t0);
  return {converged && bp_err < 1e-10 && stretch_err < 1e-10 && secs < 10.0,
          fmt("all-BP vs enumeration %.3e, stretched vs hybrid %.3e, %s, %.2f s", bp_err, stretch_err,
              converged ? "all runs converged" : "NOT all runs converged", secs)};
}

Outcome se_agreement() {
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.N = 512;
  c.K = 512;
  c.P = 32;
  c.M = {410};
  c.snr_db = {10.0, 20.0, 30.0};
  c.algos = {PriorVariant::kTsgmLvd};
  c.trials = 50;
  c.max_iters = 10;
  c.early_stop = false;
  c.seed = 404;
  const auto res = run_experiment(c);
  double worst = 0.0;
  std::ostringstream where;
  for (const auto& se : res.se) {
    for (int t = 0; t < c.max_iters; ++t) {
      double mean = 0.0;
      int count = 0;
      for (const auto& rec : res.trials) {
        if (rec.snr_db != se.snr_db) continue;
        mean += rec.nmse[t];
        ++count;
      }
      mean /= count;
      const auto& row = se.rows[std::min<std::size_t>(t, se.rows.size() - 1)];
      const double gap = std::abs(to_db(mean) - to_db(row.predicted_nmse));
      if (gap > worst) {
        worst = gap;
        where.str("");
        where << format_number(se.snr_db) << " dB iter " << t + 1 << ": sim " << format_number(to_db(mean))
              << " dB, SE " << format_number(to_db(row.predicted_nmse)) << " dB";
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1.0 && secs < 300.0,
          fmt("largest gap %.3f dB (%s), %.1f s", worst, where.str().c_str(), secs)};
}

struct GainResult {
  Outcome gain;
  Outcome roundtrip;
};

GainResult prior_gain() {
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.N = 256;
  c.P = 32;
  c.M = {103};
  c.snr_db = {30.0};
  c.trials = 100;
  c.max_iters = 20;
  c.seed = 505;
  const int m = c.M.front();
  const double snr = c.snr_db.front();
  const std::vector<PriorVariant> algos{PriorVariant::kTsgmLvd, PriorVariant::kBg};
  std::vector<double> final_sum(algos.size(), 0.0);
  double worst_rt = 0.0;
  long iterations = 0;
  long clamped = 0;
  for (int trial = 0; trial < c.trials; ++trial) {
    const auto ch = detail::experiment_channel(c, trial);
    const auto pilots = make_pilot_set(
        c.N, m, c.P, derive_seed(c.seed, {3, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(trial)}));
    const auto meas = synthesize_measurements(
        ch, pilots, snr,
        derive_seed(c.seed, {4, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(trial),
                             std::bit_cast<std::uint64_t>(snr)}));
    for (std::size_t a = 0; a < algos.size(); ++a) {
      AlgoConfig ac;
      ac.prior = c.prior;
      ac.prior.variant = algos[a];
      ac.options = c.options;
      ac.max_iters = c.max_iters;
      ac.initial_variance = detail::initial_variance(c, meas);
      const auto tr = run_turbo(meas, pilots, ac, &ch.H_a);
      final_sum[a] += tr.trace.iterations.back().nmse;
      for (const auto& it : tr.trace.iterations) {
        worst_rt = std::max(worst_rt, it.roundtrip_error);
        clamped += it.clamped_extrinsics;
        ++iterations;
      }
    }
  }
  const double secs = seconds_since(t0);
  const double lvd = to_db(final_sum[0] / c.trials);
  const double bg = to_db(final_sum[1] / c.trials);
  GainResult r;
  r.gain = {bg - lvd >= 2.0 && secs < 600.0,
            fmt("TSGM-LVD %.2f dB, BG %.2f dB, gain %.2f dB, %.1f s", lvd, bg, bg - lvd, secs)};
  r.roundtrip = {worst_rt <= 1e-10,
                 fmt("max relative error %.3e over %ld iterations, %ld clamped extrinsics excluded", worst_rt,
                     iterations, clamped)};
  return r;
}

double per_iteration_seconds(int n) {
  const int p = 32;
  const int m = static_cast<int>(0.4 * n);
  const auto support = sample_support(n, 0.05, 0.2, 11);
  const auto ch = sample_channel(support, p, PrecisionSpread{}, 100.0, 12);
  const auto pilots = make_pilot_set(n, m, p, 13);
  const auto meas = synthesize_measurements(ch, pilots, 20.0, 14);
  AlgoConfig ac;
  ac.max_iters = 10;
  ac.early_stop = false;
  run_turbo(meas, pilots, ac);  // warm-up: FFT plans and caches
  std::vector<double> times;
  for (int run = 0; run < 5; ++run) {
    const auto t0 = Clock::now();
    run_turbo(meas, pilots, ac);
    times.push_back(seconds_since(t0) / ac.max_iters);
  }
  std::nth_element(times.begin(), times.begin() + 2, times.end());
  return times[2];
}

Outcome complexity_scaling() {
  const double t256 = per_iteration_seconds(256);
  const double t512 = per_iteration_seconds(512);
  const double t1024 = per_iteration_seconds(1024);
  const double r1 = t512 / t256;
  const double r2 = t1024 / t512;
  return {r1 <= 2.6 && r2 <= 2.6,
          fmt("per-iteration %.3f / %.3f / %.3f ms at N=256/512/1024, ratios %.2f and %.2f", t256 * 1e3,
              t512 * 1e3, t1024 * 1e3, r1, r2)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome cli_determinism(const std::string& sim) {
  const auto root = std::filesystem::temp_directory_path() / ("hmpce_acceptance_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  const std::string args = " --N 64 --P 8 --M 26,32 --snr 10,25 --trials 3 --iters 6 --seed 9";
  int status = 0;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = "\"" + sim + "\"" + args + " --out \"" + (root / run).string() + "\" > /dev/null";
    status |= std::system(cmd.c_str());
  }
  bool same = status == 0;
  int files = 0;
  for (const char* name : {"nmse_vs_iter.csv", "nmse_vs_snr.csv", "nmse_vs_m.csv", "se_trace.csv"}) {
    const std::string a = slurp(root / "a" / name);
    const std::string b = slurp(root / "b" / name);
    same = same && !a.empty() && a == b;
    ++files;
  }
  std::filesystem::remove_all(root);
  return {same, fmt("%d CSV files compared across two runs, exit status %d", files, status)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance PATH_TO_HMPCE_SIM\n");
    return 2;
  }
  const std::string sim = argv[1];
  bool all = true;
  auto report = [&](int k, const char* what, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", k, what, o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  };
  auto guarded = [&](int k, const char* what, const std::function<Outcome()>& f) {
    try {
      report(k, what, f());
    } catch (const std::exception& e) {
      report(k, what, Outcome{false, std::string("exception: ") + e.what()});
    }
  };
  guarded(1, "support chain vs enumeration", markov_smoothing);
  guarded(2, "LMMSE vs dense solve", lmmse_oracle);
  guarded(3, "HMP degeneracy and stretched graph", hmp_degeneracy);
  guarded(4, "state evolution agreement", se_agreement);
  try {
    const auto g = prior_gain();
    report(5, "high-SNR prior gain", g.gain);
    report(6, "extrinsic round trip", g.roundtrip);
  } catch (const std::exception& e) {
    report(5, "high-SNR prior gain", Outcome{false, std::string("exception: ") + e.what()});
    report(6, "extrinsic round trip", Outcome{false, std::string("exception: ") + e.what()});
  }
  guarded(7, "complexity scaling", complexity_scaling);
  guarded(8, "CLI determinism", [&] { return cli_determinism(sim); });
  return all ? 0 : 1;
}
