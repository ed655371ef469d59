#pragma once

// Experiment driver: configuration, the (algorithm x SNR x pilot count x
// trial) sweep, and CSV output.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "hmpce/channel_lab.hpp"
#include "hmpce/estimator_b.hpp"
#include "hmpce/turbo.hpp"

#ifndef HMPCE_VERSION
#define HMPCE_VERSION "unknown"
#endif

namespace hmpce {

struct ExperimentConfig {
  int N{256};
  int K{512};
  int P{32};
  std::vector<int> M{103};
  std::vector<double> snr_db{10.0, 20.0, 30.0};
  std::vector<PriorVariant> algos{PriorVariant::kTsgmLvd, PriorVariant::kTsgm, PriorVariant::kBg};
  int trials{10};
  int max_iters{20};
  std::uint64_t seed{1};
  std::optional<std::filesystem::path> channel_file;
  std::filesystem::path output_dir{"out"};
  PriorConfig prior{};
  EstimatorOptions options{};
  bool reset_beliefs{false};
  bool early_stop{true};
  bool se_only{false};

  // Synthetic generator.
  double p10{0.05};
  double p01{0.20};
  PrecisionSpread spread{};
  double precision_small{100.0};
  double bandwidth_mhz{15.0};  ///< recorded in the manifest only

  int se_samples{200000};
  int threads{0};  ///< 0 = hardware concurrency; never affects results

  void validate() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    std::string item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("bad value for '" + std::string(key) + "': '" + std::string(text) + "'");
  }
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw ConfigError("bad boolean for '" + std::string(key) + "': '" + std::string(text) + "'");
}

}  // namespace detail

/// Locale-independent decimal with 9 significant digits.
inline std::string format_number(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 9);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

inline void ExperimentConfig::validate() const {
  if (N < 2) throw ConfigError("N must be at least 2");
  if (P < 1) throw ConfigError("P must be at least 1");
  if (P > K) throw ConfigError("P must not exceed K");
  if (M.empty()) throw ConfigError("at least one pilot count M is required");
  for (int m : M) {
    if (m < 1 || m >= N) throw ConfigError("M must satisfy 1 <= M < N (got " + std::to_string(m) + ")");
  }
  if (snr_db.empty()) throw ConfigError("at least one SNR is required");
  if (algos.empty()) throw ConfigError("at least one algorithm is required");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (max_iters < 1) throw ConfigError("iters must be at least 1");
  if (!(p10 > 0.0 && p10 < 1.0) || !(p01 > 0.0 && p01 < 1.0)) throw ConfigError("p10 and p01 must lie in (0, 1)");
  if (!(spread.min > 0.0) || !(spread.max >= spread.min)) throw ConfigError("precision range must be positive");
  if (!(precision_small > spread.max)) throw ConfigError("precision_small must exceed precision_max");
  if (se_samples < 2) throw ConfigError("se_samples must be at least 2");
  if (threads < 0) throw ConfigError("threads must be non-negative");
  prior.validate();
}

/// Applies one key=value setting. Keys match the long command-line flags
/// with '-' replaced by '_'.
inline void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
  using detail::parse_bool;
  using detail::parse_number;
  const std::string k(key);
  const std::string v = detail::trim(value);
  if (k == "N") {
    c.N = parse_number<int>(k, v);
  } else if (k == "K") {
    c.K = parse_number<int>(k, v);
  } else if (k == "P") {
    c.P = parse_number<int>(k, v);
  } else if (k == "M") {
    c.M.clear();
    for (const auto& item : detail::split_list(v)) c.M.push_back(parse_number<int>(k, item));
  } else if (k == "snr") {
    c.snr_db.clear();
    for (const auto& item : detail::split_list(v)) c.snr_db.push_back(parse_number<double>(k, item));
  } else if (k == "algos") {
    c.algos.clear();
    for (const auto& item : detail::split_list(v)) {
      try {
        c.algos.push_back(parse_prior_variant(item));
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }
  } else if (k == "trials") {
    c.trials = parse_number<int>(k, v);
  } else if (k == "iters") {
    c.max_iters = parse_number<int>(k, v);
  } else if (k == "seed") {
    c.seed = parse_number<std::uint64_t>(k, v);
  } else if (k == "channel_file") {
    if (v.empty()) {
      c.channel_file.reset();
    } else {
      c.channel_file = v;
    }
  } else if (k == "out") {
    c.output_dir = v;
  } else if (k == "reset_beliefs") {
    c.reset_beliefs = parse_bool(k, v);
  } else if (k == "std_gamma_weight") {
    c.options.gamma_weight = parse_bool(k, v) ? GammaWeight::kStandard : GammaWeight::kPrinted;
  } else if (k == "exact_digamma") {
    c.options.digamma = parse_bool(k, v) ? DigammaMode::kExact : DigammaMode::kApprox;
  } else if (k == "no_early_stop") {
    c.early_stop = !parse_bool(k, v);
  } else if (k == "se_only") {
    c.se_only = parse_bool(k, v);
  } else if (k == "eps0") {
    c.prior.eps0 = parse_number<double>(k, v);
  } else if (k == "eta0") {
    c.prior.eta0 = parse_number<double>(k, v);
  } else if (k == "alpha0") {
    c.prior.alpha0 = parse_number<double>(k, v);
  } else if (k == "beta0") {
    c.prior.beta0 = parse_number<double>(k, v);
  } else if (k == "e0") {
    c.prior.e0 = parse_number<double>(k, v);
  } else if (k == "f0") {
    c.prior.f0 = parse_number<double>(k, v);
  } else if (k == "c0") {
    c.prior.c0 = parse_number<double>(k, v);
  } else if (k == "d0") {
    c.prior.d0 = parse_number<double>(k, v);
  } else if (k == "p10") {
    c.p10 = parse_number<double>(k, v);
  } else if (k == "p01") {
    c.p01 = parse_number<double>(k, v);
  } else if (k == "precision_min") {
    c.spread.min = parse_number<double>(k, v);
  } else if (k == "precision_max") {
    c.spread.max = parse_number<double>(k, v);
  } else if (k == "precision_small") {
    c.precision_small = parse_number<double>(k, v);
  } else if (k == "bandwidth_mhz") {
    c.bandwidth_mhz = parse_number<double>(k, v);
  } else if (k == "se_samples") {
    c.se_samples = parse_number<int>(k, v);
  } else if (k == "threads") {
    c.threads = parse_number<int>(k, v);
  } else if (k == "version") {
    // Written by the manifest; informational.
  } else {
    throw ConfigError("unknown configuration key '" + k + "'");
  }
}

/// Flat key=value text; '#' starts a comment.
inline void parse_config_text(ExperimentConfig& c, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    try {
      apply_setting(c, detail::trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void load_config_file(ExperimentConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  parse_config_text(c, ss.str());
}

/// Every setting as key=value lines; loading it back reproduces the run.
inline std::string manifest_text(const ExperimentConfig& c) {
  auto join = [](const auto& xs, auto fmt) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
    return s;
  };
  std::ostringstream o;
  o << "version=" << HMPCE_VERSION << "\n";
  o << "seed=" << c.seed << "\n";
  o << "N=" << c.N << "\nK=" << c.K << "\nP=" << c.P << "\n";
  o << "M=" << join(c.M, [](int m) { return std::to_string(m); }) << "\n";
  o << "snr=" << join(c.snr_db, format_number) << "\n";
  o << "algos=" << join(c.algos, [](PriorVariant a) { return std::string(to_string(a)); }) << "\n";
  o << "trials=" << c.trials << "\niters=" << c.max_iters << "\n";
  o << "channel_file=" << (c.channel_file ? c.channel_file->string() : "") << "\n";
  o << "reset_beliefs=" << c.reset_beliefs << "\n";
  o << "std_gamma_weight=" << (c.options.gamma_weight == GammaWeight::kStandard) << "\n";
  o << "exact_digamma=" << (c.options.digamma == DigammaMode::kExact) << "\n";
  o << "no_early_stop=" << !c.early_stop << "\n";
  o << "se_only=" << c.se_only << "\n";
  o << "eps0=" << format_number(c.prior.eps0) << "\neta0=" << format_number(c.prior.eta0) << "\n";
  o << "alpha0=" << format_number(c.prior.alpha0) << "\nbeta0=" << format_number(c.prior.beta0) << "\n";
  o << "e0=" << format_number(c.prior.e0) << "\nf0=" << format_number(c.prior.f0) << "\n";
  o << "c0=" << format_number(c.prior.c0) << "\nd0=" << format_number(c.prior.d0) << "\n";
  o << "p10=" << format_number(c.p10) << "\np01=" << format_number(c.p01) << "\n";
  o << "precision_min=" << format_number(c.spread.min) << "\nprecision_max=" << format_number(c.spread.max) << "\n";
  o << "precision_small=" << format_number(c.precision_small) << "\n";
  o << "bandwidth_mhz=" << format_number(c.bandwidth_mhz) << "\n";
  o << "se_samples=" << c.se_samples << "\n";
  return o.str();
}

/// Scalar prior matching the synthetic generator, with the support shared by
/// the P subcarriers.
inline ScalarPrior generator_prior(const ExperimentConfig& c) {
  ScalarPrior s;
  s.lambda = stationary_activation(c.p10, c.p01);
  s.spread = c.spread;
  s.varying_large = true;
  s.small_variance = 1.0 / c.precision_small;
  s.support_group = c.P;
  return s;
}

struct TrialRecord {
  PriorVariant algo{};
  double snr_db{0.0};
  int m{0};
  int trial{0};
  std::vector<double> nmse;  ///< per iteration, padded to max_iters after an early stop
};

struct SeRecord {
  double snr_db{0.0};
  std::vector<SeRow> rows;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;  ///< sorted by (algo, snr, m, trial)
  std::vector<SeRecord> se;
};

namespace detail {

inline int worker_count(const ExperimentConfig& c, int items) {
  int t = c.threads > 0 ? c.threads : static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(t, 1, std::max(items, 1));
}

inline ChannelRealization experiment_channel(const ExperimentConfig& c, int trial) {
  if (c.channel_file) {
    ChannelRealization ch = load_channel_file(*c.channel_file);
    if (ch.antennas() != c.N || ch.subcarriers() != c.P) {
      throw ChannelFileError("dimension mismatch: channel file is " + std::to_string(ch.antennas()) + "x" +
                             std::to_string(ch.subcarriers()) + ", configuration expects " + std::to_string(c.N) +
                             "x" + std::to_string(c.P));
    }
    return ch;
  }
  const auto support = sample_support(c.N, c.p10, c.p01, derive_seed(c.seed, {1, static_cast<std::uint64_t>(trial)}));
  return sample_channel(support, c.P, c.spread, c.precision_small,
                        derive_seed(c.seed, {2, static_cast<std::uint64_t>(trial)}));
}

/// Module-A prior variance at the first iteration: the generator's average
/// power, or for an ingested channel the power seen through the pilots.
inline double initial_variance(const ExperimentConfig& c, const MeasurementSet& meas) {
  if (!c.channel_file) return generator_prior(c).power();
  const double per_sample = meas.Y.squaredNorm() / static_cast<double>(meas.Y.size());
  return std::max(per_sample - meas.noise_variance, 1e-6 * per_sample);
}

}  // namespace detail

inline std::vector<SeRecord> run_se(const ExperimentConfig& c) {
  c.validate();
  std::vector<SeRecord> out;
  const ScalarPrior prior = generator_prior(c);
  for (double snr : c.snr_db) {
    // Noise variance from the same SNR definition as the simulation, with
    // the expected rather than the realized signal power.
    const double sigma2 = prior.power() / std::pow(10.0, snr / 10.0);
    SeOptions opt;
    opt.num_samples = c.se_samples;
    opt.seed = derive_seed(c.seed, {5, std::bit_cast<std::uint64_t>(snr)});
    out.push_back({snr, se_trace(sigma2, c.N, c.M.front(), prior, 100, 1e-8, opt)});
  }
  return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult res;
  if (c.channel_file) {
    // Fail early on a bad file, before any work is scheduled.
    (void)detail::experiment_channel(c, 0);
  }
  if (!c.se_only) {
    struct Item {
      int m_idx;
      int trial;
    };
    std::vector<Item> items;
    for (int mi = 0; mi < static_cast<int>(c.M.size()); ++mi) {
      for (int t = 0; t < c.trials; ++t) items.push_back({mi, t});
    }
    const std::size_t per_item = c.snr_db.size() * c.algos.size();
    std::vector<TrialRecord> slots(items.size() * per_item);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      for (std::size_t i = next++; i < items.size(); i = next++) {
        try {
          const auto [mi, trial] = items[i];
          const int m = c.M[mi];
          const ChannelRealization ch = detail::experiment_channel(c, trial);
          const auto pilots = make_pilot_set(
              c.N, m, c.P, derive_seed(c.seed, {3, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(trial)}));
          for (std::size_t si = 0; si < c.snr_db.size(); ++si) {
            const double snr = c.snr_db[si];
            const MeasurementSet meas = synthesize_measurements(
                ch, pilots, snr,
                derive_seed(c.seed, {4, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(trial),
                                     std::bit_cast<std::uint64_t>(snr)}));
            for (std::size_t ai = 0; ai < c.algos.size(); ++ai) {
              AlgoConfig ac;
              ac.prior = c.prior;
              ac.prior.variant = c.algos[ai];
              ac.options = c.options;
              ac.max_iters = c.max_iters;
              ac.early_stop = c.early_stop;
              ac.reset_beliefs = c.reset_beliefs;
              ac.initial_variance = detail::initial_variance(c, meas);
              const TurboResult tr = run_turbo(meas, pilots, ac, &ch.H_a);
              TrialRecord rec{c.algos[ai], snr, m, trial, {}};
              for (const auto& it : tr.trace.iterations) rec.nmse.push_back(it.nmse);
              while (static_cast<int>(rec.nmse.size()) < c.max_iters) rec.nmse.push_back(rec.nmse.back());
              slots[i * per_item + si * c.algos.size() + ai] = std::move(rec);
            }
          }
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = items.size();
        }
      }
    };
    const int n_workers = detail::worker_count(c, static_cast<int>(items.size()));
    std::vector<std::jthread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (failure) std::rethrow_exception(failure);
    res.trials = std::move(slots);
    std::stable_sort(res.trials.begin(), res.trials.end(), [](const TrialRecord& a, const TrialRecord& b) {
      const auto an = to_string(a.algo);
      const auto bn = to_string(b.algo);
      if (an != bn) return an < bn;
      if (a.snr_db != b.snr_db) return a.snr_db < b.snr_db;
      if (a.m != b.m) return a.m < b.m;
      return a.trial < b.trial;
    });
  }
  res.se = run_se(c);
  return res;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << body;
  if (!out.flush()) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace detail

struct CsvFiles {
  std::string nmse_vs_iter;
  std::string nmse_vs_snr;
  std::string nmse_vs_m;
  std::string se_trace;
};

/// CSV bodies. Iteration traces and SNR curves use the first pilot count;
/// the pilot-count curve covers all of them. Means are taken over trials in
/// the linear domain at the last iteration.
inline CsvFiles render_csv(const ExperimentConfig& c, const ExperimentResult& r) {
  CsvFiles f;
  const int m0 = c.M.front();
  std::ostringstream iter;
  iter << "algo,snr_db,trial,iter,nmse_db\n";
  std::map<std::tuple<std::string, double, int>, std::pair<double, int>> final_nmse;
  for (const auto& rec : r.trials) {
    auto& acc = final_nmse[{std::string(to_string(rec.algo)), rec.snr_db, rec.m}];
    acc.first += rec.nmse.back();
    acc.second += 1;
    if (rec.m != m0) continue;
    for (std::size_t t = 0; t < rec.nmse.size(); ++t) {
      iter << to_string(rec.algo) << ',' << format_number(rec.snr_db) << ',' << rec.trial << ',' << t + 1 << ','
           << format_number(to_db(rec.nmse[t])) << '\n';
    }
  }
  f.nmse_vs_iter = iter.str();

  std::ostringstream snr;
  std::ostringstream mcurve;
  snr << "algo,snr_db,mean_nmse_db\n";
  mcurve << "algo,snr_db,m,mean_nmse_db\n";
  for (const auto& [key, acc] : final_nmse) {
    const auto& [algo, s, m] = key;
    const double mean_db = to_db(acc.first / acc.second);
    if (m == m0) snr << algo << ',' << format_number(s) << ',' << format_number(mean_db) << '\n';
    mcurve << algo << ',' << format_number(s) << ',' << m << ',' << format_number(mean_db) << '\n';
  }
  f.nmse_vs_snr = snr.str();
  f.nmse_vs_m = mcurve.str();

  std::ostringstream se;
  se << "snr_db,iter,v,eta,predicted_nmse_db\n";
  for (const auto& rec : r.se) {
    for (const auto& row : rec.rows) {
      se << format_number(rec.snr_db) << ',' << row.iter << ',' << format_number(row.v) << ','
         << format_number(row.eta) << ',' << format_number(to_db(row.predicted_nmse)) << '\n';
    }
  }
  f.se_trace = se.str();
  return f;
}

inline void write_outputs(const ExperimentConfig& c, const ExperimentResult& r) {
  std::error_code ec;
  std::filesystem::create_directories(c.output_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + c.output_dir.string() + "': " + ec.message());
  const CsvFiles f = render_csv(c, r);
  if (!c.se_only) {
    detail::write_file(c.output_dir / "nmse_vs_iter.csv", f.nmse_vs_iter);
    detail::write_file(c.output_dir / "nmse_vs_snr.csv", f.nmse_vs_snr);
    detail::write_file(c.output_dir / "nmse_vs_m.csv", f.nmse_vs_m);
  }
  detail::write_file(c.output_dir / "se_trace.csv", f.se_trace);
  detail::write_file(c.output_dir / "manifest.txt", manifest_text(c));
}

}  // namespace hmpce
