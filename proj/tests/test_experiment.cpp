#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <string>

#include "hmpce/experiment.hpp"

namespace hmpce {
namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.N = 32;
  c.K = 64;
  c.P = 4;
  c.M = {13, 20};
  c.snr_db = {10.0, 20.0};
  c.trials = 3;
  c.max_iters = 4;
  c.se_samples = 4000;
  return c;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

TEST(Config, ParsesKeyValueText) {
  ExperimentConfig c;
  parse_config_text(c,
                            "# sweep\n"
                            "N = 64\n"
                            "M=20, 30\n"
                            "snr=5,15  # dB\n"
                            "algos=hmp-bg\n"
                            "exact_digamma=true\n"
                            "no_early_stop=1\n"
                            "seed=42\n");
  EXPECT_EQ(c.N, 64);
  EXPECT_EQ(c.M, (std::vector<int>{20, 30}));
  EXPECT_EQ(c.snr_db, (std::vector<double>{5.0, 15.0}));
  ASSERT_EQ(c.algos.size(), 1u);
  EXPECT_EQ(c.algos[0], PriorVariant::kBg);
  EXPECT_EQ(c.options.digamma, DigammaMode::kExact);
  EXPECT_FALSE(c.early_stop);
  EXPECT_EQ(c.seed, 42u);
}

TEST(Config, ReportsLineOfBadEntry) {
  ExperimentConfig c;
  try {
    parse_config_text(c, "N=64\nbogus=1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text(c, "N=abc\n"), ConfigError);
  EXPECT_THROW(parse_config_text(c, "just text\n"), ConfigError);
  EXPECT_THROW(parse_config_text(c, "algos=hmp-xyz\n"), ConfigError);
}

TEST(Config, Validation) {
  ExperimentConfig c = tiny_config();
  EXPECT_NO_THROW(c.validate());
  c.M = {32};
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.trials = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, ManifestReloadsToSameSettings) {
  ExperimentConfig c = tiny_config();
  c.seed = 77;
  c.options.gamma_weight = GammaWeight::kStandard;
  c.prior.beta0 = 0.02;
  ExperimentConfig d;
  parse_config_text(d, manifest_text(c));
  EXPECT_EQ(manifest_text(c), manifest_text(d));
}

TEST(Experiment, RowAccountingAndDeterminism) {
  ExperimentConfig c = tiny_config();
  c.threads = 1;
  const auto r1 = run_experiment(c);
  c.threads = 4;
  const auto r2 = run_experiment(c);
  const auto f1 = render_csv(c, r1);
  const auto f2 = render_csv(c, r2);
  EXPECT_EQ(f1.nmse_vs_iter, f2.nmse_vs_iter);
  EXPECT_EQ(f1.nmse_vs_snr, f2.nmse_vs_snr);
  EXPECT_EQ(f1.nmse_vs_m, f2.nmse_vs_m);
  EXPECT_EQ(f1.se_trace, f2.se_trace);

  const int algos = 3;
  EXPECT_EQ(r1.trials.size(), static_cast<std::size_t>(algos * 2 * 2 * 3));
  EXPECT_EQ(count_lines(f1.nmse_vs_iter), 1 + algos * 2 * 3 * c.max_iters);
  EXPECT_EQ(count_lines(f1.nmse_vs_snr), 1 + algos * 2);
  EXPECT_EQ(count_lines(f1.nmse_vs_m), 1 + algos * 2 * 2);
  EXPECT_EQ(r1.se.size(), 2u);
  for (const auto& rec : r1.trials) EXPECT_EQ(rec.nmse.size(), static_cast<std::size_t>(c.max_iters));
}

TEST(Experiment, WritesOutputFiles) {
  ExperimentConfig c = tiny_config();
  c.M = {13};
  c.trials = 1;
  c.output_dir = std::filesystem::temp_directory_path() / "hmpce_test_outputs";
  std::filesystem::remove_all(c.output_dir);
  write_outputs(c, run_experiment(c));
  for (const char* name : {"nmse_vs_iter.csv", "nmse_vs_snr.csv", "nmse_vs_m.csv", "se_trace.csv", "manifest.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(c.output_dir / name)) << name;
  }
  std::filesystem::remove_all(c.output_dir);
  c.se_only = true;
  write_outputs(c, run_experiment(c));
  EXPECT_FALSE(std::filesystem::exists(c.output_dir / "nmse_vs_iter.csv"));
  EXPECT_TRUE(std::filesystem::exists(c.output_dir / "se_trace.csv"));
  std::filesystem::remove_all(c.output_dir);
}

TEST(Experiment, ChannelFileDimensionsMustMatch) {
  ExperimentConfig c = tiny_config();
  const auto path = std::filesystem::temp_directory_path() / "hmpce_test_channel.bin";
  save_channel_file(detail::experiment_channel(c, 0), path);
  c.channel_file = path;
  c.trials = 1;
  c.M = {13};
  EXPECT_NO_THROW(run_experiment(c));
  c.N = 64;
  EXPECT_THROW(run_experiment(c), ChannelFileError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace hmpce
