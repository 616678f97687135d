#ifndef NSPVI_CONFIG_HPP
#define NSPVI_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nspvi/predict.hpp"
#include "nspvi/train.hpp"
#include "nspvi/weibull.hpp"

namespace nspvi {

struct GenerateConfig {
  double window = 20.0;
  double top_rate = 0.15;
  WeibullKernel kernel{3.0, 1.0, 2.0};  // every downward kernel
  int train = 1000;
  int validation = 100;
  int test = 100;
};

struct BenchConfig {
  std::vector<int> samples{1, 2, 4, 8, 16, 32};
  std::vector<Sampler> samplers{Sampler::mcmc, Sampler::unsp, Sampler::usap};
  int burn_in = kDefaultBurnIn;
  int thin = kDefaultThin;
  double horizon_factor = 2.0;
  int max_retries = 4;
  int max_sequences = 0;        // 0: whole test set
  bool match_budgets = false;   // extend variational sweeps to the MCMC budgets
  int max_matched_samples = 4096;
};

struct PathsConfig {
  std::string data = "data";
  std::string out = "out";
};

struct RunConfig {
  std::vector<int> counts{2, 1};  // K_0..K_L
  TrainConfig train;              // also carries fix_shape and the USAP dims
  GenerateConfig generate;
  BenchConfig bench;
  PathsConfig paths;
  std::uint64_t seed = 1;
};

// "1-hidden" -> (K_0, w), "2-hidden" -> (K_0, w, w); throws ConfigError.
std::vector<int> preset_counts(const std::string& preset, int num_types,
                               const std::vector<int>& hidden_widths);

// Defaults of the synthetic preset with L = 1.
RunConfig default_run_config();

// Schema-checked JSON; unknown keys and wrong types raise ConfigError naming
// the offending key path.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_string(const RunConfig& config);

}  // namespace nspvi

#endif  // NSPVI_CONFIG_HPP
