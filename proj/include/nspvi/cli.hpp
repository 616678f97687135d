#ifndef NSPVI_CLI_HPP
#define NSPVI_CLI_HPP

#include <optional>
#include <string>
#include <vector>

#include "nspvi/bench.hpp"
#include "nspvi/config.hpp"
#include "nspvi/simulate.hpp"

namespace nspvi {

// Command-line overrides applied on top of the JSON config.
struct CliOverrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<Sampler> sampler;
  std::optional<int> samples;
  std::optional<int> burn_in;
  std::optional<int> thin;
  std::optional<std::string> checkpoint;  // train: resume from; predict/bench: load from
};

RunConfig resolve_config(const CliOverrides& overrides);

// The generating model of the synthetic preset: every downward kernel and
// every top rate from the generate section.
ModelParams synthetic_model(const std::vector<int>& counts, const GenerateConfig& config);

struct Splits {
  std::vector<EventSeq> train, validation, test;
};
// Sequence i of the concatenated train|validation|test list is drawn from
// generate stream i.
Splits generate_splits(const RunConfig& config);

std::string dataset_path(const RunConfig& config, const std::string& split);

// Subcommands. Each writes its files and returns a one-line summary.
std::string cmd_generate(const RunConfig& config);
std::string cmd_train(const RunConfig& config, const std::optional<std::string>& resume);
std::string cmd_predict(const RunConfig& config, Sampler sampler, int samples,
                        const std::optional<std::string>& checkpoint);
std::string cmd_bench(const RunConfig& config, const std::optional<std::string>& checkpoint);
std::string cmd_plot(const RunConfig& config);

}  // namespace nspvi

#endif  // NSPVI_CLI_HPP
