#include <iostream>

#include <CLI11.hpp>

#include "nspvi/cli.hpp"
#include "nspvi/error.hpp"

int main(int argc, char** argv) {
  using namespace nspvi;
  CLI::App app{"Deep Neyman-Scott process inference and next-event prediction"};
  app.require_subcommand(1);

  CliOverrides o;
  std::string config_path, out, data, sampler_name, checkpoint;
  std::uint64_t seed = 0;
  int samples = 0, burn_in = 0, thin = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--data", data, "dataset directory");
  };
  auto sampling = [&](CLI::App* sub) {
    sub->add_option("--burn-in", burn_in, "MCMC cycles before the first draw");
    sub->add_option("--thin", thin, "MCMC cycles between draws");
  };
  auto choose = [&](CLI::App* sub) {
    sub->add_option("--sampler", sampler_name, "mcmc, unsp or usap")
        ->check(CLI::IsMember({"mcmc", "unsp", "usap"}));
    sub->add_option("--samples", samples, "posterior samples per prediction");
  };

  auto* gen = app.add_subcommand("generate", "simulate train/validation/test splits");
  common(gen);
  auto* train = app.add_subcommand("train", "run MCEM and save a checkpoint");
  common(train);
  sampling(train);
  train->add_option("--resume", checkpoint, "start from this checkpoint");
  auto* predict = app.add_subcommand("predict", "predict every next event of the test split");
  common(predict);
  sampling(predict);
  choose(predict);
  predict->add_option("--checkpoint", checkpoint, "checkpoint (default OUT/checkpoint.json)");
  auto* bench = app.add_subcommand("bench", "sample-size sweep over all samplers");
  common(bench);
  sampling(bench);
  choose(bench);
  bench->add_option("--checkpoint", checkpoint, "checkpoint (default OUT/checkpoint.json)");
  auto* plot = app.add_subcommand("plot", "redraw the bench charts from OUT/bench.csv");
  common(plot);

  CLI11_PARSE(app, argc, argv);

  auto given = [](const CLI::App* sub, const char* name) {
    const auto* opt = sub->get_option_no_throw(name);
    return opt && opt->count() > 0;
  };
  CLI::App* sub = app.get_subcommands().front();
  if (given(sub, "--config")) o.config_path = config_path;
  if (given(sub, "--seed")) o.seed = seed;
  if (given(sub, "--out")) o.out = out;
  if (given(sub, "--data")) o.data = data;
  if (given(sub, "--burn-in")) o.burn_in = burn_in;
  if (given(sub, "--thin")) o.thin = thin;
  if (given(sub, "--samples")) o.samples = samples;

  try {
    if (given(sub, "--sampler")) o.sampler = parse_sampler(sampler_name);
    const RunConfig config = resolve_config(o);
    const bool has_checkpoint = given(sub, "--resume") || given(sub, "--checkpoint");
    const std::optional<std::string> ckpt =
        has_checkpoint ? std::optional<std::string>(checkpoint) : std::nullopt;
    std::string summary;
    if (sub == gen) {
      summary = cmd_generate(config);
    } else if (sub == train) {
      summary = cmd_train(config, ckpt);
    } else if (sub == predict) {
      summary = cmd_predict(config, o.sampler.value_or(Sampler::usap), o.samples.value_or(16),
                            ckpt);
    } else if (sub == bench) {
      summary = cmd_bench(config, ckpt);
    } else {
      summary = cmd_plot(config);
    }
    std::cout << summary << "\n";
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
