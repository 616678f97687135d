#include "nspvi/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nspvi/error.hpp"
#include "nspvi/io.hpp"

namespace nspvi {

namespace fs = std::filesystem;

RunConfig resolve_config(const CliOverrides& o) {
  RunConfig c = o.config_path ? load_run_config(*o.config_path) : default_run_config();
  if (o.seed) {
    c.seed = *o.seed;
    c.train.seed = *o.seed;
  }
  if (o.out) c.paths.out = *o.out;
  if (o.data) c.paths.data = *o.data;
  if (o.burn_in) {
    if (*o.burn_in < 0) throw ConfigError("--burn-in: must be >= 0");
    c.train.burn_in = *o.burn_in;
    c.bench.burn_in = *o.burn_in;
  }
  if (o.thin) {
    if (*o.thin < 0) throw ConfigError("--thin: must be >= 0");
    c.train.thin = *o.thin;
    c.bench.thin = *o.thin;
  }
  if (o.sampler) c.bench.samplers = {*o.sampler};
  if (o.samples) {
    if (*o.samples < 1) throw ConfigError("--samples: must be >= 1");
    c.bench.samples = {*o.samples};
  }
  return c;
}

ModelParams synthetic_model(const std::vector<int>& counts, const GenerateConfig& g) {
  ModelParams m(counts, g.kernel, g.top_rate, g.kernel, g.top_rate);
  m.validate();
  return m;
}

Splits generate_splits(const RunConfig& c) {
  const ModelParams model = synthetic_model(c.counts, c.generate);
  Splits s;
  std::uint64_t id = 0;
  auto fill = [&](std::vector<EventSeq>& out, int n) {
    for (int i = 0; i < n; ++i, ++id) {
      RngStream rng(c.seed, id, Purpose::generate);
      out.push_back(generate_dnsp(model, c.generate.window, rng).x);
    }
  };
  fill(s.train, c.generate.train);
  fill(s.validation, c.generate.validation);
  fill(s.test, c.generate.test);
  return s;
}

std::string dataset_path(const RunConfig& c, const std::string& split) {
  return (fs::path(c.paths.data) / (split + ".jsonl")).string();
}

namespace {

std::string out_path(const RunConfig& c, const std::string& name) {
  return (fs::path(c.paths.out) / name).string();
}

std::string checkpoint_path(const RunConfig& c, const std::optional<std::string>& given) {
  return given ? *given : out_path(c, "checkpoint.json");
}

Posteriors load_checked(const RunConfig& c, const std::string& path) {
  Posteriors p = load_checkpoint(path);
  if (p.model.counts != c.counts) {
    throw ConfigError(path + ": checkpoint architecture does not match the config");
  }
  return p;
}

template <class Write>
void write_stream_file(const std::string& path, Write write) {
  std::ostringstream s;
  write(s);
  write_text_file(path, s.str());
}

}  // namespace

std::string cmd_generate(const RunConfig& c) {
  const Splits s = generate_splits(c);
  write_dataset(dataset_path(c, "train"), s.train);
  write_dataset(dataset_path(c, "validation"), s.validation);
  write_dataset(dataset_path(c, "test"), s.test);
  std::size_t events = 0;
  for (const auto* split : {&s.train, &s.validation, &s.test}) {
    for (const auto& q : *split) events += q.events.size();
  }
  return "generated " + std::to_string(s.train.size()) + "/" +
         std::to_string(s.validation.size()) + "/" + std::to_string(s.test.size()) +
         " sequences (" + std::to_string(events) + " events) in " + c.paths.data;
}

std::string cmd_train(const RunConfig& c, const std::optional<std::string>& resume) {
  const int types = c.counts.front();
  const auto train = read_dataset(dataset_path(c, "train"), types);
  const auto validation = read_dataset(dataset_path(c, "validation"), types);
  Posteriors init = resume ? load_checked(c, *resume) : initialize(c.counts, train, c.train);
  const TrainResult r = mcem_run(train, validation, std::move(init), c.train);
  save_checkpoint(out_path(c, "checkpoint.json"), r.best);
  write_stream_file(out_path(c, "train_log.csv"), [&](std::ostream& o) { write_train_log(o, r.log); });
  write_stream_file(out_path(c, "validation.csv"),
                    [&](std::ostream& o) { write_validation_log(o, r.validation); });
  write_text_file(out_path(c, "config.json"), run_config_to_string(c));
  std::string msg = "trained " + std::to_string(r.iterations_run) + " iterations (best " +
                    std::to_string(r.best_iteration) + ")";
  if (r.stopped_early) msg += ", stopped early";
  if (r.skipped_model_steps > 0) {
    msg += ", " + std::to_string(r.skipped_model_steps) + " model steps skipped";
  }
  return msg + "; checkpoint in " + c.paths.out;
}

std::string cmd_predict(const RunConfig& c, Sampler sampler, int samples,
                        const std::optional<std::string>& checkpoint) {
  if (samples < 1) throw ConfigError("--samples: must be >= 1");
  const Posteriors post = load_checked(c, checkpoint_path(c, checkpoint));
  auto test = read_dataset(dataset_path(c, "test"), c.counts.front());
  if (c.bench.max_sequences > 0 && test.size() > static_cast<std::size_t>(c.bench.max_sequences)) {
    test.resize(static_cast<std::size_t>(c.bench.max_sequences));
  }
  PredictOptions o;
  o.sampler = sampler;
  o.samples = samples;
  o.burn_in = c.bench.burn_in;
  o.thin = c.bench.thin;
  o.horizon_factor = c.bench.horizon_factor;
  o.max_retries = c.bench.max_retries;
  o.seed = c.seed;
  const auto records = predict_dataset(post, test, o);
  const std::string name = "predictions_" + to_string(sampler) + "_S" + std::to_string(samples) +
                           ".csv";
  write_stream_file(out_path(c, name), [&](std::ostream& s) { write_predictions(s, records); });
  const Score sc = score(records);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s S=%d: rmse=%.6g accuracy=%.4f scored=%zu failures=%zu",
                to_string(sampler).c_str(), samples, sc.rmse, sc.accuracy, sc.scored,
                sc.failures);
  return buf;
}

std::string cmd_bench(const RunConfig& c, const std::optional<std::string>& checkpoint) {
  const Posteriors post = load_checked(c, checkpoint_path(c, checkpoint));
  const auto test = read_dataset(dataset_path(c, "test"), c.counts.front());
  const auto rows = run_bench(post, test, c.bench, c.seed);
  write_stream_file(out_path(c, "bench.csv"), [&](std::ostream& s) { write_bench_csv(s, rows); });
  write_text_file(out_path(c, "bench_rmse.svg"), bench_rmse_svg(rows));
  write_text_file(out_path(c, "bench_accuracy.svg"), bench_accuracy_svg(rows));
  return "bench: " + std::to_string(rows.size()) + " rows in " + out_path(c, "bench.csv");
}

std::string cmd_plot(const RunConfig& c) {
  const std::string path = out_path(c, "bench.csv");
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open bench CSV");
  const auto rows = parse_bench_csv(in, path);
  write_text_file(out_path(c, "bench_rmse.svg"), bench_rmse_svg(rows));
  write_text_file(out_path(c, "bench_accuracy.svg"), bench_accuracy_svg(rows));
  return "plots written to " + c.paths.out;
}

}  // namespace nspvi
