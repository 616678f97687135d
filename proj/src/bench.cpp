#include "nspvi/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "nspvi/error.hpp"
#include "nspvi/svg.hpp"

namespace nspvi {

namespace {

BenchRecord run_point(const Posteriors& post, const std::vector<EventSeq>& data,
                      const BenchConfig& config, Sampler sampler, int samples,
                      std::uint64_t seed) {
  PredictOptions o;
  o.sampler = sampler;
  o.samples = samples;
  o.burn_in = config.burn_in;
  o.thin = config.thin;
  o.horizon_factor = config.horizon_factor;
  o.max_retries = config.max_retries;
  o.seed = seed;
  const auto records = predict_dataset(post, data, o);
  BenchRecord r;
  r.sampler = sampler;
  r.samples = samples;
  double ms = 0.0;
  for (const auto& rec : records) ms += rec.wall_ms;
  r.wall_s = ms / 1000.0;
  try {
    const Score s = score(records);
    r.rmse = s.rmse;
    r.accuracy = s.accuracy;
    r.scored = s.scored;
    r.failures = s.failures;
  } catch (const ArgumentError&) {
    r.rmse = std::numeric_limits<double>::quiet_NaN();
    r.accuracy = std::numeric_limits<double>::quiet_NaN();
    r.scored = 0;
    r.failures = records.size();
  }
  return r;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<BenchRecord> run_bench(const Posteriors& post, const std::vector<EventSeq>& test,
                                   const BenchConfig& config, std::uint64_t seed) {
  std::vector<EventSeq> data = test;
  if (config.max_sequences > 0 && data.size() > static_cast<std::size_t>(config.max_sequences)) {
    data.resize(static_cast<std::size_t>(config.max_sequences));
  }
  std::size_t predictable = 0;
  for (const auto& s : data) predictable += s.events.size() > 1 ? s.events.size() - 1 : 0;
  if (predictable == 0) throw ArgumentError("bench: test data has no predictable events");

  std::vector<BenchRecord> out;
  std::map<std::pair<Sampler, int>, BenchRecord> done;
  for (Sampler sampler : config.samplers) {
    for (int s : config.samples) {
      auto r = run_point(post, data, config, sampler, s, seed);
      done[{sampler, s}] = r;
      out.push_back(r);
    }
  }

  const bool have_mcmc =
      std::find(config.samplers.begin(), config.samplers.end(), Sampler::mcmc) !=
      config.samplers.end();
  if (!config.match_budgets || !have_mcmc) return out;

  std::vector<double> budgets;
  for (int s : config.samples) budgets.push_back(done[{Sampler::mcmc, s}].wall_s);
  const double top = *std::max_element(budgets.begin(), budgets.end());

  for (Sampler sampler : config.samplers) {
    if (sampler == Sampler::mcmc) continue;
    std::vector<BenchRecord> runs;
    for (int s : config.samples) runs.push_back(done[{sampler, s}]);
    for (int s = 1; s <= config.max_matched_samples; s *= 2) {
      auto it = done.find({sampler, s});
      const BenchRecord r =
          it != done.end() ? it->second : run_point(post, data, config, sampler, s, seed);
      if (it == done.end()) {
        done[{sampler, s}] = r;
        runs.push_back(r);
      }
      if (r.wall_s > top) break;
    }
    for (std::size_t level = 0; level < budgets.size(); ++level) {
      const BenchRecord* pick = nullptr;
      for (const auto& r : runs) {
        if (r.wall_s <= budgets[level] && (!pick || r.wall_s > pick->wall_s)) pick = &r;
      }
      if (!pick) {
        pick = &*std::min_element(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
          return a.wall_s < b.wall_s;
        });
      }
      BenchRecord m = *pick;
      m.budget_level = static_cast<int>(level);
      out.push_back(m);
    }
  }
  return out;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << "# nspvi-bench v" << kBenchCsvVersion << "\n";
  out << "sampler,samples,budget_level,wall_s,rmse,accuracy,scored,failures\n";
  for (const auto& r : records) {
    out << to_string(r.sampler) << ',' << r.samples << ',' << r.budget_level << ','
        << num(r.wall_s) << ',' << num(r.rmse) << ',' << num(r.accuracy) << ',' << r.scored
        << ',' << r.failures << '\n';
  }
}

std::vector<BenchRecord> parse_bench_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(source + ":" + std::to_string(line_no) + ": " + what);
  };
  ++line_no;
  const std::string version = "# nspvi-bench v" + std::to_string(kBenchCsvVersion);
  if (!std::getline(in, line) || line != version) fail("expected header '" + version + "'");
  ++line_no;
  if (!std::getline(in, line) ||
      line != "sampler,samples,budget_level,wall_s,rmse,accuracy,scored,failures") {
    fail("unexpected column header");
  }
  std::vector<BenchRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) fail("expected 8 fields, got " + std::to_string(f.size()));
    BenchRecord r;
    try {
      r.sampler = parse_sampler(f[0]);
      r.samples = std::stoi(f[1]);
      r.budget_level = std::stoi(f[2]);
      r.wall_s = std::stod(f[3]);
      r.rmse = std::stod(f[4]);
      r.accuracy = std::stod(f[5]);
      r.scored = static_cast<std::size_t>(std::stoull(f[6]));
      r.failures = static_cast<std::size_t>(std::stoull(f[7]));
    } catch (const std::exception& e) {
      fail(std::string("bad field: ") + e.what());
    }
    out.push_back(r);
  }
  return out;
}

namespace {

std::vector<Series> plain_series(const std::vector<BenchRecord>& records, bool rmse) {
  std::vector<Series> out;
  for (Sampler s : {Sampler::mcmc, Sampler::unsp, Sampler::usap}) {
    std::vector<BenchRecord> rows;
    for (const auto& r : records) {
      if (r.sampler == s && r.budget_level < 0) rows.push_back(r);
    }
    if (rows.empty()) continue;
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.samples < b.samples; });
    Series sr;
    sr.name = to_string(s);
    for (const auto& r : rows) {
      sr.x.push_back(r.wall_s);
      sr.y.push_back(rmse ? r.rmse : r.accuracy);
    }
    out.push_back(std::move(sr));
  }
  return out;
}

}  // namespace

std::string bench_rmse_svg(const std::vector<BenchRecord>& records) {
  ChartOptions o;
  o.title = "Next-event time error vs sampling time";
  o.x_label = "posterior sampling time (s)";
  o.y_label = "RMSE";
  o.log_x = true;
  return line_chart_svg(plain_series(records, true), o);
}

std::string bench_accuracy_svg(const std::vector<BenchRecord>& records) {
  ChartOptions o;
  o.title = "Next-event type accuracy vs sampling time";
  o.x_label = "posterior sampling time (s)";
  o.y_label = "accuracy";
  o.log_x = true;
  return line_chart_svg(plain_series(records, false), o);
}

}  // namespace nspvi
