#ifndef NSPVI_BENCH_HPP
#define NSPVI_BENCH_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "nspvi/config.hpp"
#include "nspvi/predict.hpp"
#include "nspvi/train.hpp"

namespace nspvi {

inline constexpr int kBenchCsvVersion = 1;

struct BenchRecord {
  Sampler sampler = Sampler::mcmc;
  int samples = 0;
  // -1 for a plain sweep point; otherwise the index of the MCMC sweep point
  // whose sampling time this row was matched against.
  int budget_level = -1;
  double wall_s = 0.0;  // summed posterior-sampling time over all predictions
  double rmse = 0.0;
  double accuracy = 0.0;
  std::size_t scored = 0;
  std::size_t failures = 0;
};

// Runs predict over every test prefix for each sampler and sample size. With
// budget matching, each variational sampler is additionally swept over
// doubling sample sizes until its time exceeds the largest MCMC time, and for
// every MCMC sweep point the variational run with the largest time not above
// that budget (or the cheapest run if none fits) is reported as a matched row.
std::vector<BenchRecord> run_bench(const Posteriors& post, const std::vector<EventSeq>& test,
                                   const BenchConfig& config, std::uint64_t seed);

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records);
std::vector<BenchRecord> parse_bench_csv(std::istream& in, const std::string& source);

// Time-vs-RMSE and time-vs-accuracy charts (log-scale time axis) from the
// plain sweep rows.
std::string bench_rmse_svg(const std::vector<BenchRecord>& records);
std::string bench_accuracy_svg(const std::vector<BenchRecord>& records);

}  // namespace nspvi

#endif  // NSPVI_BENCH_HPP
