#ifndef NSPVI_PREDICT_HPP
#define NSPVI_PREDICT_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nspvi/mcmc.hpp"
#include "nspvi/model.hpp"
#include "nspvi/train.hpp"
#include "nspvi/variational.hpp"

namespace nspvi {

enum class Sampler { mcmc, unsp, usap };

std::string to_string(Sampler s);
Sampler parse_sampler(const std::string& name);

// Per-process mean of counts[s][k] / window, floored at kRateFloor.
std::vector<double> top_rate_mle(const std::vector<std::vector<std::size_t>>& counts,
                                 double window);

double mean_time(const std::vector<double>& times);
// Most frequent 1-based type; ties go to the smallest index.
int majority_type(const std::vector<int>& types, int num_types);

struct FutureEvent {
  double t = 0.0;
  int type = 1;  // 1-based
};

// Forward simulation on (t_n, t_n + horizon] given a hidden draw on (0, t_n]:
// fresh top events at the model's rates, then each lower layer driven by the
// union of drawn and freshly simulated parents. Returns the earliest layer-0
// event, if any.
std::optional<FutureEvent> simulate_future(const ModelParams& model, const Layers& z, double t_n,
                                           double horizon, RngStream& rng);

struct PredictOptions {
  Sampler sampler = Sampler::usap;
  int samples = 16;
  int burn_in = kDefaultBurnIn;  // MCMC cycles before the first draw of a sequence
  int thin = kDefaultThin;       // MCMC cycles between draws
  double horizon_factor = 2.0;   // horizon = factor * window of the sequence
  int max_retries = 4;           // horizon doublings when every future is empty
  std::uint64_t seed = 1;
};

struct PredictionRecord {
  std::size_t seq_id = 0;
  std::size_t n = 0;  // index of the predicted event (1-based)
  double t_true = 0.0;
  int k_true = 1;
  double t_hat = 0.0;
  int k_hat = 1;
  Sampler sampler = Sampler::usap;
  int samples = 0;
  double wall_ms = 0.0;  // posterior sampling time
  bool failed = false;
};

// Carried from one prediction of a sequence to the next: the refreshed top
// rates and, for MCMC, the warm chain.
struct PredictContext {
  std::size_t seq_id = 0;
  ModelParams model;
  std::optional<ChainState> chain;
  RngStream rng;
};

PredictContext make_context(const Posteriors& post, std::size_t seq_id,
                            const PredictOptions& options);

// Two-phase prediction for one context (first n events) of `seq`, predicting event n + 1.
PredictionRecord predict_next(const Posteriors& post, const EventSeq& seq, std::size_t n,
                              PredictContext& ctx, const PredictOptions& options);

// Every prefix with n >= 1 of one sequence, in order.
std::vector<PredictionRecord> predict_sequence(const Posteriors& post, const EventSeq& seq,
                                               std::size_t seq_id, const PredictOptions& options);

// All sequences (in parallel), records in sequence order.
std::vector<PredictionRecord> predict_dataset(const Posteriors& post,
                                              const std::vector<EventSeq>& data,
                                              const PredictOptions& options);

struct Score {
  double rmse = 0.0;
  double accuracy = 0.0;
  std::size_t scored = 0;
  std::size_t failures = 0;
  double wall_ms = 0.0;  // summed over all records
};

// Throws ArgumentError when no non-failure record exists.
Score score(const std::vector<PredictionRecord>& records);

}  // namespace nspvi

#endif  // NSPVI_PREDICT_HPP
