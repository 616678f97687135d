#ifndef NSPVI_TRAIN_HPP
#define NSPVI_TRAIN_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nspvi/mcmc.hpp"
#include "nspvi/model.hpp"
#include "nspvi/variational.hpp"

namespace nspvi {

// ---------------------------------------------------------------------------
// Links between unconstrained optimizer coordinates and positive parameters.

// floor + softplus(raw)
double link_value(double raw, double floor);
double link_raw(double value, double floor);
// d value / d raw
double link_slope(double raw);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Gradient ascent with bias-corrected moments.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, double step, AdamConfig config = {});

  // x += step * m_hat / (sqrt(v_hat) + eps) on entries whose mask is nonzero
  // (all entries without a mask).
  void step(std::vector<double>& x, const std::vector<double>& grad,
            const std::vector<char>* mask = nullptr);
  std::size_t steps() const { return t_; }
  double step_size() const { return step_; }

 private:
  double step_ = 0.0;
  AdamConfig config_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Parameter groups seen by Adam in raw coordinates.

// Downward kernels of a model: (weight, shape, scale) raw triples in table order.
class ModelOptimizer {
 public:
  ModelOptimizer() = default;
  ModelOptimizer(const ModelParams& model, double step, AdamConfig config, bool fix_shape);
  // Applies the ascent step for the natural-coordinate gradient. Returns
  // false (model untouched) when the gradient is not finite.
  bool step(ModelParams& model, const DownGrad& grad);

 private:
  Adam adam_;
  std::vector<double> raw_;
  std::vector<char> mask_;
  bool fix_shape_ = false;
};

class UnspOptimizer {
 public:
  UnspOptimizer() = default;
  UnspOptimizer(const UpwardTables& params, double step, AdamConfig config, bool fix_shape);
  bool step(UpwardTables& params, const UpwardGrad& grad);

 private:
  Adam adam_;
  std::vector<double> raw_;
  std::vector<char> mask_;
  bool fix_shape_ = false;
};

class UsapOptimizer {
 public:
  UsapOptimizer() = default;
  UsapOptimizer(const UsapParams& params, double step, AdamConfig config);
  bool step(UsapParams& params, const UsapParams& grad);

 private:
  Adam adam_;
};

// ---------------------------------------------------------------------------
// Training loop pieces

struct TrainConfig {
  int iterations = 500;
  double model_step = 0.01;       // Adam step for the model kernels
  double variational_step = 0.01; // Adam step for q
  AdamConfig adam;
  int batch_size = 0;  // 0: full batch
  int burn_in = kDefaultBurnIn;
  int thin = kDefaultThin;
  int validate_every = 50;
  int patience = 5;
  int validation_samples = 16;
  bool fix_shape = false;
  bool train_model = true;
  bool train_unsp = true;
  bool train_usap = true;
  UsapDims usap_dims;
  std::uint64_t seed = 1;
};

struct Posteriors {
  ModelParams model;
  UpwardTables unsp;
  UsapParams usap;
  friend bool operator==(const Posteriors&, const Posteriors&) = default;
};

// Kernel weights ~ U(0.5, 1.5), shape 1, scale T/10; every base rate
// (top, virtual, UNSP, USAP) = mean observed count / (K_l T).
Posteriors initialize(const std::vector<int>& counts, const std::vector<EventSeq>& data,
                      const TrainConfig& config);

// Top-rate maximization: mean over draws of m_{L,k} / T, floored.
std::vector<double> top_rates_from_draws(const std::vector<Layers>& draws,
                                         const std::vector<double>& windows);

// Fisher-identity step on the downward kernels (sum over draws), then the top
// rates are set directly. Returns false if the gradient was not finite.
bool model_grad_step(ModelParams& model, ModelOptimizer& optimizer,
                     const std::vector<Layers>& draws, const std::vector<double>& windows);

// Ascent on sum over draws of log q. Return the mean log q before the step.
double variational_grad_step(UpwardTables& params, UnspOptimizer& optimizer,
                             const std::vector<Layers>& draws, const std::vector<double>& windows);
double variational_grad_step(UsapParams& params, UsapOptimizer& optimizer,
                             const std::vector<Layers>& draws, const std::vector<double>& windows);

struct TrainLogRecord {
  int iteration = 0;
  double joint_loglik = 0.0;  // mean over the batch
  double q_unsp = 0.0;        // mean log q of the posterior draws
  double q_usap = 0.0;
  std::vector<double> top_rates;
  double wall_ms = 0.0;
};

struct ValidationRecord {
  int iteration = 0;
  double score = 0.0;
};

struct TrainResult {
  Posteriors best;
  std::vector<TrainLogRecord> log;
  std::vector<ValidationRecord> validation;
  int iterations_run = 0;
  int best_iteration = 0;
  bool stopped_early = false;
  int skipped_model_steps = 0;
};

// Mean over sequences of log (1/S) sum_s lambda_{0,k_n}(t_n) with hidden
// events drawn from q given the first n-1 events. Sequences with fewer than
// two events are skipped; -inf if none remain.
double validation_score(const Posteriors& post, const std::vector<EventSeq>& data, Family family,
                        int samples, std::uint64_t seed);

TrainResult mcem_run(const std::vector<EventSeq>& train, const std::vector<EventSeq>& validation,
                     Posteriors init, const TrainConfig& config);

}  // namespace nspvi

#endif  // NSPVI_TRAIN_HPP
