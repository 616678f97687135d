#ifndef NSPVI_MODEL_HPP
#define NSPVI_MODEL_HPP

#include <cstddef>
#include <vector>

#include "nspvi/intensity.hpp"
#include "nspvi/weibull.hpp"

namespace nspvi {

inline constexpr double kObsBackground = 1e-10;
inline constexpr double kRateFloor = 1e-8;
inline constexpr double kKernelFloor = 1e-3;

using Times = std::vector<double>;
// Event times of every process in one layer, indexed by process.
using LayerEvents = std::vector<Times>;
// Layers 0..L; layer 0 holds the observations split by type.
using Layers = std::vector<LayerEvents>;

// Process `index` (0-based) of `layer`; layer 0 is the observed layer.
struct ProcessRef {
  int layer = 0;
  int index = 0;
  friend bool operator==(const ProcessRef&, const ProcessRef&) = default;
};

struct ObservedEvent {
  double t = 0.0;
  int type = 1;  // 1-based
};

// One observed multi-type sequence on (0, window].
struct EventSeq {
  std::vector<ObservedEvent> events;
  double window = 1.0;

  // Throws ArgumentError on unsorted / out-of-window / bad-type / non-finite events.
  void validate(int num_types) const;
  LayerEvents by_type(int num_types) const;
  // First n events observed on (0, t_n]; n >= 1.
  EventSeq prefix(std::size_t n) const;
};

// Dense table of kernels between all processes of two adjacent layers.
struct KernelTable {
  int from = 0;  // process count of the source layer
  int to = 0;    // process count of the target layer
  std::vector<WeibullKernel> kernels;

  KernelTable() = default;
  KernelTable(int from_count, int to_count, WeibullKernel fill = {});
  WeibullKernel& at(int i, int k) { return kernels[static_cast<std::size_t>(i * to + k)]; }
  const WeibullKernel& at(int i, int k) const {
    return kernels[static_cast<std::size_t>(i * to + k)];
  }
  friend bool operator==(const KernelTable&, const KernelTable&) = default;
};

// Upward intensities base[l][k] + sum_i sum_j phi_{(l-1,i)->(l,k)}(t_{l-1,i,j} - t)
// for l = 1..L. Shared by the virtual processes and the UNSP posterior.
struct UpwardTables {
  std::vector<int> counts;            // K_0..K_L
  std::vector<KernelTable> kernels;   // [l-1]: (l-1, i) -> (l, k)
  std::vector<std::vector<double>> base;  // [l-1][k]

  UpwardTables() = default;
  UpwardTables(std::vector<int> counts, WeibullKernel kernel, double base_rate);
  int depth() const { return static_cast<int>(counts.size()) - 1; }
  const KernelTable& into(int layer) const { return kernels[static_cast<std::size_t>(layer - 1)]; }
  KernelTable& into(int layer) { return kernels[static_cast<std::size_t>(layer - 1)]; }
  double base_rate(int layer, int k) const {
    return base[static_cast<std::size_t>(layer - 1)][static_cast<std::size_t>(k)];
  }
  friend bool operator==(const UpwardTables&, const UpwardTables&) = default;
};

struct ModelParams {
  std::vector<int> counts;            // K_0..K_L
  std::vector<KernelTable> down;      // [l]: (l+1, i) -> (l, k), l = 0..L-1
  std::vector<double> top_rates;      // K_L
  UpwardTables vpp;
  double obs_background = kObsBackground;

  ModelParams() = default;
  // Every kernel and rate set to the given values.
  ModelParams(std::vector<int> counts, WeibullKernel down_kernel, double top_rate,
              WeibullKernel vpp_kernel, double vpp_base);

  int depth() const { return static_cast<int>(counts.size()) - 1; }
  int count(int layer) const { return counts[static_cast<std::size_t>(layer)]; }
  const KernelTable& from_above(int layer) const { return down[static_cast<std::size_t>(layer)]; }
  KernelTable& from_above(int layer) { return down[static_cast<std::size_t>(layer)]; }
  void validate() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Empty realization with the layer/process shape of `counts`.
Layers empty_layers(const std::vector<int>& counts);
std::size_t event_count(const LayerEvents& layer);

// Real-process intensity of (layer, k) given the real events of layer + 1
// (ignored at the top layer). Layer 0 includes the observation background.
double rpp_cif(const ModelParams& model, int layer, int k, const LayerEvents& parents, double t);

// Upward intensity of (layer, k) given the events of layer - 1.
double upward_cif(const UpwardTables& tables, int layer, int k, const LayerEvents& children,
                  double t);
double vpp_cif(const ModelParams& model, int layer, int k, const LayerEvents& children, double t);

PiecewiseCif rpp_intensity(const ModelParams& model, int layer, int k,
                           const LayerEvents& parents, double begin, double end);
PiecewiseCif upward_intensity(const UpwardTables& tables, int layer, int k,
                              const LayerEvents& children, double begin, double end);

// log p(x, z) with z.size() == L + 1 and z[0] the observations by type.
double joint_loglik(const ModelParams& model, const Layers& z, double window);
double joint_loglik(const ModelParams& model, const EventSeq& x, const Layers& z);

// Per-layer terms of joint_loglik (index = layer).
std::vector<double> joint_loglik_terms(const ModelParams& model, const Layers& z, double window);

// sum over l >= 1, k of the log-likelihood of upper[l][k] under the upward
// intensity driven by lower[l-1].
double upward_loglik(const UpwardTables& tables, const Layers& lower, const Layers& upper,
                     double window);

// Gradient of joint_loglik w.r.t. every downward kernel, shaped like model.down.
struct DownGrad {
  std::vector<std::vector<WeibullGrad>> kernels;
};
DownGrad joint_loglik_grad(const ModelParams& model, const Layers& z, double window);

}  // namespace nspvi

#endif  // NSPVI_MODEL_HPP
