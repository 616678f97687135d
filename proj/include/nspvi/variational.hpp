#ifndef NSPVI_VARIATIONAL_HPP
#define NSPVI_VARIATIONAL_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nspvi/autodiff.hpp"
#include "nspvi/intensity.hpp"
#include "nspvi/model.hpp"
#include "nspvi/rng.hpp"

namespace nspvi {

enum class Family { unsp, usap };

// ---------------------------------------------------------------------------
// UNSP: upward Neyman-Scott posterior, same shape as the virtual processes.

struct UpwardGrad {
  std::vector<std::vector<WeibullGrad>> kernels;  // like UpwardTables::kernels
  std::vector<std::vector<double>> base;          // like UpwardTables::base

  static UpwardGrad zeros_like(const UpwardTables& tables);
  UpwardGrad& operator+=(const UpwardGrad& o);
};

double unsp_cif(const UpwardTables& params, int layer, int k, const LayerEvents& below, double t);

// log q(z; x) with z[0] the observations. Accumulates into `grad` when given.
double unsp_loglik(const UpwardTables& params, const Layers& z, double window,
                   UpwardGrad* grad = nullptr);

// Upward draw of layers 1..L given the observations (z[0] = x).
Layers sample_unsp(const UpwardTables& params, const LayerEvents& x, double window,
                   RngStream& rng);

// ---------------------------------------------------------------------------
// USAP: upward self-attention posterior.

struct UsapDims {
  int d_k = 8;
  int d_v = 8;
  int d_model = 32;
  int d_hidden = 64;
  int heads = 4;
  friend bool operator==(const UsapDims&, const UsapDims&) = default;
};

// Encoder for layer boundary l: reads events of layer l-1, emits kernels for
// the processes of layer l. Weight matrices act on row vectors (x * W).
struct UsapEncoder {
  std::vector<ad::Matrix> w_query;  // per head, d_model x d_k
  std::vector<ad::Matrix> w_key;    // per head, d_model x d_k
  std::vector<ad::Matrix> w_value;  // per head, d_model x d_v
  ad::Matrix w_out;                 // heads*d_v x d_model
  ad::Matrix attn_norm_gain, attn_norm_bias;  // 1 x d_model
  ad::Matrix ffn_norm_gain, ffn_norm_bias;    // 1 x d_model
  ad::Matrix ffn_w1, ffn_b1;  // d_model x d_hidden, 1 x d_hidden
  ad::Matrix ffn_w2, ffn_b2;  // d_hidden x d_model, 1 x d_model
  std::vector<ad::Matrix> head_w;  // per target process, d_model x 3
  std::vector<ad::Matrix> head_b;  // per target process, 1 x 3
  ad::Matrix base_raw;             // 1 x K_l, rate = softplus(raw) + kRateFloor
  friend bool operator==(const UsapEncoder&, const UsapEncoder&) = default;
};

struct UsapParams {
  std::vector<int> counts;  // K_0..K_L
  UsapDims dims;
  bool fix_shape = false;   // kernel shape pinned to 1
  ad::Matrix embedding;     // n_pp x d_model, one row per process id
  std::vector<UsapEncoder> encoders;  // [l-1]

  int depth() const { return static_cast<int>(counts.size()) - 1; }
  // Global process id of (layer, index).
  int ppid(int layer, int index) const;

  // Visits every array in a fixed order.
  void for_each_array(const std::function<void(const std::string&, ad::Matrix&)>& f);
  void for_each_array(const std::function<void(const std::string&, const ad::Matrix&)>& f) const;
  std::size_t parameter_count() const;

  // Weights ~ U(+-1/sqrt(fan_in)), norms at (1, 0), head biases at the link
  // inverse of (1, 1, scale_hint), base rates at base_rate.
  static UsapParams init(std::vector<int> counts, UsapDims dims, bool fix_shape,
                         double scale_hint, double base_rate, RngStream& rng);
  UsapParams zeros_like() const;
  void axpy(double alpha, const UsapParams& other);

  friend bool operator==(const UsapParams&, const UsapParams&) = default;
};

// pe_k = cos(t / 10000^((k-1)/d)) for odd k and sin(t / 10000^(k/d)) for even k
// (1-based k).
std::vector<double> positional_encoding(double t, int d_model);

// Hidden vectors h for the events of every process of layer - 1 (one m_i x
// d_model matrix per process; empty processes yield 0 x d_model).
std::vector<ad::Matrix> usap_encode(const UsapParams& params, int layer, const LayerEvents& below);

// Per-event kernels emitted for the processes of one layer.
struct UsapLayerKernels {
  // [k][i][j]: kernel anchored at event j of lower process i, for target k.
  std::vector<std::vector<std::vector<WeibullKernel>>> kernels;
  std::vector<double> base;  // [k]
};
UsapLayerKernels usap_kernels(const UsapParams& params, int layer, const LayerEvents& below);

// base_k + sum_i phi_{i,j*}(t_{i,j*} - t), j* the event bounding t from above
// on the interval (t_{i,j*-1}, t_{i,j*}].
double usap_cif(const UsapLayerKernels& kernels, int k, const LayerEvents& below, double t);
double usap_cif(const UsapParams& params, int layer, int k, const LayerEvents& below, double t);
PiecewiseCif usap_intensity(const UsapLayerKernels& kernels, int k, const LayerEvents& below,
                            double begin, double end);

// Loglik of one target process given fixed per-event kernels; optional
// analytic gradients w.r.t. kernels ([i][j]) and the base rate.
double usap_process_loglik(const std::vector<std::vector<WeibullKernel>>& kernels, double base,
                           const LayerEvents& below, const Times& targets, double window,
                           std::vector<std::vector<WeibullGrad>>* d_kernels = nullptr,
                           double* d_base = nullptr);

// log q(z; x); when `grad` is given it must be zeros_like(params) and receives
// the gradient (accumulated).
double usap_loglik(const UsapParams& params, const Layers& z, double window,
                   UsapParams* grad = nullptr);

Layers sample_usap(const UsapParams& params, const LayerEvents& x, double window, RngStream& rng);

// Layer-1 kernels depend only on the observations; reuse them across draws.
class UsapSampler {
 public:
  UsapSampler(const UsapParams& params, const LayerEvents& x, double window);
  Layers draw(RngStream& rng) const;

 private:
  const UsapParams* params_;
  LayerEvents x_;
  double window_;
  UsapLayerKernels first_;
};

}  // namespace nspvi

#endif  // NSPVI_VARIATIONAL_HPP
