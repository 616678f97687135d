#include "nspvi/variational.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nspvi/error.hpp"
#include "nspvi/simulate.hpp"

namespace nspvi {

namespace {

std::string process_label(int layer, int k) {
  return "(" + std::to_string(layer) + "," + std::to_string(k + 1) + ")";
}

void check_depth(const std::vector<int>& counts, const Layers& z, const char* who) {
  if (z.size() != counts.size()) {
    throw ArgumentError(std::string(who) + ": realization depth does not match the parameters");
  }
  for (std::size_t l = 0; l < counts.size(); ++l) {
    if (static_cast<int>(z[l].size()) != counts[l]) {
      throw ArgumentError(std::string(who) + ": realization width mismatch at layer " +
                          std::to_string(l));
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// UNSP

UpwardGrad UpwardGrad::zeros_like(const UpwardTables& tables) {
  UpwardGrad g;
  for (const auto& t : tables.kernels) g.kernels.emplace_back(t.kernels.size());
  for (const auto& b : tables.base) g.base.emplace_back(b.size(), 0.0);
  return g;
}

UpwardGrad& UpwardGrad::operator+=(const UpwardGrad& o) {
  for (std::size_t l = 0; l < kernels.size(); ++l) {
    for (std::size_t i = 0; i < kernels[l].size(); ++i) kernels[l][i] += o.kernels[l][i];
    for (std::size_t k = 0; k < base[l].size(); ++k) base[l][k] += o.base[l][k];
  }
  return *this;
}

double unsp_cif(const UpwardTables& params, int layer, int k, const LayerEvents& below, double t) {
  return upward_cif(params, layer, k, below, t);
}

double unsp_loglik(const UpwardTables& params, const Layers& z, double window, UpwardGrad* grad) {
  check_depth(params.counts, z, "unsp_loglik");
  double total = 0.0;
  for (int l = 1; l <= params.depth(); ++l) {
    const auto& below = z[static_cast<std::size_t>(l - 1)];
    const auto& table = params.into(l);
    for (int k = 0; k < table.to; ++k) {
      const double base = params.base_rate(l, k);
      const auto& targets = z[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)];
      for (double t : targets) {
        const double lambda = upward_cif(params, l, k, below, t);
        if (!(lambda > 0.0)) {
          throw LogOfZeroError("unsp_loglik: zero intensity at t = " + std::to_string(t) +
                               " in process " + process_label(l, k));
        }
        total += std::log(lambda);
        if (grad == nullptr) continue;
        const double inv = 1.0 / lambda;
        grad->base[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(k)] += inv;
        for (int i = 0; i < table.from; ++i) {
          auto& gk = grad->kernels[static_cast<std::size_t>(l - 1)]
                                  [static_cast<std::size_t>(i * table.to + k)];
          const auto& ts = below[static_cast<std::size_t>(i)];
          for (auto it = std::upper_bound(ts.begin(), ts.end(), t); it != ts.end(); ++it) {
            WeibullGrad d = weibull_grads(table.at(i, k), *it - t).eval;
            d *= inv;
            gk += d;
          }
        }
      }
      // Each child at c contributes its kernel mass over (c - window, c), i.e. (0, c].
      total -= base * window;
      if (grad != nullptr) {
        grad->base[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(k)] -= window;
      }
      for (int i = 0; i < table.from; ++i) {
        const auto& kernel = table.at(i, k);
        for (double c : below[static_cast<std::size_t>(i)]) {
          total -= weibull_integral(kernel, std::max(c - window, 0.0), c);
          if (grad != nullptr) {
            grad->kernels[static_cast<std::size_t>(l - 1)]
                         [static_cast<std::size_t>(i * table.to + k)] -=
                weibull_integral_grad(kernel, std::max(c - window, 0.0), c);
          }
        }
      }
    }
  }
  return total;
}

Layers sample_unsp(const UpwardTables& params, const LayerEvents& x, double window,
                   RngStream& rng) {
  Layers z = empty_layers(params.counts);
  z[0] = x;
  for (int l = 1; l <= params.depth(); ++l) {
    for (int k = 0; k < params.counts[static_cast<std::size_t>(l)]; ++k) {
      z[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] = sample_poisson(
          upward_intensity(params, l, k, z[static_cast<std::size_t>(l - 1)], 0.0, window), rng);
    }
  }
  return z;
}

// ---------------------------------------------------------------------------
// USAP parameters

int UsapParams::ppid(int layer, int index) const {
  int id = 0;
  for (int w = 0; w < layer; ++w) id += counts[static_cast<std::size_t>(w)];
  return id + index;
}

namespace {

template <class P, class M, class F>
void visit_arrays(P& p, F&& f) {
  f(std::string("embedding"), static_cast<M&>(p.embedding));
  for (std::size_t e = 0; e < p.encoders.size(); ++e) {
    auto& enc = p.encoders[e];
    const std::string pre = "enc" + std::to_string(e + 1) + ".";
    for (std::size_t h = 0; h < enc.w_query.size(); ++h)
      f(pre + "w_query." + std::to_string(h), static_cast<M&>(enc.w_query[h]));
    for (std::size_t h = 0; h < enc.w_key.size(); ++h)
      f(pre + "w_key." + std::to_string(h), static_cast<M&>(enc.w_key[h]));
    for (std::size_t h = 0; h < enc.w_value.size(); ++h)
      f(pre + "w_value." + std::to_string(h), static_cast<M&>(enc.w_value[h]));
    f(pre + "w_out", static_cast<M&>(enc.w_out));
    f(pre + "attn_norm_gain", static_cast<M&>(enc.attn_norm_gain));
    f(pre + "attn_norm_bias", static_cast<M&>(enc.attn_norm_bias));
    f(pre + "ffn_norm_gain", static_cast<M&>(enc.ffn_norm_gain));
    f(pre + "ffn_norm_bias", static_cast<M&>(enc.ffn_norm_bias));
    f(pre + "ffn_w1", static_cast<M&>(enc.ffn_w1));
    f(pre + "ffn_b1", static_cast<M&>(enc.ffn_b1));
    f(pre + "ffn_w2", static_cast<M&>(enc.ffn_w2));
    f(pre + "ffn_b2", static_cast<M&>(enc.ffn_b2));
    for (std::size_t k = 0; k < enc.head_w.size(); ++k)
      f(pre + "head_w." + std::to_string(k), static_cast<M&>(enc.head_w[k]));
    for (std::size_t k = 0; k < enc.head_b.size(); ++k)
      f(pre + "head_b." + std::to_string(k), static_cast<M&>(enc.head_b[k]));
    f(pre + "base_raw", static_cast<M&>(enc.base_raw));
  }
}

ad::Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, RngStream& rng) {
  ad::Matrix m(rows, cols);
  for (auto& v : m.data) v = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

void UsapParams::for_each_array(
    const std::function<void(const std::string&, ad::Matrix&)>& f) {
  visit_arrays<UsapParams, ad::Matrix>(*this, f);
}

void UsapParams::for_each_array(
    const std::function<void(const std::string&, const ad::Matrix&)>& f) const {
  visit_arrays<const UsapParams, const ad::Matrix>(*this, f);
}

std::size_t UsapParams::parameter_count() const {
  std::size_t n = 0;
  for_each_array([&n](const std::string&, const ad::Matrix& m) { n += m.size(); });
  return n;
}

UsapParams UsapParams::init(std::vector<int> counts, UsapDims dims, bool fix_shape,
                            double scale_hint, double base_rate, RngStream& rng) {
  if (counts.size() < 2) throw ArgumentError("UsapParams: need at least one hidden layer");
  if (dims.d_model < 2 || dims.d_k < 1 || dims.d_v < 1 || dims.d_hidden < 1 || dims.heads < 1) {
    throw ArgumentError("UsapParams: invalid dimensions");
  }
  if (!(scale_hint > kKernelFloor) || !(base_rate > kRateFloor)) {
    throw ArgumentError("UsapParams: initial scale / rate must exceed their floors");
  }
  UsapParams p;
  p.counts = std::move(counts);
  p.dims = dims;
  p.fix_shape = fix_shape;
  const auto dm = static_cast<std::size_t>(dims.d_model);
  const auto dk = static_cast<std::size_t>(dims.d_k);
  const auto dv = static_cast<std::size_t>(dims.d_v);
  const auto dh = static_cast<std::size_t>(dims.d_hidden);
  const auto nh = static_cast<std::size_t>(dims.heads);
  int n_pp = 0;
  for (int c : p.counts) n_pp += c;
  p.embedding = uniform_matrix(static_cast<std::size_t>(n_pp), dm,
                               1.0 / std::sqrt(static_cast<double>(n_pp)), rng);
  const double in_model = 1.0 / std::sqrt(static_cast<double>(dm));
  const double head_bias[3] = {ad::softplus_inverse(1.0 - kKernelFloor),
                               ad::softplus_inverse(1.0 - kKernelFloor),
                               ad::softplus_inverse(scale_hint - kKernelFloor)};
  for (int l = 1; l <= p.depth(); ++l) {
    UsapEncoder enc;
    for (std::size_t h = 0; h < nh; ++h) {
      enc.w_query.push_back(uniform_matrix(dm, dk, in_model, rng));
      enc.w_key.push_back(uniform_matrix(dm, dk, in_model, rng));
      enc.w_value.push_back(uniform_matrix(dm, dv, in_model, rng));
    }
    enc.w_out = uniform_matrix(nh * dv, dm, 1.0 / std::sqrt(static_cast<double>(nh * dv)), rng);
    enc.attn_norm_gain = ad::Matrix(1, dm, 1.0);
    enc.attn_norm_bias = ad::Matrix(1, dm, 0.0);
    enc.ffn_norm_gain = ad::Matrix(1, dm, 1.0);
    enc.ffn_norm_bias = ad::Matrix(1, dm, 0.0);
    enc.ffn_w1 = uniform_matrix(dm, dh, in_model, rng);
    enc.ffn_b1 = uniform_matrix(1, dh, in_model, rng);
    enc.ffn_w2 = uniform_matrix(dh, dm, 1.0 / std::sqrt(static_cast<double>(dh)), rng);
    enc.ffn_b2 = uniform_matrix(1, dm, 1.0 / std::sqrt(static_cast<double>(dh)), rng);
    const int targets = p.counts[static_cast<std::size_t>(l)];
    for (int k = 0; k < targets; ++k) {
      enc.head_w.push_back(uniform_matrix(dm, 3, in_model, rng));
      enc.head_b.push_back(ad::Matrix(1, 3, std::vector<double>(head_bias, head_bias + 3)));
    }
    enc.base_raw = ad::Matrix(1, static_cast<std::size_t>(targets),
                              ad::softplus_inverse(base_rate - kRateFloor));
    p.encoders.push_back(std::move(enc));
  }
  return p;
}

UsapParams UsapParams::zeros_like() const {
  UsapParams z = *this;
  z.for_each_array([](const std::string&, ad::Matrix& m) {
    std::fill(m.data.begin(), m.data.end(), 0.0);
  });
  return z;
}

void UsapParams::axpy(double alpha, const UsapParams& other) {
  std::vector<const ad::Matrix*> src;
  other.for_each_array([&src](const std::string&, const ad::Matrix& m) { src.push_back(&m); });
  std::size_t idx = 0;
  for_each_array([&](const std::string& name, ad::Matrix& m) {
    const ad::Matrix& o = *src.at(idx++);
    if (!m.same_shape(o)) throw ArgumentError("UsapParams::axpy: shape mismatch at " + name);
    for (std::size_t i = 0; i < m.size(); ++i) m.data[i] += alpha * o.data[i];
  });
}

std::vector<double> positional_encoding(double t, int d_model) {
  if (d_model < 2) throw ArgumentError("positional_encoding: d_model must be >= 2");
  std::vector<double> pe(static_cast<std::size_t>(d_model));
  const double d = static_cast<double>(d_model);
  for (int k = 1; k <= d_model; ++k) {
    if (k % 2 == 1) {
      pe[static_cast<std::size_t>(k - 1)] = std::cos(t / std::pow(10000.0, (k - 1) / d));
    } else {
      pe[static_cast<std::size_t>(k - 1)] = std::sin(t / std::pow(10000.0, k / d));
    }
  }
  return pe;
}

// ---------------------------------------------------------------------------
// USAP forward pass on a tape

namespace {

struct EncoderVars {
  std::vector<ad::Var> w_query, w_key, w_value;
  ad::Var w_out, attn_gain, attn_bias, ffn_gain, ffn_bias, w1, b1, w2, b2;
  std::vector<ad::Var> head_w, head_b;
  ad::Var base_raw;
};

struct BoundParams {
  std::vector<ad::Var> flat;  // for_each_array order
  ad::Var embedding;
  std::vector<EncoderVars> encoders;
};

BoundParams bind(ad::Tape& tape, const UsapParams& p, bool trainable) {
  BoundParams b;
  p.for_each_array([&](const std::string&, const ad::Matrix& m) {
    b.flat.push_back(trainable ? tape.variable(m) : tape.constant(m));
  });
  std::size_t at = 0;
  auto next = [&]() { return b.flat.at(at++); };
  b.embedding = next();
  for (const auto& enc : p.encoders) {
    EncoderVars v;
    for (std::size_t h = 0; h < enc.w_query.size(); ++h) v.w_query.push_back(next());
    for (std::size_t h = 0; h < enc.w_key.size(); ++h) v.w_key.push_back(next());
    for (std::size_t h = 0; h < enc.w_value.size(); ++h) v.w_value.push_back(next());
    v.w_out = next();
    v.attn_gain = next();
    v.attn_bias = next();
    v.ffn_gain = next();
    v.ffn_bias = next();
    v.w1 = next();
    v.b1 = next();
    v.w2 = next();
    v.b2 = next();
    for (std::size_t k = 0; k < enc.head_w.size(); ++k) v.head_w.push_back(next());
    for (std::size_t k = 0; k < enc.head_b.size(); ++k) v.head_b.push_back(next());
    v.base_raw = next();
    b.encoders.push_back(std::move(v));
  }
  return b;
}

// Hidden vectors (m x d_model) of one nonempty lower process.
ad::Var encode_process(ad::Tape& tape, const BoundParams& b, const EncoderVars& ev,
                       int d_model, int ppid, const Times& times) {
  ad::Matrix pe(times.size(), static_cast<std::size_t>(d_model));
  for (std::size_t j = 0; j < times.size(); ++j) {
    const auto row = positional_encoding(times[j], d_model);
    std::copy(row.begin(), row.end(), pe.data.begin() + static_cast<std::ptrdiff_t>(j * pe.cols));
  }
  const ad::Var x = tape.add_row(tape.constant(std::move(pe)),
                                 tape.select_row(b.embedding, static_cast<std::size_t>(ppid)));
  const ad::Var xq = tape.layer_norm(x, ev.attn_gain, ev.attn_bias);
  std::vector<ad::Var> heads;
  for (std::size_t h = 0; h < ev.w_query.size(); ++h) {
    heads.push_back(tape.attention(tape.matmul(xq, ev.w_query[h]), tape.matmul(x, ev.w_key[h]),
                                   tape.matmul(x, ev.w_value[h])));
  }
  const ad::Var attn = tape.matmul(tape.concat_cols(heads), ev.w_out);
  const ad::Var input = tape.add(attn, x);
  const ad::Var hidden =
      tape.gelu(tape.add_row(tape.matmul(tape.layer_norm(input, ev.ffn_gain, ev.ffn_bias), ev.w1),
                             ev.b1));
  return tape.add(tape.add_row(tape.matmul(hidden, ev.w2), ev.b2), input);
}

// Linked kernel parameters (m x 3: weight, shape, scale) for target k.
ad::Var head_params(ad::Tape& tape, const EncoderVars& ev, ad::Var h, int k) {
  const ad::Var raw =
      tape.add_row(tape.matmul(h, ev.head_w[static_cast<std::size_t>(k)]),
                   ev.head_b[static_cast<std::size_t>(k)]);
  return tape.add_scalar(tape.softplus(raw), kKernelFloor);
}

WeibullKernel kernel_row(const ad::Matrix& theta, std::size_t j, bool fix_shape) {
  return {theta(j, 0), fix_shape ? 1.0 : theta(j, 1), theta(j, 2)};
}

// Everything the forward pass of one boundary produces.
struct BoundaryOut {
  std::vector<ad::Var> hidden;                 // [i], valid where below[i] nonempty
  std::vector<std::vector<ad::Var>> theta;     // [k][i]
  ad::Var base;                                // 1 x K_l
};

BoundaryOut forward_boundary(ad::Tape& tape, const BoundParams& b, const UsapParams& p,
                             int layer, const LayerEvents& below) {
  const auto& ev = b.encoders.at(static_cast<std::size_t>(layer - 1));
  const int lower = p.counts[static_cast<std::size_t>(layer - 1)];
  const int upper = p.counts[static_cast<std::size_t>(layer)];
  if (static_cast<int>(below.size()) != lower) {
    throw ArgumentError("usap: lower layer width mismatch at layer " + std::to_string(layer));
  }
  BoundaryOut out;
  out.hidden.resize(static_cast<std::size_t>(lower));
  out.theta.assign(static_cast<std::size_t>(upper),
                   std::vector<ad::Var>(static_cast<std::size_t>(lower)));
  for (int i = 0; i < lower; ++i) {
    const auto& ts = below[static_cast<std::size_t>(i)];
    if (ts.empty()) continue;
    out.hidden[static_cast<std::size_t>(i)] =
        encode_process(tape, b, ev, p.dims.d_model, p.ppid(layer - 1, i), ts);
    for (int k = 0; k < upper; ++k) {
      out.theta[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
          head_params(tape, ev, out.hidden[static_cast<std::size_t>(i)], k);
    }
  }
  out.base = tape.add_scalar(tape.softplus(ev.base_raw), kRateFloor);
  return out;
}

// Index of the kernel bounding t from above: first event >= t.
std::size_t bounding_index(const Times& ts, double t) {
  return static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), t) - ts.begin());
}

}  // namespace

std::vector<ad::Matrix> usap_encode(const UsapParams& params, int layer, const LayerEvents& below) {
  if (layer < 1 || layer > params.depth()) throw ArgumentError("usap_encode: layer out of range");
  ad::Tape tape;
  const BoundParams b = bind(tape, params, false);
  const BoundaryOut f = forward_boundary(tape, b, params, layer, below);
  std::vector<ad::Matrix> out;
  for (std::size_t i = 0; i < below.size(); ++i) {
    if (below[i].empty()) {
      out.emplace_back(0, static_cast<std::size_t>(params.dims.d_model));
    } else {
      out.push_back(tape.value(f.hidden[i]));
    }
  }
  return out;
}

UsapLayerKernels usap_kernels(const UsapParams& params, int layer, const LayerEvents& below) {
  if (layer < 1 || layer > params.depth()) throw ArgumentError("usap_kernels: layer out of range");
  ad::Tape tape;
  const BoundParams b = bind(tape, params, false);
  const BoundaryOut f = forward_boundary(tape, b, params, layer, below);
  UsapLayerKernels out;
  const auto& base = tape.value(f.base);
  out.base = base.data;
  out.kernels.resize(f.theta.size());
  for (std::size_t k = 0; k < f.theta.size(); ++k) {
    out.kernels[k].resize(below.size());
    for (std::size_t i = 0; i < below.size(); ++i) {
      if (below[i].empty()) continue;
      const auto& theta = tape.value(f.theta[k][i]);
      for (std::size_t j = 0; j < below[i].size(); ++j) {
        out.kernels[k][i].push_back(kernel_row(theta, j, params.fix_shape));
      }
    }
  }
  return out;
}

double usap_cif(const UsapLayerKernels& kernels, int k, const LayerEvents& below, double t) {
  const auto& per = kernels.kernels.at(static_cast<std::size_t>(k));
  double v = kernels.base.at(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < below.size(); ++i) {
    const std::size_t j = bounding_index(below[i], t);
    if (j < below[i].size() && below[i][j] > t) {
      v += weibull_eval(per[i][j], below[i][j] - t);
    }
  }
  return v;
}

double usap_cif(const UsapParams& params, int layer, int k, const LayerEvents& below, double t) {
  return usap_cif(usap_kernels(params, layer, below), k, below, t);
}

PiecewiseCif usap_intensity(const UsapLayerKernels& kernels, int k, const LayerEvents& below,
                            double begin, double end) {
  std::vector<double> cuts{begin, end};
  for (const auto& ts : below) {
    for (double t : ts) {
      if (t > begin && t < end) cuts.push_back(t);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const auto& per = kernels.kernels.at(static_cast<std::size_t>(k));
  const double base = kernels.base.at(static_cast<std::size_t>(k));
  std::vector<CifPiece> pieces;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    CifPiece piece{cuts[c], cuts[c + 1], base, {}};
    for (std::size_t i = 0; i < below.size(); ++i) {
      const std::size_t j = bounding_index(below[i], piece.end);
      if (j < below[i].size()) {
        piece.terms.push_back({per[i][j], below[i][j], KernelDirection::backward});
      }
    }
    pieces.push_back(std::move(piece));
  }
  return PiecewiseCif(std::move(pieces));
}

double usap_process_loglik(const std::vector<std::vector<WeibullKernel>>& kernels, double base,
                           const LayerEvents& below, const Times& targets, double window,
                           std::vector<std::vector<WeibullGrad>>* d_kernels, double* d_base) {
  double total = 0.0;
  for (double t : targets) {
    double lambda = base;
    for (std::size_t i = 0; i < below.size(); ++i) {
      const std::size_t j = bounding_index(below[i], t);
      if (j < below[i].size() && below[i][j] > t) {
        lambda += weibull_eval(kernels[i][j], below[i][j] - t);
      }
    }
    if (!(lambda > 0.0)) {
      throw LogOfZeroError("usap loglik: zero intensity at t = " + std::to_string(t));
    }
    total += std::log(lambda);
    if (d_base != nullptr) *d_base += 1.0 / lambda;
    if (d_kernels != nullptr) {
      for (std::size_t i = 0; i < below.size(); ++i) {
        const std::size_t j = bounding_index(below[i], t);
        if (j < below[i].size() && below[i][j] > t) {
          WeibullGrad d = weibull_grads(kernels[i][j], below[i][j] - t).eval;
          d *= 1.0 / lambda;
          (*d_kernels)[i][j] += d;
        }
      }
    }
  }
  total -= base * window;
  if (d_base != nullptr) *d_base -= window;
  for (std::size_t i = 0; i < below.size(); ++i) {
    double prev = 0.0;
    for (std::size_t j = 0; j < below[i].size(); ++j) {
      const double span = below[i][j] - prev;
      prev = below[i][j];
      total -= weibull_integral(kernels[i][j], 0.0, span);
      if (d_kernels != nullptr) {
        (*d_kernels)[i][j] -= weibull_integral_grad(kernels[i][j], 0.0, span);
      }
    }
  }
  return total;
}

double usap_loglik(const UsapParams& params, const Layers& z, double window, UsapParams* grad) {
  check_depth(params.counts, z, "usap_loglik");
  ad::Tape tape;
  const BoundParams b = bind(tape, params, grad != nullptr);
  std::vector<ad::Var> terms;
  for (int l = 1; l <= params.depth(); ++l) {
    const auto& below = z[static_cast<std::size_t>(l - 1)];
    const BoundaryOut f = forward_boundary(tape, b, params, l, below);
    for (int k = 0; k < params.counts[static_cast<std::size_t>(l)]; ++k) {
      const auto& targets = z[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)];
      // Inputs: theta of every nonempty lower process, then the base row.
      std::vector<ad::Var> inputs;
      std::vector<std::size_t> owners;
      std::vector<std::vector<WeibullKernel>> kernels(below.size());
      for (std::size_t i = 0; i < below.size(); ++i) {
        if (below[i].empty()) continue;
        const ad::Var th = f.theta[static_cast<std::size_t>(k)][i];
        inputs.push_back(th);
        owners.push_back(i);
        const auto& theta = tape.value(th);
        for (std::size_t j = 0; j < below[i].size(); ++j) {
          kernels[i].push_back(kernel_row(theta, j, params.fix_shape));
        }
      }
      inputs.push_back(f.base);
      const double base = tape.value(f.base).data[static_cast<std::size_t>(k)];
      double value = 0.0;
      try {
        value = usap_process_loglik(kernels, base, below, targets, window);
      } catch (const LogOfZeroError& e) {
        throw LogOfZeroError(std::string(e.what()) + " in process " + process_label(l, k));
      }
      const bool fix = params.fix_shape;
      terms.push_back(tape.custom(
          inputs, ad::Matrix::scalar(value),
          [kernels, base, &below, &targets, window, owners, k, fix](
              const ad::Matrix& g, std::span<ad::Matrix* const> adj) {
            std::vector<std::vector<WeibullGrad>> dk(below.size());
            for (std::size_t i = 0; i < below.size(); ++i) dk[i].resize(below[i].size());
            double db = 0.0;
            usap_process_loglik(kernels, base, below, targets, window, &dk, &db);
            const double s = g.data[0];
            for (std::size_t n = 0; n < owners.size(); ++n) {
              ad::Matrix& a = *adj[n];
              const auto& rows = dk[owners[n]];
              for (std::size_t j = 0; j < rows.size(); ++j) {
                a(j, 0) += s * rows[j].weight;
                if (!fix) a(j, 1) += s * rows[j].shape;
                a(j, 2) += s * rows[j].scale;
              }
            }
            adj[owners.size()]->data[static_cast<std::size_t>(k)] += s * db;
          },
          "usap_process_loglik"));
    }
  }
  ad::Var root = terms.front();
  for (std::size_t n = 1; n < terms.size(); ++n) root = tape.add(root, terms[n]);
  const double total = tape.value(root).data[0];
  if (grad != nullptr) {
    tape.backward(root);
    std::size_t idx = 0;
    grad->for_each_array([&](const std::string& name, ad::Matrix& m) {
      const ad::Matrix& g = tape.grad(b.flat.at(idx++));
      if (!m.same_shape(g)) throw ArgumentError("usap_loglik: gradient shape mismatch at " + name);
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (!std::isfinite(g.data[i])) {
          throw NumericError("usap_loglik: non-finite gradient in " + name);
        }
        m.data[i] += g.data[i];
      }
    });
  }
  return total;
}

namespace {

void sample_layer(const UsapLayerKernels& kernels, const LayerEvents& below, double window,
                  LayerEvents& out, RngStream& rng) {
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = sample_poisson(usap_intensity(kernels, static_cast<int>(k), below, 0.0, window), rng);
  }
}

}  // namespace

Layers sample_usap(const UsapParams& params, const LayerEvents& x, double window, RngStream& rng) {
  return UsapSampler(params, x, window).draw(rng);
}

UsapSampler::UsapSampler(const UsapParams& params, const LayerEvents& x, double window)
    : params_(&params), x_(x), window_(window), first_(usap_kernels(params, 1, x)) {}

Layers UsapSampler::draw(RngStream& rng) const {
  Layers z = empty_layers(params_->counts);
  z[0] = x_;
  sample_layer(first_, z[0], window_, z[1], rng);
  for (int l = 2; l <= params_->depth(); ++l) {
    sample_layer(usap_kernels(*params_, l, z[static_cast<std::size_t>(l - 1)]),
                 z[static_cast<std::size_t>(l - 1)], window_, z[static_cast<std::size_t>(l)], rng);
  }
  return z;
}

}  // namespace nspvi
