#include "nspvi/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "nspvi/error.hpp"

namespace nspvi {

void EventSeq::validate(int num_types) const {
  if (!(window > 0.0) || !std::isfinite(window)) {
    throw ArgumentError("EventSeq: window must be finite and positive");
  }
  double prev = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    std::ostringstream where;
    where << "event " << i << ": ";
    if (!std::isfinite(e.t)) {
      throw ArgumentError(where.str() + "non-finite time");
    }
    if (e.t <= 0.0 || e.t > window) {
      throw ArgumentError(where.str() + "time outside (0, T]");
    }
    if (e.t < prev) {
      throw ArgumentError(where.str() + "events not sorted by time");
    }
    if (e.type < 1 || e.type > num_types) {
      throw ArgumentError(where.str() + "type outside [1, " + std::to_string(num_types) + "]");
    }
    prev = e.t;
  }
}

LayerEvents EventSeq::by_type(int num_types) const {
  LayerEvents out(static_cast<std::size_t>(num_types));
  for (const auto& e : events) {
    if (e.type < 1 || e.type > num_types) {
      throw ArgumentError("EventSeq::by_type: type out of range");
    }
    out[static_cast<std::size_t>(e.type - 1)].push_back(e.t);
  }
  return out;
}

EventSeq EventSeq::prefix(std::size_t n) const {
  if (n == 0 || n > events.size()) {
    throw ArgumentError("EventSeq::prefix: n must be in [1, size]");
  }
  EventSeq p;
  p.events.assign(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(n));
  p.window = events[n - 1].t;
  return p;
}

KernelTable::KernelTable(int from_count, int to_count, WeibullKernel fill)
    : from(from_count), to(to_count),
      kernels(static_cast<std::size_t>(from_count * to_count), fill) {}

UpwardTables::UpwardTables(std::vector<int> c, WeibullKernel kernel, double base_rate)
    : counts(std::move(c)) {
  for (int l = 1; l < static_cast<int>(counts.size()); ++l) {
    kernels.emplace_back(counts[static_cast<std::size_t>(l - 1)],
                         counts[static_cast<std::size_t>(l)], kernel);
    base.emplace_back(static_cast<std::size_t>(counts[static_cast<std::size_t>(l)]), base_rate);
  }
}

ModelParams::ModelParams(std::vector<int> c, WeibullKernel down_kernel, double top_rate,
                         WeibullKernel vpp_kernel, double vpp_base)
    : counts(c), vpp(c, vpp_kernel, vpp_base) {
  if (counts.size() < 2) {
    throw ArgumentError("ModelParams: need at least one hidden layer");
  }
  for (int l = 0; l + 1 < static_cast<int>(counts.size()); ++l) {
    down.emplace_back(counts[static_cast<std::size_t>(l + 1)], counts[static_cast<std::size_t>(l)],
                      down_kernel);
  }
  top_rates.assign(static_cast<std::size_t>(counts.back()), top_rate);
}

void ModelParams::validate() const {
  if (counts.size() < 2) {
    throw ArgumentError("ModelParams: need at least one hidden layer");
  }
  for (int c : counts) {
    if (c < 1) {
      throw ArgumentError("ModelParams: every layer needs at least one process");
    }
  }
  if (static_cast<int>(down.size()) != depth() || vpp.depth() != depth() ||
      top_rates.size() != static_cast<std::size_t>(counts.back())) {
    throw ArgumentError("ModelParams: table shapes do not match layer counts");
  }
  auto check_kernel = [](const WeibullKernel& k) {
    if (!(k.weight >= 0.0) || !(k.shape > 0.0) || !(k.scale > 0.0)) {
      throw ArgumentError("ModelParams: kernel parameters must be positive");
    }
  };
  for (const auto& t : down) {
    for (const auto& k : t.kernels) check_kernel(k);
  }
  for (const auto& t : vpp.kernels) {
    for (const auto& k : t.kernels) check_kernel(k);
  }
  for (double r : top_rates) {
    if (!(r >= 0.0)) throw ArgumentError("ModelParams: negative top rate");
  }
}

Layers empty_layers(const std::vector<int>& counts) {
  Layers z;
  for (int c : counts) {
    z.emplace_back(static_cast<std::size_t>(c));
  }
  return z;
}

std::size_t event_count(const LayerEvents& layer) {
  std::size_t n = 0;
  for (const auto& p : layer) n += p.size();
  return n;
}

double rpp_cif(const ModelParams& model, int layer, int k, const LayerEvents& parents, double t) {
  if (layer == model.depth()) {
    return model.top_rates[static_cast<std::size_t>(k)];
  }
  const auto& table = model.from_above(layer);
  double v = layer == 0 ? model.obs_background : 0.0;
  for (int i = 0; i < table.from; ++i) {
    const auto& kernel = table.at(i, k);
    for (double tp : parents[static_cast<std::size_t>(i)]) {
      if (tp >= t) break;
      v += weibull_eval(kernel, t - tp);
    }
  }
  return v;
}

double upward_cif(const UpwardTables& tables, int layer, int k, const LayerEvents& children,
                  double t) {
  const auto& table = tables.into(layer);
  double v = tables.base_rate(layer, k);
  for (int i = 0; i < table.from; ++i) {
    const auto& kernel = table.at(i, k);
    const auto& ts = children[static_cast<std::size_t>(i)];
    for (auto it = std::upper_bound(ts.begin(), ts.end(), t); it != ts.end(); ++it) {
      v += weibull_eval(kernel, *it - t);
    }
  }
  return v;
}

double vpp_cif(const ModelParams& model, int layer, int k, const LayerEvents& children, double t) {
  return upward_cif(model.vpp, layer, k, children, t);
}

PiecewiseCif rpp_intensity(const ModelParams& model, int layer, int k,
                           const LayerEvents& parents, double begin, double end) {
  if (layer == model.depth()) {
    return PiecewiseCif(begin, end, model.top_rates[static_cast<std::size_t>(k)]);
  }
  PiecewiseCif cif(begin, end, layer == 0 ? model.obs_background : 0.0);
  const auto& table = model.from_above(layer);
  for (int i = 0; i < table.from; ++i) {
    const auto& kernel = table.at(i, k);
    if (kernel.weight == 0.0) continue;
    for (double tp : parents[static_cast<std::size_t>(i)]) {
      if (tp >= end) break;
      cif.add_term({kernel, tp, KernelDirection::forward});
    }
  }
  return cif;
}

PiecewiseCif upward_intensity(const UpwardTables& tables, int layer, int k,
                              const LayerEvents& children, double begin, double end) {
  PiecewiseCif cif(begin, end, tables.base_rate(layer, k));
  const auto& table = tables.into(layer);
  for (int i = 0; i < table.from; ++i) {
    const auto& kernel = table.at(i, k);
    if (kernel.weight == 0.0) continue;
    for (double tc : children[static_cast<std::size_t>(i)]) {
      if (tc > begin) {
        cif.add_term({kernel, tc, KernelDirection::backward});
      }
    }
  }
  return cif;
}

namespace {

std::string process_label(int layer, int k) {
  return "(" + std::to_string(layer) + "," + std::to_string(k + 1) + ")";
}

void check_shape(const ModelParams& model, const Layers& z) {
  if (static_cast<int>(z.size()) != model.depth() + 1) {
    throw ArgumentError("realization depth does not match the model");
  }
  for (int l = 0; l <= model.depth(); ++l) {
    if (static_cast<int>(z[static_cast<std::size_t>(l)].size()) != model.count(l)) {
      throw ArgumentError("realization width does not match the model at layer " +
                          std::to_string(l));
    }
  }
}

}  // namespace

std::vector<double> joint_loglik_terms(const ModelParams& model, const Layers& z, double window) {
  check_shape(model, z);
  const int depth = model.depth();
  std::vector<double> terms(static_cast<std::size_t>(depth + 1), 0.0);
  static const LayerEvents kNone;
  for (int l = 0; l <= depth; ++l) {
    const auto& parents = l == depth ? kNone : z[static_cast<std::size_t>(l + 1)];
    for (int k = 0; k < model.count(l); ++k) {
      const auto cif = rpp_intensity(model, l, k, parents, 0.0, window);
      terms[static_cast<std::size_t>(l)] +=
          poisson_loglik(z[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)], cif,
                         process_label(l, k));
    }
  }
  return terms;
}

double joint_loglik(const ModelParams& model, const Layers& z, double window) {
  double total = 0.0;
  for (double v : joint_loglik_terms(model, z, window)) total += v;
  return total;
}

double joint_loglik(const ModelParams& model, const EventSeq& x, const Layers& z) {
  Layers full = z;
  full[0] = x.by_type(model.count(0));
  return joint_loglik(model, full, x.window);
}

double upward_loglik(const UpwardTables& tables, const Layers& lower, const Layers& upper,
                     double window) {
  double total = 0.0;
  for (int l = 1; l <= tables.depth(); ++l) {
    const auto& below = lower[static_cast<std::size_t>(l - 1)];
    for (int k = 0; k < tables.counts[static_cast<std::size_t>(l)]; ++k) {
      const auto cif = upward_intensity(tables, l, k, below, 0.0, window);
      total += poisson_loglik(upper[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)], cif,
                              process_label(l, k));
    }
  }
  return total;
}

DownGrad joint_loglik_grad(const ModelParams& model, const Layers& z, double window) {
  check_shape(model, z);
  DownGrad g;
  for (int l = 0; l < model.depth(); ++l) {
    const auto& table = model.from_above(l);
    const auto& parents = z[static_cast<std::size_t>(l + 1)];
    auto& out = g.kernels.emplace_back(table.kernels.size());
    for (int k = 0; k < table.to; ++k) {
      for (double te : z[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)]) {
        const double lambda = rpp_cif(model, l, k, parents, te);
        if (!(lambda > 0.0)) {
          throw LogOfZeroError("joint_loglik_grad: zero intensity at an event of process " +
                               process_label(l, k));
        }
        for (int i = 0; i < table.from; ++i) {
          auto& gk = out[static_cast<std::size_t>(i * table.to + k)];
          for (double tp : parents[static_cast<std::size_t>(i)]) {
            if (tp >= te) break;
            WeibullGrad d = weibull_grads(table.at(i, k), te - tp).eval;
            d *= 1.0 / lambda;
            gk += d;
          }
        }
      }
      for (int i = 0; i < table.from; ++i) {
        auto& gk = out[static_cast<std::size_t>(i * table.to + k)];
        for (double tp : parents[static_cast<std::size_t>(i)]) {
          if (tp >= window) break;
          gk -= weibull_integral_grad(table.at(i, k), 0.0, window - tp);
        }
      }
    }
  }
  return g;
}

}  // namespace nspvi
