#include "nspvi/mcmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "nspvi/error.hpp"
#include "nspvi/simulate.hpp"

namespace nspvi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::atomic<std::uint64_t> g_cycles{0};

void insert_sorted(Times& ts, double t) { ts.insert(std::upper_bound(ts.begin(), ts.end(), t), t); }

void erase_one(Times& ts, double t) {
  auto it = std::lower_bound(ts.begin(), ts.end(), t);
  if (it == ts.end() || *it != t) throw ArgumentError("chain state: event not found");
  ts.erase(it);
}

Times& at(Layers& z, int l, int k) {
  return z[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)];
}
const Times& at(const Layers& z, int l, int k) {
  return z[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)];
}

// Target change when a virtual event at t in (l, k) becomes real. The event
// must currently be absent from state.real.
double gain(const ChainState& s, const ModelParams& m, int l, int k, double t) {
  const int depth = m.depth();
  const double up = l == depth ? m.top_rates[static_cast<std::size_t>(k)]
                               : rpp_cif(m, l, k, s.real[static_cast<std::size_t>(l + 1)], t);
  if (!(up > 0.0)) return -kInf;
  double d = std::log(up) - std::log(vpp_cif(m, l, k, s.real[static_cast<std::size_t>(l - 1)], t));

  // Real children below gain a parent.
  const auto& down = m.from_above(l - 1);
  for (int c = 0; c < m.count(l - 1); ++c) {
    const auto& kernel = down.at(k, c);
    if (kernel.weight == 0.0) continue;
    const auto& children = at(s.real, l - 1, c);
    for (auto it = std::upper_bound(children.begin(), children.end(), t); it != children.end();
         ++it) {
      const double phi = weibull_eval(kernel, *it - t);
      const double lam = rpp_cif(m, l - 1, c, s.real[static_cast<std::size_t>(l)], *it);
      if (lam > 0.0) {
        d += std::log1p(phi / lam);
      } else if (phi > 0.0) {
        return kInf;
      }
    }
    d -= weibull_integral(kernel, 0.0, s.window - t);
  }

  // Virtual events above gain a child.
  if (l < depth) {
    const auto& up_table = m.vpp.into(l + 1);
    for (int p = 0; p < m.count(l + 1); ++p) {
      const auto& kernel = up_table.at(k, p);
      if (kernel.weight == 0.0) continue;
      for (double tv : at(s.virt, l + 1, p)) {
        if (tv >= t) break;
        const double phi = weibull_eval(kernel, t - tv);
        const double lam = upward_cif(m.vpp, l + 1, p, s.real[static_cast<std::size_t>(l)], tv);
        if (lam > 0.0) {
          d += std::log1p(phi / lam);
        } else if (phi > 0.0) {
          return kInf;
        }
      }
      d -= weibull_integral(kernel, 0.0, t);
    }
  }
  return d;
}

bool accept(ChainState& s, double delta, const CycleOptions& options) {
  if (options.reject_all) return false;
  return std::log(s.rng.uniform()) < delta;
}

void commit(ChainState& s, const ModelParams& m, double delta) {
  if (std::isfinite(delta) && std::isfinite(s.target)) {
    s.target += delta;
  } else {
    s.target = target_decomposition(s, m).total();
  }
}

void check_process(const ChainState& s, int layer, int k) {
  if (layer < 1 || layer > s.depth() || k < 0 ||
      k >= static_cast<int>(s.real[static_cast<std::size_t>(layer)].size())) {
    throw ArgumentError("mcmc: hidden process (" + std::to_string(layer) + "," +
                        std::to_string(k + 1) + ") out of range");
  }
}

}  // namespace

ChainState::ChainState(const ModelParams& model, const EventSeq& x, RngStream stream)
    : ChainState(model, x, empty_layers(model.counts), std::move(stream)) {}

ChainState::ChainState(const ModelParams& model, const EventSeq& x, const Layers& hidden,
                       RngStream stream)
    : real(empty_layers(model.counts)),
      virt(empty_layers(model.counts)),
      window(x.window),
      rng(std::move(stream)) {
  x.validate(model.count(0));
  if (hidden.size() != model.counts.size()) {
    throw ArgumentError("ChainState: initial realization has the wrong depth");
  }
  real[0] = x.by_type(model.count(0));
  for (int l = 1; l <= model.depth(); ++l) {
    if (static_cast<int>(hidden[static_cast<std::size_t>(l)].size()) != model.count(l)) {
      throw ArgumentError("ChainState: initial realization has the wrong width");
    }
    real[static_cast<std::size_t>(l)] = hidden[static_cast<std::size_t>(l)];
    for (auto& ts : real[static_cast<std::size_t>(l)]) std::sort(ts.begin(), ts.end());
  }
  target = target_decomposition(*this, model).total();
}

std::size_t ChainState::event_count(int layer, int k) const {
  return at(real, layer, k).size() + at(virt, layer, k).size();
}

TargetDecomposition target_decomposition(const ChainState& state, const ModelParams& model) {
  TargetDecomposition d;
  try {
    d.joint = joint_loglik(model, state.real, state.window);
  } catch (const LogOfZeroError&) {
    d.joint = -kInf;
  }
  d.auxiliary = upward_loglik(model.vpp, state.real, state.virt, state.window);
  return d;
}

void resample_virtual(ChainState& state, const ModelParams& model, int layer, int k) {
  check_process(state, layer, k);
  const auto cif = upward_intensity(model.vpp, layer, k,
                                    state.real[static_cast<std::size_t>(layer - 1)], 0.0,
                                    state.window);
  Times& v = at(state.virt, layer, k);
  const double before = poisson_loglik(v, cif);
  v = sample_poisson(cif, state.rng);
  const double after = poisson_loglik(v, cif);
  commit(state, model, after - before);
}

double flip_delta(const ChainState& state, const ModelParams& model, int layer, int k,
                  bool currently_real, std::size_t index) {
  check_process(state, layer, k);
  if (!currently_real) {
    return gain(state, model, layer, k, at(state.virt, layer, k).at(index));
  }
  ChainState moved = state;
  const double t = at(moved.real, layer, k).at(index);
  erase_one(at(moved.real, layer, k), t);
  insert_sorted(at(moved.virt, layer, k), t);
  return -gain(moved, model, layer, k, t);
}

bool flip_move(ChainState& state, const ModelParams& model, int layer, int k,
               const CycleOptions& options) {
  check_process(state, layer, k);
  Times& r = at(state.real, layer, k);
  Times& v = at(state.virt, layer, k);
  const std::size_t n = r.size() + v.size();
  if (n == 0) return false;
  const std::size_t u = static_cast<std::size_t>(state.rng.below(n));
  if (u < r.size()) {
    const double t = r[u];
    erase_one(r, t);
    insert_sorted(v, t);
    const double delta = -gain(state, model, layer, k, t);
    if (accept(state, delta, options)) {
      commit(state, model, delta);
      return true;
    }
    erase_one(v, t);
    insert_sorted(r, t);
    return false;
  }
  const double t = v[u - r.size()];
  const double delta = gain(state, model, layer, k, t);
  if (accept(state, delta, options)) {
    erase_one(v, t);
    insert_sorted(r, t);
    commit(state, model, delta);
    return true;
  }
  return false;
}

bool swap_move(ChainState& state, const ModelParams& model, int layer, int k,
               const CycleOptions& options) {
  check_process(state, layer, k);
  Times& r = at(state.real, layer, k);
  Times& v = at(state.virt, layer, k);
  if (r.empty() || v.empty()) return false;
  const double ta = r[static_cast<std::size_t>(state.rng.below(r.size()))];
  const double tb = v[static_cast<std::size_t>(state.rng.below(v.size()))];
  // Real a turns virtual first; b is then evaluated in that intermediate state.
  erase_one(r, ta);
  insert_sorted(v, ta);
  const double d1 = -gain(state, model, layer, k, ta);
  const double d2 = gain(state, model, layer, k, tb);
  const double delta = d1 + d2;
  if (accept(state, delta, options)) {
    erase_one(v, tb);
    insert_sorted(r, tb);
    if (std::isfinite(d1) && std::isfinite(d2)) {
      commit(state, model, delta);
    } else {
      state.target = target_decomposition(state, model).total();
    }
    return true;
  }
  erase_one(v, ta);
  insert_sorted(r, ta);
  return false;
}

void mcmc_cycle(ChainState& state, const ModelParams& model, const CycleOptions& options) {
  for (int l = 1; l <= model.depth(); ++l) {
    for (int k = 0; k < model.count(l); ++k) {
      resample_virtual(state, model, l, k);
      for (int rep = 0; rep < 2; ++rep) {
        for (int f = 0; f < 3; ++f) flip_move(state, model, l, k, options);
        swap_move(state, model, l, k, options);
      }
    }
  }
  g_cycles.fetch_add(1, std::memory_order_relaxed);
}

Layers posterior_sample(ChainState& state, const ModelParams& model, int burn_in, int thin) {
  if (burn_in < 0 || thin < 0) throw ArgumentError("posterior_sample: negative burn-in or thin");
  state.target = target_decomposition(state, model).total();
  for (int c = 0; c < burn_in + thin; ++c) mcmc_cycle(state, model);
  return state.real;
}

std::uint64_t mcmc_cycle_count() { return g_cycles.load(std::memory_order_relaxed); }

}  // namespace nspvi
