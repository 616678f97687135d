#include "nspvi/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "nspvi/autodiff.hpp"
#include "nspvi/error.hpp"
#include "nspvi/parallel.hpp"

namespace nspvi {

double link_value(double raw, double floor) { return floor + ad::softplus(raw); }

double link_raw(double value, double floor) {
  if (!(value > floor)) {
    throw ArgumentError("link: value " + std::to_string(value) + " is not above its floor " +
                        std::to_string(floor));
  }
  return ad::softplus_inverse(value - floor);
}

double link_slope(double raw) { return ad::sigmoid(raw); }

Adam::Adam(std::size_t size, double step, AdamConfig config)
    : step_(step), config_(config), m_(size, 0.0), v_(size, 0.0) {
  if (!(step > 0.0)) throw ArgumentError("Adam: step size must be positive");
}

void Adam::step(std::vector<double>& x, const std::vector<double>& grad,
                const std::vector<char>* mask) {
  if (x.size() != m_.size() || grad.size() != m_.size()) {
    throw ArgumentError("Adam: size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (mask != nullptr && !(*mask)[i]) continue;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
    x[i] += step_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.eps);
  }
}

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void push_kernel_raw(std::vector<double>& raw, std::vector<char>& mask, const WeibullKernel& k,
                     bool fix_shape) {
  raw.push_back(link_raw(k.weight, kKernelFloor));
  raw.push_back(fix_shape ? 0.0 : link_raw(k.shape, kKernelFloor));
  raw.push_back(link_raw(k.scale, kKernelFloor));
  mask.push_back(1);
  mask.push_back(fix_shape ? 0 : 1);
  mask.push_back(1);
}

WeibullKernel kernel_from_raw(const double* r, bool fix_shape) {
  return {link_value(r[0], kKernelFloor), fix_shape ? 1.0 : link_value(r[1], kKernelFloor),
          link_value(r[2], kKernelFloor)};
}

void push_kernel_grad(std::vector<double>& out, const double* r, const WeibullGrad& g) {
  out.push_back(g.weight * link_slope(r[0]));
  out.push_back(g.shape * link_slope(r[1]));
  out.push_back(g.scale * link_slope(r[2]));
}

// Sum of per-item accumulators over fixed-size blocks merged in block order,
// so the result does not depend on the thread count.
template <class Acc, class Make, class Body, class Merge>
Acc blocked_reduce(std::size_t n, Make make, Body body, Merge merge) {
  constexpr std::size_t kBlock = 8;
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<Acc> partial;
  partial.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) partial.push_back(make());
  parallel_for(blocks, [&](std::size_t b) {
    for (std::size_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) body(partial[b], i);
  });
  Acc total = make();
  for (auto& p : partial) merge(total, p);
  return total;
}

}  // namespace

ModelOptimizer::ModelOptimizer(const ModelParams& model, double step, AdamConfig config,
                               bool fix_shape)
    : fix_shape_(fix_shape) {
  for (const auto& table : model.down) {
    for (const auto& k : table.kernels) push_kernel_raw(raw_, mask_, k, fix_shape);
  }
  adam_ = Adam(raw_.size(), step, config);
}

bool ModelOptimizer::step(ModelParams& model, const DownGrad& grad) {
  std::vector<double> g;
  g.reserve(raw_.size());
  std::size_t at = 0;
  for (const auto& table : grad.kernels) {
    for (const auto& kg : table) {
      push_kernel_grad(g, &raw_[at], kg);
      at += 3;
    }
  }
  if (g.size() != raw_.size()) throw ArgumentError("ModelOptimizer: gradient shape mismatch");
  if (!all_finite(g)) return false;
  adam_.step(raw_, g, &mask_);
  at = 0;
  for (auto& table : model.down) {
    for (auto& k : table.kernels) {
      k = kernel_from_raw(&raw_[at], fix_shape_);
      at += 3;
    }
  }
  return true;
}

UnspOptimizer::UnspOptimizer(const UpwardTables& params, double step, AdamConfig config,
                             bool fix_shape)
    : fix_shape_(fix_shape) {
  for (const auto& table : params.kernels) {
    for (const auto& k : table.kernels) push_kernel_raw(raw_, mask_, k, fix_shape);
  }
  for (const auto& layer : params.base) {
    for (double b : layer) {
      raw_.push_back(link_raw(b, kRateFloor));
      mask_.push_back(1);
    }
  }
  adam_ = Adam(raw_.size(), step, config);
}

bool UnspOptimizer::step(UpwardTables& params, const UpwardGrad& grad) {
  std::vector<double> g;
  g.reserve(raw_.size());
  std::size_t at = 0;
  for (const auto& table : grad.kernels) {
    for (const auto& kg : table) {
      push_kernel_grad(g, &raw_[at], kg);
      at += 3;
    }
  }
  for (const auto& layer : grad.base) {
    for (double b : layer) {
      g.push_back(b * link_slope(raw_[at]));
      ++at;
    }
  }
  if (g.size() != raw_.size()) throw ArgumentError("UnspOptimizer: gradient shape mismatch");
  if (!all_finite(g)) return false;
  adam_.step(raw_, g, &mask_);
  at = 0;
  for (auto& table : params.kernels) {
    for (auto& k : table.kernels) {
      k = kernel_from_raw(&raw_[at], fix_shape_);
      at += 3;
    }
  }
  for (auto& layer : params.base) {
    for (double& b : layer) b = link_value(raw_[at++], kRateFloor);
  }
  return true;
}

UsapOptimizer::UsapOptimizer(const UsapParams& params, double step, AdamConfig config)
    : adam_(params.parameter_count(), step, config) {}

bool UsapOptimizer::step(UsapParams& params, const UsapParams& grad) {
  std::vector<double> x, g;
  params.for_each_array([&x](const std::string&, const ad::Matrix& m) {
    x.insert(x.end(), m.data.begin(), m.data.end());
  });
  grad.for_each_array([&g](const std::string&, const ad::Matrix& m) {
    g.insert(g.end(), m.data.begin(), m.data.end());
  });
  if (!all_finite(g)) return false;
  adam_.step(x, g);
  std::size_t at = 0;
  params.for_each_array([&](const std::string&, ad::Matrix& m) {
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(at),
              x.begin() + static_cast<std::ptrdiff_t>(at + m.size()), m.data.begin());
    at += m.size();
  });
  return true;
}

Posteriors initialize(const std::vector<int>& counts, const std::vector<EventSeq>& data,
                      const TrainConfig& config) {
  if (counts.size() < 2) throw ArgumentError("initialize: need at least one hidden layer");
  double events = 0.0;
  double windows = 0.0;
  for (const auto& s : data) {
    events += static_cast<double>(s.events.size());
    windows += s.window;
  }
  const double n = std::max<double>(1.0, static_cast<double>(data.size()));
  const double mean_window = data.empty() ? 1.0 : windows / n;
  const double mean_count = std::max(events / n, 1.0);
  auto rate = [&](int layer) {
    return std::max(mean_count / (counts[static_cast<std::size_t>(layer)] * mean_window),
                    2.0 * kRateFloor);
  };
  RngStream rng(config.seed, 0, Purpose::init);
  const double scale = std::max(mean_window / 10.0, 2.0 * kKernelFloor);
  auto draw_kernel = [&]() { return WeibullKernel{rng.uniform(0.5, 1.5), 1.0, scale}; };

  Posteriors p;
  const int depth = static_cast<int>(counts.size()) - 1;
  p.model = ModelParams(counts, WeibullKernel{1.0, 1.0, scale}, rate(depth),
                        WeibullKernel{1.0, 1.0, scale}, 1.0);
  for (auto& table : p.model.down) {
    for (auto& k : table.kernels) k = draw_kernel();
  }
  for (int l = 1; l <= depth; ++l) {
    for (auto& k : p.model.vpp.into(l).kernels) k = draw_kernel();
    for (auto& b : p.model.vpp.base[static_cast<std::size_t>(l - 1)]) b = rate(l);
  }
  p.unsp = p.model.vpp;
  p.usap = UsapParams::init(counts, config.usap_dims, config.fix_shape, scale, rate(1), rng);
  return p;
}

std::vector<double> top_rates_from_draws(const std::vector<Layers>& draws,
                                         const std::vector<double>& windows) {
  if (draws.empty()) throw ArgumentError("top rate update: no draws");
  if (draws.size() != windows.size()) throw ArgumentError("top rate update: size mismatch");
  const auto& top = draws.front().back();
  std::vector<double> rates(top.size(), 0.0);
  for (std::size_t s = 0; s < draws.size(); ++s) {
    for (std::size_t k = 0; k < rates.size(); ++k) {
      rates[k] += static_cast<double>(draws[s].back()[k].size()) / windows[s];
    }
  }
  for (auto& r : rates) r = std::max(r / static_cast<double>(draws.size()), kRateFloor);
  return rates;
}

bool model_grad_step(ModelParams& model, ModelOptimizer& optimizer,
                     const std::vector<Layers>& draws, const std::vector<double>& windows) {
  if (draws.size() != windows.size()) throw ArgumentError("model_grad_step: size mismatch");
  const ModelParams& frozen = model;
  DownGrad total = blocked_reduce<DownGrad>(
      draws.size(),
      [&] {
        DownGrad g;
        for (const auto& t : frozen.down) g.kernels.emplace_back(t.kernels.size());
        return g;
      },
      [&](DownGrad& acc, std::size_t i) {
        const DownGrad g = joint_loglik_grad(frozen, draws[i], windows[i]);
        for (std::size_t l = 0; l < g.kernels.size(); ++l)
          for (std::size_t j = 0; j < g.kernels[l].size(); ++j) acc.kernels[l][j] += g.kernels[l][j];
      },
      [](DownGrad& into, const DownGrad& part) {
        for (std::size_t l = 0; l < part.kernels.size(); ++l)
          for (std::size_t j = 0; j < part.kernels[l].size(); ++j)
            into.kernels[l][j] += part.kernels[l][j];
      });
  if (!optimizer.step(model, total)) {
    std::cerr << "model_grad_step: non-finite gradient; parameters left unchanged\n";
    return false;
  }
  model.top_rates = top_rates_from_draws(draws, windows);
  return true;
}

double variational_grad_step(UpwardTables& params, UnspOptimizer& optimizer,
                             const std::vector<Layers>& draws, const std::vector<double>& windows) {
  if (draws.size() != windows.size()) throw ArgumentError("variational_grad_step: size mismatch");
  struct Acc {
    UpwardGrad grad;
    double value = 0.0;
  };
  const UpwardTables& frozen = params;
  Acc total = blocked_reduce<Acc>(
      draws.size(), [&] { return Acc{UpwardGrad::zeros_like(frozen), 0.0}; },
      [&](Acc& acc, std::size_t i) {
        acc.value += unsp_loglik(frozen, draws[i], windows[i], &acc.grad);
      },
      [](Acc& into, const Acc& part) {
        into.grad += part.grad;
        into.value += part.value;
      });
  if (!optimizer.step(params, total.grad)) {
    std::cerr << "variational_grad_step: non-finite UNSP gradient; parameters left unchanged\n";
  }
  return total.value / static_cast<double>(std::max<std::size_t>(draws.size(), 1));
}

double variational_grad_step(UsapParams& params, UsapOptimizer& optimizer,
                             const std::vector<Layers>& draws, const std::vector<double>& windows) {
  if (draws.size() != windows.size()) throw ArgumentError("variational_grad_step: size mismatch");
  struct Acc {
    UsapParams grad;
    double value = 0.0;
  };
  const UsapParams& frozen = params;
  Acc total = blocked_reduce<Acc>(
      draws.size(), [&] { return Acc{frozen.zeros_like(), 0.0}; },
      [&](Acc& acc, std::size_t i) {
        acc.value += usap_loglik(frozen, draws[i], windows[i], &acc.grad);
      },
      [](Acc& into, const Acc& part) {
        into.grad.axpy(1.0, part.grad);
        into.value += part.value;
      });
  if (!optimizer.step(params, total.grad)) {
    std::cerr << "variational_grad_step: non-finite USAP gradient; parameters left unchanged\n";
  }
  return total.value / static_cast<double>(std::max<std::size_t>(draws.size(), 1));
}

double validation_score(const Posteriors& post, const std::vector<EventSeq>& data, Family family,
                        int samples, std::uint64_t seed) {
  if (samples < 1) throw ArgumentError("validation_score: need at least one sample");
  std::vector<double> scores(data.size(), std::numeric_limits<double>::quiet_NaN());
  const int types = post.model.count(0);
  parallel_for(data.size(), [&](std::size_t i) {
    const auto& seq = data[i];
    if (seq.events.size() < 2) return;
    const EventSeq context = seq.prefix(seq.events.size() - 1);
    const ObservedEvent truth = seq.events.back();
    const LayerEvents x = context.by_type(types);
    RngStream rng(seed, i, Purpose::validation);
    double mean = 0.0;
    if (family == Family::usap) {
      const UsapSampler sampler(post.usap, x, context.window);
      for (int s = 0; s < samples; ++s) {
        const Layers z = sampler.draw(rng);
        mean += rpp_cif(post.model, 0, truth.type - 1, z[1], truth.t);
      }
    } else {
      for (int s = 0; s < samples; ++s) {
        const Layers z = sample_unsp(post.unsp, x, context.window, rng);
        mean += rpp_cif(post.model, 0, truth.type - 1, z[1], truth.t);
      }
    }
    scores[i] = std::log(mean / samples);
  });
  double total = 0.0;
  std::size_t used = 0;
  for (double s : scores) {
    if (std::isnan(s)) continue;
    total += s;
    ++used;
  }
  return used == 0 ? -std::numeric_limits<double>::infinity() : total / static_cast<double>(used);
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, RngStream rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.below(i))]);
  }
  return idx;
}

}  // namespace

TrainResult mcem_run(const std::vector<EventSeq>& train, const std::vector<EventSeq>& validation,
                     Posteriors init, const TrainConfig& config) {
  if (config.iterations < 0) throw ArgumentError("mcem_run: negative iteration count");
  if (!(config.model_step > 0.0) || !(config.variational_step > 0.0)) {
    throw ArgumentError("mcem_run: step sizes must be positive");
  }
  if (config.patience < 1 || config.validate_every < 1) {
    throw ArgumentError("mcem_run: patience and validation cadence must be >= 1");
  }
  TrainResult result;
  result.best = init;
  if (config.iterations == 0) return result;
  if (train.empty()) throw ArgumentError("mcem_run: empty training set");

  Posteriors cur = std::move(init);
  ModelOptimizer model_opt(cur.model, config.model_step, config.adam, config.fix_shape);
  UnspOptimizer unsp_opt(cur.unsp, config.variational_step, config.adam, config.fix_shape);
  UsapOptimizer usap_opt(cur.usap, config.variational_step, config.adam);

  std::vector<ChainState> chains;
  chains.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    chains.emplace_back(cur.model, train[i], RngStream(config.seed, i, Purpose::mcmc));
  }
  std::vector<char> warmed(train.size(), 0);

  const Family family = config.train_usap ? Family::usap : Family::unsp;
  double best_score = -std::numeric_limits<double>::infinity();
  int bad_checks = 0;
  bool have_best = false;
  const std::size_t batch =
      config.batch_size > 0 ? std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                                    train.size())
                            : train.size();
  std::vector<std::size_t> order;
  std::size_t cursor = train.size();
  std::uint64_t epoch = 0;

  auto check = [&](int iteration) {
    const double score =
        validation_score(cur, validation, family, config.validation_samples, config.seed);
    result.validation.push_back({iteration, score});
    if (!have_best || score > best_score) {
      best_score = score;
      result.best = cur;
      result.best_iteration = iteration;
      have_best = true;
      bad_checks = 0;
    } else {
      ++bad_checks;
    }
  };

  for (int it = 1; it <= config.iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> ids;
    if (batch == train.size()) {
      ids.resize(train.size());
      std::iota(ids.begin(), ids.end(), 0);
    } else {
      while (ids.size() < batch) {
        if (cursor >= order.size()) {
          order = shuffled(train.size(), RngStream(config.seed, epoch++, Purpose::shuffle));
          cursor = 0;
        }
        ids.push_back(order[cursor++]);
      }
    }

    std::vector<Layers> draws(ids.size());
    std::vector<double> windows(ids.size());
    std::vector<double> joint(ids.size());
    parallel_for(ids.size(), [&](std::size_t n) {
      const std::size_t i = ids[n];
      const int burn = warmed[i] ? 0 : config.burn_in;
      draws[n] = posterior_sample(chains[i], cur.model, burn, config.thin);
      warmed[i] = 1;
      windows[n] = train[i].window;
      joint[n] = joint_loglik(cur.model, draws[n], windows[n]);
    });

    TrainLogRecord rec;
    rec.iteration = it;
    rec.joint_loglik = std::accumulate(joint.begin(), joint.end(), 0.0) /
                       static_cast<double>(joint.size());
    rec.q_unsp = std::numeric_limits<double>::quiet_NaN();
    rec.q_usap = std::numeric_limits<double>::quiet_NaN();
    if (config.train_model && !model_grad_step(cur.model, model_opt, draws, windows)) {
      ++result.skipped_model_steps;
    }
    if (config.train_unsp) {
      rec.q_unsp = variational_grad_step(cur.unsp, unsp_opt, draws, windows);
      cur.model.vpp = cur.unsp;
    }
    if (config.train_usap) {
      rec.q_usap = variational_grad_step(cur.usap, usap_opt, draws, windows);
    }
    rec.top_rates = cur.model.top_rates;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            start)
                      .count();
    result.log.push_back(std::move(rec));
    result.iterations_run = it;

    if (!validation.empty() && it % config.validate_every == 0) {
      check(it);
      if (bad_checks >= config.patience) {
        result.stopped_early = true;
        break;
      }
    }
  }
  if (validation.empty()) {
    result.best = cur;
    result.best_iteration = result.iterations_run;
  } else if (!result.stopped_early && result.iterations_run % config.validate_every != 0) {
    check(result.iterations_run);
  }
  return result;
}

}  // namespace nspvi
