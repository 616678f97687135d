#include <doctest.h>

#include <cmath>

#include "nspvi/error.hpp"
#include "nspvi/simulate.hpp"
#include "nspvi/train.hpp"
#include "stats.hpp"

using namespace nspvi;

namespace {

std::vector<EventSeq> synthetic(std::size_t n, std::uint64_t seed, double window = 10.0) {
  const ModelParams m({2, 2, 1}, WeibullKernel{1.5, 1.0, 1.0}, 0.3, WeibullKernel{1, 1, 1}, 0.1);
  std::vector<EventSeq> out;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(seed, i, Purpose::generate);
    out.push_back(generate_dnsp(m, window, rng).x);
  }
  return out;
}

TrainConfig small_config() {
  TrainConfig c;
  c.iterations = 3;
  c.burn_in = 5;
  c.thin = 2;
  c.validate_every = 2;
  c.validation_samples = 2;
  c.usap_dims = UsapDims{2, 2, 4, 4, 1};
  c.seed = 9;
  return c;
}

// Layers with no observations and the given top counts, evenly spread.
Layers top_only(const std::vector<int>& counts, std::size_t m, double window) {
  Layers z = empty_layers(counts);
  for (std::size_t j = 0; j < m; ++j) {
    z[1][0].push_back(window * (static_cast<double>(j) + 0.5) / static_cast<double>(m));
  }
  return z;
}

}  // namespace

TEST_CASE("Adam: first step moves by the step size in the gradient direction") {
  Adam adam(4, 0.1);
  std::vector<double> x{1.0, 1.0, 1.0, 1.0};
  const std::vector<char> mask{1, 1, 1, 0};
  adam.step(x, {3.0, -2.0, 0.0, 5.0}, &mask);
  CHECK(x[0] == doctest::Approx(1.1).epsilon(1e-6));
  CHECK(x[1] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(x[2] == 1.0);
  CHECK(x[3] == 1.0);
  CHECK(adam.steps() == 1);
  CHECK_THROWS_AS(adam.step(x, {1.0}), ArgumentError);
  CHECK_THROWS_AS(Adam(2, 0.0), ArgumentError);
}

TEST_CASE("links round-trip and respect the floor") {
  for (double v : {2e-3, 0.01, 1.0, 7.5, 300.0}) {
    CHECK(link_value(link_raw(v, 1e-3), 1e-3) == doctest::Approx(v).epsilon(1e-12));
  }
  CHECK(link_value(-800.0, 1e-3) >= 1e-3);
  CHECK(link_slope(0.0) == 0.5);
  CHECK_THROWS_AS(link_raw(1e-3, 1e-3), ArgumentError);
}

TEST_CASE("top rates from draws") {
  const std::vector<int> counts{1, 1};
  const std::vector<Layers> draws{top_only(counts, 3, 20.0), top_only(counts, 5, 20.0)};
  CHECK(top_rates_from_draws(draws, {20.0, 20.0})[0] == doctest::Approx(0.2).epsilon(1e-15));
  const std::vector<Layers> none{empty_layers(counts)};
  CHECK(top_rates_from_draws(none, {20.0})[0] == kRateFloor);
}

TEST_CASE("optimizers leave parameters alone on a zero gradient") {
  RngStream rng(1, 0, Purpose::test);
  const TrainConfig cfg = small_config();
  const Posteriors p = initialize({2, 2, 1}, synthetic(4, 1), cfg);

  UpwardTables u = p.unsp;
  UnspOptimizer uo(u, 0.05, {}, false);
  CHECK(uo.step(u, UpwardGrad::zeros_like(u)));
  for (std::size_t l = 0; l < u.kernels.size(); ++l) {
    for (std::size_t j = 0; j < u.kernels[l].kernels.size(); ++j) {
      CHECK(u.kernels[l].kernels[j].weight == doctest::Approx(p.unsp.kernels[l].kernels[j].weight).epsilon(1e-14));
    }
  }

  UsapParams a = p.usap;
  UsapOptimizer ao(a, 0.05, {});
  CHECK(ao.step(a, a.zeros_like()));
  CHECK(a == p.usap);

  ModelParams m = p.model;
  ModelOptimizer mo(m, 0.05, {}, false);
  DownGrad g;
  for (const auto& t : m.down) g.kernels.emplace_back(t.kernels.size());
  CHECK(mo.step(m, g));
  for (std::size_t l = 0; l < m.down.size(); ++l) {
    for (std::size_t j = 0; j < m.down[l].kernels.size(); ++j) {
      CHECK(m.down[l].kernels[j].scale == doctest::Approx(p.model.down[l].kernels[j].scale).epsilon(1e-14));
    }
  }
}

TEST_CASE("non-finite gradients are refused") {
  const Posteriors p = initialize({2, 2, 1}, synthetic(4, 2), small_config());
  UpwardTables u = p.unsp;
  UnspOptimizer uo(u, 0.05, {}, false);
  UpwardGrad g = UpwardGrad::zeros_like(u);
  g.base[0][0] = std::nan("");
  CHECK_FALSE(uo.step(u, g));
  CHECK(u == p.unsp);
}

TEST_CASE("UNSP base-only problem converges to the count MLE") {
  // No observations: log q reduces to sum_k m_k log mu - mu T.
  const std::vector<int> counts{1, 1};
  UpwardTables u(counts, WeibullKernel{1, 1, 1}, 1.0);
  const std::vector<Layers> draws{top_only(counts, 3, 20.0), top_only(counts, 5, 20.0),
                                  top_only(counts, 4, 20.0)};
  const std::vector<double> windows(3, 20.0);
  const double want = 12.0 / (3 * 20.0);
  UnspOptimizer opt(u, 0.01, {}, false);
  int steps = 0;
  while (steps < 5000 && std::abs(u.base[0][0] - want) > 1e-3 * want) {
    variational_grad_step(u, opt, draws, windows);
    ++steps;
  }
  CHECK(steps < 5000);
  CHECK(std::abs(u.base[0][0] - want) < 0.01 * want);
}

TEST_CASE("log q rises over frozen draws") {
  const std::vector<EventSeq> data = synthetic(6, 3);
  const TrainConfig cfg = small_config();
  Posteriors p = initialize({2, 2, 1}, data, cfg);
  std::vector<Layers> draws;
  std::vector<double> windows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ChainState chain(p.model, data[i], RngStream(3, i, Purpose::mcmc));
    draws.push_back(posterior_sample(chain, p.model, 50, 5));
    windows.push_back(data[i].window);
  }
  for (Family f : {Family::unsp, Family::usap}) {
    UnspOptimizer uo(p.unsp, 0.005, {}, false);
    UsapOptimizer ao(p.usap, 0.005, {});
    std::vector<double> values;
    for (int it = 0; it < 100; ++it) {
      values.push_back(f == Family::unsp ? variational_grad_step(p.unsp, uo, draws, windows)
                                         : variational_grad_step(p.usap, ao, draws, windows));
    }
    int drops = 0;
    for (std::size_t i = 1; i < values.size(); ++i) drops += values[i] < values[i - 1] ? 1 : 0;
    CHECK(drops <= 5);
    CHECK(values.back() > values.front());
  }
}

TEST_CASE("model step raises the joint loglik on frozen draws") {
  const std::vector<EventSeq> data = synthetic(6, 4);
  Posteriors p = initialize({2, 2, 1}, data, small_config());
  std::vector<Layers> draws;
  std::vector<double> windows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ChainState chain(p.model, data[i], RngStream(4, i, Purpose::mcmc));
    draws.push_back(posterior_sample(chain, p.model, 50, 5));
    windows.push_back(data[i].window);
  }
  auto total = [&](const ModelParams& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) s += joint_loglik(m, draws[i], windows[i]);
    return s;
  };
  ModelOptimizer opt(p.model, 0.005, {}, false);
  const double before = total(p.model);
  for (int it = 0; it < 50; ++it) CHECK(model_grad_step(p.model, opt, draws, windows));
  CHECK(total(p.model) > before);
  CHECK(p.model.top_rates == top_rates_from_draws(draws, windows));
}

TEST_CASE("fixed shape stays at one") {
  const std::vector<EventSeq> data = synthetic(4, 5);
  TrainConfig cfg = small_config();
  cfg.fix_shape = true;
  cfg.iterations = 2;
  const TrainResult r = mcem_run(data, {}, initialize({2, 2, 1}, data, cfg), cfg);
  for (const auto& t : r.best.model.down) {
    for (const auto& k : t.kernels) CHECK(k.shape == 1.0);
  }
  for (const auto& t : r.best.unsp.kernels) {
    for (const auto& k : t.kernels) CHECK(k.shape == 1.0);
  }
}

TEST_CASE("mcem_run: zero iterations return the initialization") {
  const std::vector<EventSeq> data = synthetic(3, 6);
  TrainConfig cfg = small_config();
  cfg.iterations = 0;
  const Posteriors init = initialize({2, 2, 1}, data, cfg);
  const TrainResult r = mcem_run(data, data, init, cfg);
  CHECK(r.best == init);
  CHECK(r.log.empty());
  CHECK(r.iterations_run == 0);
}

TEST_CASE("mcem_run is deterministic apart from timings") {
  const std::vector<EventSeq> data = synthetic(5, 7);
  const std::vector<EventSeq> val = synthetic(3, 8);
  const TrainConfig cfg = small_config();
  const Posteriors init = initialize({2, 2, 1}, data, cfg);
  const TrainResult a = mcem_run(data, val, init, cfg);
  const TrainResult b = mcem_run(data, val, init, cfg);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].joint_loglik == b.log[i].joint_loglik);
    CHECK(a.log[i].q_unsp == b.log[i].q_unsp);
    CHECK(a.log[i].q_usap == b.log[i].q_usap);
    CHECK(a.log[i].top_rates == b.log[i].top_rates);
  }
  CHECK(a.best == b.best);
  REQUIRE(a.validation.size() == b.validation.size());
  for (std::size_t i = 0; i < a.validation.size(); ++i) {
    CHECK(a.validation[i].score == b.validation[i].score);
  }
}

TEST_CASE("training switches touch disjoint parameter groups") {
  const std::vector<EventSeq> data = synthetic(4, 9);
  TrainConfig cfg = small_config();
  cfg.iterations = 2;
  const Posteriors init = initialize({2, 2, 1}, data, cfg);

  TrainConfig only_model = cfg;
  only_model.train_unsp = only_model.train_usap = false;
  const Posteriors m = mcem_run(data, {}, init, only_model).best;
  CHECK(m.model.down != init.model.down);
  CHECK(m.unsp == init.unsp);
  CHECK(m.usap == init.usap);

  TrainConfig only_usap = cfg;
  only_usap.train_model = only_usap.train_unsp = false;
  const Posteriors a = mcem_run(data, {}, init, only_usap).best;
  CHECK(a.model == init.model);
  CHECK(a.unsp == init.unsp);
  CHECK_FALSE(a.usap == init.usap);

  TrainConfig only_unsp = cfg;
  only_unsp.train_model = only_unsp.train_usap = false;
  const Posteriors u = mcem_run(data, {}, init, only_unsp).best;
  CHECK(u.model.down == init.model.down);
  CHECK(u.usap == init.usap);
  CHECK_FALSE(u.unsp == init.unsp);
}

TEST_CASE("validation_score skips short sequences") {
  const std::vector<EventSeq> data = synthetic(3, 10);
  const Posteriors p = initialize({2, 2, 1}, data, small_config());
  EventSeq one;
  one.window = 5.0;
  one.events = {{1.0, 1}};
  CHECK(std::isinf(validation_score(p, {one}, Family::usap, 2, 1)));
  const double s = validation_score(p, data, Family::unsp, 4, 1);
  CHECK(std::isfinite(s));
  CHECK(s == validation_score(p, data, Family::unsp, 4, 1));
}

TEST_CASE("mcem_run argument checks") {
  const std::vector<EventSeq> data = synthetic(2, 11);
  TrainConfig cfg = small_config();
  const Posteriors init = initialize({2, 2, 1}, data, cfg);
  CHECK_THROWS_AS(mcem_run({}, {}, init, cfg), ArgumentError);
  cfg.model_step = 0.0;
  CHECK_THROWS_AS(mcem_run(data, {}, init, cfg), ArgumentError);
}
