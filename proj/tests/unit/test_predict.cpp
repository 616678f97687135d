#include <doctest.h>

#include <cmath>

#include "nspvi/error.hpp"
#include "nspvi/predict.hpp"
#include "nspvi/simulate.hpp"
#include "stats.hpp"

using namespace nspvi;
namespace st = nspvi::testing;

namespace {

PredictionRecord record(double t_hat, double t_true, int k_hat, int k_true, bool failed = false) {
  PredictionRecord r;
  r.t_hat = t_hat;
  r.t_true = t_true;
  r.k_hat = k_hat;
  r.k_true = k_true;
  r.failed = failed;
  r.wall_ms = 1.5;
  return r;
}

std::vector<EventSeq> synthetic(std::size_t n, std::uint64_t seed) {
  const ModelParams m({2, 2, 1}, WeibullKernel{1.5, 1.0, 1.0}, 0.3, WeibullKernel{1, 1, 1}, 0.1);
  std::vector<EventSeq> out;
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(seed, i, Purpose::generate);
    out.push_back(generate_dnsp(m, 10.0, rng).x);
  }
  return out;
}

Posteriors small_posteriors(const std::vector<EventSeq>& data) {
  TrainConfig c;
  c.usap_dims = UsapDims{2, 2, 4, 4, 1};
  return initialize({2, 2, 1}, data, c);
}

}  // namespace

TEST_CASE("top_rate_mle, mean_time, majority_type") {
  CHECK(top_rate_mle({{3}, {5}}, 20.0)[0] == doctest::Approx(0.2).epsilon(1e-15));
  const auto r = top_rate_mle({{0, 2}, {0, 4}}, 10.0);
  CHECK(r[0] == kRateFloor);
  CHECK(r[1] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(top_rate_mle({}, 1.0), ArgumentError);
  CHECK_THROWS_AS(top_rate_mle({{1}}, 0.0), ArgumentError);

  CHECK(mean_time({1.0, 2.0, 6.0}) == 3.0);
  CHECK_THROWS_AS(mean_time({}), ArgumentError);

  CHECK(majority_type({2, 2, 1}, 3) == 2);
  CHECK(majority_type({3, 1, 3, 1}, 3) == 1);
  CHECK_THROWS_AS(majority_type({4}, 3), ArgumentError);
}

TEST_CASE("score examples") {
  const Score a = score({record(0.0, 1.0, 1, 1)});
  CHECK(a.rmse == 1.0);
  CHECK(a.accuracy == 1.0);
  const Score b = score({record(4.0, 2.0, 1, 2), record(5.0, 3.0, 2, 2)});
  CHECK(b.rmse == 2.0);
  CHECK(b.accuracy == 0.5);
  const Score c = score({record(2.0, 0.0, 1, 1), record(1.0, 1.0, 1, 1), record(0.0, 0.0, 1, 1, true)});
  CHECK(c.rmse == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(c.scored == 2);
  CHECK(c.failures == 1);
  CHECK(c.wall_ms == 4.5);
  CHECK_THROWS_AS(score({record(0.0, 0.0, 1, 1, true)}), ArgumentError);
}

TEST_CASE("sampler names") {
  for (Sampler s : {Sampler::mcmc, Sampler::unsp, Sampler::usap}) {
    CHECK(parse_sampler(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_sampler("gibbs"), ArgumentError);
}

TEST_CASE("simulate_future matches an independent thinning oracle") {
  const WeibullKernel k{2.0, 1.5, 1.0};
  const double mu = 0.3, t_n = 5.0, horizon = 10.0, end = t_n + horizon;
  const ModelParams m({1, 1}, k, mu, WeibullKernel{1, 1, 1}, 0.1);
  Layers z = empty_layers({1, 1});
  z[1][0] = {4.0};

  double peak = 0.0;
  for (int i = 1; i <= 10000; ++i) peak = std::max(peak, weibull_eval(k, i * 1e-3));

  RngStream a(50, 0, Purpose::test), b(50, 1, Purpose::test);
  std::vector<double> got, want;
  int got_none = 0, want_none = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto f = simulate_future(m, z, t_n, horizon, a);
    if (f) {
      got.push_back(f->t);
      CHECK(f->type == 1);
    } else {
      ++got_none;
    }

    Times parents = z[1][0];
    const Times fresh = sample_thinning([&](double) { return mu; }, mu, t_n, end, b);
    parents.insert(parents.end(), fresh.begin(), fresh.end());
    auto cif = [&](double t) {
      double s = kObsBackground;
      for (double p : parents) {
        if (p < t) s += weibull_eval(k, t - p);
      }
      return s;
    };
    const double bound = kObsBackground + 1.2 * peak * static_cast<double>(parents.size());
    const Times kids = sample_thinning(cif, bound, t_n, end, b);
    if (kids.empty()) {
      ++want_none;
    } else {
      want.push_back(kids.front());
    }
  }
  CHECK(st::ks_two_sample_pvalue(got, want) > 0.01);
  const double p = static_cast<double>(want_none) / n;
  CHECK(std::abs(got_none - want_none) < 4 * std::sqrt(2.0 * n * p * (1 - p)) + 1);
}

TEST_CASE("simulate_future: floor rates and no parents give no event") {
  ModelParams m({2, 2, 1}, WeibullKernel{1, 1, 1}, kRateFloor, WeibullKernel{1, 1, 1}, 0.1);
  const Layers z = empty_layers(m.counts);
  RngStream rng(51, 0, Purpose::test);
  int none = 0;
  for (int i = 0; i < 1000; ++i) none += simulate_future(m, z, 3.0, 6.0, rng) ? 0 : 1;
  CHECK(none == 1000);
  CHECK_THROWS_AS(simulate_future(m, z, 3.0, 0.0, rng), ArgumentError);
}

TEST_CASE("simulate_future is deterministic") {
  const ModelParams m({2, 2, 1}, WeibullKernel{1.2, 1.3, 1.0}, 0.4, WeibullKernel{1, 1, 1}, 0.1);
  Layers z = empty_layers(m.counts);
  z[1] = {{2.0}, {3.5}};
  z[2] = {{1.0}};
  RngStream a(52, 0, Purpose::future), b(52, 0, Purpose::future);
  for (int i = 0; i < 50; ++i) {
    const auto x = simulate_future(m, z, 4.0, 8.0, a);
    const auto y = simulate_future(m, z, 4.0, 8.0, b);
    REQUIRE(x.has_value() == y.has_value());
    if (x) {
      CHECK(x->t == y->t);
      CHECK(x->type == y->type);
      CHECK(x->t > 4.0);
    }
  }
}

TEST_CASE("variational prediction runs no MCMC cycles") {
  const auto data = synthetic(4, 53);
  const Posteriors p = small_posteriors(data);
  for (Sampler s : {Sampler::unsp, Sampler::usap}) {
    PredictOptions o;
    o.sampler = s;
    o.samples = 4;
    const std::uint64_t before = mcmc_cycle_count();
    const auto recs = predict_dataset(p, data, o);
    CHECK(mcmc_cycle_count() == before);
    std::size_t expected = 0;
    for (const auto& seq : data) expected += seq.events.empty() ? 0 : seq.events.size() - 1;
    CHECK(recs.size() == expected);
    for (const auto& r : recs) {
      if (r.failed) continue;
      const EventSeq& seq = data[r.seq_id];
      CHECK(r.t_hat > seq.events[r.n - 2].t);
      CHECK(r.t_true == seq.events[r.n - 1].t);
      CHECK(r.samples == 4);
    }
  }
}

TEST_CASE("MCMC prediction: burn-in once, then thin per draw") {
  const auto data = synthetic(6, 54);
  std::size_t seq = 0;
  while (data[seq].events.size() < 3) ++seq;
  const Posteriors p = small_posteriors(data);
  PredictOptions o;
  o.sampler = Sampler::mcmc;
  o.samples = 3;
  o.burn_in = 7;
  o.thin = 2;
  const std::uint64_t before = mcmc_cycle_count();
  const auto recs = predict_sequence(p, data[seq], seq, o);
  const std::uint64_t cycles = mcmc_cycle_count() - before;
  // Two phases per prediction, S draws each.
  const std::uint64_t per = 2 * 3 * 2;
  CHECK(cycles == 7 + per * recs.size());
}

TEST_CASE("predictions are reproducible") {
  const auto data = synthetic(4, 55);
  const Posteriors p = small_posteriors(data);
  for (Sampler s : {Sampler::mcmc, Sampler::unsp, Sampler::usap}) {
    PredictOptions o;
    o.sampler = s;
    o.samples = 3;
    o.burn_in = 5;
    o.thin = 2;
    const auto a = predict_dataset(p, data, o);
    const auto b = predict_dataset(p, data, o);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].t_hat == b[i].t_hat);
      CHECK(a[i].k_hat == b[i].k_hat);
      CHECK(a[i].failed == b[i].failed);
    }
  }
}

TEST_CASE("predict_next argument checks") {
  const auto data = synthetic(3, 56);
  const Posteriors p = small_posteriors(data);
  PredictOptions o;
  o.sampler = Sampler::unsp;
  EventSeq s;
  s.window = 5.0;
  s.events = {{1.0, 1}, {2.0, 2}};
  PredictContext ctx = make_context(p, 0, o);
  CHECK_THROWS_AS(predict_next(p, s, 0, ctx, o), ArgumentError);
  CHECK_THROWS_AS(predict_next(p, s, 2, ctx, o), ArgumentError);
  o.samples = 0;
  CHECK_THROWS_AS(predict_next(p, s, 1, ctx, o), ArgumentError);
}
