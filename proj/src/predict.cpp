#include "nspvi/predict.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "nspvi/error.hpp"
#include "nspvi/parallel.hpp"

namespace nspvi {

std::string to_string(Sampler s) {
  switch (s) {
    case Sampler::mcmc:
      return "mcmc";
    case Sampler::unsp:
      return "unsp";
    case Sampler::usap:
      return "usap";
  }
  return "unknown";
}

Sampler parse_sampler(const std::string& name) {
  if (name == "mcmc") return Sampler::mcmc;
  if (name == "unsp") return Sampler::unsp;
  if (name == "usap") return Sampler::usap;
  throw ArgumentError("unknown sampler '" + name + "' (expected mcmc, unsp or usap)");
}

std::vector<double> top_rate_mle(const std::vector<std::vector<std::size_t>>& counts,
                                 double window) {
  if (counts.empty()) throw ArgumentError("top_rate_mle: no draws");
  if (!(window > 0.0)) throw ArgumentError("top_rate_mle: window must be positive");
  std::vector<double> rates(counts.front().size(), 0.0);
  for (const auto& draw : counts) {
    if (draw.size() != rates.size()) throw ArgumentError("top_rate_mle: ragged counts");
    for (std::size_t k = 0; k < rates.size(); ++k) rates[k] += static_cast<double>(draw[k]);
  }
  for (auto& r : rates) {
    r = std::max(r / static_cast<double>(counts.size()) / window, kRateFloor);
  }
  return rates;
}

double mean_time(const std::vector<double>& times) {
  if (times.empty()) throw ArgumentError("mean_time: no samples");
  double s = 0.0;
  for (double t : times) s += t;
  return s / static_cast<double>(times.size());
}

int majority_type(const std::vector<int>& types, int num_types) {
  if (types.empty()) throw ArgumentError("majority_type: no samples");
  std::vector<int> votes(static_cast<std::size_t>(num_types), 0);
  for (int k : types) {
    if (k < 1 || k > num_types) throw ArgumentError("majority_type: type out of range");
    ++votes[static_cast<std::size_t>(k - 1)];
  }
  // max_element returns the first maximum, i.e. the smallest type.
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin()) + 1;
}

namespace {

// Homogeneous events at `rate` on (begin, end].
void add_constant(double rate, double begin, double end, RngStream& rng, Times& out) {
  if (!(rate > 0.0)) return;
  for (double t = begin + rng.exponential() / rate; t <= end; t += rng.exponential() / rate) {
    out.push_back(t);
  }
}

// Offspring of one parent at `s` on (begin, end]: a Poisson count with the
// kernel mass of the window, each placed by inverting the truncated survival.
void add_offspring(const WeibullKernel& k, double s, double begin, double end, RngStream& rng,
                   Times& out) {
  const double a = std::max(begin - s, 0.0);
  const double b = end - s;
  if (!(b > a) || k.weight == 0.0) return;
  const double sa = std::exp(-std::pow(a / k.scale, k.shape));
  const double sb = std::exp(-std::pow(b / k.scale, k.shape));
  const double mass = k.weight * (sa - sb);
  for (double acc = rng.exponential(); acc < mass; acc += rng.exponential()) {
    const double surv = sa - rng.uniform() * (sa - sb);
    const double x = k.scale * std::pow(-std::log(surv), 1.0 / k.shape);
    out.push_back(std::clamp(s + x, std::nextafter(begin, end), end));
  }
}

}  // namespace

std::optional<FutureEvent> simulate_future(const ModelParams& model, const Layers& z, double t_n,
                                           double horizon, RngStream& rng) {
  if (!(horizon > 0.0)) throw ArgumentError("simulate_future: horizon must be positive");
  const int depth = model.depth();
  const double end = t_n + horizon;
  // The forward intensity is a sum of independent terms, so each parent's
  // offspring can be drawn on its own.
  Layers fresh = empty_layers(model.counts);
  for (int l = depth; l >= 0; --l) {
    for (int k = 0; k < model.count(l); ++k) {
      Times& out = fresh[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)];
      if (l == depth) {
        add_constant(model.top_rates[static_cast<std::size_t>(k)], t_n, end, rng, out);
        continue;
      }
      if (l == 0) add_constant(model.obs_background, t_n, end, rng, out);
      const auto& table = model.from_above(l);
      for (int i = 0; i < table.from; ++i) {
        const auto& kernel = table.at(i, k);
        const Times* sources[] = {&z[static_cast<std::size_t>(l + 1)][static_cast<std::size_t>(i)],
                                  &fresh[static_cast<std::size_t>(l + 1)][static_cast<std::size_t>(i)]};
        for (const Times* src : sources) {
          for (double s : *src) {
            if (s < end) add_offspring(kernel, s, t_n, end, rng, out);
          }
        }
      }
      std::sort(out.begin(), out.end());
    }
  }
  std::optional<FutureEvent> first;
  for (int k = 0; k < model.count(0); ++k) {
    const auto& ts = fresh[0][static_cast<std::size_t>(k)];
    if (!ts.empty() && (!first || ts.front() < first->t)) first = FutureEvent{ts.front(), k + 1};
  }
  return first;
}

PredictContext make_context(const Posteriors& post, std::size_t seq_id,
                            const PredictOptions& options) {
  PredictContext ctx;
  ctx.seq_id = seq_id;
  ctx.model = post.model;
  ctx.rng = RngStream(options.seed, seq_id, Purpose::predict);
  return ctx;
}

namespace {

using Clock = std::chrono::steady_clock;

// Draws S hidden realizations for the context; returns the time spent.
double draw_posterior(const Posteriors& post, const EventSeq& context, PredictContext& ctx,
                      const PredictOptions& options, std::vector<Layers>& out) {
  const int types = post.model.count(0);
  const auto start = Clock::now();
  out.clear();
  switch (options.sampler) {
    case Sampler::mcmc: {
      int burn = 0;
      if (!ctx.chain) {
        ctx.chain.emplace(ctx.model, context,
                          RngStream(options.seed, ctx.seq_id, Purpose::mcmc));
        burn = options.burn_in;
      } else if (ctx.chain->window != context.window) {
        // The previous draw seeds the chain for the longer context.
        Layers hidden = ctx.chain->real;
        ctx.chain.emplace(ctx.model, context, hidden, ctx.chain->rng);
      }
      for (int s = 0; s < options.samples; ++s) {
        out.push_back(posterior_sample(*ctx.chain, ctx.model, s == 0 ? burn : 0, options.thin));
      }
      break;
    }
    case Sampler::unsp: {
      const LayerEvents x = context.by_type(types);
      for (int s = 0; s < options.samples; ++s) {
        out.push_back(sample_unsp(post.unsp, x, context.window, ctx.rng));
      }
      break;
    }
    case Sampler::usap: {
      const UsapSampler sampler(post.usap, context.by_type(types), context.window);
      for (int s = 0; s < options.samples; ++s) out.push_back(sampler.draw(ctx.rng));
      break;
    }
  }
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

PredictionRecord predict_next(const Posteriors& post, const EventSeq& seq, std::size_t n,
                              PredictContext& ctx, const PredictOptions& options) {
  if (options.samples < 1) throw ArgumentError("predict_next: need at least one sample");
  if (n < 1 || n >= seq.events.size()) {
    throw ArgumentError("predict_next: context length must be in [1, events - 1]");
  }
  const EventSeq context = seq.prefix(n);
  const ObservedEvent truth = seq.events[n];
  PredictionRecord rec;
  rec.seq_id = ctx.seq_id;
  rec.n = n + 1;
  rec.t_true = truth.t;
  rec.k_true = truth.type;
  rec.sampler = options.sampler;
  rec.samples = options.samples;

  // Phase 1: refresh the top rates from S draws.
  std::vector<Layers> draws;
  rec.wall_ms += draw_posterior(post, context, ctx, options, draws);
  std::vector<std::vector<std::size_t>> counts;
  for (const auto& z : draws) {
    std::vector<std::size_t> c;
    for (const auto& ts : z.back()) c.push_back(ts.size());
    counts.push_back(std::move(c));
  }
  ctx.model.top_rates = top_rate_mle(counts, context.window);

  // Phase 2: fresh draws, one simulated future each.
  rec.wall_ms += draw_posterior(post, context, ctx, options, draws);
  RngStream future(options.seed, ctx.seq_id, Purpose::future, n);
  std::vector<double> times;
  std::vector<int> types;
  const double t_n = context.window;
  for (const auto& z : draws) {
    double horizon = options.horizon_factor * seq.window;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      const auto next = simulate_future(ctx.model, z, t_n, horizon, future);
      if (next) {
        times.push_back(next->t);
        types.push_back(next->type);
        break;
      }
      horizon *= 2.0;
    }
  }
  if (times.empty()) {
    rec.failed = true;
    return rec;
  }
  rec.t_hat = mean_time(times);
  rec.k_hat = majority_type(types, post.model.count(0));
  return rec;
}

std::vector<PredictionRecord> predict_sequence(const Posteriors& post, const EventSeq& seq,
                                               std::size_t seq_id, const PredictOptions& options) {
  std::vector<PredictionRecord> out;
  PredictContext ctx = make_context(post, seq_id, options);
  for (std::size_t n = 1; n < seq.events.size(); ++n) {
    out.push_back(predict_next(post, seq, n, ctx, options));
  }
  return out;
}

std::vector<PredictionRecord> predict_dataset(const Posteriors& post,
                                              const std::vector<EventSeq>& data,
                                              const PredictOptions& options) {
  std::vector<std::vector<PredictionRecord>> per(data.size());
  parallel_for(data.size(),
               [&](std::size_t i) { per[i] = predict_sequence(post, data[i], i, options); });
  std::vector<PredictionRecord> out;
  for (auto& p : per) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Score score(const std::vector<PredictionRecord>& records) {
  Score s;
  double sq = 0.0;
  std::size_t hits = 0;
  for (const auto& r : records) {
    s.wall_ms += r.wall_ms;
    if (r.failed) {
      ++s.failures;
      continue;
    }
    ++s.scored;
    sq += (r.t_hat - r.t_true) * (r.t_hat - r.t_true);
    if (r.k_hat == r.k_true) ++hits;
  }
  if (s.scored == 0) throw ArgumentError("score: no non-failure records");
  s.rmse = std::sqrt(sq / static_cast<double>(s.scored));
  s.accuracy = static_cast<double>(hits) / static_cast<double>(s.scored);
  return s;
}

}  // namespace nspvi
