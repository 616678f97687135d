#include "nspvi/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nspvi/error.hpp"

namespace nspvi {

namespace {

// Solve piece.integral(lo, t) = target for t in (lo, hi]. Newton steps are
// taken only while they stay inside the shrinking bracket; otherwise bisect.
double invert_piece(const CifPiece& piece, double lo, double hi, double target) {
  double a = lo;
  double b = hi;
  double t = 0.5 * (a + b);
  for (int iter = 0; iter < kInversionMaxIterations; ++iter) {
    const double f = piece.integral(lo, t) - target;
    if (f > 0.0) {
      b = t;
    } else {
      a = t;
    }
    if (b - a < kInversionTolerance) {
      return b;
    }
    const double rate = piece.at(t);
    double next = rate > 0.0 ? t - f / rate : a - 1.0;
    if (!(next > a && next < b)) {
      next = 0.5 * (a + b);
    } else if (std::abs(next - t) < 0.25 * kInversionTolerance) {
      return next;
    }
    t = next;
  }
  throw NumericError("sample_poisson: inversion did not converge within " +
                     std::to_string(kInversionMaxIterations) + " iterations");
}

}  // namespace

Times sample_poisson(const PiecewiseCif& cif, RngStream& rng) {
  Times out;
  double need = rng.exponential();
  for (const auto& piece : cif.pieces()) {
    // Split the piece at kernel anchors so every sub-interval is smooth.
    std::vector<double> cuts{piece.begin, piece.end};
    for (const auto& term : piece.terms) {
      if (term.anchor > piece.begin && term.anchor < piece.end) {
        cuts.push_back(term.anchor);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      double cur = cuts[c];
      const double hi = cuts[c + 1];
      if (piece.terms.empty()) {
        if (piece.constant <= 0.0) {
          continue;
        }
        while (true) {
          const double t = cur + need / piece.constant;
          if (t > hi) {
            need -= piece.constant * (hi - cur);
            break;
          }
          out.push_back(t);
          cur = t;
          need = rng.exponential();
        }
        continue;
      }
      while (true) {
        const double mass = piece.integral(cur, hi);
        if (need > mass) {
          need -= mass;
          break;
        }
        const double t = invert_piece(piece, cur, hi, need);
        out.push_back(t);
        cur = t;
        need = rng.exponential();
      }
    }
  }
  return out;
}

Times sample_thinning(const std::function<double(double)>& cif, double bound, double begin,
                      double end, RngStream& rng) {
  Times out;
  if (!(bound > 0.0)) {
    return out;
  }
  double t = begin;
  while (true) {
    t += rng.exponential() / bound;
    if (t > end) {
      break;
    }
    const double v = cif(t);
    if (v > bound * (1.0 + 1e-12)) {
      throw DominationError("sample_thinning: intensity " + std::to_string(v) +
                            " exceeds bound " + std::to_string(bound) + " at t = " +
                            std::to_string(t));
    }
    if (rng.uniform() * bound < v) {
      out.push_back(t);
    }
  }
  return out;
}

Times sample_thinning(const PiecewiseCif& cif, double bound, RngStream& rng) {
  return sample_thinning([&cif](double t) { return cif(t); }, bound, cif.begin(), cif.end(), rng);
}

DnspSample generate_dnsp(const ModelParams& model, double window, RngStream& rng) {
  const int depth = model.depth();
  DnspSample s;
  s.z = empty_layers(model.counts);
  static const LayerEvents kNone;
  for (int l = depth; l >= 0; --l) {
    const auto& parents = l == depth ? kNone : s.z[static_cast<std::size_t>(l + 1)];
    for (int k = 0; k < model.count(l); ++k) {
      s.z[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] =
          sample_poisson(rpp_intensity(model, l, k, parents, 0.0, window), rng);
    }
  }
  s.x.window = window;
  for (int k = 0; k < model.count(0); ++k) {
    for (double t : s.z[0][static_cast<std::size_t>(k)]) {
      s.x.events.push_back({t, k + 1});
    }
  }
  std::stable_sort(s.x.events.begin(), s.x.events.end(),
                   [](const ObservedEvent& a, const ObservedEvent& b) { return a.t < b.t; });
  return s;
}

}  // namespace nspvi
