#include "nspvi/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nspvi/error.hpp"

namespace nspvi {

double KernelTerm::at(double t) const {
  const double x = direction == KernelDirection::forward ? t - anchor : anchor - t;
  return weibull_eval(kernel, x);
}

double KernelTerm::integral(double a, double b) const {
  if (direction == KernelDirection::forward) {
    return weibull_integral(kernel, a - anchor, b - anchor);
  }
  return weibull_integral(kernel, anchor - b, anchor - a);
}

double CifPiece::at(double t) const {
  double v = constant;
  for (const auto& term : terms) {
    v += term.at(t);
  }
  return v;
}

double CifPiece::integral(double a, double b) const {
  a = std::max(a, begin);
  b = std::min(b, end);
  if (b <= a) {
    return 0.0;
  }
  double v = constant * (b - a);
  for (const auto& term : terms) {
    v += term.integral(a, b);
  }
  return v;
}

PiecewiseCif::PiecewiseCif(double begin, double end, double constant) {
  if (end < begin) {
    throw ArgumentError("PiecewiseCif: end precedes begin");
  }
  pieces_.push_back(CifPiece{begin, end, constant, {}});
}

PiecewiseCif::PiecewiseCif(std::vector<CifPiece> pieces) : pieces_(std::move(pieces)) {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (pieces_[i].end < pieces_[i].begin ||
        (i > 0 && pieces_[i].begin != pieces_[i - 1].end)) {
      throw ArgumentError("PiecewiseCif: pieces must be contiguous and ordered");
    }
  }
}

void PiecewiseCif::add_term(const KernelTerm& term) {
  for (auto& piece : pieces_) {
    piece.terms.push_back(term);
  }
}

std::vector<double> PiecewiseCif::breakpoints() const {
  std::vector<double> b;
  for (const auto& piece : pieces_) {
    b.push_back(piece.begin);
  }
  if (!pieces_.empty()) {
    b.push_back(pieces_.back().end);
  }
  return b;
}

double PiecewiseCif::operator()(double t) const {
  // Pieces are left-open: t belongs to the piece with begin < t <= end.
  auto it = std::lower_bound(pieces_.begin(), pieces_.end(), t,
                             [](const CifPiece& p, double v) { return p.end < v; });
  if (it == pieces_.end() || t <= it->begin) {
    return 0.0;
  }
  return it->at(t);
}

double PiecewiseCif::cumulative(double a, double b) const {
  if (a > b) {
    throw ArgumentError("PiecewiseCif::cumulative: a > b");
  }
  double total = 0.0;
  for (const auto& piece : pieces_) {
    if (piece.end <= a) {
      continue;
    }
    if (piece.begin >= b) {
      break;
    }
    total += piece.integral(a, b);
  }
  return total;
}

double poisson_loglik(std::span<const double> times, const PiecewiseCif& cif,
                      std::string_view label) {
  double ll = 0.0;
  for (double t : times) {
    const double v = cif(t);
    if (!(v > 0.0)) {
      std::ostringstream msg;
      msg << "log of zero intensity at t = " << t;
      if (!label.empty()) {
        msg << " in process " << label;
      }
      throw LogOfZeroError(msg.str());
    }
    ll += std::log(v);
  }
  return ll - cif.total();
}

}  // namespace nspvi
