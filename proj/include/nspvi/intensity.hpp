#ifndef NSPVI_INTENSITY_HPP
#define NSPVI_INTENSITY_HPP

#include <span>
#include <string_view>
#include <vector>

#include "nspvi/weibull.hpp"

namespace nspvi {

enum class KernelDirection {
  forward,   // phi(t - anchor): fires after the anchor
  backward,  // phi(anchor - t): fires before the anchor
};

struct KernelTerm {
  WeibullKernel kernel;
  double anchor = 0.0;
  KernelDirection direction = KernelDirection::forward;

  double at(double t) const;
  // Integral over (a, b], closed form.
  double integral(double a, double b) const;
};

// Intensity on (begin, end] for one left-open piece: a constant plus kernel terms.
struct CifPiece {
  double begin = 0.0;
  double end = 0.0;
  double constant = 0.0;
  std::vector<KernelTerm> terms;

  double at(double t) const;
  double integral(double a, double b) const;
};

// Nonnegative intensity on (begin, end] made of contiguous pieces whose
// cumulative is available in closed form.
class PiecewiseCif {
 public:
  PiecewiseCif() = default;
  // Single piece covering (begin, end].
  PiecewiseCif(double begin, double end, double constant = 0.0);
  explicit PiecewiseCif(std::vector<CifPiece> pieces);

  void add_term(const KernelTerm& term);  // to every piece

  double begin() const { return pieces_.empty() ? 0.0 : pieces_.front().begin; }
  double end() const { return pieces_.empty() ? 0.0 : pieces_.back().end; }
  std::span<const CifPiece> pieces() const { return pieces_; }
  std::vector<double> breakpoints() const;

  // Zero outside (begin, end].
  double operator()(double t) const;
  double cumulative(double a, double b) const;
  double total() const { return cumulative(begin(), end()); }

 private:
  std::vector<CifPiece> pieces_;
};

// sum_i log cif(t_i) - integral of cif over its support. `times` must lie in
// (cif.begin(), cif.end()]. Throws LogOfZeroError naming `label` when an event
// sits where the intensity is zero.
double poisson_loglik(std::span<const double> times, const PiecewiseCif& cif,
                      std::string_view label = {});

}  // namespace nspvi

#endif  // NSPVI_INTENSITY_HPP
