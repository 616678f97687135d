#ifndef NSPVI_SIMULATE_HPP
#define NSPVI_SIMULATE_HPP

#include <functional>

#include "nspvi/intensity.hpp"
#include "nspvi/model.hpp"
#include "nspvi/rng.hpp"

namespace nspvi {

inline constexpr double kInversionTolerance = 1e-10;
inline constexpr int kInversionMaxIterations = 200;

// Poisson process with intensity `cif` on (cif.begin(), cif.end()] by inverting
// the cumulative intensity against unit exponential gaps. Constant pieces are
// inverted in closed form; other pieces by a bracketed root search.
Times sample_poisson(const PiecewiseCif& cif, RngStream& rng);

// Ogata-style thinning of a rate-`bound` homogeneous process. Throws
// DominationError if the intensity is observed above `bound`.
Times sample_thinning(const std::function<double(double)>& cif, double bound, double begin,
                      double end, RngStream& rng);
Times sample_thinning(const PiecewiseCif& cif, double bound, RngStream& rng);

struct DnspSample {
  EventSeq x;
  Layers z;  // z[0] holds x by type
};

// Top-down generative process on (0, window].
DnspSample generate_dnsp(const ModelParams& model, double window, RngStream& rng);

}  // namespace nspvi

#endif  // NSPVI_SIMULATE_HPP
