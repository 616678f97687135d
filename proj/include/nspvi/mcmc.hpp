#ifndef NSPVI_MCMC_HPP
#define NSPVI_MCMC_HPP

#include <cstddef>
#include <cstdint>

#include "nspvi/model.hpp"
#include "nspvi/rng.hpp"

namespace nspvi {

inline constexpr int kDefaultBurnIn = 100;
inline constexpr int kDefaultThin = 10;

// Chain over the hidden events of one sequence. Every hidden process keeps
// its real and its virtual events in separate sorted lists; layer 0 of `real`
// holds the observations and never changes.
struct ChainState {
  Layers real;
  Layers virt;          // virt[0] unused
  double window = 1.0;
  double target = 0.0;  // cached log p(x, z) + auxiliary term
  RngStream rng;

  ChainState() = default;
  // Starts with no hidden events, or with the given real events in layers 1..L.
  ChainState(const ModelParams& model, const EventSeq& x, RngStream rng);
  ChainState(const ModelParams& model, const EventSeq& x, const Layers& hidden, RngStream rng);

  int depth() const { return static_cast<int>(real.size()) - 1; }
  std::size_t event_count(int layer, int k) const;
};

struct TargetDecomposition {
  double joint = 0.0;      // log p(x, z)
  double auxiliary = 0.0;  // sum over hidden processes of log q~(virtual | real below)
  double total() const { return joint + auxiliary; }
};

// Full recompute; an impossible configuration yields -inf in `joint`.
TargetDecomposition target_decomposition(const ChainState& state, const ModelParams& model);

struct CycleOptions {
  bool reject_all = false;  // testing hook: every flip and swap is rejected
};

// Gibbs step: redraw the virtual events of (layer, k) from the virtual intensity.
void resample_virtual(ChainState& state, const ModelParams& model, int layer, int k);

// Change of the target when event `index` of (layer, k) changes label. `index`
// counts within the event's current label list. -inf where the new state is
// impossible.
double flip_delta(const ChainState& state, const ModelParams& model, int layer, int k,
                  bool currently_real, std::size_t index);

// Metropolis moves; return true on acceptance.
bool flip_move(ChainState& state, const ModelParams& model, int layer, int k,
               const CycleOptions& options = {});
bool swap_move(ChainState& state, const ModelParams& model, int layer, int k,
               const CycleOptions& options = {});

// One resample, 3 flips, 1 swap, 3 flips, 1 swap for every hidden process in
// (layer, k) order.
void mcmc_cycle(ChainState& state, const ModelParams& model, const CycleOptions& options = {});

// Refreshes the cached target for the current model, runs burn_in + thin
// cycles and returns the real events (layer 0 = observations).
Layers posterior_sample(ChainState& state, const ModelParams& model, int burn_in, int thin);

// Total number of cycles run by this process (all threads).
std::uint64_t mcmc_cycle_count();

}  // namespace nspvi

#endif  // NSPVI_MCMC_HPP
