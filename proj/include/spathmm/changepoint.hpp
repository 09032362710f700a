#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spathmm/decode.hpp"

namespace spathmm {

/// M equally long categorical sequences (values 1..n_categories) treated as
/// repeated observations of one regime-switch process.
struct TrajectoryBundle {
  int n_trajectories = 0;
  int n_times = 0;
  int n_categories = 0;
  std::vector<int> states;  // row-major M x T, 1-based

  int at(int m, int t) const {
    return states[static_cast<std::size_t>(m) * static_cast<std::size_t>(n_times) +
                  static_cast<std::size_t>(t)];
  }
};

TrajectoryBundle make_bundle(std::vector<int> states, int n_trajectories, int n_times,
                             int n_categories);
/// Convenience wrapper over equally long decoded trajectories.
TrajectoryBundle make_bundle(std::span<const StateTrajectory> trajectories, int n_categories);

struct ChangepointConfig {
  int n_sweeps = 2000;
  int n_burnin = 500;
  std::uint64_t seed = 0;
  double emission_alpha = 1.0;  // Dirichlet prior per emission row
  double q_alpha = 1.0;         // Beta prior on the switch probability
  double q_beta = 1.0;
};

/// Posterior summary of the two-state left-to-right HMM. The change point of
/// one hidden process is its first time in state 2; index T (zero-based) of
/// changepoint_distribution is the "never switched" outcome. Processes start
/// in the pre-regime, so time 1 carries no change-point mass.
struct ChangepointFit {
  int n_times = 0;
  int n_categories = 0;
  std::vector<double> emission;  // 2 x S posterior means, rows sum to 1
  double switch_prob = 0.0;      // posterior mean q
  std::vector<double> changepoint_distribution;  // length T+1, sums to 1
  int map_changepoint = 0;       // 1..T+1 (T+1 = never switched)
  int interval_low = 0;          // central 95% interval, same 1-based scale
  int interval_high = 0;
  bool degenerate = false;       // bundle had a single repeated category
};

/// Gibbs sampler alternating per-trajectory FFBS (all trajectories share the
/// emission matrix and q, each has its own hidden process), Dirichlet emission
/// updates, and a Beta update of q.
ChangepointFit fit_changepoint(const TrajectoryBundle& bundle, const ChangepointConfig& cfg = {});

}  // namespace spathmm
