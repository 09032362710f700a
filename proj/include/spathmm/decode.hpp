#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "spathmm/likelihood.hpp"
#include "spathmm/panel.hpp"
#include "spathmm/params.hpp"
#include "spathmm/sampler.hpp"

namespace spathmm {

/// Hidden-state sequence; states are 1-based (1..S) to match the serialized
/// artifacts.
struct StateTrajectory {
  enum class Kind { viterbi, sampled };
  Kind kind = Kind::viterbi;
  std::vector<int> states;
};

/// P(x_t = s | panel, p) for all t, row-major T x S; rows sum to 1.
std::vector<double> smoothed_marginals(const ObservationPanel& panel, const ModelSpec& spec,
                                       const ModelParams& p);
std::vector<double> smoothed_marginals(std::span<const double> omega, int n_times,
                                       const ModelParams& p);

/// Most probable trajectory; ties break toward the lower state index.
StateTrajectory viterbi(const ObservationPanel& panel, const ModelSpec& spec,
                        const ModelParams& p);
StateTrajectory viterbi(std::span<const double> omega, int n_times, const ModelParams& p);

/// Exact forward-filter backward-sample draw from P(x_{1:T} | panel, p).
StateTrajectory sample_trajectory(const ObservationPanel& panel, const ModelSpec& spec,
                                  const ModelParams& p, std::mt19937_64& rng);
StateTrajectory sample_trajectory(std::span<const double> omega, int n_times,
                                  const ModelParams& p, std::mt19937_64& rng);

/// Joint log-probability of a fixed trajectory (initial, transitions,
/// emissions); the quantity Viterbi maximizes.
double trajectory_logprob(std::span<const double> omega, int n_times, const ModelParams& p,
                          const StateTrajectory& traj);

/// Smoothed marginals averaged over posterior draws, with the per-time modal
/// state (ties to the lower state) and its averaged probability.
struct MapStateSummary {
  int n_times = 0;
  int n_states = 0;
  std::vector<double> avg_marginals;  // T x S
  std::vector<int> modal_state;       // 1-based
  std::vector<double> modal_prob;
};

MapStateSummary map_state_sequence(const ObservationPanel& panel, const ModelSpec& spec,
                                   const std::function<ModelParams(int)>& draw_at, int n_draws);

/// Pools every chain's kept draws through the layout's constrain map.
MapStateSummary map_state_sequence(const ObservationPanel& panel, const ParamLayout& layout,
                                   const PosteriorDraws& draws);

}  // namespace spathmm
