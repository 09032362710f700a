#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spathmm/decode.hpp"
#include "spathmm/panel.hpp"
#include "spathmm/params.hpp"
#include "spathmm/sampler.hpp"

namespace spathmm {

/// Most frequent state per time across the paired trajectories (ties break
/// toward the lower state index). Returned states are 1-based.
std::vector<int> modal_state_assignment(std::span<const StateTrajectory> trajectories,
                                        int n_times, int n_states);

struct PredictiveOptions {
  int n_reps = 1;  // Bernoulli panel replications per posterior draw
  std::uint64_t seed = 0;
};

struct PredictiveSeries {
  int n_times = 0;
  int n_samples = 0;           // draws x replications pooled per time
  std::vector<double> mean;    // posterior-predictive nationwide proportion
  std::vector<double> sd;      // spread of the pooled realizations
  std::vector<double> q025;
  std::vector<double> q975;
  std::vector<double> observed;  // proportion over non-missing sites; NaN if none
  std::vector<int> n_observed;
};

/// Nationwide proportion of deaths under the posterior predictive: per draw
/// (and its paired trajectory) a Bernoulli panel is realized and averaged over
/// sites; mean and quantiles pool every draw x replication realization.
PredictiveSeries predictive_proportion(const ObservationPanel& panel, const ParamLayout& layout,
                                       const PosteriorDraws& draws,
                                       std::span<const StateTrajectory> trajectories,
                                       const PredictiveOptions& opts = {});

struct StateProbabilityMap {
  int state = 0;                            // 1-based queried state
  std::vector<double> value;                // per-site mean probability
  std::vector<std::uint8_t> fully_missing;  // site unobserved at every assigned time
  std::vector<int> assigned_times;          // zero-based times where the state is modal
};

/// Per-site death probability averaged over posterior draws and the times
/// where `state` is the modal state of the pooled trajectories.
StateProbabilityMap state_probability_map(const ObservationPanel& panel,
                                          const ParamLayout& layout, const PosteriorDraws& draws,
                                          std::span<const StateTrajectory> trajectories,
                                          int state);

struct MissingnessCurves {
  int n_states = 0;
  int n_times = 0;
  std::vector<double> mean;  // S x T row-major, invlogit(xi_s + beta_s * t')
  std::vector<double> q025;
  std::vector<double> q975;
};

MissingnessCurves missingness_curve(const ParamLayout& layout, const PosteriorDraws& draws,
                                    int n_times);

struct StateSummaryRow {
  int state = 0;
  bool empty = false;  // state never modal; remaining fields are NaN
  int n_times_assigned = 0;
  double observed_death = 0.0;  // NaN when no observed cell falls in the state
  double death_mean = 0.0;
  double death_q025 = 0.0;
  double death_q975 = 0.0;
  double observed_missing = 0.0;  // share of missing cells at t >= first_obs
  double missing_mean = 0.0;
  double missing_q025 = 0.0;
  double missing_q975 = 0.0;
};

/// Observed vs. model death and missingness rates conditioned on the per-time
/// modal state.
std::vector<StateSummaryRow> state_summary_table(const ObservationPanel& panel,
                                                 const ParamLayout& layout,
                                                 const PosteriorDraws& draws,
                                                 std::span<const StateTrajectory> trajectories);

struct SeasonalSummary {
  std::vector<double> mean;  // 12 entries, sums to ~0
  std::vector<double> q25;
  std::vector<double> q75;
  std::vector<double> q025;
  std::vector<double> q975;
};

SeasonalSummary seasonal_summary(const ParamLayout& layout, const PosteriorDraws& draws);

}  // namespace spathmm
