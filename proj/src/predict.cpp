#include "spathmm/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "spathmm/errors.hpp"
#include "spathmm/math_util.hpp"

namespace spathmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int total_draws_checked(const PosteriorDraws& draws, const ParamLayout& layout) {
  if (draws.dim != layout.dim()) {
    fail(ErrorCode::LengthMismatch, "draw dimension does not match the layout");
  }
  const int total = draws.n_chains * draws.n_draws;
  if (total < 1) fail(ErrorCode::DegenerateInput, "no posterior draws");
  return total;
}

void check_trajectories(std::span<const StateTrajectory> trajectories, int total_draws,
                        int n_times, int n_states) {
  if (static_cast<int>(trajectories.size()) != total_draws) {
    fail(ErrorCode::MissingTrajectory,
         "need one trajectory per posterior draw: have " +
             std::to_string(trajectories.size()) + ", expected " + std::to_string(total_draws));
  }
  for (const auto& traj : trajectories) {
    if (static_cast<int>(traj.states.size()) != n_times) {
      fail(ErrorCode::MissingTrajectory, "trajectory length does not match the panel");
    }
    for (int s : traj.states) {
      if (s < 1 || s > n_states) {
        fail(ErrorCode::IndexOutOfRange, "trajectory state " + std::to_string(s) +
                                             " outside 1.." + std::to_string(n_states));
      }
    }
  }
}

// P(y=1 | state s, site i, month m) for one draw, laid out [s][i][m].
std::vector<double> death_prob_table(const ModelParams& p) {
  const int s_count = p.n_states;
  const int n = p.n_sites;
  std::vector<double> table(static_cast<std::size_t>(s_count) * n * 12);
  for (int s = 0; s < s_count; ++s) {
    for (int i = 0; i < n; ++i) {
      const double base = p.mu[static_cast<std::size_t>(s)] +
                          p.lambda[static_cast<std::size_t>(i)] + p.phi_at(s, i);
      for (int m = 0; m < 12; ++m) {
        table[(static_cast<std::size_t>(s) * n + i) * 12 + m] =
            inv_logit(base + p.gamma[static_cast<std::size_t>(m)]);
      }
    }
  }
  return table;
}

}  // namespace

std::vector<int> modal_state_assignment(std::span<const StateTrajectory> trajectories,
                                        int n_times, int n_states) {
  if (trajectories.empty()) fail(ErrorCode::DegenerateInput, "no trajectories to pool");
  check_trajectories(trajectories, static_cast<int>(trajectories.size()), n_times, n_states);
  std::vector<int> counts(static_cast<std::size_t>(n_times) * n_states, 0);
  for (const auto& traj : trajectories) {
    for (int t = 0; t < n_times; ++t) {
      ++counts[static_cast<std::size_t>(t) * n_states + traj.states[static_cast<std::size_t>(t)] -
               1];
    }
  }
  std::vector<int> modal(static_cast<std::size_t>(n_times));
  for (int t = 0; t < n_times; ++t) {
    int best = 0;
    for (int s = 1; s < n_states; ++s) {
      if (counts[static_cast<std::size_t>(t) * n_states + s] >
          counts[static_cast<std::size_t>(t) * n_states + best]) {
        best = s;
      }
    }
    modal[static_cast<std::size_t>(t)] = best + 1;
  }
  return modal;
}

PredictiveSeries predictive_proportion(const ObservationPanel& panel, const ParamLayout& layout,
                                       const PosteriorDraws& draws,
                                       std::span<const StateTrajectory> trajectories,
                                       const PredictiveOptions& opts) {
  const int total = total_draws_checked(draws, layout);
  const int n = panel.n_sites();
  const int t_count = panel.n_times();
  const int s_count = layout.spec().n_states;
  check_trajectories(trajectories, total, t_count, s_count);
  if (opts.n_reps < 1) fail(ErrorCode::ConfigError, "n_reps must be positive");

  const int pooled = total * opts.n_reps;
  // samples[t * pooled + j]: one realized proportion per (draw, replication).
  std::vector<double> samples(static_cast<std::size_t>(t_count) * pooled);

  for (int k = 0; k < total; ++k) {
    const ModelParams p =
        layout.constrain(draws.draw_at(k / draws.n_draws, k % draws.n_draws));
    const auto table = death_prob_table(p);
    const auto& traj = trajectories[static_cast<std::size_t>(k)];
    for (int r = 0; r < opts.n_reps; ++r) {
      std::mt19937_64 rng(derive_seed(
          opts.seed, static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(opts.n_reps) + r));
      for (int t = 0; t < t_count; ++t) {
        const int s = traj.states[static_cast<std::size_t>(t)] - 1;
        const int m = panel.month_of(t) - 1;
        int deaths = 0;
        for (int i = 0; i < n; ++i) {
          const double p1 = table[(static_cast<std::size_t>(s) * n + i) * 12 + m];
          deaths += uniform01(rng) < p1 ? 1 : 0;
        }
        samples[static_cast<std::size_t>(t) * pooled + k * opts.n_reps + r] =
            static_cast<double>(deaths) / static_cast<double>(n);
      }
    }
  }

  PredictiveSeries series;
  series.n_times = t_count;
  series.n_samples = pooled;
  series.mean.resize(static_cast<std::size_t>(t_count));
  series.sd.resize(static_cast<std::size_t>(t_count));
  series.q025.resize(static_cast<std::size_t>(t_count));
  series.q975.resize(static_cast<std::size_t>(t_count));
  series.observed.resize(static_cast<std::size_t>(t_count));
  series.n_observed.resize(static_cast<std::size_t>(t_count));
  for (int t = 0; t < t_count; ++t) {
    const std::span<const double> row{samples.data() + static_cast<std::size_t>(t) * pooled,
                                      static_cast<std::size_t>(pooled)};
    series.mean[static_cast<std::size_t>(t)] = mean_of(row);
    series.sd[static_cast<std::size_t>(t)] = pooled > 1 ? std::sqrt(variance_of(row)) : 0.0;
    series.q025[static_cast<std::size_t>(t)] = quantile({row.begin(), row.end()}, 0.025);
    series.q975[static_cast<std::size_t>(t)] = quantile({row.begin(), row.end()}, 0.975);

    int seen = 0;
    int dead = 0;
    for (int i = 0; i < n; ++i) {
      if (!panel.missing(i, t)) {
        ++seen;
        dead += panel.y(i, t);
      }
    }
    series.n_observed[static_cast<std::size_t>(t)] = seen;
    series.observed[static_cast<std::size_t>(t)] =
        seen > 0 ? static_cast<double>(dead) / static_cast<double>(seen) : kNaN;
  }
  return series;
}

StateProbabilityMap state_probability_map(const ObservationPanel& panel,
                                          const ParamLayout& layout, const PosteriorDraws& draws,
                                          std::span<const StateTrajectory> trajectories,
                                          int state) {
  const int total = total_draws_checked(draws, layout);
  const int n = panel.n_sites();
  const int t_count = panel.n_times();
  const int s_count = layout.spec().n_states;
  if (state < 1 || state > s_count) {
    fail(ErrorCode::IndexOutOfRange, "state " + std::to_string(state) + " outside 1.." +
                                         std::to_string(s_count));
  }
  check_trajectories(trajectories, total, t_count, s_count);

  const auto modal = modal_state_assignment(trajectories, t_count, s_count);
  StateProbabilityMap map;
  map.state = state;
  for (int t = 0; t < t_count; ++t) {
    if (modal[static_cast<std::size_t>(t)] == state) map.assigned_times.push_back(t);
  }
  if (map.assigned_times.empty()) {
    fail(ErrorCode::EmptyState,
         "state " + std::to_string(state) + " is never the modal state");
  }

  int month_count[12] = {};
  for (int t : map.assigned_times) ++month_count[panel.month_of(t) - 1];

  map.value.assign(static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < total; ++k) {
    const ModelParams p =
        layout.constrain(draws.draw_at(k / draws.n_draws, k % draws.n_draws));
    for (int i = 0; i < n; ++i) {
      const double base = p.mu[static_cast<std::size_t>(state - 1)] +
                          p.lambda[static_cast<std::size_t>(i)] + p.phi_at(state - 1, i);
      double acc = 0.0;
      for (int m = 0; m < 12; ++m) {
        if (month_count[m] > 0) {
          acc += month_count[m] * inv_logit(base + p.gamma[static_cast<std::size_t>(m)]);
        }
      }
      map.value[static_cast<std::size_t>(i)] += acc;
    }
  }
  const double denom =
      static_cast<double>(total) * static_cast<double>(map.assigned_times.size());
  for (double& v : map.value) v /= denom;

  map.fully_missing.assign(static_cast<std::size_t>(n), 1);
  for (int i = 0; i < n; ++i) {
    for (int t : map.assigned_times) {
      if (!panel.missing(i, t)) {
        map.fully_missing[static_cast<std::size_t>(i)] = 0;
        break;
      }
    }
  }
  return map;
}

MissingnessCurves missingness_curve(const ParamLayout& layout, const PosteriorDraws& draws,
                                    int n_times) {
  const int total = total_draws_checked(draws, layout);
  if (n_times < 1) fail(ErrorCode::DegenerateInput, "need at least one time point");
  const int s_count = layout.spec().n_states;

  MissingnessCurves curves;
  curves.n_states = s_count;
  curves.n_times = n_times;
  const std::size_t cells = static_cast<std::size_t>(s_count) * n_times;
  curves.mean.resize(cells);
  curves.q025.resize(cells);
  curves.q975.resize(cells);

  std::vector<double> xi(static_cast<std::size_t>(total) * s_count);
  std::vector<double> beta(xi.size());
  for (int k = 0; k < total; ++k) {
    const ModelParams p =
        layout.constrain(draws.draw_at(k / draws.n_draws, k % draws.n_draws));
    for (int s = 0; s < s_count; ++s) {
      xi[static_cast<std::size_t>(k) * s_count + s] = p.xi[static_cast<std::size_t>(s)];
      beta[static_cast<std::size_t>(k) * s_count + s] = p.beta[static_cast<std::size_t>(s)];
    }
  }

  std::vector<double> work(static_cast<std::size_t>(total));
  for (int s = 0; s < s_count; ++s) {
    for (int t = 0; t < n_times; ++t) {
      const double tp = n_times > 1 ? static_cast<double>(t) / (n_times - 1) : 0.0;
      for (int k = 0; k < total; ++k) {
        work[static_cast<std::size_t>(k)] =
            inv_logit(xi[static_cast<std::size_t>(k) * s_count + s] +
                      beta[static_cast<std::size_t>(k) * s_count + s] * tp);
      }
      const std::size_t at = static_cast<std::size_t>(s) * n_times + t;
      curves.mean[at] = mean_of(work);
      curves.q025[at] = quantile(work, 0.025);
      curves.q975[at] = quantile(work, 0.975);
    }
  }
  return curves;
}

std::vector<StateSummaryRow> state_summary_table(const ObservationPanel& panel,
                                                 const ParamLayout& layout,
                                                 const PosteriorDraws& draws,
                                                 std::span<const StateTrajectory> trajectories) {
  const int total = total_draws_checked(draws, layout);
  const int n = panel.n_sites();
  const int t_count = panel.n_times();
  const int s_count = layout.spec().n_states;
  check_trajectories(trajectories, total, t_count, s_count);
  const auto modal = modal_state_assignment(trajectories, t_count, s_count);

  std::vector<StateSummaryRow> rows(static_cast<std::size_t>(s_count));
  std::vector<double> death_draws(static_cast<std::size_t>(total));
  std::vector<double> miss_draws(static_cast<std::size_t>(total));

  for (int s = 1; s <= s_count; ++s) {
    auto& row = rows[static_cast<std::size_t>(s - 1)];
    row.state = s;
    std::vector<int> assigned;
    for (int t = 0; t < t_count; ++t) {
      if (modal[static_cast<std::size_t>(t)] == s) assigned.push_back(t);
    }
    row.n_times_assigned = static_cast<int>(assigned.size());
    if (assigned.empty()) {
      row.empty = true;
      row.observed_death = row.death_mean = row.death_q025 = row.death_q975 = kNaN;
      row.observed_missing = row.missing_mean = row.missing_q025 = row.missing_q975 = kNaN;
      continue;
    }

    long long n_obs = 0, n_dead = 0, n_eligible = 0, n_miss = 0;
    for (int t : assigned) {
      for (int i = 0; i < n; ++i) {
        if (!panel.missing(i, t)) {
          ++n_obs;
          n_dead += panel.y(i, t);
        }
        if (t >= panel.first_obs(i)) {
          ++n_eligible;
          n_miss += panel.missing(i, t) ? 1 : 0;
        }
      }
    }
    row.observed_death =
        n_obs > 0 ? static_cast<double>(n_dead) / static_cast<double>(n_obs) : kNaN;
    row.observed_missing =
        n_eligible > 0 ? static_cast<double>(n_miss) / static_cast<double>(n_eligible) : kNaN;

    int month_count[12] = {};
    for (int t : assigned) ++month_count[panel.month_of(t) - 1];

    for (int k = 0; k < total; ++k) {
      const ModelParams p =
          layout.constrain(draws.draw_at(k / draws.n_draws, k % draws.n_draws));
      double death = 0.0;
      for (int i = 0; i < n; ++i) {
        const double base = p.mu[static_cast<std::size_t>(s - 1)] +
                            p.lambda[static_cast<std::size_t>(i)] + p.phi_at(s - 1, i);
        for (int m = 0; m < 12; ++m) {
          if (month_count[m] > 0) {
            death += month_count[m] * inv_logit(base + p.gamma[static_cast<std::size_t>(m)]);
          }
        }
      }
      death_draws[static_cast<std::size_t>(k)] =
          death / (static_cast<double>(n) * static_cast<double>(assigned.size()));

      double miss = 0.0;
      for (int t : assigned) {
        miss += inv_logit(p.xi[static_cast<std::size_t>(s - 1)] +
                          p.beta[static_cast<std::size_t>(s - 1)] * panel.scaled_time(t));
      }
      miss_draws[static_cast<std::size_t>(k)] = miss / static_cast<double>(assigned.size());
    }
    row.death_mean = mean_of(death_draws);
    row.death_q025 = quantile(death_draws, 0.025);
    row.death_q975 = quantile(death_draws, 0.975);
    row.missing_mean = mean_of(miss_draws);
    row.missing_q025 = quantile(miss_draws, 0.025);
    row.missing_q975 = quantile(miss_draws, 0.975);
  }
  return rows;
}

SeasonalSummary seasonal_summary(const ParamLayout& layout, const PosteriorDraws& draws) {
  const int total = total_draws_checked(draws, layout);
  SeasonalSummary out;
  out.mean.resize(12);
  out.q25.resize(12);
  out.q75.resize(12);
  out.q025.resize(12);
  out.q975.resize(12);

  std::vector<double> gamma(static_cast<std::size_t>(total) * 12);
  for (int k = 0; k < total; ++k) {
    const ModelParams p =
        layout.constrain(draws.draw_at(k / draws.n_draws, k % draws.n_draws));
    for (int m = 0; m < 12; ++m) {
      gamma[static_cast<std::size_t>(k) * 12 + m] = p.gamma[static_cast<std::size_t>(m)];
    }
  }
  std::vector<double> work(static_cast<std::size_t>(total));
  for (int m = 0; m < 12; ++m) {
    for (int k = 0; k < total; ++k) {
      work[static_cast<std::size_t>(k)] = gamma[static_cast<std::size_t>(k) * 12 + m];
    }
    out.mean[static_cast<std::size_t>(m)] = mean_of(work);
    out.q25[static_cast<std::size_t>(m)] = quantile(work, 0.25);
    out.q75[static_cast<std::size_t>(m)] = quantile(work, 0.75);
    out.q025[static_cast<std::size_t>(m)] = quantile(work, 0.025);
    out.q975[static_cast<std::size_t>(m)] = quantile(work, 0.975);
  }
  return out;
}

}  // namespace spathmm
