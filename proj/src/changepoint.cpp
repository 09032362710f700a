#include "spathmm/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>

#include "spathmm/errors.hpp"
#include "spathmm/math_util.hpp"

namespace spathmm {

namespace {

void check_bundle(const TrajectoryBundle& b) {
  if (b.n_trajectories < 1 || b.n_times < 1) {
    fail(ErrorCode::DegenerateInput, "bundle needs at least one trajectory and one time");
  }
  if (b.n_categories < 1) fail(ErrorCode::DegenerateInput, "bundle needs n_categories >= 1");
  const auto expected = static_cast<std::size_t>(b.n_trajectories) *
                        static_cast<std::size_t>(b.n_times);
  if (b.states.size() != expected) {
    fail(ErrorCode::LengthMismatch, "bundle holds " + std::to_string(b.states.size()) +
                                        " values, expected " + std::to_string(expected));
  }
  for (int v : b.states) {
    if (v < 1 || v > b.n_categories) {
      fail(ErrorCode::IndexOutOfRange,
           "trajectory value " + std::to_string(v) + " outside 1.." +
               std::to_string(b.n_categories));
    }
  }
}

double beta_variate(double a, double b, std::mt19937_64& rng) {
  const double x = gamma_variate(a, rng);
  const double y = gamma_variate(b, rng);
  return x / (x + y);
}

/// Forward-filter backward-sample one trajectory under the left-to-right chain
/// with rows (1-q, q) / (0, 1). The process starts in the pre-regime, so the
/// initial distribution is (1, 0) and the earliest possible switch is t=2.
/// Returns the 1-based first time in state 2, or T+1 when the sampled path
/// never leaves state 1.
int ffbs_first_switch(const TrajectoryBundle& b, int m, std::span<const double> emit, double q,
                      std::mt19937_64& rng, std::vector<double>& alpha1,
                      std::vector<double>& alpha2, std::vector<std::int8_t>& path) {
  const int n = b.n_times;
  const int ncat = b.n_categories;
  const double stay = 1.0 - q;

  alpha1[0] = 1.0;
  alpha2[0] = 0.0;
  for (int t = 1; t < n; ++t) {
    const int y = b.at(m, t) - 1;
    double a1 = alpha1[t - 1] * stay * emit[y];
    double a2 = (alpha1[t - 1] * q + alpha2[t - 1]) * emit[ncat + y];
    double norm = a1 + a2;
    if (norm <= 0.0) { a1 = 0.5; a2 = 0.5; norm = 1.0; }
    alpha1[t] = a1 / norm;
    alpha2[t] = a2 / norm;
  }

  path[n - 1] = uniform01(rng) < alpha2[n - 1] ? 2 : 1;
  for (int t = n - 2; t >= 0; --t) {
    if (path[t + 1] == 1) {
      path[t] = 1;  // state 2 is absorbing, so a later 1 pins every earlier step
    } else {
      const double w1 = alpha1[t] * q;
      const double w2 = alpha2[t];
      const double tot = w1 + w2;
      path[t] = (tot > 0.0 && uniform01(rng) * tot < w1) ? 1 : 2;
    }
  }

  for (int t = 0; t < n; ++t) {
    if (path[t] == 2) return t + 1;
  }
  return n + 1;
}

}  // namespace

TrajectoryBundle make_bundle(std::vector<int> states, int n_trajectories, int n_times,
                             int n_categories) {
  TrajectoryBundle b;
  b.n_trajectories = n_trajectories;
  b.n_times = n_times;
  b.n_categories = n_categories;
  b.states = std::move(states);
  check_bundle(b);
  return b;
}

TrajectoryBundle make_bundle(std::span<const StateTrajectory> trajectories, int n_categories) {
  if (trajectories.empty()) fail(ErrorCode::DegenerateInput, "empty trajectory span");
  const auto n_times = trajectories.front().states.size();
  std::vector<int> flat;
  flat.reserve(trajectories.size() * n_times);
  for (const auto& traj : trajectories) {
    if (traj.states.size() != n_times) {
      fail(ErrorCode::LengthMismatch, "trajectories differ in length");
    }
    flat.insert(flat.end(), traj.states.begin(), traj.states.end());
  }
  return make_bundle(std::move(flat), static_cast<int>(trajectories.size()),
                     static_cast<int>(n_times), n_categories);
}

ChangepointFit fit_changepoint(const TrajectoryBundle& bundle, const ChangepointConfig& cfg) {
  check_bundle(bundle);
  if (cfg.n_sweeps < 1) fail(ErrorCode::ConfigError, "n_sweeps must be positive");
  if (cfg.n_burnin < 0 || cfg.n_burnin >= cfg.n_sweeps) {
    fail(ErrorCode::ConfigError, "n_burnin must lie in [0, n_sweeps)");
  }
  if (!(cfg.emission_alpha > 0.0) || !(cfg.q_alpha > 0.0) || !(cfg.q_beta > 0.0)) {
    fail(ErrorCode::ConfigError, "prior hyperparameters must be positive");
  }

  const int n_traj = bundle.n_trajectories;
  const int n = bundle.n_times;
  const int ncat = bundle.n_categories;

  ChangepointFit fit;
  fit.n_times = n;
  fit.n_categories = ncat;
  fit.degenerate =
      std::all_of(bundle.states.begin(), bundle.states.end(),
                  [&](int v) { return v == bundle.states.front(); });

  // Current Gibbs state: uniform emission rows, even switch odds.
  std::vector<double> emit(2 * static_cast<std::size_t>(ncat), 1.0 / ncat);
  double q = 0.5;

  std::mt19937_64 master(derive_seed(cfg.seed, 0x6350));  // parameter updates
  std::vector<std::mt19937_64> traj_rng;                  // one stream per hidden process
  traj_rng.reserve(static_cast<std::size_t>(n_traj));
  for (int m = 0; m < n_traj; ++m) traj_rng.emplace_back(derive_seed(cfg.seed, m));

  std::vector<long long> counts_m(static_cast<std::size_t>(n_traj) * 2 * ncat);
  std::vector<int> first_switch(static_cast<std::size_t>(n_traj));
  std::vector<double> hist(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> emit_mean(emit.size(), 0.0);
  double q_mean = 0.0;
  int kept = 0;

#pragma omp parallel
  {
    std::vector<double> alpha1(static_cast<std::size_t>(n));
    std::vector<double> alpha2(static_cast<std::size_t>(n));
    std::vector<std::int8_t> path(static_cast<std::size_t>(n));

    for (int sweep = 0; sweep < cfg.n_sweeps; ++sweep) {
#pragma omp for schedule(static)
      for (int m = 0; m < n_traj; ++m) {
        first_switch[m] = ffbs_first_switch(bundle, m, emit, q, traj_rng[m], alpha1, alpha2, path);
        long long* cm = counts_m.data() + static_cast<std::size_t>(m) * 2 * ncat;
        std::fill(cm, cm + 2 * ncat, 0LL);
        for (int t = 0; t < n; ++t) {
          ++cm[(path[t] - 1) * ncat + (bundle.at(m, t) - 1)];
        }
      }

#pragma omp single
      {
        std::vector<long long> counts(2 * static_cast<std::size_t>(ncat), 0);
        long long switches = 0;
        long long stays = 0;
        for (int m = 0; m < n_traj; ++m) {
          const long long* cm = counts_m.data() + static_cast<std::size_t>(m) * 2 * ncat;
          for (int k = 0; k < 2 * ncat; ++k) counts[k] += cm[k];
          // The process starts in state 1, so switch opportunities are the
          // n-1 transitions observed after t=1.
          if (first_switch[m] <= n) {
            ++switches;
            stays += first_switch[m] - 2;
          } else {
            stays += n - 1;
          }
        }

        std::vector<double> row_alpha(static_cast<std::size_t>(ncat));
        for (int r = 0; r < 2; ++r) {
          for (int k = 0; k < ncat; ++k) {
            row_alpha[k] = cfg.emission_alpha + static_cast<double>(counts[r * ncat + k]);
          }
          const auto row = dirichlet_variate(row_alpha, master);
          std::copy(row.begin(), row.end(), emit.begin() + static_cast<std::size_t>(r) * ncat);
        }
        q = beta_variate(cfg.q_alpha + static_cast<double>(switches),
                         cfg.q_beta + static_cast<double>(stays), master);

        if (sweep >= cfg.n_burnin) {
          ++kept;
          for (int m = 0; m < n_traj; ++m) hist[static_cast<std::size_t>(first_switch[m] - 1)] += 1.0;
          for (std::size_t k = 0; k < emit.size(); ++k) emit_mean[k] += emit[k];
          q_mean += q;
        }
      }
    }
  }

  for (double& v : emit_mean) v /= kept;
  fit.emission = std::move(emit_mean);
  fit.switch_prob = q_mean / kept;
  const double total = static_cast<double>(kept) * n_traj;
  for (double& v : hist) v /= total;
  fit.changepoint_distribution = std::move(hist);

  const auto& dist = fit.changepoint_distribution;
  fit.map_changepoint =
      static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin()) + 1;
  double cdf = 0.0;
  fit.interval_low = 0;
  fit.interval_high = 0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    cdf += dist[k];
    if (fit.interval_low == 0 && cdf >= 0.025) fit.interval_low = static_cast<int>(k) + 1;
    if (fit.interval_high == 0 && cdf >= 0.975) fit.interval_high = static_cast<int>(k) + 1;
  }
  if (fit.interval_high == 0) fit.interval_high = n + 1;
  return fit;
}

}  // namespace spathmm
