#include "spathmm/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spathmm/errors.hpp"
#include "spathmm/math_util.hpp"

namespace spathmm {

namespace {

std::size_t uz(int v) { return static_cast<std::size_t>(v); }

void check_sites(const ObservationPanel& panel, const ModelParams& p) {
  if (p.n_sites != panel.n_sites())
    fail(ErrorCode::LengthMismatch, "params built for " + std::to_string(p.n_sites) +
                                        " sites, panel has " + std::to_string(panel.n_sites()));
}

std::vector<double> build_omega(const ObservationPanel& panel, const ModelSpec& spec,
                                const ModelParams& p) {
  check_sites(panel, p);
  EmissionContext ctx = make_emission_context(panel, spec);
  return emission_matrix(ctx, p);
}

// Forward pass only (FFBS does not need the backward recursion).
std::vector<double> forward_log_alpha(std::span<const double> omega, int n_times,
                                      const ModelParams& p) {
  const int s_count = p.n_states;
  std::vector<double> la(uz(n_times) * uz(s_count));
  std::vector<double> work(uz(s_count));
  for (int s = 0; s < s_count; ++s)
    la[uz(s)] = std::log(p.rho[uz(s)]) + omega[uz(s)];
  for (int t = 1; t < n_times; ++t) {
    const double* prev = la.data() + uz(t - 1) * uz(s_count);
    double* cur = la.data() + uz(t) * uz(s_count);
    for (int s = 0; s < s_count; ++s) {
      for (int s2 = 0; s2 < s_count; ++s2)
        work[uz(s2)] = prev[uz(s2)] + std::log(p.a_at(s2, s));
      cur[uz(s)] = log_sum_exp(work) + omega[uz(t) * uz(s_count) + uz(s)];
    }
  }
  return la;
}

// Draw from weights given as log-scores; ties and rounding resolve toward the
// lower index by construction of the cumulative scan.
int sample_categorical(std::span<const double> logw, std::mt19937_64& rng) {
  const double norm = log_sum_exp(logw);
  const double u = uniform01(rng);
  double cum = 0.0;
  const int k = static_cast<int>(logw.size());
  for (int s = 0; s < k; ++s) {
    cum += std::exp(logw[uz(s)] - norm);
    if (u < cum) return s;
  }
  return k - 1;
}

}  // namespace

std::vector<double> smoothed_marginals(std::span<const double> omega, int n_times,
                                       const ModelParams& p) {
  return forward_backward(omega, n_times, p).gamma;
}

std::vector<double> smoothed_marginals(const ObservationPanel& panel, const ModelSpec& spec,
                                       const ModelParams& p) {
  return smoothed_marginals(build_omega(panel, spec, p), panel.n_times(), p);
}

StateTrajectory viterbi(std::span<const double> omega, int n_times, const ModelParams& p) {
  const int s_count = p.n_states;
  std::vector<double> delta(uz(s_count)), next(uz(s_count));
  std::vector<int> psi(uz(n_times) * uz(s_count), 0);
  for (int s = 0; s < s_count; ++s)
    delta[uz(s)] = std::log(p.rho[uz(s)]) + omega[uz(s)];
  for (int t = 1; t < n_times; ++t) {
    for (int s = 0; s < s_count; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int s2 = 0; s2 < s_count; ++s2) {
        const double v = delta[uz(s2)] + std::log(p.a_at(s2, s));
        if (v > best) {  // strict: ties keep the lower predecessor
          best = v;
          arg = s2;
        }
      }
      next[uz(s)] = best + omega[uz(t) * uz(s_count) + uz(s)];
      psi[uz(t) * uz(s_count) + uz(s)] = arg;
    }
    delta.swap(next);
  }

  StateTrajectory traj;
  traj.kind = StateTrajectory::Kind::viterbi;
  traj.states.assign(uz(n_times), 1);
  int cur = 0;
  for (int s = 1; s < s_count; ++s)
    if (delta[uz(s)] > delta[uz(cur)]) cur = s;
  traj.states[uz(n_times - 1)] = cur + 1;
  for (int t = n_times - 1; t > 0; --t) {
    cur = psi[uz(t) * uz(s_count) + uz(cur)];
    traj.states[uz(t - 1)] = cur + 1;
  }
  return traj;
}

StateTrajectory viterbi(const ObservationPanel& panel, const ModelSpec& spec,
                        const ModelParams& p) {
  return viterbi(build_omega(panel, spec, p), panel.n_times(), p);
}

StateTrajectory sample_trajectory(std::span<const double> omega, int n_times,
                                  const ModelParams& p, std::mt19937_64& rng) {
  const int s_count = p.n_states;
  const std::vector<double> la = forward_log_alpha(omega, n_times, p);

  StateTrajectory traj;
  traj.kind = StateTrajectory::Kind::sampled;
  traj.states.assign(uz(n_times), 1);

  std::vector<double> logw(uz(s_count));
  std::copy_n(la.data() + uz(n_times - 1) * uz(s_count), uz(s_count), logw.begin());
  int cur = sample_categorical(logw, rng);
  traj.states[uz(n_times - 1)] = cur + 1;
  for (int t = n_times - 2; t >= 0; --t) {
    for (int s = 0; s < s_count; ++s)
      logw[uz(s)] = la[uz(t) * uz(s_count) + uz(s)] + std::log(p.a_at(s, cur));
    cur = sample_categorical(logw, rng);
    traj.states[uz(t)] = cur + 1;
  }
  return traj;
}

StateTrajectory sample_trajectory(const ObservationPanel& panel, const ModelSpec& spec,
                                  const ModelParams& p, std::mt19937_64& rng) {
  return sample_trajectory(build_omega(panel, spec, p), panel.n_times(), p, rng);
}

double trajectory_logprob(std::span<const double> omega, int n_times, const ModelParams& p,
                          const StateTrajectory& traj) {
  const int s_count = p.n_states;
  if (static_cast<int>(traj.states.size()) != n_times)
    fail(ErrorCode::LengthMismatch, "trajectory length " + std::to_string(traj.states.size()) +
                                        " != n_times " + std::to_string(n_times));
  for (int x : traj.states)
    if (x < 1 || x > s_count)
      fail(ErrorCode::IndexOutOfRange, "state " + std::to_string(x) + " outside 1.." +
                                           std::to_string(s_count));
  int cur = traj.states[0] - 1;
  double lp = std::log(p.rho[uz(cur)]) + omega[uz(cur)];
  for (int t = 1; t < n_times; ++t) {
    const int nxt = traj.states[uz(t)] - 1;
    lp += std::log(p.a_at(cur, nxt)) + omega[uz(t) * uz(p.n_states) + uz(nxt)];
    cur = nxt;
  }
  return lp;
}

MapStateSummary map_state_sequence(const ObservationPanel& panel, const ModelSpec& spec,
                                   const std::function<ModelParams(int)>& draw_at, int n_draws) {
  if (n_draws < 1)
    fail(ErrorCode::DegenerateInput, "map_state_sequence needs at least one draw");
  const EmissionContext ctx = make_emission_context(panel, spec);
  const int t_count = panel.n_times();
  const int s_count = spec.n_states;

  MapStateSummary out;
  out.n_times = t_count;
  out.n_states = s_count;
  out.avg_marginals.assign(uz(t_count) * uz(s_count), 0.0);

  for (int d = 0; d < n_draws; ++d) {
    const ModelParams p = draw_at(d);
    if (p.n_states != s_count)
      fail(ErrorCode::LengthMismatch, "draw " + std::to_string(d) + " has " +
                                          std::to_string(p.n_states) + " states, expected " +
                                          std::to_string(s_count));
    check_sites(panel, p);
    const std::vector<double> omega = emission_matrix(ctx, p);
    const std::vector<double> g = smoothed_marginals(omega, t_count, p);
    for (std::size_t k = 0; k < g.size(); ++k) out.avg_marginals[k] += g[k];
  }
  const double inv = 1.0 / static_cast<double>(n_draws);
  for (double& v : out.avg_marginals) v *= inv;

  out.modal_state.assign(uz(t_count), 1);
  out.modal_prob.assign(uz(t_count), 0.0);
  for (int t = 0; t < t_count; ++t) {
    const double* row = out.avg_marginals.data() + uz(t) * uz(s_count);
    int arg = 0;
    for (int s = 1; s < s_count; ++s)
      if (row[uz(s)] > row[uz(arg)]) arg = s;
    out.modal_state[uz(t)] = arg + 1;
    out.modal_prob[uz(t)] = row[uz(arg)];
  }
  return out;
}

MapStateSummary map_state_sequence(const ObservationPanel& panel, const ParamLayout& layout,
                                   const PosteriorDraws& draws) {
  if (draws.dim != layout.dim())
    fail(ErrorCode::LengthMismatch, "draw matrix dimension does not match the layout");
  const int total = draws.n_chains * draws.n_draws;
  return map_state_sequence(
      panel, layout.spec(),
      [&](int d) {
        return layout.constrain(draws.draw_at(d / draws.n_draws, d % draws.n_draws));
      },
      total);
}

}  // namespace spathmm
