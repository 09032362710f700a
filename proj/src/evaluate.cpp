#include "spathmm/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "spathmm/errors.hpp"
#include "spathmm/likelihood.hpp"
#include "spathmm/math_util.hpp"

namespace spathmm {

Holdout make_holdout(const ObservationPanel& panel, double fraction, std::uint64_t seed,
                     int replication) {
  if (!(fraction > 0.0) || !(fraction < 0.5)) {
    fail(ErrorCode::RangeError, "holdout fraction must lie in (0, 0.5)");
  }

  std::vector<std::pair<int, int>> candidates;
  for (int i = 0; i < panel.n_sites(); ++i) {
    for (int t = 0; t < panel.n_times(); ++t) {
      if (!panel.missing(i, t)) candidates.emplace_back(i, t);
    }
  }
  const auto n_obs = static_cast<long long>(candidates.size());
  const auto n_hold = std::llround(fraction * static_cast<double>(n_obs));
  if (n_hold < 1 || n_hold >= n_obs) {
    fail(ErrorCode::InsufficientObserved,
         "cannot hold out " + std::to_string(n_hold) + " of " + std::to_string(n_obs) +
             " observed cells");
  }

  // Partial Fisher-Yates over the observed cells.
  std::mt19937_64 rng(seed);
  for (long long k = 0; k < n_hold; ++k) {
    const auto j =
        k + static_cast<long long>(uniform01(rng) * static_cast<double>(n_obs - k));
    std::swap(candidates[static_cast<std::size_t>(k)], candidates[static_cast<std::size_t>(j)]);
  }
  candidates.resize(static_cast<std::size_t>(n_hold));
  std::sort(candidates.begin(), candidates.end());

  Holdout out{panel, HoldoutPlan{}};
  out.plan.fraction = fraction;
  out.plan.replication = replication;
  out.plan.seed = seed;
  out.plan.cells.reserve(candidates.size());
  for (const auto& [i, t] : candidates) {
    out.plan.cells.push_back({i, t, panel.y(i, t)});
    out.panel.mark_held_out(i, t);
  }
  return out;
}

PointwiseElpd pointwise_elpd(const ObservationPanel& masked, const ParamLayout& layout,
                             const PosteriorDraws& draws, const HoldoutPlan& plan) {
  if (plan.cells.empty()) fail(ErrorCode::DegenerateInput, "holdout plan holds no cells");
  if (draws.dim != layout.dim()) {
    fail(ErrorCode::LengthMismatch, "draw dimension does not match the layout");
  }
  const int total_draws = draws.n_chains * draws.n_draws;
  if (total_draws < 1) fail(ErrorCode::DegenerateInput, "no posterior draws");
  for (const auto& cell : plan.cells) {
    masked.validate_indices(cell.site, cell.time);
    if (!masked.held_out(cell.site, cell.time)) {
      fail(ErrorCode::CellNotHeldOut, "cell (" + std::to_string(cell.site) + ", " +
                                          std::to_string(cell.time) +
                                          ") is not held out in the masked panel");
    }
    if (cell.y_true != 0 && cell.y_true != 1) {
      fail(ErrorCode::RangeError, "held-out truth must be 0 or 1");
    }
  }

  const ModelSpec& spec = layout.spec();
  const EmissionContext ctx = make_emission_context(masked, spec);
  const int n_cells = static_cast<int>(plan.cells.size());
  const int s_count = spec.n_states;

  std::vector<double> sum_p(static_cast<std::size_t>(n_cells), 0.0);
  std::vector<double> sum_p2(static_cast<std::size_t>(n_cells), 0.0);

  for (int c = 0; c < draws.n_chains; ++c) {
    for (int k = 0; k < draws.n_draws; ++k) {
      const ModelParams p = layout.constrain(draws.draw_at(c, k));
      const auto omega = emission_matrix(ctx, p);
      const auto fb = forward_backward(omega, masked.n_times(), p);
      for (int cell = 0; cell < n_cells; ++cell) {
        const auto& hc = plan.cells[static_cast<std::size_t>(cell)];
        const int month0 = masked.month_of(hc.time) - 1;
        double pk = 0.0;
        for (int s = 0; s < s_count; ++s) {
          const double eta = p.mu[static_cast<std::size_t>(s)] +
                             p.lambda[static_cast<std::size_t>(hc.site)] +
                             p.phi_at(s, hc.site) + p.gamma[static_cast<std::size_t>(month0)];
          const double p1 = inv_logit(eta);
          pk += fb.gamma[static_cast<std::size_t>(hc.time) * s_count + s] *
                (hc.y_true ? p1 : 1.0 - p1);
        }
        sum_p[static_cast<std::size_t>(cell)] += pk;
        sum_p2[static_cast<std::size_t>(cell)] += pk * pk;
      }
    }
  }

  PointwiseElpd out;
  out.replication = plan.replication;
  out.plan_seed = plan.seed;
  out.cell_elpd.resize(static_cast<std::size_t>(n_cells));
  out.cell_mc_se.resize(static_cast<std::size_t>(n_cells));
  const double n = static_cast<double>(total_draws);
  for (int cell = 0; cell < n_cells; ++cell) {
    const auto uc = static_cast<std::size_t>(cell);
    const double mean = sum_p[uc] / n;
    out.cell_elpd[uc] = std::log(mean);
    double se = 0.0;
    if (total_draws > 1) {
      const double var = std::max(0.0, (sum_p2[uc] - n * mean * mean) / (n - 1.0));
      se = std::sqrt(var / n) / mean;  // delta method for log of a mean
    }
    out.cell_mc_se[uc] = se;
    out.total += out.cell_elpd[uc];
    out.total_mc_se += se * se;
  }
  out.total_mc_se = std::sqrt(out.total_mc_se);
  if (!std::isfinite(out.total)) {
    fail(ErrorCode::NonFinite, "total ELPD is not finite");
  }
  return out;
}

ElpdDiff pairwise_elpd_diff(std::span<const PointwiseElpd> a, std::span<const PointwiseElpd> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::DegenerateInput, "no replications to compare");
  if (a.size() != b.size()) {
    fail(ErrorCode::PlanMismatch, "replication counts differ: " + std::to_string(a.size()) +
                                      " vs " + std::to_string(b.size()));
  }
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (a[r].replication != b[r].replication || a[r].plan_seed != b[r].plan_seed ||
        a[r].cell_elpd.size() != b[r].cell_elpd.size()) {
      fail(ErrorCode::PlanMismatch,
           "replication " + std::to_string(r) + " was evaluated on different holdout plans");
    }
  }

  ElpdDiff out;
  out.n_replications = static_cast<int>(a.size());
  std::vector<double> diffs(a.size());
  for (std::size_t r = 0; r < a.size(); ++r) diffs[r] = a[r].total - b[r].total;
  out.mean = mean_of(diffs);
  if (diffs.size() > 1) {
    out.se = std::sqrt(variance_of(diffs) / static_cast<double>(diffs.size()));
  }
  return out;
}

}  // namespace spathmm
