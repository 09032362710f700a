#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spathmm/panel.hpp"
#include "spathmm/params.hpp"
#include "spathmm/sampler.hpp"

namespace spathmm {

struct HeldOutCell {
  int site = 0;
  int time = 0;
  std::int8_t y_true = 0;  // value the cell had before masking
};

struct HoldoutPlan {
  std::vector<HeldOutCell> cells;  // sorted by (site, time), no duplicates
  double fraction = 0.0;
  int replication = 0;
  std::uint64_t seed = 0;
};

struct Holdout {
  ObservationPanel panel;  // source panel with plan cells masked
  HoldoutPlan plan;
};

/// Uniformly samples round(fraction * observed) observed cells and masks them.
/// Masked cells drop out of the likelihood entirely: neither their y value nor
/// their missingness indicator contributes to a fit on the masked panel.
Holdout make_holdout(const ObservationPanel& panel, double fraction, std::uint64_t seed,
                     int replication = 0);

struct PointwiseElpd {
  std::vector<double> cell_elpd;   // aligned with plan.cells
  std::vector<double> cell_mc_se;  // delta-method Monte Carlo error per cell
  double total = 0.0;
  double total_mc_se = 0.0;
  int replication = 0;
  std::uint64_t plan_seed = 0;
};

/// Log predictive density of each held-out cell under the posterior draws:
/// per draw, the state is marginalized with smoothed probabilities given the
/// masked panel, and the cell ELPD is log of the Monte Carlo mean.
PointwiseElpd pointwise_elpd(const ObservationPanel& masked, const ParamLayout& layout,
                             const PosteriorDraws& draws, const HoldoutPlan& plan);

struct ElpdDiff {
  double mean = 0.0;  // mean of per-replication total differences (a - b)
  double se = 0.0;    // sd / sqrt(replications); 0 when only one replication
  int n_replications = 0;
};

/// Paired comparison over replications; both sides must come from the same
/// holdout plans (replication ids, seeds, and cell counts all match).
ElpdDiff pairwise_elpd_diff(std::span<const PointwiseElpd> a, std::span<const PointwiseElpd> b);

}  // namespace spathmm
