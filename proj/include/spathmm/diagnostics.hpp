#pragma once

#include <span>
#include <vector>

namespace spathmm {

/// Convergence diagnostics for one scalar quantity tracked across chains.
/// Input layout is chain-major: draws of chain c occupy
/// [c*n, (c+1)*n) with n = values.size() / n_chains.
///
/// Degenerate inputs (constant chains) yield quiet-NaN sentinels -- or +inf
/// for rhat when chains are individually constant but disagree -- so sweeps
/// over many parameters never abort half way. Structural misuse (fewer than
/// 2 chains, fewer than 4 draws per chain) throws DegenerateInput.

/// Rank-normalized split-R̂, the max of the bulk and folded variants.
double rhat(std::span<const double> values, int n_chains);

/// Bulk ESS: rank-normalized draws, split chains, Geyer initial-monotone
/// autocorrelation truncation.
double ess_bulk(std::span<const double> values, int n_chains);

/// Tail ESS: minimum ESS of the 5% and 95% quantile exceedance indicators.
double ess_tail(std::span<const double> values, int n_chains);

struct ScalarSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double ess_bulk = 0.0;
  double ess_tail = 0.0;
  double rhat = 0.0;
};

ScalarSummary summarize_scalar(std::span<const double> values, int n_chains);

}  // namespace spathmm
