#pragma once

#include <span>
#include <vector>

#include "spathmm/graph.hpp"
#include "spathmm/panel.hpp"
#include "spathmm/params.hpp"

namespace spathmm {

/// Parameter-free view of a panel organized for fast emission sums. Observed
/// cells are stored per time (CSR layout); the missingness submodel only needs
/// per-time counts of active cells with r=1 / r=0, where "active" means
/// t >= first_obs[site] and not held out. Fields are public so tests can pin
/// the r counts independently of y when checking marginalization.
struct EmissionContext {
  int n_sites = 0;
  int n_times = 0;
  bool model_missingness = true;

  std::vector<int> obs_offset;        // length n_times + 1
  std::vector<int> obs_site;          // site of each observed, non-held-out cell
  std::vector<signed char> obs_y;     // its outcome
  std::vector<int> n_r1, n_r0;        // per time: active missing / active observed counts
  std::vector<int> month0;            // 0-based calendar month per time
  std::vector<double> scaled_t;       // t' per time
};

EmissionContext make_emission_context(const ObservationPanel& panel, const ModelSpec& spec);

/// Per-parameter lookup tables: Bernoulli log-pmfs and success probabilities
/// for every (state, site, month) cell and, when the missingness submodel is
/// on, for every (time, state) r-term.
struct EmissionTables {
  int n_states = 0;
  int n_sites = 0;
  std::vector<double> lp0, lp1, p1;  // S x N x 12, month-minor
  std::vector<double> lr0, lr1, pr;  // T x S (empty without missingness)

  std::size_t y_idx(int s, int i, int m0) const {
    return (static_cast<std::size_t>(s) * static_cast<std::size_t>(n_sites) +
            static_cast<std::size_t>(i)) * 12 + static_cast<std::size_t>(m0);
  }
};

EmissionTables make_emission_tables(const EmissionContext& ctx, const ModelParams& p);

/// omega(t,s) for all cells, row-major T x S. Parallel over times.
std::vector<double> emission_matrix(const EmissionContext& ctx, const ModelParams& p);

/// Single omega(t,s) as a plain per-site sum; the reference semantics of the
/// emission term and the oracle the table-driven path is tested against.
double emission_logprob(const ObservationPanel& panel, const ModelSpec& spec,
                        const ModelParams& p, int t, int s);

/// Log-space forward recursion; returns log p(panel | p).
double forward_loglik(std::span<const double> omega, int n_times, const ModelParams& p);
double forward_loglik(const ObservationPanel& panel, const ModelSpec& spec, const ModelParams& p);

/// Forward-backward pass: smoothed state marginals and expected transition
/// counts, the sufficient statistics for the likelihood gradient.
struct ForwardBackward {
  int n_times = 0;
  int n_states = 0;
  double loglik = 0.0;
  std::vector<double> log_alpha, log_beta;  // T x S
  std::vector<double> gamma;                // T x S smoothed marginals
  std::vector<double> xi_sum;               // S x S expected transition counts
};

ForwardBackward forward_backward(std::span<const double> omega, int n_times, const ModelParams& p);

/// Improper rank-(N-1) ICAR log-density, up to a constant of the fixed graph:
/// -(N-1) log(sigma) - quadratic_form(graph, phi_row) / (2 sigma^2).
double icar_logpdf(const NeighborhoodGraph& graph, std::span<const double> phi_row, double sigma);

/// forward_loglik + ICAR terms (once, here) + log_prior, on constrained params.
double log_posterior(const ObservationPanel& panel, const NeighborhoodGraph& graph,
                     const ParamLayout& layout, const ModelParams& p);

struct PosteriorEval {
  double value = 0.0;          // log_posterior(constrain(u)) + log-Jacobian
  std::vector<double> grad;    // d value / du
};

/// Value and analytic gradient of the unconstrained sampling target. The
/// gradient runs through forward-backward expected statistics rather than
/// differentiating the recursion directly.
PosteriorEval grad_log_posterior(const EmissionContext& ctx, const NeighborhoodGraph& graph,
                                 const ParamLayout& layout, std::span<const double> u);

namespace ref {
/// Naive per-cell emission matrix (no tables, no threads); benchmark baseline
/// and test oracle for the fast path.
std::vector<double> emission_matrix(const ObservationPanel& panel, const ModelSpec& spec,
                                    const ModelParams& p);
/// Scaled-probability forward recursion (Rabiner normalization); overflows
/// on long series with tiny emissions, kept for cross-checking the log-space
/// recursion on short instances.
double forward_loglik_scaled(std::span<const double> omega, int n_times, const ModelParams& p);
}  // namespace ref

}  // namespace spathmm
