#include "spathmm/simulate.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "spathmm/errors.hpp"
#include "spathmm/math_util.hpp"

namespace spathmm {

namespace {

std::size_t uz(int v) { return static_cast<std::size_t>(v); }

// Force the closure coordinate so a left-to-right sum is exactly zero, the
// same convention ParamLayout::constrain produces.
void close_mean_zero(std::vector<double>& v, std::size_t begin, std::size_t len) {
  double partial = 0.0;
  for (std::size_t k = 0; k + 1 < len; ++k) partial += v[begin + k];
  v[begin + len - 1] = -partial;
}

void center(std::vector<double>& v, std::size_t begin, std::size_t len) {
  double mean = 0.0;
  for (std::size_t k = 0; k < len; ++k) mean += v[begin + k];
  mean /= static_cast<double>(len);
  for (std::size_t k = 0; k < len; ++k) v[begin + k] -= mean;
  close_mean_zero(v, begin, len);
}

int sample_categorical_probs(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  const int k = static_cast<int>(probs.size());
  for (int s = 0; s < k; ++s) {
    cum += probs[uz(s)];
    if (u < cum) return s;
  }
  return k - 1;
}

}  // namespace

std::vector<double> sample_icar_field(const NeighborhoodGraph& graph, double sigma,
                                      std::mt19937_64& rng) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    fail(ErrorCode::RangeError, "sample_icar_field requires sigma >= 0");
  const int n = graph.n_sites;
  std::vector<double> phi(uz(n), 0.0);
  if (sigma == 0.0) return phi;

  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [a, b] : graph.edges) {
    lap(a, a) += 1.0;
    lap(b, b) += 1.0;
    lap(a, b) -= 1.0;
    lap(b, a) -= 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
  if (es.info() != Eigen::Success)
    fail(ErrorCode::NonFinite, "eigendecomposition of the graph Laplacian failed");
  const Eigen::VectorXd& evals = es.eigenvalues();
  const Eigen::MatrixXd& evecs = es.eigenvectors();
  const double null_cut = 1e-10 * std::max(1.0, evals(n - 1));

  Eigen::VectorXd field = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    if (evals(k) <= null_cut) continue;  // constant direction: excluded subspace
    field += (sigma / std::sqrt(evals(k))) * normal01(rng) * evecs.col(k);
  }
  for (int i = 0; i < n; ++i) phi[uz(i)] = field(i);
  center(phi, 0, uz(n));
  return phi;
}

ModelParams sample_params_from_priors(const ModelSpec& spec, const NeighborhoodGraph& graph,
                                      std::mt19937_64& rng) {
  const int s_count = spec.n_states;
  const int n = graph.n_sites;
  ParamLayout layout(spec, n);  // validates spec/site-count combinations

  ModelParams p;
  p.n_states = s_count;
  p.n_sites = n;

  p.mu1 = -4.5 + 0.25 * normal01(rng);
  if (s_count >= 2) {
    do {
      p.muS = -1.75 + 0.5 * normal01(rng);
    } while (p.muS <= p.mu1);
  } else {
    p.muS = p.mu1;
  }

  p.m.assign(uz(s_count), 0.0);
  if (s_count >= 2) {
    const std::vector<double> alpha(uz(s_count - 1), 5.0);
    const std::vector<double> inc = dirichlet_variate(alpha, rng);
    for (int k = 1; k < s_count; ++k) p.m[uz(k)] = inc[uz(k - 1)];
  }
  p.mu = state_means(p.mu1, p.muS, p.m);

  p.sigma_lambda = std::abs(normal01(rng));
  p.lambda.resize(uz(n));
  for (double& v : p.lambda) v = p.sigma_lambda * normal01(rng);
  center(p.lambda, 0, uz(n));

  p.phi.assign(uz(s_count) * uz(n), 0.0);
  p.sigma_phi.assign(uz(s_count), 1.0);
  if (spec.include_spatial) {
    if (spec.shared_sigma_phi) {
      p.sigma_phi.assign(uz(s_count), std::abs(normal01(rng)));
    } else {
      for (double& v : p.sigma_phi) v = std::abs(normal01(rng));
    }
    for (int s = 0; s < s_count; ++s) {
      const std::vector<double> row = sample_icar_field(graph, p.sigma_phi[uz(s)], rng);
      std::copy(row.begin(), row.end(), p.phi.begin() + static_cast<long>(uz(s) * uz(n)));
    }
  }

  p.gamma.resize(12);
  for (double& v : p.gamma) v = normal01(rng);
  center(p.gamma, 0, 12);

  const std::vector<double> rho_alpha(uz(s_count), 1.0);
  p.rho = dirichlet_variate(rho_alpha, rng);

  p.a.resize(uz(s_count) * uz(s_count));
  std::vector<double> row_alpha(uz(s_count), 0.5);
  for (int s = 0; s < s_count; ++s) {
    row_alpha[uz(s)] = 2.0 * static_cast<double>(s_count);
    const std::vector<double> row = dirichlet_variate(row_alpha, rng);
    std::copy(row.begin(), row.end(), p.a.begin() + static_cast<long>(uz(s) * uz(s_count)));
    row_alpha[uz(s)] = 0.5;
  }

  p.xi.assign(uz(s_count), 0.0);
  p.beta.assign(uz(s_count), 0.0);
  if (spec.model_missingness) {
    for (double& v : p.xi) v = 5.0 * normal01(rng);
    for (double& v : p.beta) v = 5.0 * normal01(rng);
  }

  layout.validate(p);
  return p;
}

SimulationResult simulate_panel(const SimulationScenario& scn, const ModelParams& truth) {
  if (scn.n_sites < 2 || scn.n_times < 1)
    fail(ErrorCode::InvalidScenario, "scenario needs n_sites >= 2 and n_times >= 1");
  if (scn.graph.n_sites != scn.n_sites)
    fail(ErrorCode::InvalidScenario, "scenario graph covers " +
                                         std::to_string(scn.graph.n_sites) + " sites, expected " +
                                         std::to_string(scn.n_sites));
  if (scn.regime == MissingnessRegime::state_dependent && !scn.spec.model_missingness)
    fail(ErrorCode::InvalidScenario,
         "state-dependent missingness needs the missingness submodel enabled");
  if (!scn.blackout.empty()) {
    if (static_cast<int>(scn.blackout.size()) != scn.n_sites)
      fail(ErrorCode::InvalidScenario, "blackout list must have one entry per site");
    for (int b : scn.blackout)
      if (b < 0 || b > scn.n_times)
        fail(ErrorCode::InvalidScenario, "blackout lengths must lie in [0, n_times]");
  }
  if (scn.start_month < 1 || scn.start_month > 12)
    fail(ErrorCode::InvalidScenario, "start_month must lie in 1..12");

  ParamLayout layout(scn.spec, scn.n_sites);
  layout.validate(truth);

  std::mt19937_64 rng(scn.seed);
  const int t_count = scn.n_times;
  const int s_count = scn.spec.n_states;

  SimulationResult out;
  out.params = truth;
  out.trajectory.kind = StateTrajectory::Kind::sampled;
  out.trajectory.states.resize(uz(t_count));

  int cur = sample_categorical_probs(truth.rho, rng);
  out.trajectory.states[0] = cur + 1;
  for (int t = 1; t < t_count; ++t) {
    const std::span<const double> row(truth.a.data() + uz(cur) * uz(s_count), uz(s_count));
    cur = sample_categorical_probs(row, rng);
    out.trajectory.states[uz(t)] = cur + 1;
  }

  std::vector<std::int8_t> cells(uz(scn.n_sites) * uz(t_count), kMissing);
  for (int i = 0; i < scn.n_sites; ++i) {
    const int dark_until = scn.blackout.empty() ? 0 : scn.blackout[uz(i)];
    for (int t = 0; t < t_count; ++t) {
      if (t < dark_until) continue;  // forced pre-first-observation gap
      const int s = out.trajectory.states[uz(t)] - 1;
      if (scn.regime == MissingnessRegime::state_dependent) {
        const double tp = t_count > 1
                              ? static_cast<double>(t) / static_cast<double>(t_count - 1)
                              : 0.0;
        const double pr = inv_logit(truth.xi[uz(s)] + truth.beta[uz(s)] * tp);
        if (uniform01(rng) < pr) continue;  // r = 1: outcome unrecorded
      }
      const int m0 = (scn.start_month - 1 + t) % 12;
      const double py =
          inv_logit(truth.mu[uz(s)] + truth.lambda[uz(i)] + truth.phi_at(s, i) +
                    truth.gamma[uz(m0)]);
      cells[uz(i) * uz(t_count) + uz(t)] = uniform01(rng) < py ? 1 : 0;
    }
  }

  out.panel = ObservationPanel(scn.n_sites, t_count, std::move(cells), scn.start_month);
  return out;
}

SimulationResult simulate_panel(const SimulationScenario& scn) {
  std::mt19937_64 rng(derive_seed(scn.seed, 0x7275));  // separate stream from the panel draw
  const ModelParams truth = sample_params_from_priors(scn.spec, scn.graph, rng);
  return simulate_panel(scn, truth);
}

}  // namespace spathmm
