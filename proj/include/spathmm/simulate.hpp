#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "spathmm/decode.hpp"
#include "spathmm/graph.hpp"
#include "spathmm/panel.hpp"
#include "spathmm/params.hpp"

namespace spathmm {

enum class MissingnessRegime { none, state_dependent };

/// Everything needed to draw one synthetic panel. The graph doubles as the
/// site-count carrier even when the scenario's spec turns the spatial field
/// off; use make_path_graph / make_grid_graph / build_graph to fill it.
struct SimulationScenario {
  ModelSpec spec;
  int n_sites = 0;
  int n_times = 0;
  NeighborhoodGraph graph;
  MissingnessRegime regime = MissingnessRegime::state_dependent;
  std::vector<int> blackout;  // per-site forced-missing prefix lengths; empty = none
  int start_month = 1;
  std::uint64_t seed = 0;
};

/// Draw from the rank-(N-1) ICAR Gaussian with covariance
/// sigma^2 * pseudoinverse(D - W), then exact centering. Dense
/// eigendecomposition: O(N^3) once per call, intended for moderate N.
std::vector<double> sample_icar_field(const NeighborhoodGraph& graph, double sigma,
                                      std::mt19937_64& rng);

/// Truth for recovery experiments: one draw from the model's priors (ICAR
/// fields included). Always satisfies ParamLayout::validate.
ModelParams sample_params_from_priors(const ModelSpec& spec, const NeighborhoodGraph& graph,
                                      std::mt19937_64& rng);

struct SimulationResult {
  ObservationPanel panel;
  StateTrajectory trajectory;  // the true hidden path, kind = sampled
  ModelParams params;          // the generating parameters
};

/// Generative model end to end: trajectory via (rho, A), missingness per the
/// regime, outcomes via the logistic emission, blackout prefixes forced
/// missing. The overload without params samples truth from the priors.
SimulationResult simulate_panel(const SimulationScenario& scn);
SimulationResult simulate_panel(const SimulationScenario& scn, const ModelParams& truth);

}  // namespace spathmm
