// Timing harness for the likelihood kernels: the naive serial reference
// implementations against the table-driven (and OpenMP-parallel) fast paths,
// at full problem scale by default. Usage: bench_kernels [N T S reps].

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#include "spathmm/graph.hpp"
#include "spathmm/likelihood.hpp"
#include "spathmm/params.hpp"
#include "spathmm/simulate.hpp"

using namespace spathmm;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <typename F>
double time_best_of(int reps, const F& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    f();
    best = std::min(best, ms_since(t0));
  }
  return best;
}

NeighborhoodGraph near_square_grid(int n_sites) {
  int rows = static_cast<int>(std::sqrt(static_cast<double>(n_sites)));
  while (rows > 1 && n_sites % rows != 0) --rows;
  return make_grid_graph(rows, n_sites / rows);
}

}  // namespace

int main(int argc, char** argv) {
  int n_sites = 387, n_times = 1212, n_states = 5, reps = 5;
  if (argc > 1) n_sites = std::atoi(argv[1]);
  if (argc > 2) n_times = std::atoi(argv[2]);
  if (argc > 3) n_states = std::atoi(argv[3]);
  if (argc > 4) reps = std::atoi(argv[4]);
  if (n_sites < 2 || n_times < 2 || n_states < 1 || reps < 1) {
    std::fprintf(stderr, "usage: bench_kernels [N T S reps]\n");
    return 2;
  }

  SimulationScenario scn;
  scn.spec.n_states = n_states;
  scn.n_sites = n_sites;
  scn.n_times = n_times;
  scn.graph = near_square_grid(n_sites);
  scn.seed = 7;
  const auto sim = simulate_panel(scn);
  const ParamLayout layout(scn.spec, n_sites);
  const auto ctx = make_emission_context(sim.panel, scn.spec);
  const auto u = layout.unconstrain(sim.params);

  std::printf("panel %d x %d, S=%d, dim %d, best of %d\n", n_sites, n_times, n_states,
              layout.dim(), reps);

  std::vector<double> omega_ref, omega_fast;
  const double t_ref = time_best_of(
      reps, [&] { omega_ref = ref::emission_matrix(sim.panel, scn.spec, sim.params); });
  const double t_fast =
      time_best_of(reps, [&] { omega_fast = emission_matrix(ctx, sim.params); });
  double max_diff = 0.0;
  for (std::size_t k = 0; k < omega_ref.size(); ++k) {
    max_diff = std::max(max_diff, std::abs(omega_ref[k] - omega_fast[k]));
  }
  std::printf("emission_matrix   reference %8.2f ms   fast %8.2f ms   speedup %5.1fx   max |diff| %.2e\n",
              t_ref, t_fast, t_ref / t_fast, max_diff);

  double loglik = 0.0;
  const double t_fwd = time_best_of(
      reps, [&] { loglik = forward_loglik(omega_fast, n_times, sim.params); });
  std::printf("forward_loglik    %8.2f ms   log-likelihood %.4f\n", t_fwd, loglik);

  PosteriorEval eval;
  const double t_grad =
      time_best_of(reps, [&] { eval = grad_log_posterior(ctx, scn.graph, layout, u); });
  double grad_norm = 0.0;
  for (double g : eval.grad) grad_norm += g * g;
  std::printf("grad_log_posterior %7.2f ms   value %.4f   gradient norm %.4g\n", t_grad,
              eval.value, std::sqrt(grad_norm));
  return 0;
}
