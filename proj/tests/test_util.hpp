#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "spathmm/graph.hpp"
#include "spathmm/likelihood.hpp"
#include "spathmm/math_util.hpp"
#include "spathmm/panel.hpp"
#include "spathmm/params.hpp"

namespace testutil {

// Random unconstrained point with moderate scale, so the implied constrained
// parameters stay well inside the feasible region.
inline std::vector<double> random_unconstrained(const spathmm::ParamLayout& layout,
                                                std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> norm(0.0, scale);
  std::vector<double> u(static_cast<std::size_t>(layout.dim()));
  for (double& v : u) v = norm(rng);
  return u;
}

// Random panel with observed/missing cells; guarantees every site has at
// least one observation unless allow_unobserved_site is set.
inline spathmm::ObservationPanel random_panel(int n_sites, int n_times, std::mt19937_64& rng,
                                              double missing_prob = 0.3, int start_month = 1,
                                              bool allow_unobserved_site = false) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::int8_t> cells(static_cast<std::size_t>(n_sites) *
                                 static_cast<std::size_t>(n_times));
  for (int i = 0; i < n_sites; ++i) {
    for (int t = 0; t < n_times; ++t) {
      const std::size_t at =
          static_cast<std::size_t>(i) * static_cast<std::size_t>(n_times) +
          static_cast<std::size_t>(t);
      if (unif(rng) < missing_prob) {
        cells[at] = spathmm::kMissing;
      } else {
        cells[at] = unif(rng) < 0.5 ? 1 : 0;
      }
    }
    if (!allow_unobserved_site) {
      bool any = false;
      for (int t = 0; t < n_times; ++t) {
        if (cells[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_times) +
                  static_cast<std::size_t>(t)] != spathmm::kMissing) {
          any = true;
          break;
        }
      }
      if (!any) {
        cells[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_times)] = 1;
      }
    }
  }
  return spathmm::ObservationPanel(n_sites, n_times, std::move(cells), start_month);
}

// Dense graph Laplacian D - W, the matrix the edge-sum quadratic form avoids.
inline Eigen::MatrixXd dense_laplacian(const spathmm::NeighborhoodGraph& g) {
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(g.n_sites, g.n_sites);
  for (const auto& [a, b] : g.edges) {
    lap(a, a) += 1.0;
    lap(b, b) += 1.0;
    lap(a, b) -= 1.0;
    lap(b, a) -= 1.0;
  }
  return lap;
}

// Exhaustive-enumeration marginal log-likelihood over all S^T trajectories.
inline double enumerate_loglik(std::span<const double> omega, int n_times,
                               const spathmm::ModelParams& p) {
  const int s_count = p.n_states;
  long total = 1;
  for (int t = 0; t < n_times; ++t) total *= s_count;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(total));
  std::vector<int> path(static_cast<std::size_t>(n_times), 0);
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int t = 0; t < n_times; ++t) {
      path[static_cast<std::size_t>(t)] = static_cast<int>(c % s_count);
      c /= s_count;
    }
    double lp = std::log(p.rho[static_cast<std::size_t>(path[0])]) +
                omega[static_cast<std::size_t>(path[0])];
    for (int t = 1; t < n_times; ++t) {
      lp += std::log(p.a_at(path[static_cast<std::size_t>(t - 1)],
                            path[static_cast<std::size_t>(t)])) +
            omega[static_cast<std::size_t>(t) * static_cast<std::size_t>(s_count) +
                  static_cast<std::size_t>(path[static_cast<std::size_t>(t)])];
    }
    terms.push_back(lp);
  }
  return spathmm::log_sum_exp(terms);
}

// Central finite-difference gradient of a scalar function of a vector.
template <typename F>
std::vector<double> fd_gradient(const F& f, std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const double fp = f(x);
    x[k] = x0 - h;
    const double fm = f(x);
    x[k] = x0;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_rel_err(std::span<const double> got, std::span<const double> want,
                          double floor_scale = 1e-3) {
  double worst = 0.0;
  for (std::size_t k = 0; k < got.size(); ++k) {
    const double denom = std::max({std::abs(got[k]), std::abs(want[k]), floor_scale});
    worst = std::max(worst, std::abs(got[k] - want[k]) / denom);
  }
  return worst;
}

}  // namespace testutil
