#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "spathmm/errors.hpp"
#include "spathmm/evaluate.hpp"
#include "spathmm/likelihood.hpp"
#include "spathmm/math_util.hpp"
#include "spathmm/simulate.hpp"
#include "test_util.hpp"

using namespace spathmm;
using testutil::random_panel;
using testutil::random_unconstrained;

namespace {

PosteriorDraws wrap_draws(const std::vector<std::vector<double>>& us) {
  PosteriorDraws d;
  d.n_chains = 1;
  d.n_draws = static_cast<int>(us.size());
  d.dim = static_cast<int>(us.front().size());
  for (const auto& u : us) d.draws.insert(d.draws.end(), u.begin(), u.end());
  d.lp.assign(us.size(), 0.0);
  d.divergent.assign(us.size(), 0);
  return d;
}

/// Exact smoothed marginals by enumerating all S^T hidden trajectories.
std::vector<double> enumerate_gamma(std::span<const double> omega, int n_times,
                                    const ModelParams& p) {
  const int s_count = p.n_states;
  std::vector<double> gamma(static_cast<std::size_t>(n_times) * s_count, 0.0);
  std::vector<int> path(static_cast<std::size_t>(n_times), 0);
  std::vector<double> logp_all;
  std::vector<std::vector<int>> paths;
  const auto recurse = [&](auto&& self, int t, double acc) -> void {
    if (t == n_times) {
      paths.push_back(path);
      logp_all.push_back(acc);
      return;
    }
    for (int s = 0; s < s_count; ++s) {
      path[static_cast<std::size_t>(t)] = s;
      const double step =
          (t == 0 ? std::log(p.rho[static_cast<std::size_t>(s)])
                  : std::log(p.a_at(path[static_cast<std::size_t>(t) - 1], s))) +
          omega[static_cast<std::size_t>(t) * s_count + s];
      self(self, t + 1, acc + step);
    }
  };
  recurse(recurse, 0, 0.0);
  const double log_z = log_sum_exp(logp_all);
  for (std::size_t j = 0; j < paths.size(); ++j) {
    const double w = std::exp(logp_all[j] - log_z);
    for (int t = 0; t < n_times; ++t) {
      gamma[static_cast<std::size_t>(t) * s_count + paths[j][static_cast<std::size_t>(t)]] += w;
    }
  }
  return gamma;
}

}  // namespace

TEST_SUITE_BEGIN("evaluate");

TEST_CASE("make_holdout: masks exactly the planned cells") {
  // 5x2 panel, all ten cells observed; fraction 0.1 -> exactly one held out.
  std::vector<std::int8_t> cells(10, 0);
  cells[3] = 1;
  cells[7] = 1;
  const ObservationPanel panel(5, 2, cells);
  REQUIRE(panel.count_observed() == 10);

  const auto holdout = make_holdout(panel, 0.1, 42);
  REQUIRE(holdout.plan.cells.size() == 1);
  const auto& hc = holdout.plan.cells.front();
  CHECK(holdout.panel.held_out(hc.site, hc.time));
  CHECK(holdout.panel.missing(hc.site, hc.time));
  CHECK(holdout.panel.count_observed() == 9);
  CHECK(hc.y_true == panel.y(hc.site, hc.time));
  CHECK(holdout.plan.fraction == 0.1);
  CHECK(holdout.plan.seed == 42);
  // Source panel untouched.
  CHECK(panel.count_observed() == 10);
  CHECK_FALSE(panel.has_holdout());
}

TEST_CASE("make_holdout: paper-sized fraction produces the exact count") {
  // 284 x 1000 panel with 200 cells missing -> 283800 observed; 1% = 2838.
  std::vector<std::int8_t> cells(284 * 1000, 0);
  for (int k = 0; k < 200; ++k) cells[static_cast<std::size_t>(283800 + k)] = kMissing;
  const ObservationPanel panel(284, 1000, cells);
  REQUIRE(panel.count_observed() == 283800);

  const auto holdout = make_holdout(panel, 0.01, 7);
  CHECK(holdout.plan.cells.size() == 2838);
  CHECK(holdout.panel.count_observed() == 283800 - 2838);

  // Sorted, unique, and all originally observed.
  for (std::size_t k = 1; k < holdout.plan.cells.size(); ++k) {
    const auto& a = holdout.plan.cells[k - 1];
    const auto& b = holdout.plan.cells[k];
    CHECK(std::pair(a.site, a.time) < std::pair(b.site, b.time));
  }
  for (const auto& hc : holdout.plan.cells) CHECK_FALSE(panel.missing(hc.site, hc.time));
}

TEST_CASE("make_holdout: plans from different seeds overlap like random subsets") {
  std::mt19937_64 rng(99);
  const auto panel = random_panel(40, 50, rng, 0.0);
  const auto a = make_holdout(panel, 0.05, 1);
  const auto b = make_holdout(panel, 0.05, 2);
  REQUIRE(a.plan.cells.size() == 100);
  REQUIRE(b.plan.cells.size() == 100);

  std::set<std::pair<int, int>> in_a;
  for (const auto& hc : a.plan.cells) in_a.emplace(hc.site, hc.time);
  int overlap = 0;
  for (const auto& hc : b.plan.cells) overlap += in_a.count({hc.site, hc.time});
  // Hypergeometric expectation is 100*100/2000 = 5, sd about 2.2.
  CHECK(overlap < 20);
}

TEST_CASE("make_holdout: rejects bad fractions and starved panels") {
  std::vector<std::int8_t> cells(10, 1);
  const ObservationPanel panel(5, 2, cells);
  CHECK_THROWS_WITH_AS(make_holdout(panel, 0.0, 1), doctest::Contains("RangeError"), Error);
  CHECK_THROWS_WITH_AS(make_holdout(panel, 0.5, 1), doctest::Contains("RangeError"), Error);
  CHECK_THROWS_WITH_AS(make_holdout(panel, 0.01, 1),
                       doctest::Contains("InsufficientObserved"), Error);

  const ObservationPanel empty(2, 2, std::vector<std::int8_t>(4, kMissing));
  CHECK_THROWS_WITH_AS(make_holdout(empty, 0.25, 1),
                       doctest::Contains("InsufficientObserved"), Error);
}

TEST_CASE("pointwise_elpd: single state with flat parameters gives log(1/2)") {
  ModelSpec spec;
  spec.n_states = 1;
  const ParamLayout layout(spec, 3);

  std::vector<std::int8_t> cells(3 * 4, 0);
  cells[1] = 1;
  ObservationPanel masked(3, 4, cells);
  HoldoutPlan plan;
  plan.cells.push_back({0, 1, masked.y(0, 1)});
  plan.cells.push_back({2, 3, masked.y(2, 3)});
  for (const auto& hc : plan.cells) masked.mark_held_out(hc.site, hc.time);

  // The zero vector constrains to mu = 0, lambda = 0, phi = 0, gamma = 0.
  const auto d = wrap_draws({std::vector<double>(static_cast<std::size_t>(layout.dim()), 0.0)});
  const auto res = pointwise_elpd(masked, layout, d, plan);
  REQUIRE(res.cell_elpd.size() == 2);
  CHECK(res.cell_elpd[0] == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(res.cell_elpd[1] == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(res.total == doctest::Approx(2 * std::log(0.5)).epsilon(1e-12));
  CHECK(res.total_mc_se == 0.0);  // single draw
}

TEST_CASE("pointwise_elpd: single draw, single state equals the Bernoulli log-pmf") {
  ModelSpec spec;
  spec.n_states = 1;
  const ParamLayout layout(spec, 4);
  std::mt19937_64 rng(31);

  auto masked = random_panel(4, 6, rng, 0.2);
  // Pick the first observed cell.
  int site = -1, time = -1;
  for (int i = 0; i < 4 && site < 0; ++i) {
    for (int t = 0; t < 6; ++t) {
      if (!masked.missing(i, t)) { site = i; time = t; break; }
    }
  }
  REQUIRE(site >= 0);
  HoldoutPlan plan;
  plan.cells.push_back({site, time, masked.y(site, time)});
  masked.mark_held_out(site, time);

  const auto u = random_unconstrained(layout, rng);
  const auto d = wrap_draws({u});
  const auto res = pointwise_elpd(masked, layout, d, plan);

  const ModelParams p = layout.constrain(u);
  const double eta = p.mu[0] + p.lambda[static_cast<std::size_t>(site)] + p.phi_at(0, site) +
                     p.gamma[static_cast<std::size_t>(masked.month_of(time) - 1)];
  CHECK(res.cell_elpd[0] ==
        doctest::Approx(bernoulli_logit_lpmf(plan.cells[0].y_true, eta)).epsilon(1e-12));
}

TEST_CASE("pointwise_elpd: matches brute-force enumeration of state posteriors") {
  ModelSpec spec;
  spec.n_states = 3;
  const ParamLayout layout(spec, 2);
  std::mt19937_64 rng(58);

  for (int rep = 0; rep < 3; ++rep) {
    auto masked = random_panel(2, 4, rng, 0.25, 1 + static_cast<int>(rng() % 12));
    HoldoutPlan plan;
    for (int i = 0; i < 2; ++i) {
      for (int t = 0; t < 4; ++t) {
        if (!masked.missing(i, t) && uniform01(rng) < 0.4) {
          plan.cells.push_back({i, t, masked.y(i, t)});
        }
      }
    }
    if (plan.cells.empty()) continue;
    for (const auto& hc : plan.cells) masked.mark_held_out(hc.site, hc.time);

    std::vector<std::vector<double>> us;
    for (int k = 0; k < 4; ++k) us.push_back(random_unconstrained(layout, rng, 0.4));
    const auto res = pointwise_elpd(masked, layout, wrap_draws(us), plan);

    const EmissionContext ctx = make_emission_context(masked, spec);
    for (std::size_t cell = 0; cell < plan.cells.size(); ++cell) {
      const auto& hc = plan.cells[cell];
      double sum_p = 0.0;
      for (const auto& u : us) {
        const ModelParams p = layout.constrain(u);
        const auto omega = emission_matrix(ctx, p);
        const auto gamma = enumerate_gamma(omega, 4, p);
        double pk = 0.0;
        for (int s = 0; s < 3; ++s) {
          const double eta = p.mu[static_cast<std::size_t>(s)] +
                             p.lambda[static_cast<std::size_t>(hc.site)] + p.phi_at(s, hc.site) +
                             p.gamma[static_cast<std::size_t>(masked.month_of(hc.time) - 1)];
          const double p1 = 1.0 / (1.0 + std::exp(-eta));
          pk += gamma[static_cast<std::size_t>(hc.time) * 3 + s] * (hc.y_true ? p1 : 1.0 - p1);
        }
        sum_p += pk;
      }
      CHECK(res.cell_elpd[cell] ==
            doctest::Approx(std::log(sum_p / static_cast<double>(us.size()))).epsilon(1e-10));
    }
  }
}

TEST_CASE("pointwise_elpd: probabilities proper, doubling draws is stable") {
  ModelSpec spec;
  spec.n_states = 2;
  const ParamLayout layout(spec, 4);
  std::mt19937_64 rng(77);

  const auto source = random_panel(4, 12, rng, 0.15);
  auto holdout = make_holdout(source, 0.2, 5);

  const auto base = random_unconstrained(layout, rng, 0.3);
  const auto jittered = [&](int count) {
    std::vector<std::vector<double>> us;
    for (int k = 0; k < count; ++k) {
      auto u = base;
      for (auto& v : u) v += 0.1 * normal01(rng);
      us.push_back(std::move(u));
    }
    return us;
  };

  const auto res_a = pointwise_elpd(holdout.panel, layout, wrap_draws(jittered(200)), holdout.plan);
  const auto res_b = pointwise_elpd(holdout.panel, layout, wrap_draws(jittered(400)), holdout.plan);

  for (double v : res_a.cell_elpd) {
    CHECK(std::isfinite(v));
    CHECK(v < 0.0);  // predictive probability strictly inside (0,1)
  }
  CHECK(std::isfinite(res_a.total));
  CHECK(res_a.total_mc_se > 0.0);
  CHECK(std::abs(res_a.total - res_b.total) <
        2.0 * std::hypot(res_a.total_mc_se, res_b.total_mc_se));
}

TEST_CASE("pointwise_elpd: validation and plan mismatches") {
  ModelSpec spec;
  spec.n_states = 2;
  const ParamLayout layout(spec, 3);
  std::mt19937_64 rng(13);
  const auto source = random_panel(3, 8, rng, 0.1);
  auto holdout = make_holdout(source, 0.2, 9);
  const auto draws = wrap_draws({random_unconstrained(layout, rng)});

  SUBCASE("cell not actually held out") {
    HoldoutPlan rogue = holdout.plan;
    rogue.cells.front().site = (rogue.cells.front().site + 1) % 3;
    bool already = holdout.panel.held_out(rogue.cells.front().site, rogue.cells.front().time);
    if (!already) {
      CHECK_THROWS_WITH_AS(pointwise_elpd(holdout.panel, layout, draws, rogue),
                           doctest::Contains("CellNotHeldOut"), Error);
    }
  }
  SUBCASE("empty plan") {
    CHECK_THROWS_WITH_AS(pointwise_elpd(holdout.panel, layout, draws, HoldoutPlan{}),
                         doctest::Contains("DegenerateInput"), Error);
  }
  SUBCASE("wrong draw dimension") {
    PosteriorDraws bad = draws;
    bad.dim -= 1;
    CHECK_THROWS_WITH_AS(pointwise_elpd(holdout.panel, layout, bad, holdout.plan),
                         doctest::Contains("LengthMismatch"), Error);
  }
}

TEST_CASE("pairwise_elpd_diff: identical models give zero, mismatched plans throw") {
  PointwiseElpd rep_a;
  rep_a.cell_elpd = {-0.5, -0.7};
  rep_a.total = -1.2;
  rep_a.replication = 0;
  rep_a.plan_seed = 11;
  PointwiseElpd rep_b = rep_a;
  rep_b.replication = 1;
  rep_b.plan_seed = 12;
  rep_b.total = -1.5;

  const std::vector<PointwiseElpd> side_a{rep_a, rep_b};
  const auto diff = pairwise_elpd_diff(side_a, side_a);
  CHECK(diff.mean == 0.0);
  CHECK(diff.se == 0.0);
  CHECK(diff.n_replications == 2);

  SUBCASE("different seeds") {
    auto side_b = side_a;
    side_b[1].plan_seed = 99;
    CHECK_THROWS_WITH_AS(pairwise_elpd_diff(side_a, side_b),
                         doctest::Contains("PlanMismatch"), Error);
  }
  SUBCASE("different replication counts") {
    const std::vector<PointwiseElpd> side_b{rep_a};
    CHECK_THROWS_WITH_AS(pairwise_elpd_diff(side_a, side_b),
                         doctest::Contains("PlanMismatch"), Error);
  }
  SUBCASE("different cell counts") {
    auto side_b = side_a;
    side_b[0].cell_elpd.push_back(-0.1);
    CHECK_THROWS_WITH_AS(pairwise_elpd_diff(side_a, side_b),
                         doctest::Contains("PlanMismatch"), Error);
  }
  SUBCASE("empty") {
    const std::vector<PointwiseElpd> none;
    CHECK_THROWS_WITH_AS(pairwise_elpd_diff(none, none),
                         doctest::Contains("DegenerateInput"), Error);
  }
}

TEST_CASE("pairwise_elpd_diff: knowing the true spatial field beats ignoring it") {
  // Truth has a strong ICAR field; model A evaluates with it, model B zeroes
  // it. With the exact truth as the single posterior draw, A's held-out
  // predictive density should win in (almost) every replication.
  ModelSpec spec;
  spec.n_states = 1;
  spec.model_missingness = false;

  SimulationScenario scn;
  scn.spec = spec;
  scn.n_sites = 30;
  scn.n_times = 40;
  scn.graph = make_grid_graph(5, 6);
  scn.regime = MissingnessRegime::none;
  scn.seed = 2024;

  std::mt19937_64 rng(4096);
  auto truth = sample_params_from_priors(spec, scn.graph, rng);
  truth.mu1 = truth.muS = truth.mu[0] = -0.4;
  for (auto& v : truth.phi) v *= 6.0;  // scaling keeps each row mean-zero

  ModelSpec spec_b = spec;
  spec_b.include_spatial = false;
  const ParamLayout layout_a(spec, scn.n_sites);
  const ParamLayout layout_b(spec_b, scn.n_sites);
  auto truth_b = truth;
  std::fill(truth_b.phi.begin(), truth_b.phi.end(), 0.0);
  std::fill(truth_b.sigma_phi.begin(), truth_b.sigma_phi.end(), 1.0);

  const auto draws_a = wrap_draws({layout_a.unconstrain(truth)});
  const auto draws_b = wrap_draws({layout_b.unconstrain(truth_b)});

  std::vector<PointwiseElpd> side_a;
  std::vector<PointwiseElpd> side_b;
  int wins = 0;
  for (int rep = 0; rep < 10; ++rep) {
    scn.seed = 3000 + rep;
    const auto sim = simulate_panel(scn, truth);
    auto holdout = make_holdout(sim.panel, 0.1, 500 + static_cast<std::uint64_t>(rep), rep);
    side_a.push_back(pointwise_elpd(holdout.panel, layout_a, draws_a, holdout.plan));
    side_b.push_back(pointwise_elpd(holdout.panel, layout_b, draws_b, holdout.plan));
    if (side_a.back().total > side_b.back().total) ++wins;
  }
  const auto diff = pairwise_elpd_diff(side_a, side_b);
  CHECK(diff.mean > 0.0);
  CHECK(wins >= 9);
  CHECK(diff.se > 0.0);
  CHECK(diff.mean > 2.0 * diff.se);  // a clear, not marginal, preference
}

TEST_SUITE_END();
