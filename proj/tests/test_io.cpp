#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "spathmm/errors.hpp"
#include "spathmm/io.hpp"
#include "spathmm/math_util.hpp"
#include "spathmm/simulate.hpp"
#include "test_util.hpp"

using namespace spathmm;
namespace fs = std::filesystem;
using testutil::random_unconstrained;

namespace {

std::string temp_dir() {
  static int counter = 0;
  const auto stamp =
      std::chrono::steady_clock::now().time_since_epoch().count() % 100000;
  const auto dir = fs::temp_directory_path() /
                   ("spathmm_io_" + std::to_string(stamp) + "_" + std::to_string(counter++));
  fs::create_directories(dir);
  return dir.string();
}

std::string file_in(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

bool close_all(std::span<const double> a, std::span<const double> b, double tol = 1e-12) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!(std::abs(a[k] - b[k]) <= tol * std::max(1.0, std::abs(a[k])))) return false;
  }
  return true;
}

PosteriorDraws wrap_chains(const std::vector<std::vector<double>>& us, int n_chains) {
  PosteriorDraws d;
  d.n_chains = n_chains;
  d.n_draws = static_cast<int>(us.size()) / n_chains;
  d.dim = static_cast<int>(us.front().size());
  for (const auto& u : us) d.draws.insert(d.draws.end(), u.begin(), u.end());
  d.lp.resize(us.size());
  for (std::size_t k = 0; k < us.size(); ++k) d.lp[k] = -100.0 - static_cast<double>(k) / 3.0;
  d.divergent.assign(us.size(), 0);
  d.chains.resize(static_cast<std::size_t>(n_chains));
  return d;
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("format_double: exact round trip and NA for NaN") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "NA");
  for (double v : {0.1, -1.0 / 3.0, 1e-17, 12345.678901234567, -2.2250738585072014e-308}) {
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("panel CSV: simulate -> save -> load is bit-exact") {
  SimulationScenario scn;
  scn.spec.n_states = 3;
  scn.n_sites = 12;
  scn.n_times = 60;
  scn.graph = make_grid_graph(3, 4);
  scn.seed = 99;
  scn.start_month = 7;
  scn.blackout = std::vector<int>(12, 0);
  scn.blackout[2] = 15;
  scn.blackout[7] = 40;
  const auto sim = simulate_panel(scn);

  const auto dir = temp_dir();
  const auto path = file_in(dir, "panel.csv");
  save_panel(sim.panel, path);
  const auto loaded = load_panel(path, 12, 60, 7);

  REQUIRE(loaded.n_sites() == 12);
  REQUIRE(loaded.n_times() == 60);
  for (int i = 0; i < 12; ++i) {
    CHECK(loaded.first_obs(i) == sim.panel.first_obs(i));
    for (int t = 0; t < 60; ++t) CHECK(loaded.y(i, t) == sim.panel.y(i, t));
  }
  CHECK(loaded.missing_rate() == sim.panel.missing_rate());
  CHECK(loaded.missing_rate_after_first_obs() == sim.panel.missing_rate_after_first_obs());
  CHECK(loaded.month_of(0) == 7);
}

TEST_CASE("load_panel: absent cells are NA, errors carry line numbers") {
  const auto dir = temp_dir();
  const auto path = file_in(dir, "panel.csv");

  SUBCASE("three explicit cells, fourth defaults to missing") {
    write_text(path, "site,time,y\n0,0,1\n0,1,0\n1,0,NA\n");
    const auto panel = load_panel(path, 2, 2);
    CHECK(panel.y(0, 0) == 1);
    CHECK(panel.y(0, 1) == 0);
    CHECK(panel.missing(1, 0));
    CHECK(panel.missing(1, 1));
    CHECK(panel.count_observed() == 2);
  }
  SUBCASE("duplicate cell reports its line") {
    write_text(path, "site,time,y\n0,0,1\n1,1,0\n0,0,0\n");
    CHECK_THROWS_WITH_AS(load_panel(path, 2, 2), doctest::Contains(":4"), Error);
    CHECK_THROWS_WITH_AS(load_panel(path, 2, 2), doctest::Contains("DuplicateCell"), Error);
  }
  SUBCASE("bad outcome value") {
    write_text(path, "site,time,y\n0,0,2\n");
    CHECK_THROWS_WITH_AS(load_panel(path, 2, 2), doctest::Contains("RangeError"), Error);
  }
  SUBCASE("non-integer site") {
    write_text(path, "site,time,y\n zero,0,1\n");
    CHECK_THROWS_WITH_AS(load_panel(path, 2, 2), doctest::Contains("MalformedRow"), Error);
  }
  SUBCASE("out-of-range time") {
    write_text(path, "site,time,y\n0,5,1\n");
    CHECK_THROWS_WITH_AS(load_panel(path, 2, 2), doctest::Contains("RangeError"), Error);
  }
  SUBCASE("wrong header") {
    write_text(path, "site,month,y\n0,0,1\n");
    CHECK_THROWS_WITH_AS(load_panel(path, 2, 2), doctest::Contains("MalformedRow"), Error);
  }
  SUBCASE("ragged row") {
    write_text(path, "site,time,y\n0,0\n");
    CHECK_THROWS_WITH_AS(load_panel(path, 2, 2), doctest::Contains(":2"), Error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_panel(file_in(dir, "nope.csv"), 2, 2),
                         doctest::Contains("IoError"), Error);
  }
}

TEST_CASE("load_panel: paper-shaped missingness rates survive the round trip") {
  // ~40% missing overall, ~30% after each site's first observation: prefixes
  // of unrecorded history plus 30% scattered gaps.
  const int n = 387, T = 1212;
  std::mt19937_64 rng(20250816);
  std::vector<std::int8_t> cells(static_cast<std::size_t>(n) * T, kMissing);
  for (int i = 0; i < n; ++i) {
    const int prefix = static_cast<int>(uniform01(rng) * (2.0 * 0.1429 * T));
    for (int t = prefix; t < T; ++t) {
      if (t > prefix && uniform01(rng) < 0.30) continue;  // first cell pinned observed
      cells[static_cast<std::size_t>(i) * T + static_cast<std::size_t>(t)] =
          uniform01(rng) < 0.2 ? 1 : 0;
    }
  }
  const ObservationPanel panel(n, T, std::move(cells));
  CHECK(std::abs(panel.missing_rate() - 0.40) < 0.015);
  CHECK(std::abs(panel.missing_rate_after_first_obs() - 0.30) < 0.015);

  const auto dir = temp_dir();
  const auto path = file_in(dir, "panel.csv");
  save_panel(panel, path);
  const auto loaded = load_panel(path, n, T);
  CHECK(loaded.missing_rate() == panel.missing_rate());
  CHECK(loaded.missing_rate_after_first_obs() == panel.missing_rate_after_first_obs());
  CHECK(loaded.count_observed() == panel.count_observed());
}

TEST_CASE("edges CSV: round trip in both indexing conventions; labels load") {
  const auto graph = make_grid_graph(3, 3);
  const auto dir = temp_dir();

  for (const bool one_based : {false, true}) {
    const auto path = file_in(dir, one_based ? "edges1.csv" : "edges0.csv");
    save_edges(graph, path, one_based);
    const auto loaded = load_edges(path, 9, one_based);
    REQUIRE(loaded.edges.size() == graph.edges.size());
    CHECK(loaded.edges == graph.edges);
  }

  SUBCASE("indexing mismatch is caught") {
    const auto path = file_in(dir, "edges1.csv");  // one-based content
    // Reading one-based content as zero-based shifts everything; the largest
    // endpoint then falls out of range.
    CHECK_THROWS_WITH_AS(load_edges(path, 8, false), doctest::Contains("RangeError"), Error);
  }
  SUBCASE("labels") {
    const auto path = file_in(dir, "labels.csv");
    write_text(path, "site_id,label\n0,Helsinki\n2,Turku\n");
    const auto labels = load_site_labels(path, 4);
    CHECK(labels[0] == "Helsinki");
    CHECK(labels[1] == "site_1");
    CHECK(labels[2] == "Turku");
    CHECK(labels[3] == "site_3");
    write_text(path, "site_id,label\n0,A\n0,B\n");
    CHECK_THROWS_WITH_AS(load_site_labels(path, 4), doctest::Contains("DuplicateCell"), Error);
  }
}

TEST_CASE("draws CSV: constrained values round trip across layouts") {
  std::mt19937_64 rng(404);
  const auto dir = temp_dir();

  const auto roundtrip = [&](const ModelSpec& spec, int n_sites) {
    const ParamLayout layout(spec, n_sites);
    std::vector<std::vector<double>> us;
    for (int k = 0; k < 6; ++k) us.push_back(random_unconstrained(layout, rng, 0.6));
    const auto draws = wrap_chains(us, 2);
    const auto path = file_in(dir, "draws.csv");
    save_draws(path, layout, draws);
    const auto loaded = load_draws(path, layout);
    REQUIRE(loaded.n_chains == 1);
    REQUIRE(loaded.n_draws == 6);
    for (int k = 0; k < 6; ++k) {
      const ModelParams want = layout.constrain(draws.draw_at(k / 3, k % 3));
      const ModelParams got = layout.constrain(loaded.draw_at(0, k));
      CHECK(close_all(want.mu, got.mu));
      CHECK(close_all(want.lambda, got.lambda));
      CHECK(close_all(want.phi, got.phi));
      CHECK(close_all(want.gamma, got.gamma));
      CHECK(close_all(want.rho, got.rho));
      CHECK(close_all(want.a, got.a));
      CHECK(close_all(want.sigma_phi, got.sigma_phi));
      CHECK(close_all(want.xi, got.xi));
      CHECK(close_all(want.beta, got.beta));
      CHECK(std::abs(want.sigma_lambda - got.sigma_lambda) < 1e-12);
      CHECK(loaded.lp_at(0, k) == draws.lp_at(k / 3, k % 3));
    }
  };

  ModelSpec full;
  full.n_states = 3;
  roundtrip(full, 4);

  ModelSpec shared = full;
  shared.shared_sigma_phi = true;
  roundtrip(shared, 4);

  ModelSpec simpler;
  simpler.n_states = 2;
  simpler.shared_sigma_phi = true;
  simpler.model_missingness = false;
  roundtrip(simpler, 5);

  ModelSpec aspatial;
  aspatial.n_states = 2;
  aspatial.include_spatial = false;
  roundtrip(aspatial, 5);
}

TEST_CASE("draws CSV: schema violations are rejected") {
  ModelSpec spec;
  spec.n_states = 2;
  const ParamLayout layout(spec, 3);
  std::mt19937_64 rng(7);
  const auto dir = temp_dir();
  const auto path = file_in(dir, "draws.csv");
  save_draws(path, layout, wrap_chains({random_unconstrained(layout, rng)}, 1));

  SUBCASE("wrong layout shape") {
    const ParamLayout other(spec, 4);
    CHECK_THROWS_WITH_AS(load_draws(path, other), doctest::Contains("MalformedRow"), Error);
  }
  SUBCASE("non-numeric cell") {
    auto text = read_text(path);
    const auto pos = text.find('\n') + 1;
    text.replace(pos, text.find(',', pos) - pos, "oops");
    write_text(path, text);
    CHECK_THROWS_WITH_AS(load_draws(path, layout), doctest::Contains("MalformedRow"), Error);
  }
  SUBCASE("header only") {
    const auto text = read_text(path);
    write_text(path, text.substr(0, text.find('\n') + 1));
    CHECK_THROWS_WITH_AS(load_draws(path, layout), doctest::Contains("DegenerateInput"), Error);
  }
}

TEST_CASE("params CSV: truth files round trip without lp__") {
  ModelSpec spec;
  spec.n_states = 3;
  const auto graph = make_path_graph(5);
  std::mt19937_64 rng(31);
  const auto truth = sample_params_from_priors(spec, graph, rng);
  const ParamLayout layout(spec, 5);

  const auto dir = temp_dir();
  const auto path = file_in(dir, "true_params.csv");
  save_params(path, layout, truth);

  const auto text = read_text(path);
  CHECK(text.find("lp__") == std::string::npos);
  CHECK(text.substr(0, 6) == "mu[1],");

  const auto loaded = load_params(path, layout);
  CHECK(close_all(loaded.mu, truth.mu));
  CHECK(close_all(loaded.phi, truth.phi));
  CHECK(close_all(loaded.a, truth.a));

  // A params file must hold exactly one row.
  write_text(path, text + text.substr(text.find('\n') + 1));
  CHECK_THROWS_WITH_AS(load_params(path, layout), doctest::Contains("MalformedRow"), Error);
}

TEST_CASE("summarize_draws: names, moments, and the single-chain fallback") {
  ModelSpec spec;
  spec.n_states = 2;
  const ParamLayout layout(spec, 3);
  std::mt19937_64 rng(88);

  SUBCASE("two chains give finite diagnostics") {
    std::vector<std::vector<double>> us;
    for (int k = 0; k < 16; ++k) us.push_back(random_unconstrained(layout, rng, 0.8));
    const auto draws = wrap_chains(us, 2);
    const auto rows = summarize_draws(layout, draws);
    auto names = layout.column_names();
    names.push_back("lp__");
    REQUIRE(rows.size() == names.size());
    for (std::size_t j = 0; j < rows.size(); ++j) CHECK(rows[j].param == names[j]);

    // mu[1] mean equals the hand-pooled mean of the constrained draws.
    double want = 0.0;
    for (int k = 0; k < 16; ++k) {
      want += layout.constrain(std::span<const double>(us[static_cast<std::size_t>(k)])).mu[0];
    }
    want /= 16.0;
    CHECK(rows[0].summary.mean == doctest::Approx(want).epsilon(1e-12));
    for (const auto& row : rows) {
      CHECK(std::isfinite(row.summary.rhat));
      CHECK(row.summary.ess_bulk > 0.0);
    }
  }
  SUBCASE("one chain: moments kept, sampler diagnostics NA") {
    std::vector<std::vector<double>> us;
    for (int k = 0; k < 5; ++k) us.push_back(random_unconstrained(layout, rng, 0.8));
    const auto rows = summarize_draws(layout, wrap_chains(us, 1));
    CHECK(std::isnan(rows[0].summary.rhat));
    CHECK(std::isnan(rows[0].summary.ess_bulk));
    CHECK(std::isfinite(rows[0].summary.mean));
    CHECK(rows[0].summary.q025 <= rows[0].summary.q975);

    const auto dir = temp_dir();
    const auto path = file_in(dir, "diagnostics.csv");
    save_diagnostics(path, rows);
    const auto table = read_csv(path);
    REQUIRE(table.columns ==
            std::vector<std::string>{"param", "mean", "sd", "q2.5", "q97.5", "ess_bulk",
                                     "ess_tail", "rhat"});
    CHECK(table.rows[0][7] == "NA");
    CHECK(table.rows[0][0] == "mu[1]");
  }
}

TEST_CASE("trajectory CSVs: map summary schema, single-path round trip") {
  const auto dir = temp_dir();

  MapStateSummary summary;
  summary.n_times = 2;
  summary.n_states = 2;
  summary.avg_marginals = {0.75, 0.25, 0.5, 0.5};
  summary.modal_state = {1, 1};
  summary.modal_prob = {0.75, 0.5};
  const auto map_path = file_in(dir, "trajectory.csv");
  save_map_summary(map_path, summary);
  const auto table = read_csv(map_path);
  CHECK(table.columns == std::vector<std::string>{"time", "modal_state", "modal_prob",
                                                  "p_state_1", "p_state_2"});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0][0] == "0");
  CHECK(table.rows[0][3] == "0.75");
  CHECK(table.rows[1][4] == "0.5");

  StateTrajectory traj;
  traj.states = {1, 2, 2, 1};
  const auto traj_path = file_in(dir, "true_trajectory.csv");
  save_trajectory(traj_path, traj);
  CHECK(load_trajectory(traj_path).states == traj.states);

  write_text(traj_path, "time,state\n0,1\n2,1\n");
  CHECK_THROWS_WITH_AS(load_trajectory(traj_path), doctest::Contains("MalformedRow"), Error);
}

TEST_CASE("bundle CSV: round trip, inference of categories, ragged input") {
  const auto dir = temp_dir();
  const auto path = file_in(dir, "bundle.csv");

  std::vector<StateTrajectory> trajs(3);
  trajs[0].states = {1, 1, 2, 3};
  trajs[1].states = {1, 2, 2, 2};
  trajs[2].states = {3, 3, 3, 3};
  save_bundle(path, trajs);

  const auto bundle = load_bundle(path);
  CHECK(bundle.n_trajectories == 3);
  CHECK(bundle.n_times == 4);
  CHECK(bundle.n_categories == 3);  // inferred from the largest value
  CHECK(bundle.at(0, 2) == 2);
  CHECK(bundle.at(2, 3) == 3);

  const auto wider = load_bundle(path, 5);
  CHECK(wider.n_categories == 5);

  write_text(path, "1,1,2\n1,2\n");
  CHECK_THROWS_WITH_AS(load_bundle(path), doctest::Contains("LengthMismatch"), Error);
  write_text(path, "");
  CHECK_THROWS_WITH_AS(load_bundle(path), doctest::Contains("DegenerateInput"), Error);
}

TEST_CASE("changepoint CSVs: distribution sums to one, emission grid complete") {
  std::vector<int> states;
  for (int m = 0; m < 4; ++m) {
    for (int t = 0; t < 12; ++t) states.push_back(t < 6 ? 1 : 2);
  }
  const auto bundle = make_bundle(states, 4, 12, 2);
  ChangepointConfig cfg;
  cfg.n_sweeps = 400;
  cfg.n_burnin = 100;
  cfg.seed = 5;
  const auto fit = fit_changepoint(bundle, cfg);

  const auto dir = temp_dir();
  const auto dist_path = file_in(dir, "changepoint.csv");
  save_changepoint(dist_path, fit);
  const auto table = read_csv(dist_path);
  CHECK(table.columns == std::vector<std::string>{"time", "probability"});
  REQUIRE(table.rows.size() == 13);  // 12 switch times + never
  CHECK(table.rows.back()[0] == "never");
  double total = 0.0;
  for (const auto& row : table.rows) total += std::strtod(row[1].c_str(), nullptr);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

  const auto emit_path = file_in(dir, "changepoint_emission.csv");
  save_changepoint_emission(emit_path, fit);
  const auto emissions = read_csv(emit_path);
  REQUIRE(emissions.rows.size() == 4);  // 2 regimes x 2 categories
  CHECK(emissions.rows[0][0] == "1");
  CHECK(emissions.rows[3][1] == "2");
}

TEST_CASE("predictive and evaluation writers: headers, NA fields, alignment checks") {
  const auto dir = temp_dir();

  PredictiveSeries series;
  series.n_times = 2;
  series.n_samples = 4;
  series.mean = {0.25, 0.5};
  series.sd = {0.1, 0.2};
  series.q025 = {0.1, 0.2};
  series.q975 = {0.4, 0.9};
  series.observed = {0.5, std::numeric_limits<double>::quiet_NaN()};
  series.n_observed = {4, 0};
  save_proportion_series(file_in(dir, "proportion_series.csv"), series);
  auto table = read_csv(file_in(dir, "proportion_series.csv"));
  CHECK(table.columns == std::vector<std::string>{"time", "mean", "sd", "q2.5", "q97.5",
                                                  "observed", "n_observed"});
  CHECK(table.rows[1][5] == "NA");
  CHECK(table.rows[1][6] == "0");

  StateProbabilityMap map;
  map.state = 2;
  map.value = {0.5, 0.75};
  map.fully_missing = {0, 1};
  map.assigned_times = {0};
  save_state_map(file_in(dir, "state_map_s2.csv"), map);
  table = read_csv(file_in(dir, "state_map_s2.csv"));
  CHECK(table.columns == std::vector<std::string>{"site", "value", "flag"});
  CHECK(table.rows[1][2] == "1");

  MissingnessCurves curves;
  curves.n_states = 2;
  curves.n_times = 3;
  curves.mean = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  curves.q025 = curves.mean;
  curves.q975 = curves.mean;
  save_missingness_curves(file_in(dir, "missingness_curves.csv"), curves);
  table = read_csv(file_in(dir, "missingness_curves.csv"));
  REQUIRE(table.rows.size() == 6);
  CHECK(table.rows[3][0] == "2");  // second state block
  CHECK(table.rows[3][1] == "0");

  SeasonalSummary seasonal;
  seasonal.mean.assign(12, 0.0);
  seasonal.q25.assign(12, -0.1);
  seasonal.q75.assign(12, 0.1);
  seasonal.q025.assign(12, -0.2);
  seasonal.q975.assign(12, 0.2);
  save_seasonal(file_in(dir, "seasonal.csv"), seasonal);
  table = read_csv(file_in(dir, "seasonal.csv"));
  REQUIRE(table.rows.size() == 12);
  CHECK(table.rows[0][0] == "1");
  CHECK(table.rows[11][0] == "12");

  StateSummaryRow row;
  row.state = 1;
  row.empty = true;
  row.observed_death = std::numeric_limits<double>::quiet_NaN();
  row.death_mean = std::numeric_limits<double>::quiet_NaN();
  const std::vector<StateSummaryRow> rows{row};
  save_state_table(file_in(dir, "state_table.csv"), rows);
  table = read_csv(file_in(dir, "state_table.csv"));
  CHECK(table.rows[0][1] == "1");
  CHECK(table.rows[0][3] == "NA");

  HoldoutPlan plan;
  plan.cells = {{0, 1, 1}, {2, 3, 0}};
  plan.fraction = 0.1;
  plan.replication = 0;
  plan.seed = 42;
  PointwiseElpd elpd;
  elpd.cell_elpd = {-0.5, -0.7};
  elpd.cell_mc_se = {0.01, 0.02};
  elpd.total = -1.2;
  elpd.total_mc_se = 0.022;
  elpd.replication = 0;
  elpd.plan_seed = 42;
  const std::vector<HoldoutPlan> plans{plan};
  const std::vector<PointwiseElpd> elpds{elpd};
  save_holdout_plans(file_in(dir, "holdout_plan.csv"), plans);
  save_elpd_pointwise(file_in(dir, "elpd_pointwise.csv"), plans, elpds);
  table = read_csv(file_in(dir, "holdout_plan.csv"));
  CHECK(table.columns == std::vector<std::string>{"replication", "site", "time", "y_true",
                                                  "fraction", "seed"});
  CHECK(table.rows[0][5] == "42");
  table = read_csv(file_in(dir, "elpd_pointwise.csv"));
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[1][4] == format_double(-0.7));

  PointwiseElpd other = elpd;
  other.cell_elpd.pop_back();
  const std::vector<PointwiseElpd> misaligned{other};
  CHECK_THROWS_WITH_AS(save_elpd_pointwise(file_in(dir, "bad.csv"), plans, misaligned),
                       doctest::Contains("LengthMismatch"), Error);

  ElpdDiff diff;
  diff.mean = 1.5;
  diff.se = 0.0;
  diff.n_replications = 1;
  PointwiseElpd b = elpd;
  b.total = -2.7;
  const std::vector<PointwiseElpd> bs{b};
  save_elpd_compare(file_in(dir, "elpd_compare.csv"), elpds, bs, diff);
  table = read_csv(file_in(dir, "elpd_compare.csv"));
  CHECK(table.rows[0][3] == format_double(elpd.total - b.total));
}

TEST_CASE("write_svg_plot: ribbons, NaN splitting, degenerate input") {
  const auto dir = temp_dir();
  const auto path = file_in(dir, "plot.svg");

  PlotSeries band;
  band.label = "series & band";
  band.x = {0, 1, 2, 3, 4};
  band.y = {0.1, 0.2, std::numeric_limits<double>::quiet_NaN(), 0.4, 0.5};
  band.lo = {0.05, 0.1, 0.15, 0.3, 0.4};
  band.hi = {0.2, 0.3, 0.4, 0.5, 0.6};
  PlotSeries line;
  line.label = "plain";
  line.x = {0, 1, 2, 3, 4};
  line.y = {0.5, 0.4, 0.3, 0.2, 0.1};
  const std::vector<PlotSeries> series{band, line};
  write_svg_plot(path, "Test <plot>", series, "time", "value");

  const auto svg = read_text(path);
  CHECK(svg.substr(0, 4) == "<svg");
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<polygon") != std::string::npos);
  CHECK(svg.find("Test &lt;plot&gt;") != std::string::npos);
  CHECK(svg.find("series &amp; band") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  // The NaN interior point splits the first series into two polylines.
  std::size_t polylines = 0;
  for (std::size_t at = svg.find("<polyline"); at != std::string::npos;
       at = svg.find("<polyline", at + 1)) {
    ++polylines;
  }
  CHECK(polylines == 3);

  const std::vector<PlotSeries> none;
  CHECK_THROWS_WITH_AS(write_svg_plot(path, "t", none), doctest::Contains("DegenerateInput"),
                       Error);
  PlotSeries bad = line;
  bad.y.pop_back();
  const std::vector<PlotSeries> mismatched{bad};
  CHECK_THROWS_WITH_AS(write_svg_plot(path, "t", mismatched),
                       doctest::Contains("LengthMismatch"), Error);
}

TEST_CASE("run config: file syntax, overrides, unknown keys, range checks") {
  const auto dir = temp_dir();
  const auto path = file_in(dir, "run.cfg");

  write_text(path,
             "# run configuration\n"
             "panel = data/panel.csv   # relative path\n"
             "n_sites= 10\n"
             " n_times =20\n"
             "chains=2\n"
             "shared_sigma_phi = yes\n"
             "target_accept = 0.9\n"
             "\n"
             "seed = 12345\n");
  auto cfg = load_run_config(path);
  CHECK(cfg.panel == "data/panel.csv");
  CHECK(cfg.n_sites == 10);
  CHECK(cfg.n_times == 20);
  CHECK(cfg.chains == 2);
  CHECK(cfg.shared_sigma_phi);
  CHECK(cfg.target_accept == 0.9);
  CHECK(cfg.seed == 12345);
  CHECK(cfg.n_states == 5);  // untouched default

  set_config_key(cfg, "n_states", "3");
  CHECK(cfg.n_states == 3);
  CHECK_THROWS_WITH_AS(set_config_key(cfg, "bogus", "1"), doctest::Contains("ConfigError"),
                       Error);
  CHECK_THROWS_WITH_AS(set_config_key(cfg, "chains", "two"), doctest::Contains("ConfigError"),
                       Error);
  CHECK_THROWS_WITH_AS(set_config_key(cfg, "predict_modal", "maybe"),
                       doctest::Contains("ConfigError"), Error);

  write_text(path, "just a line without an equals sign\n");
  CHECK_THROWS_WITH_AS(load_run_config(path), doctest::Contains("ConfigError"), Error);
  CHECK_THROWS_WITH_AS(load_run_config(file_in(dir, "absent.cfg")),
                       doctest::Contains("ConfigError"), Error);

  RunConfig bad;
  bad.start_month = 13;
  CHECK_THROWS_WITH_AS(bad.check(), doctest::Contains("start_month"), Error);
  bad = RunConfig{};
  bad.holdout_fraction = 0.5;
  CHECK_THROWS_WITH_AS(bad.check(), doctest::Contains("holdout_fraction"), Error);
  bad = RunConfig{};
  bad.cp_burnin = bad.cp_sweeps;
  CHECK_THROWS_WITH_AS(bad.check(), doctest::Contains("cp_burnin"), Error);
  bad = RunConfig{};
  bad.n_states = 0;
  CHECK_THROWS_WITH_AS(bad.check(), doctest::Contains("n_states"), Error);
  RunConfig good;
  CHECK_NOTHROW(good.check());
}

TEST_CASE("compose_report: sections for present artifacts, error when empty") {
  const auto dir = temp_dir();
  CHECK_THROWS_WITH_AS(compose_report(dir), doctest::Contains("MissingArtifacts"), Error);
  CHECK_THROWS_WITH_AS(compose_report(file_in(dir, "nowhere")),
                       doctest::Contains("MissingArtifacts"), Error);

  write_text(file_in(dir, "diagnostics.csv"),
             "param,mean,sd,q2.5,q97.5,ess_bulk,ess_tail,rhat\n"
             "mu[1],-3.5,0.1,-3.7,-3.3,800,750,1.01\n"
             "lambda[1],0.2,0.3,-0.4,0.8,900,880,1\n");
  write_text(file_in(dir, "changepoint.csv"), "time,probability\n1,0.25\n2,0.7\nnever,0.05\n");
  write_text(file_in(dir, "state_map_s1.csv"), "site,value,flag\n0,0.9,0\n1,0.2,1\n2,0.5,0\n");
  write_text(file_in(dir, "labels.csv"), "site_id,label\n0,Espoo\n1,Vantaa\n2,Oulu\n");

  const auto report = compose_report(dir, file_in(dir, "labels.csv"));
  CHECK(report.find("## Posterior summaries") != std::string::npos);
  CHECK(report.find("mu[1]") != std::string::npos);
  CHECK(report.find("lambda[1]") == std::string::npos);  // site effects stay in the CSV
  CHECK(report.find("mode at time 2") != std::string::npos);
  CHECK(report.find("P(no change) = 0.05") != std::string::npos);
  CHECK(report.find("Espoo") != std::string::npos);  // top site of the state-1 map
  CHECK(report.find("## Held-out comparison") == std::string::npos);
}

TEST_SUITE_END();
