#include "spathmm/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spathmm/changepoint.hpp"
#include "spathmm/decode.hpp"
#include "spathmm/errors.hpp"
#include "spathmm/evaluate.hpp"
#include "spathmm/io.hpp"
#include "spathmm/likelihood.hpp"
#include "spathmm/math_util.hpp"
#include "spathmm/predict.hpp"
#include "spathmm/sampler.hpp"
#include "spathmm/simulate.hpp"

namespace spathmm {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidScenario:
    case ErrorCode::IoError:
      return 2;
    case ErrorCode::NonFinite:
    case ErrorCode::InitializationFailure:
      return 4;
    case ErrorCode::MissingArtifacts:
      return 5;
    default:
      return 3;
  }
}

// ---------------------------------------------------------------------------
// Config assembly: defaults < config file < --set pairs < convenience flags.
// ---------------------------------------------------------------------------

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::string> flags;  // convenience options, rewritten as key=value
};

void apply_pair(RunConfig& cfg, const std::string& pair) {
  const std::size_t eq = pair.find('=');
  if (eq == std::string::npos) {
    fail(ErrorCode::ConfigError, "expected key=value, got '" + pair + "'");
  }
  set_config_key(cfg, pair.substr(0, eq), pair.substr(eq + 1));
}

RunConfig make_config(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) cfg = load_run_config(c.config);
  for (const auto& pair : c.sets) apply_pair(cfg, pair);
  for (const auto& pair : c.flags) apply_pair(cfg, pair);
  cfg.check();
  return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "flat key = value configuration file");
  cmd->add_option("--set", c.sets, "override a config key, e.g. --set chains=2")
      ->type_name("KEY=VALUE");
  auto push = [&c](std::string key) {
    return [&c, key = std::move(key)](const std::string& v) { c.flags.push_back(key + "=" + v); };
  };
  cmd->add_option_function<std::string>("--panel", push("panel"), "panel CSV path");
  cmd->add_option_function<std::string>("--edges", push("edges"), "edge-list CSV path");
  cmd->add_option_function<std::string>("--out", push("out_dir"), "output directory");
  cmd->add_option_function<std::string>("--seed", push("seed"), "RNG seed");
}

// ---------------------------------------------------------------------------
// Shared loading steps.
// ---------------------------------------------------------------------------

ModelSpec spec_of(const RunConfig& cfg) {
  ModelSpec spec;
  spec.n_states = cfg.n_states;
  spec.shared_sigma_phi = cfg.shared_sigma_phi;
  spec.model_missingness = cfg.model_missingness;
  spec.include_spatial = cfg.include_spatial;
  return spec;
}

SamplerConfig sampler_of(const RunConfig& cfg) {
  SamplerConfig scfg;
  scfg.n_chains = cfg.chains;
  scfg.n_warmup = cfg.warmup;
  scfg.n_draws = cfg.draws;
  scfg.seed = cfg.seed;
  scfg.target_acceptance = cfg.target_accept;
  scfg.max_tree_depth = cfg.max_tree_depth;
  scfg.jitter_scale = cfg.jitter;
  return scfg;
}

void require_panel_shape(const RunConfig& cfg) {
  if (cfg.panel.empty()) fail(ErrorCode::ConfigError, "panel path is required");
  if (cfg.n_sites < 1 || cfg.n_times < 1) {
    fail(ErrorCode::ConfigError, "n_sites and n_times are required");
  }
}

ObservationPanel panel_of(const RunConfig& cfg) {
  require_panel_shape(cfg);
  return load_panel(cfg.panel, cfg.n_sites, cfg.n_times, cfg.start_month);
}

NeighborhoodGraph graph_of(const RunConfig& cfg) {
  if (!cfg.edges.empty()) return load_edges(cfg.edges, cfg.n_sites, cfg.edges_one_based);
  if (!cfg.include_spatial) return make_path_graph(cfg.n_sites);  // site-count carrier only
  fail(ErrorCode::ConfigError, "edges path is required when the spatial field is on");
}

std::string draws_path_of(const RunConfig& cfg) {
  const std::string path = cfg.draws_path.empty()
                               ? (fs::path(cfg.out_dir) / "draws.csv").string()
                               : cfg.draws_path;
  if (!fs::exists(path)) {
    fail(ErrorCode::MissingArtifacts, "no draws at " + path + "; run fit first");
  }
  return path;
}

std::string out_file(const RunConfig& cfg, const char* name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

ModelParams pooled_draw(const ParamLayout& layout, const PosteriorDraws& draws, int j) {
  return layout.constrain(draws.draw_at(j / draws.n_draws, j % draws.n_draws));
}

/// Column-wise mean of the constrained draws, mapped back to ModelParams.
ModelParams posterior_mean_params(const ParamLayout& layout, const PosteriorDraws& draws) {
  std::vector<double> mean;
  const int total = draws.n_chains * draws.n_draws;
  for (int j = 0; j < total; ++j) {
    const auto row = layout.flatten(pooled_draw(layout, draws, j));
    if (mean.empty()) mean.assign(row.size(), 0.0);
    for (std::size_t k = 0; k < row.size(); ++k) mean[k] += row[k];
  }
  for (double& v : mean) v /= total;
  return layout.unflatten(mean);
}

/// One paired trajectory per pooled posterior draw: FFBS samples by default,
/// per-draw Viterbi paths when `modal` is set.
std::vector<StateTrajectory> paired_trajectories(const ObservationPanel& panel,
                                                 const ModelSpec& spec, const ParamLayout& layout,
                                                 const PosteriorDraws& draws, bool modal,
                                                 std::uint64_t seed) {
  const int total = draws.n_chains * draws.n_draws;
  std::vector<StateTrajectory> trajs;
  trajs.reserve(static_cast<std::size_t>(total));
  for (int j = 0; j < total; ++j) {
    const ModelParams p = pooled_draw(layout, draws, j);
    if (modal) {
      trajs.push_back(viterbi(panel, spec, p));
    } else {
      std::mt19937_64 rng(derive_seed(seed, 0x9E0000 + static_cast<std::uint64_t>(j)));
      trajs.push_back(sample_trajectory(panel, spec, p, rng));
    }
  }
  return trajs;
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg) {
  if (cfg.n_sites < 1 || cfg.n_times < 1) {
    fail(ErrorCode::ConfigError, "simulate requires n_sites and n_times");
  }
  SimulationScenario scn;
  scn.spec = spec_of(cfg);
  scn.n_sites = cfg.n_sites;
  scn.n_times = cfg.n_times;
  scn.start_month = cfg.start_month;
  scn.seed = cfg.seed;
  scn.regime = cfg.sim_regime == "none" ? MissingnessRegime::none
                                        : MissingnessRegime::state_dependent;
  if (!cfg.edges.empty()) {
    scn.graph = load_edges(cfg.edges, cfg.n_sites, cfg.edges_one_based);
  } else if (cfg.sim_rows > 0 && cfg.sim_cols > 0) {
    if (cfg.sim_rows * cfg.sim_cols != cfg.n_sites) {
      fail(ErrorCode::ConfigError, "sim_rows * sim_cols must equal n_sites");
    }
    scn.graph = make_grid_graph(cfg.sim_rows, cfg.sim_cols);
  } else {
    scn.graph = make_path_graph(cfg.n_sites);
  }
  if (cfg.sim_blackout_max > 0) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xB1A0));
    scn.blackout.resize(static_cast<std::size_t>(cfg.n_sites));
    const int cap = std::min(cfg.sim_blackout_max, cfg.n_times);
    for (auto& b : scn.blackout) {
      b = static_cast<int>(uniform01(rng) * static_cast<double>(cap + 1));
    }
  }

  const auto sim = simulate_panel(scn);
  const ParamLayout layout(scn.spec, cfg.n_sites);
  save_panel(sim.panel, out_file(cfg, "panel.csv"));
  save_edges(scn.graph, out_file(cfg, "edges.csv"), cfg.edges_one_based);
  save_params(out_file(cfg, "true_params.csv"), layout, sim.params);
  save_trajectory(out_file(cfg, "true_trajectory.csv"), sim.trajectory);

  std::printf("simulated panel: %d sites x %d times, missingness %.1f%% overall, %.1f%% after first observation\n",
              cfg.n_sites, cfg.n_times, 100.0 * sim.panel.missing_rate(),
              100.0 * sim.panel.missing_rate_after_first_obs());
  std::printf("wrote panel.csv, edges.csv, true_params.csv, true_trajectory.csv to %s\n",
              cfg.out_dir.c_str());
  return 0;
}

int cmd_fit(const RunConfig& cfg, bool dry_run) {
  const auto start = Clock::now();
  const auto panel = panel_of(cfg);
  const auto graph = graph_of(cfg);
  const ModelSpec spec = spec_of(cfg);
  const ParamLayout layout(spec, cfg.n_sites);
  const auto ctx = make_emission_context(panel, spec);
  std::printf("loaded panel: %d sites x %d times, missingness %.1f%% overall, %.1f%% after first observation\n",
              cfg.n_sites, cfg.n_times, 100.0 * panel.missing_rate(),
              100.0 * panel.missing_rate_after_first_obs());

  const LogDensityGradient target = [&](std::span<const double> u, std::span<double> grad) {
    const PosteriorEval eval = grad_log_posterior(ctx, graph, layout, u);
    std::copy(eval.grad.begin(), eval.grad.end(), grad.begin());
    return eval.value;
  };

  std::vector<double> init_point;
  if (!cfg.init.empty()) {
    const auto init_draws = load_draws(cfg.init, layout);
    init_point.assign(init_draws.draw_at(0, init_draws.n_draws - 1).begin(),
                      init_draws.draw_at(0, init_draws.n_draws - 1).end());
  }

  if (dry_run) {
    std::vector<double> u(static_cast<std::size_t>(layout.dim()), 0.0);
    if (!init_point.empty()) u = init_point;
    const int evals = 3;
    double value = 0.0, grad_norm = 0.0;
    const auto t0 = Clock::now();
    for (int k = 0; k < evals; ++k) {
      const PosteriorEval eval = grad_log_posterior(ctx, graph, layout, u);
      value = eval.value;
      grad_norm = 0.0;
      for (double g : eval.grad) grad_norm += g * g;
      grad_norm = std::sqrt(grad_norm);
    }
    const double ms = 1000.0 * seconds_since(t0) / evals;
    if (!std::isfinite(value) || !std::isfinite(grad_norm)) {
      fail(ErrorCode::NonFinite, "log posterior is not finite at the initial point");
    }
    std::printf("dry run: dim %d, log posterior %.6f, gradient norm %.6g, %.2f ms per evaluation\n",
                layout.dim(), value, grad_norm, ms);
    return 0;
  }

  SamplerConfig scfg = sampler_of(cfg);
  if (!init_point.empty()) {
    scfg.init_mode = SamplerConfig::Init::user;
    scfg.init_point = init_point;
  }
  const auto draws = run_chains(target, layout.dim(), scfg);

  save_draws(out_file(cfg, "draws.csv"), layout, draws);
  const auto diagnostics = summarize_draws(layout, draws);
  save_diagnostics(out_file(cfg, "diagnostics.csv"), diagnostics);

  double max_rhat = 0.0;
  for (const auto& row : diagnostics) {
    if (std::isfinite(row.summary.rhat)) max_rhat = std::max(max_rhat, row.summary.rhat);
  }
  std::printf("fit: %d chains x %d draws (dim %d), %d divergences, max R-hat %.3f, %.1f s\n",
              draws.n_chains, draws.n_draws, draws.dim, draws.total_divergences(), max_rhat,
              seconds_since(start));
  if (max_rhat > 1.05) {
    std::printf("warning: max R-hat %.3f exceeds 1.05; inspect diagnostics.csv\n", max_rhat);
  }
  std::printf("wrote draws.csv, diagnostics.csv to %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_decode(const RunConfig& cfg, bool viterbi_flag) {
  const auto panel = panel_of(cfg);
  const ModelSpec spec = spec_of(cfg);
  const ParamLayout layout(spec, cfg.n_sites);
  const auto draws = load_draws(draws_path_of(cfg), layout);

  const auto summary = map_state_sequence(panel, layout, draws);
  save_map_summary(out_file(cfg, "trajectory.csv"), summary);
  std::printf("decode: %d draws pooled; wrote trajectory.csv\n",
              draws.n_chains * draws.n_draws);

  if (viterbi_flag) {
    const ModelParams p = posterior_mean_params(layout, draws);
    save_trajectory(out_file(cfg, "viterbi.csv"), viterbi(panel, spec, p));
    std::printf("wrote viterbi.csv (posterior-mean plug-in path)\n");
  }
  if (cfg.sample_trajectories > 0) {
    const int total = draws.n_chains * draws.n_draws;
    std::vector<StateTrajectory> trajs;
    trajs.reserve(static_cast<std::size_t>(cfg.sample_trajectories));
    for (int k = 0; k < cfg.sample_trajectories; ++k) {
      // Evenly spaced across the pooled draws; the FFBS noise is seeded per sample.
      const int j = static_cast<int>((static_cast<long long>(k) * total) / cfg.sample_trajectories);
      const ModelParams p = pooled_draw(layout, draws, j);
      std::mt19937_64 rng(derive_seed(cfg.seed, 0xDEC0 + static_cast<std::uint64_t>(k)));
      trajs.push_back(sample_trajectory(panel, spec, p, rng));
    }
    save_bundle(out_file(cfg, "trajectory_samples.csv"), trajs);
    std::printf("wrote trajectory_samples.csv (%d sampled trajectories)\n",
                cfg.sample_trajectories);
  }
  return 0;
}

int cmd_predict(const RunConfig& cfg) {
  const auto panel = panel_of(cfg);
  const ModelSpec spec = spec_of(cfg);
  const ParamLayout layout(spec, cfg.n_sites);
  const auto draws = load_draws(draws_path_of(cfg), layout);
  const auto trajs = paired_trajectories(panel, spec, layout, draws, cfg.predict_modal,
                                         derive_seed(cfg.seed, 0x9A17));

  PredictiveOptions opts;
  opts.n_reps = cfg.predict_reps;
  opts.seed = derive_seed(cfg.seed, 0x9ED);
  const auto series = predictive_proportion(panel, layout, draws, trajs, opts);
  save_proportion_series(out_file(cfg, "proportion_series.csv"), series);
  {
    std::vector<double> x(static_cast<std::size_t>(series.n_times));
    for (int t = 0; t < series.n_times; ++t) x[static_cast<std::size_t>(t)] = t;
    PlotSeries predicted{"predicted", x, series.mean, series.q025, series.q975};
    PlotSeries observed{"observed", x, series.observed, {}, {}};
    const std::vector<PlotSeries> plot{predicted, observed};
    write_svg_plot(out_file(cfg, "proportion_series.svg"),
                   "Proportion of sites with deaths", plot, "month index", "proportion");
  }

  const auto modal = modal_state_assignment(trajs, panel.n_times(), spec.n_states);
  int maps_written = 0;
  for (int s = 1; s <= spec.n_states; ++s) {
    if (std::find(modal.begin(), modal.end(), s) == modal.end()) {
      std::printf("state %d is never modal; no state map written\n", s);
      continue;
    }
    const auto map = state_probability_map(panel, layout, draws, trajs, s);
    const std::string name = "state_map_s" + std::to_string(s) + ".csv";
    save_state_map(out_file(cfg, name.c_str()), map);
    ++maps_written;
  }

  MissingnessCurves curves;
  if (spec.model_missingness) {
    curves = missingness_curve(layout, draws, panel.n_times());
    save_missingness_curves(out_file(cfg, "missingness_curves.csv"), curves);
    std::vector<PlotSeries> plot;
    std::vector<double> x(static_cast<std::size_t>(curves.n_times));
    for (int t = 0; t < curves.n_times; ++t) x[static_cast<std::size_t>(t)] = t;
    for (int s = 0; s < curves.n_states; ++s) {
      const auto offset = static_cast<std::size_t>(s) * static_cast<std::size_t>(curves.n_times);
      PlotSeries ps;
      ps.label = "state " + std::to_string(s + 1);
      ps.x = x;
      ps.y.assign(curves.mean.begin() + offset, curves.mean.begin() + offset + curves.n_times);
      ps.lo.assign(curves.q025.begin() + offset, curves.q025.begin() + offset + curves.n_times);
      ps.hi.assign(curves.q975.begin() + offset, curves.q975.begin() + offset + curves.n_times);
      plot.push_back(std::move(ps));
    }
    write_svg_plot(out_file(cfg, "missingness_curves.svg"), "Missingness probability by state",
                   plot, "month index", "P(missing)");
  }

  const auto seasonal = seasonal_summary(layout, draws);
  save_seasonal(out_file(cfg, "seasonal.csv"), seasonal);
  {
    std::vector<double> x(12);
    for (int m = 0; m < 12; ++m) x[static_cast<std::size_t>(m)] = m + 1;
    PlotSeries band95{"95% band", x, seasonal.mean, seasonal.q025, seasonal.q975};
    PlotSeries band50{"50% band", x, seasonal.mean, seasonal.q25, seasonal.q75};
    const std::vector<PlotSeries> plot{band95, band50};
    write_svg_plot(out_file(cfg, "seasonal.svg"), "Seasonal effect", plot, "month",
                   "gamma");
  }

  const auto table = state_summary_table(panel, layout, draws, trajs);
  save_state_table(out_file(cfg, "state_table.csv"), table);

  std::printf("predict: %d paired trajectories (%s), %d state maps; wrote "
              "proportion_series, missingness_curves, seasonal, state_table to %s\n",
              draws.n_chains * draws.n_draws, cfg.predict_modal ? "modal" : "sampled",
              maps_written, cfg.out_dir.c_str());
  return 0;
}

int cmd_changepoint(const RunConfig& cfg) {
  const std::string path = cfg.cp_bundle.empty()
                               ? (fs::path(cfg.out_dir) / "trajectory_samples.csv").string()
                               : cfg.cp_bundle;
  if (!fs::exists(path)) {
    fail(ErrorCode::MissingArtifacts, "no trajectory bundle at " + path + "; run decode --sample first");
  }
  const auto bundle = load_bundle(path, cfg.cp_categories);
  ChangepointConfig ccfg;
  ccfg.n_sweeps = cfg.cp_sweeps;
  ccfg.n_burnin = cfg.cp_burnin;
  ccfg.seed = cfg.seed;
  const auto fit = fit_changepoint(bundle, ccfg);

  save_changepoint(out_file(cfg, "changepoint.csv"), fit);
  save_changepoint_emission(out_file(cfg, "changepoint_emission.csv"), fit);
  if (fit.degenerate) {
    std::printf("warning: constant trajectory bundle; change-point model is degenerate\n");
  }
  if (fit.map_changepoint <= fit.n_times) {
    const std::string hi = fit.interval_high > fit.n_times
                               ? std::string("never")
                               : std::to_string(fit.interval_high);
    std::printf("changepoint: MAP switch at time %d (95%% interval %d..%s), P(switch) %.3f\n",
                fit.map_changepoint, fit.interval_low, hi.c_str(), fit.switch_prob);
  } else {
    std::printf("changepoint: MAP is 'no switch', P(switch) %.3f\n", fit.switch_prob);
  }
  std::printf("wrote changepoint.csv, changepoint_emission.csv to %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_elpd(const RunConfig& cfg) {
  const auto start = Clock::now();
  const auto panel = panel_of(cfg);
  const auto graph = graph_of(cfg);

  const ModelSpec spec_a = spec_of(cfg);
  RunConfig cfg_b;
  bool compare = !cfg.alt_config.empty();
  if (compare) {
    // The alternative config contributes the model flags and sampler settings;
    // panel, holdout plan, and seeds stay shared so the plans match.
    cfg_b = load_run_config(cfg.alt_config);
    cfg_b.check();
  }
  const ModelSpec spec_b = compare ? spec_of(cfg_b) : spec_a;

  std::vector<HoldoutPlan> plans;
  std::vector<PointwiseElpd> elpd_a, elpd_b;
  for (int r = 0; r < cfg.replications; ++r) {
    auto holdout = make_holdout(panel, cfg.holdout_fraction,
                                derive_seed(cfg.seed, 0x401D + static_cast<std::uint64_t>(r)), r);

    const auto fit_one = [&](const ModelSpec& spec, const RunConfig& run,
                             std::uint64_t seed_salt) {
      const ParamLayout layout(spec, cfg.n_sites);
      const auto ctx = make_emission_context(holdout.panel, spec);
      const LogDensityGradient target = [&](std::span<const double> u, std::span<double> grad) {
        const PosteriorEval eval = grad_log_posterior(ctx, graph, layout, u);
        std::copy(eval.grad.begin(), eval.grad.end(), grad.begin());
        return eval.value;
      };
      SamplerConfig scfg = sampler_of(run);
      scfg.seed = derive_seed(cfg.seed, seed_salt + static_cast<std::uint64_t>(r));
      const auto draws = run_chains(target, layout.dim(), scfg);
      return pointwise_elpd(holdout.panel, layout, draws, holdout.plan);
    };

    elpd_a.push_back(fit_one(spec_a, cfg, 0xF17A00));
    std::string alt_note;
    if (compare) {
      elpd_b.push_back(fit_one(spec_b, cfg_b, 0xF17B00));
      char buf[48];
      std::snprintf(buf, sizeof(buf), ", alt %.3f", elpd_b.back().total);
      alt_note = buf;
    }
    std::printf("replication %d: %zu held-out cells, elpd %.3f%s\n", r,
                holdout.plan.cells.size(), elpd_a.back().total, alt_note.c_str());
    plans.push_back(std::move(holdout.plan));
  }

  save_holdout_plans(out_file(cfg, "holdout_plan.csv"), plans);
  save_elpd_pointwise(out_file(cfg, "elpd_pointwise.csv"), plans, elpd_a);
  if (compare) {
    save_elpd_pointwise(out_file(cfg, "elpd_pointwise_alt.csv"), plans, elpd_b);
    const ElpdDiff diff = pairwise_elpd_diff(elpd_a, elpd_b);
    save_elpd_compare(out_file(cfg, "elpd_compare.csv"), elpd_a, elpd_b, diff);
    std::printf("elpd difference (main - alt) over %d replications: %.3f +/- %.3f\n",
                diff.n_replications, diff.mean, diff.se);
  }
  std::printf("elpd: %d replications in %.1f s; wrote holdout_plan.csv, elpd_pointwise.csv%s to %s\n",
              cfg.replications, seconds_since(start),
              compare ? ", elpd_pointwise_alt.csv, elpd_compare.csv" : "",
              cfg.out_dir.c_str());
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  const std::string markdown = compose_report(cfg.out_dir, cfg.labels);
  const std::string path = out_file(cfg, "report.md");
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot open for writing: " + path);
  out << markdown;
  out.flush();
  if (!out) fail(ErrorCode::IoError, "write failed: " + path);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Hidden Markov panel model with spatial emissions"};
  app.require_subcommand(1);

  Common c_fit, c_sim, c_dec, c_pred, c_cp, c_elpd, c_rep;
  bool dry_run = false, viterbi_flag = false;

  auto* fit = app.add_subcommand("fit", "sample the posterior, write draws and diagnostics");
  add_common(fit, c_fit);
  fit->add_flag("--dry-run", dry_run, "validate config and data, evaluate the posterior once");
  {
    auto push = [&c_fit](std::string key) {
      return [&c_fit, key = std::move(key)](const std::string& v) {
        c_fit.flags.push_back(key + "=" + v);
      };
    };
    fit->add_option_function<std::string>("--chains", push("chains"), "number of chains");
    fit->add_option_function<std::string>("--warmup", push("warmup"), "warmup iterations");
    fit->add_option_function<std::string>("--draws", push("draws"), "kept draws per chain");
    fit->add_option_function<std::string>("--init", push("init"),
                                          "draws/params CSV giving the starting point");
  }

  auto* sim = app.add_subcommand("simulate", "draw a synthetic panel and its truth files");
  add_common(sim, c_sim);

  auto* dec = app.add_subcommand("decode", "posterior state trajectory summaries");
  add_common(dec, c_dec);
  dec->add_flag("--viterbi", viterbi_flag, "also write the posterior-mean Viterbi path");
  {
    auto push = [&c_dec](std::string key) {
      return [&c_dec, key = std::move(key)](const std::string& v) {
        c_dec.flags.push_back(key + "=" + v);
      };
    };
    dec->add_option_function<std::string>("--draws-file", push("draws_path"), "draws CSV path");
    dec->add_option_function<std::string>("--sample", push("sample_trajectories"),
                                          "write this many FFBS trajectory samples");
  }

  auto* pred = app.add_subcommand("predict", "posterior predictive series, maps, and tables");
  add_common(pred, c_pred);
  {
    auto push = [&c_pred](std::string key) {
      return [&c_pred, key = std::move(key)](const std::string& v) {
        c_pred.flags.push_back(key + "=" + v);
      };
    };
    pred->add_option_function<std::string>("--draws-file", push("draws_path"), "draws CSV path");
    pred->add_option_function<std::string>("--reps", push("predict_reps"),
                                           "Bernoulli replications per draw");
    pred->add_flag_callback("--modal",
                            [&c_pred] { c_pred.flags.push_back("predict_modal=true"); },
                            "pair each draw with its Viterbi path instead of an FFBS sample");
  }

  auto* cp = app.add_subcommand("changepoint", "two-regime switch model on a trajectory bundle");
  add_common(cp, c_cp);
  {
    auto push = [&c_cp](std::string key) {
      return [&c_cp, key = std::move(key)](const std::string& v) {
        c_cp.flags.push_back(key + "=" + v);
      };
    };
    cp->add_option_function<std::string>("--bundle", push("cp_bundle"), "trajectory bundle CSV");
    cp->add_option_function<std::string>("--sweeps", push("cp_sweeps"), "Gibbs sweeps");
    cp->add_option_function<std::string>("--burnin", push("cp_burnin"), "burn-in sweeps");
  }

  auto* elpd = app.add_subcommand("elpd", "held-out log predictive density pipeline");
  add_common(elpd, c_elpd);
  {
    auto push = [&c_elpd](std::string key) {
      return [&c_elpd, key = std::move(key)](const std::string& v) {
        c_elpd.flags.push_back(key + "=" + v);
      };
    };
    elpd->add_option_function<std::string>("--fraction", push("holdout_fraction"),
                                           "held-out fraction of observed cells");
    elpd->add_option_function<std::string>("--replications", push("replications"),
                                           "independent holdout replications");
    elpd->add_option_function<std::string>("--alt-config", push("alt_config"),
                                           "config file of the comparison model");
  }

  auto* rep = app.add_subcommand("report", "markdown summary of the artifacts in out_dir");
  add_common(rep, c_rep);
  {
    auto push = [&c_rep](std::string key) {
      return [&c_rep, key = std::move(key)](const std::string& v) {
        c_rep.flags.push_back(key + "=" + v);
      };
    };
    rep->add_option_function<std::string>("--labels", push("labels"), "site_id,label CSV");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fit->parsed()) return cmd_fit(make_config(c_fit), dry_run);
    if (sim->parsed()) return cmd_simulate(make_config(c_sim));
    if (dec->parsed()) return cmd_decode(make_config(c_dec), viterbi_flag);
    if (pred->parsed()) return cmd_predict(make_config(c_pred));
    if (cp->parsed()) return cmd_changepoint(make_config(c_cp));
    if (elpd->parsed()) return cmd_elpd(make_config(c_elpd));
    if (rep->parsed()) return cmd_report(make_config(c_rep));
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}

}  // namespace spathmm
