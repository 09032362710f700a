#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spathmm/changepoint.hpp"
#include "spathmm/decode.hpp"
#include "spathmm/diagnostics.hpp"
#include "spathmm/evaluate.hpp"
#include "spathmm/graph.hpp"
#include "spathmm/panel.hpp"
#include "spathmm/params.hpp"
#include "spathmm/predict.hpp"
#include "spathmm/sampler.hpp"

namespace spathmm {

// Every CSV this module writes uses %.17g for floating-point fields (exact
// double round trip, byte-stable goldens), "NA" for missing values, a fixed
// column order, and no quoting. Readers reject ragged rows and report
// 1-based line numbers.

/// %.17g, or "NA" for NaN.
std::string format_double(double v);

struct CsvTable {
  std::string path;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;          // -1 when absent
  int require_col(const std::string& name) const;  // MalformedRow when absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, std::span<const std::string> columns,
               const std::vector<std::vector<std::string>>& rows);

// ---------------------------------------------------------------------------
// Panel: header `site,time,y`, y in {0,1,NA}, absent cells are NA. Zero-based
// site and time. The writer emits observed cells only, site-major.
// ---------------------------------------------------------------------------
ObservationPanel load_panel(const std::string& path, int n_sites, int n_times,
                            int start_month = 1);
void save_panel(const ObservationPanel& panel, const std::string& path);

// ---------------------------------------------------------------------------
// Graph: header `site_a,site_b`; `one_based` shifts indices on both ends.
// Optional site-label mapping `site_id,label` (zero-based ids; absent ids
// default to "site_<id>").
// ---------------------------------------------------------------------------
NeighborhoodGraph load_edges(const std::string& path, int n_sites, bool one_based = false);
void save_edges(const NeighborhoodGraph& graph, const std::string& path,
                bool one_based = false);
std::vector<std::string> load_site_labels(const std::string& path, int n_sites);

// ---------------------------------------------------------------------------
// Posterior draws: wide CSV, one row per draw, columns
// ParamLayout::column_names() + `lp__`; chains are concatenated in order.
// Loading pools everything into a single chain and maps each row back to
// unconstrained coordinates (the stored draws are constrained parameters).
// A params file is the same schema without `lp__`, holding exactly one row.
// ---------------------------------------------------------------------------
void save_draws(const std::string& path, const ParamLayout& layout, const PosteriorDraws& draws);
PosteriorDraws load_draws(const std::string& path, const ParamLayout& layout);
void save_params(const std::string& path, const ParamLayout& layout, const ModelParams& p);
ModelParams load_params(const std::string& path, const ParamLayout& layout);

// ---------------------------------------------------------------------------
// Diagnostics: `param,mean,sd,q2.5,q97.5,ess_bulk,ess_tail,rhat` over the
// constrained draw columns plus lp__. With fewer than 2 chains or 4 draws the
// ESS/R-hat fields are NA, never an error.
// ---------------------------------------------------------------------------
struct DiagnosticsRow {
  std::string param;
  ScalarSummary summary;
};
std::vector<DiagnosticsRow> summarize_draws(const ParamLayout& layout,
                                            const PosteriorDraws& draws);
void save_diagnostics(const std::string& path, std::span<const DiagnosticsRow> rows);

// ---------------------------------------------------------------------------
// Trajectories. The decode summary is `time,modal_state,modal_prob,
// p_state_1..p_state_S` with zero-based times; a single trajectory is
// `time,state`; a bundle is a headerless integer matrix, one trajectory per
// row, one time per column.
// ---------------------------------------------------------------------------
void save_map_summary(const std::string& path, const MapStateSummary& summary);
void save_trajectory(const std::string& path, const StateTrajectory& traj);
StateTrajectory load_trajectory(const std::string& path);
void save_bundle(const std::string& path, std::span<const StateTrajectory> trajectories);
/// n_categories == 0 infers the category count from the largest value seen.
TrajectoryBundle load_bundle(const std::string& path, int n_categories = 0);

// ---------------------------------------------------------------------------
// Change point: `time,probability` with 1-based switch positions and a final
// `never` row; emissions as `regime,category,probability`.
// ---------------------------------------------------------------------------
void save_changepoint(const std::string& path, const ChangepointFit& fit);
void save_changepoint_emission(const std::string& path, const ChangepointFit& fit);

// ---------------------------------------------------------------------------
// Predictive outputs.
// ---------------------------------------------------------------------------
void save_proportion_series(const std::string& path, const PredictiveSeries& series);
void save_state_map(const std::string& path, const StateProbabilityMap& map);
void save_missingness_curves(const std::string& path, const MissingnessCurves& curves);
void save_seasonal(const std::string& path, const SeasonalSummary& summary);
void save_state_table(const std::string& path, std::span<const StateSummaryRow> rows);

// ---------------------------------------------------------------------------
// Held-out evaluation. Plans and pointwise files carry a replication column so
// every replication lives in one file.
// ---------------------------------------------------------------------------
void save_holdout_plans(const std::string& path, std::span<const HoldoutPlan> plans);
void save_elpd_pointwise(const std::string& path, std::span<const HoldoutPlan> plans,
                         std::span<const PointwiseElpd> elpds);
void save_elpd_compare(const std::string& path, std::span<const PointwiseElpd> a,
                       std::span<const PointwiseElpd> b, const ElpdDiff& diff);

// ---------------------------------------------------------------------------
// Minimal self-contained SVG line/ribbon charts. A series draws its `y`
// polyline (split at non-finite points) and, when `lo`/`hi` are present, a
// shaded band between them.
// ---------------------------------------------------------------------------
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // optional ribbon, same length as x
  std::vector<double> hi;
};
void write_svg_plot(const std::string& path, const std::string& title,
                    std::span<const PlotSeries> series, const std::string& x_label = "",
                    const std::string& y_label = "");

// ---------------------------------------------------------------------------
// Flat key = value run configuration; '#' starts a comment, blank lines are
// ignored, unknown keys are errors. CLI flags override file values.
// ---------------------------------------------------------------------------
struct RunConfig {
  // paths
  std::string panel;
  std::string edges;
  std::string out_dir = ".";
  std::string labels;
  std::string init;        // draws/params CSV used as the sampler start
  std::string draws_path;  // defaults to <out_dir>/draws.csv when empty

  // panel shape
  int n_sites = 0;
  int n_times = 0;
  int start_month = 1;

  // model
  int n_states = 5;
  bool shared_sigma_phi = false;
  bool model_missingness = true;
  bool include_spatial = true;
  bool edges_one_based = false;

  // sampler
  int chains = 4;
  int warmup = 1000;
  int draws = 1000;
  int max_tree_depth = 10;
  double target_accept = 0.8;
  double jitter = 2.0;
  std::uint64_t seed = 0;

  // simulate
  int sim_rows = 0;  // grid graph when both are positive, else a path graph
  int sim_cols = 0;
  std::string sim_regime = "state_dependent";  // or "none"
  int sim_blackout_max = 0;                    // random forced-missing prefixes

  // decode / predict
  int sample_trajectories = 0;
  int predict_reps = 1;
  bool predict_modal = false;

  // change point
  std::string cp_bundle;  // defaults to <out_dir>/trajectory_samples.csv when empty
  int cp_sweeps = 2000;
  int cp_burnin = 500;
  int cp_categories = 0;  // 0 = infer from the bundle

  // held-out evaluation
  double holdout_fraction = 0.01;
  int replications = 10;
  std::string alt_config;  // config file of the comparison model

  /// Range checks shared by every subcommand; throws ConfigError.
  void check() const;
};

RunConfig load_run_config(const std::string& path);
/// Applies one `key=value` assignment; throws ConfigError for unknown keys or
/// unparsable values.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Markdown run summary referencing the SVG charts and key CSV tables found in
/// `out_dir`; `labels_path` (optional) names sites in the per-state tables.
/// Throws MissingArtifacts when the directory holds none of the artifacts.
std::string compose_report(const std::string& out_dir, const std::string& labels_path = "");

}  // namespace spathmm
