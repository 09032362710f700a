#include "spathmm/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "spathmm/errors.hpp"
#include "spathmm/math_util.hpp"

namespace spathmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string where(const std::string& path, long line_no) {
  return path + ":" + std::to_string(line_no);
}

long parse_int_field(const std::string& token, const std::string& path, long line_no,
                     const char* what) {
  const std::string t = trim(token);
  long value = 0;
  const auto* begin = t.data();
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || t.empty()) {
    fail(ErrorCode::MalformedRow,
         where(path, line_no) + ": " + what + " is not an integer: '" + token + "'");
  }
  return value;
}

double parse_double_field(const std::string& token, const std::string& path, long line_no,
                          const char* what) {
  const std::string t = trim(token);
  if (t == "NA") return kNaN;
  char* end = nullptr;
  const double value = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) {
    fail(ErrorCode::MalformedRow,
         where(path, line_no) + ": " + what + " is not a number: '" + token + "'");
  }
  return value;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot open for writing: " + path);
  return out;
}

void finish_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) fail(ErrorCode::IoError, "write failed: " + path);
}

std::vector<std::string> read_raw_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void check_header(const CsvTable& table, std::span<const std::string> expected) {
  if (table.columns.size() != expected.size()) {
    fail(ErrorCode::MalformedRow,
         table.path + ":1: expected " + std::to_string(expected.size()) + " columns, got " +
             std::to_string(table.columns.size()));
  }
  for (std::size_t j = 0; j < expected.size(); ++j) {
    if (table.columns[j] != expected[j]) {
      fail(ErrorCode::MalformedRow, table.path + ":1: column " + std::to_string(j + 1) +
                                        " is '" + table.columns[j] + "', expected '" +
                                        expected[j] + "'");
    }
  }
}

std::string row_string(std::span<const std::string> fields) {
  std::string line;
  for (std::size_t j = 0; j < fields.size(); ++j) {
    if (j) line += ',';
    line += fields[j];
  }
  return line;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int CsvTable::col(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

int CsvTable::require_col(const std::string& name) const {
  const int j = col(name);
  if (j < 0) fail(ErrorCode::MalformedRow, path + ": missing column '" + name + "'");
  return j;
}

CsvTable read_csv(const std::string& path) {
  const auto lines = read_raw_lines(path);
  if (lines.empty() || trim(lines[0]).empty()) {
    fail(ErrorCode::MalformedRow, path + ":1: missing header");
  }
  CsvTable table;
  table.path = path;
  table.columns = split_fields(lines[0]);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].empty()) {
      if (k + 1 == lines.size()) break;  // tolerate one trailing blank line
      fail(ErrorCode::MalformedRow, where(path, static_cast<long>(k + 1)) + ": blank line");
    }
    auto fields = split_fields(lines[k]);
    if (fields.size() != table.columns.size()) {
      fail(ErrorCode::MalformedRow,
           where(path, static_cast<long>(k + 1)) + ": expected " +
               std::to_string(table.columns.size()) + " fields, got " +
               std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

void write_csv(const std::string& path, std::span<const std::string> columns,
               const std::vector<std::vector<std::string>>& rows) {
  auto out = open_out(path);
  out << row_string(columns) << '\n';
  for (const auto& row : rows) {
    if (row.size() != columns.size()) {
      fail(ErrorCode::LengthMismatch, path + ": row has " + std::to_string(row.size()) +
                                          " fields, header has " +
                                          std::to_string(columns.size()));
    }
    out << row_string(row) << '\n';
  }
  finish_out(out, path);
}

// ---------------------------------------------------------------------------
// Panel
// ---------------------------------------------------------------------------

ObservationPanel load_panel(const std::string& path, int n_sites, int n_times,
                            int start_month) {
  if (n_sites < 1 || n_times < 1) {
    fail(ErrorCode::RangeError, "load_panel: panel dimensions must be positive");
  }
  const auto table = read_csv(path);
  const std::vector<std::string> expected{"site", "time", "y"};
  check_header(table, expected);

  const std::size_t n_cells = static_cast<std::size_t>(n_sites) * static_cast<std::size_t>(n_times);
  std::vector<std::int8_t> cells(n_cells, kMissing);
  std::vector<std::uint8_t> seen(n_cells, 0);
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const long line_no = static_cast<long>(k + 2);
    const auto& row = table.rows[k];
    const long site = parse_int_field(row[0], path, line_no, "site");
    const long time = parse_int_field(row[1], path, line_no, "time");
    if (site < 0 || site >= n_sites) {
      fail(ErrorCode::RangeError, where(path, line_no) + ": site " + std::to_string(site) +
                                      " outside 0.." + std::to_string(n_sites - 1));
    }
    if (time < 0 || time >= n_times) {
      fail(ErrorCode::RangeError, where(path, line_no) + ": time " + std::to_string(time) +
                                      " outside 0.." + std::to_string(n_times - 1));
    }
    const std::size_t at = static_cast<std::size_t>(site) * static_cast<std::size_t>(n_times) +
                           static_cast<std::size_t>(time);
    if (seen[at]) {
      fail(ErrorCode::DuplicateCell, where(path, line_no) + ": cell (" + std::to_string(site) +
                                         "," + std::to_string(time) + ") appears twice");
    }
    seen[at] = 1;
    const std::string y = trim(row[2]);
    if (y == "NA") {
      cells[at] = kMissing;
    } else if (y == "0") {
      cells[at] = 0;
    } else if (y == "1") {
      cells[at] = 1;
    } else {
      fail(ErrorCode::RangeError, where(path, line_no) + ": y must be 0, 1, or NA, got '" +
                                      row[2] + "'");
    }
  }
  return ObservationPanel(n_sites, n_times, std::move(cells), start_month);
}

void save_panel(const ObservationPanel& panel, const std::string& path) {
  auto out = open_out(path);
  out << "site,time,y\n";
  for (int i = 0; i < panel.n_sites(); ++i) {
    for (int t = 0; t < panel.n_times(); ++t) {
      if (panel.missing(i, t)) continue;
      out << i << ',' << t << ',' << static_cast<int>(panel.y(i, t)) << '\n';
    }
  }
  finish_out(out, path);
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

NeighborhoodGraph load_edges(const std::string& path, int n_sites, bool one_based) {
  const auto table = read_csv(path);
  const std::vector<std::string> expected{"site_a", "site_b"};
  check_header(table, expected);
  const long base = one_based ? 1 : 0;
  std::vector<std::pair<int, int>> edges;
  edges.reserve(table.rows.size());
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const long line_no = static_cast<long>(k + 2);
    const long a = parse_int_field(table.rows[k][0], path, line_no, "site_a") - base;
    const long b = parse_int_field(table.rows[k][1], path, line_no, "site_b") - base;
    if (a < 0 || a >= n_sites || b < 0 || b >= n_sites) {
      fail(ErrorCode::RangeError,
           where(path, line_no) + ": edge endpoints outside " + std::to_string(base) + ".." +
               std::to_string(n_sites - 1 + base));
    }
    edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
  }
  return build_graph(n_sites, edges);
}

void save_edges(const NeighborhoodGraph& graph, const std::string& path, bool one_based) {
  auto out = open_out(path);
  const int base = one_based ? 1 : 0;
  out << "site_a,site_b\n";
  for (const auto& [a, b] : graph.edges) out << a + base << ',' << b + base << '\n';
  finish_out(out, path);
}

std::vector<std::string> load_site_labels(const std::string& path, int n_sites) {
  const auto table = read_csv(path);
  const std::vector<std::string> expected{"site_id", "label"};
  check_header(table, expected);
  std::vector<std::string> labels(static_cast<std::size_t>(n_sites));
  for (int i = 0; i < n_sites; ++i) labels[static_cast<std::size_t>(i)] = "site_" + std::to_string(i);
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(n_sites), 0);
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const long line_no = static_cast<long>(k + 2);
    const long id = parse_int_field(table.rows[k][0], path, line_no, "site_id");
    if (id < 0 || id >= n_sites) {
      fail(ErrorCode::RangeError, where(path, line_no) + ": site_id " + std::to_string(id) +
                                      " outside 0.." + std::to_string(n_sites - 1));
    }
    if (seen[static_cast<std::size_t>(id)]) {
      fail(ErrorCode::DuplicateCell,
           where(path, line_no) + ": site_id " + std::to_string(id) + " appears twice");
    }
    seen[static_cast<std::size_t>(id)] = 1;
    labels[static_cast<std::size_t>(id)] = trim(table.rows[k][1]);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Draws
// ---------------------------------------------------------------------------

void save_draws(const std::string& path, const ParamLayout& layout, const PosteriorDraws& draws) {
  auto columns = layout.column_names();
  columns.push_back("lp__");
  auto out = open_out(path);
  out << row_string(columns) << '\n';
  for (int c = 0; c < draws.n_chains; ++c) {
    for (int k = 0; k < draws.n_draws; ++k) {
      const ModelParams p = layout.constrain(draws.draw_at(c, k));
      const auto row = layout.flatten(p);
      for (double v : row) out << format_double(v) << ',';
      out << format_double(draws.lp_at(c, k)) << '\n';
    }
  }
  finish_out(out, path);
}

namespace {

// Parses rows of `column_names()` (+ optional lp__) back to unconstrained
// coordinates. Shared by load_draws and load_params.
struct ParsedDraws {
  std::vector<std::vector<double>> u_rows;
  std::vector<double> lp;
};

ParsedDraws parse_draw_rows(const CsvTable& table, const ParamLayout& layout) {
  const auto names = layout.column_names();
  const bool has_lp =
      table.columns.size() == names.size() + 1 && table.columns.back() == "lp__";
  if (!has_lp && table.columns.size() != names.size()) {
    fail(ErrorCode::MalformedRow, table.path + ":1: expected " + std::to_string(names.size()) +
                                      " parameter columns (+ optional lp__), got " +
                                      std::to_string(table.columns.size()));
  }
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (table.columns[j] != names[j]) {
      fail(ErrorCode::MalformedRow, table.path + ":1: column " + std::to_string(j + 1) +
                                        " is '" + table.columns[j] + "', expected '" + names[j] +
                                        "'");
    }
  }
  if (table.rows.empty()) fail(ErrorCode::DegenerateInput, table.path + ": no draws");

  ParsedDraws parsed;
  std::vector<double> values(names.size());
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const long line_no = static_cast<long>(k + 2);
    const auto& row = table.rows[k];
    for (std::size_t j = 0; j < names.size(); ++j) {
      values[j] = parse_double_field(row[j], table.path, line_no, names[j].c_str());
    }
    const ModelParams p = layout.unflatten(values);
    parsed.u_rows.push_back(layout.unconstrain(p));
    parsed.lp.push_back(has_lp ? parse_double_field(row.back(), table.path, line_no, "lp__")
                               : 0.0);
  }
  return parsed;
}

}  // namespace

PosteriorDraws load_draws(const std::string& path, const ParamLayout& layout) {
  const auto parsed = parse_draw_rows(read_csv(path), layout);
  PosteriorDraws draws;
  draws.n_chains = 1;
  draws.n_draws = static_cast<int>(parsed.u_rows.size());
  draws.dim = layout.dim();
  draws.draws.reserve(parsed.u_rows.size() * static_cast<std::size_t>(layout.dim()));
  for (const auto& u : parsed.u_rows) draws.draws.insert(draws.draws.end(), u.begin(), u.end());
  draws.lp = parsed.lp;
  draws.divergent.assign(parsed.u_rows.size(), 0);
  draws.chains.resize(1);
  return draws;
}

void save_params(const std::string& path, const ParamLayout& layout, const ModelParams& p) {
  const auto columns = layout.column_names();
  const auto row = layout.flatten(p);
  auto out = open_out(path);
  out << row_string(columns) << '\n';
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j) out << ',';
    out << format_double(row[j]);
  }
  out << '\n';
  finish_out(out, path);
}

ModelParams load_params(const std::string& path, const ParamLayout& layout) {
  const auto table = read_csv(path);
  if (table.rows.size() != 1) {
    fail(ErrorCode::MalformedRow,
         path + ": params file must hold exactly one row, got " +
             std::to_string(table.rows.size()));
  }
  const auto parsed = parse_draw_rows(table, layout);
  return layout.constrain(std::span<const double>(parsed.u_rows[0]));
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

std::vector<DiagnosticsRow> summarize_draws(const ParamLayout& layout,
                                            const PosteriorDraws& draws) {
  if (draws.n_chains < 1 || draws.n_draws < 1) {
    fail(ErrorCode::DegenerateInput, "summarize_draws: no draws");
  }
  auto names = layout.column_names();
  names.push_back("lp__");
  const std::size_t n_cols = names.size();
  const std::size_t total =
      static_cast<std::size_t>(draws.n_chains) * static_cast<std::size_t>(draws.n_draws);

  // Column-major scalar matrix over pooled draws, chain-major within a column.
  std::vector<std::vector<double>> values(n_cols);
  for (auto& column : values) column.reserve(total);
  for (int c = 0; c < draws.n_chains; ++c) {
    for (int k = 0; k < draws.n_draws; ++k) {
      const ModelParams p = layout.constrain(draws.draw_at(c, k));
      const auto row = layout.flatten(p);
      for (std::size_t j = 0; j < row.size(); ++j) values[j].push_back(row[j]);
      values[n_cols - 1].push_back(draws.lp_at(c, k));
    }
  }

  const bool structured = draws.n_chains >= 2 && draws.n_draws >= 4;
  std::vector<DiagnosticsRow> rows(n_cols);
  for (std::size_t j = 0; j < n_cols; ++j) {
    rows[j].param = names[j];
    if (structured) {
      rows[j].summary = summarize_scalar(values[j], draws.n_chains);
    } else {
      auto& s = rows[j].summary;
      s.mean = mean_of(values[j]);
      s.sd = values[j].size() > 1 ? std::sqrt(variance_of(values[j])) : 0.0;
      s.q025 = quantile(values[j], 0.025);
      s.q975 = quantile(values[j], 0.975);
      s.ess_bulk = kNaN;
      s.ess_tail = kNaN;
      s.rhat = kNaN;
    }
  }
  return rows;
}

void save_diagnostics(const std::string& path, std::span<const DiagnosticsRow> rows) {
  auto out = open_out(path);
  out << "param,mean,sd,q2.5,q97.5,ess_bulk,ess_tail,rhat\n";
  for (const auto& row : rows) {
    const auto& s = row.summary;
    out << row.param << ',' << format_double(s.mean) << ',' << format_double(s.sd) << ','
        << format_double(s.q025) << ',' << format_double(s.q975) << ','
        << format_double(s.ess_bulk) << ',' << format_double(s.ess_tail) << ','
        << format_double(s.rhat) << '\n';
  }
  finish_out(out, path);
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

void save_map_summary(const std::string& path, const MapStateSummary& summary) {
  auto out = open_out(path);
  out << "time,modal_state,modal_prob";
  for (int s = 1; s <= summary.n_states; ++s) out << ",p_state_" << s;
  out << '\n';
  for (int t = 0; t < summary.n_times; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    out << t << ',' << summary.modal_state[ut] << ',' << format_double(summary.modal_prob[ut]);
    for (int s = 0; s < summary.n_states; ++s) {
      out << ','
          << format_double(summary.avg_marginals[ut * static_cast<std::size_t>(summary.n_states) +
                                                 static_cast<std::size_t>(s)]);
    }
    out << '\n';
  }
  finish_out(out, path);
}

void save_trajectory(const std::string& path, const StateTrajectory& traj) {
  auto out = open_out(path);
  out << "time,state\n";
  for (std::size_t t = 0; t < traj.states.size(); ++t) out << t << ',' << traj.states[t] << '\n';
  finish_out(out, path);
}

StateTrajectory load_trajectory(const std::string& path) {
  const auto table = read_csv(path);
  const std::vector<std::string> expected{"time", "state"};
  check_header(table, expected);
  StateTrajectory traj;
  traj.kind = StateTrajectory::Kind::sampled;
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const long line_no = static_cast<long>(k + 2);
    const long time = parse_int_field(table.rows[k][0], path, line_no, "time");
    if (time != static_cast<long>(k)) {
      fail(ErrorCode::MalformedRow, where(path, line_no) + ": expected time " +
                                        std::to_string(k) + ", got " + std::to_string(time));
    }
    const long state = parse_int_field(table.rows[k][1], path, line_no, "state");
    if (state < 1) {
      fail(ErrorCode::RangeError, where(path, line_no) + ": state must be >= 1");
    }
    traj.states.push_back(static_cast<int>(state));
  }
  return traj;
}

void save_bundle(const std::string& path, std::span<const StateTrajectory> trajectories) {
  if (trajectories.empty()) fail(ErrorCode::DegenerateInput, "save_bundle: no trajectories");
  const std::size_t n_times = trajectories.front().states.size();
  auto out = open_out(path);
  for (const auto& traj : trajectories) {
    if (traj.states.size() != n_times) {
      fail(ErrorCode::LengthMismatch, "save_bundle: trajectories have unequal lengths");
    }
    for (std::size_t t = 0; t < n_times; ++t) {
      if (t) out << ',';
      out << traj.states[t];
    }
    out << '\n';
  }
  finish_out(out, path);
}

TrajectoryBundle load_bundle(const std::string& path, int n_categories) {
  const auto lines = read_raw_lines(path);
  std::vector<int> values;
  long n_times = -1;
  int n_traj = 0;
  int max_state = 0;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (lines[k].empty()) {
      if (k + 1 == lines.size()) break;
      fail(ErrorCode::MalformedRow, where(path, static_cast<long>(k + 1)) + ": blank line");
    }
    const auto fields = split_fields(lines[k]);
    if (n_times < 0) {
      n_times = static_cast<long>(fields.size());
    } else if (static_cast<long>(fields.size()) != n_times) {
      fail(ErrorCode::LengthMismatch,
           where(path, static_cast<long>(k + 1)) + ": row has " +
               std::to_string(fields.size()) + " entries, expected " + std::to_string(n_times));
    }
    for (const auto& f : fields) {
      const long v = parse_int_field(f, path, static_cast<long>(k + 1), "state");
      max_state = std::max(max_state, static_cast<int>(v));
      values.push_back(static_cast<int>(v));
    }
    ++n_traj;
  }
  if (n_traj == 0) fail(ErrorCode::DegenerateInput, path + ": empty trajectory bundle");
  if (n_categories == 0) n_categories = max_state;
  return make_bundle(std::move(values), n_traj, static_cast<int>(n_times), n_categories);
}

// ---------------------------------------------------------------------------
// Change point
// ---------------------------------------------------------------------------

void save_changepoint(const std::string& path, const ChangepointFit& fit) {
  auto out = open_out(path);
  out << "time,probability\n";
  const auto& dist = fit.changepoint_distribution;
  for (int t = 0; t < fit.n_times; ++t) {
    out << t + 1 << ',' << format_double(dist[static_cast<std::size_t>(t)]) << '\n';
  }
  out << "never," << format_double(dist[static_cast<std::size_t>(fit.n_times)]) << '\n';
  finish_out(out, path);
}

void save_changepoint_emission(const std::string& path, const ChangepointFit& fit) {
  auto out = open_out(path);
  out << "regime,category,probability\n";
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < fit.n_categories; ++c) {
      out << r + 1 << ',' << c + 1 << ','
          << format_double(fit.emission[static_cast<std::size_t>(r) *
                                            static_cast<std::size_t>(fit.n_categories) +
                                        static_cast<std::size_t>(c)])
          << '\n';
    }
  }
  finish_out(out, path);
}

// ---------------------------------------------------------------------------
// Predictive outputs
// ---------------------------------------------------------------------------

void save_proportion_series(const std::string& path, const PredictiveSeries& series) {
  auto out = open_out(path);
  out << "time,mean,sd,q2.5,q97.5,observed,n_observed\n";
  for (int t = 0; t < series.n_times; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    out << t << ',' << format_double(series.mean[ut]) << ',' << format_double(series.sd[ut])
        << ',' << format_double(series.q025[ut]) << ',' << format_double(series.q975[ut]) << ','
        << format_double(series.observed[ut]) << ',' << series.n_observed[ut] << '\n';
  }
  finish_out(out, path);
}

void save_state_map(const std::string& path, const StateProbabilityMap& map) {
  auto out = open_out(path);
  out << "site,value,flag\n";
  for (std::size_t i = 0; i < map.value.size(); ++i) {
    out << i << ',' << format_double(map.value[i]) << ','
        << static_cast<int>(map.fully_missing[i]) << '\n';
  }
  finish_out(out, path);
}

void save_missingness_curves(const std::string& path, const MissingnessCurves& curves) {
  auto out = open_out(path);
  out << "state,time,mean,q2.5,q97.5\n";
  for (int s = 0; s < curves.n_states; ++s) {
    for (int t = 0; t < curves.n_times; ++t) {
      const std::size_t at = static_cast<std::size_t>(s) * static_cast<std::size_t>(curves.n_times) +
                             static_cast<std::size_t>(t);
      out << s + 1 << ',' << t << ',' << format_double(curves.mean[at]) << ','
          << format_double(curves.q025[at]) << ',' << format_double(curves.q975[at]) << '\n';
    }
  }
  finish_out(out, path);
}

void save_seasonal(const std::string& path, const SeasonalSummary& summary) {
  auto out = open_out(path);
  out << "month,mean,q25,q75,q2.5,q97.5\n";
  for (int m = 0; m < 12; ++m) {
    const auto um = static_cast<std::size_t>(m);
    out << m + 1 << ',' << format_double(summary.mean[um]) << ','
        << format_double(summary.q25[um]) << ',' << format_double(summary.q75[um]) << ','
        << format_double(summary.q025[um]) << ',' << format_double(summary.q975[um]) << '\n';
  }
  finish_out(out, path);
}

void save_state_table(const std::string& path, std::span<const StateSummaryRow> rows) {
  auto out = open_out(path);
  out << "state,empty,n_times,observed_death,death_mean,death_q2.5,death_q97.5,"
         "observed_missing,missing_mean,missing_q2.5,missing_q97.5\n";
  for (const auto& row : rows) {
    out << row.state << ',' << (row.empty ? 1 : 0) << ',' << row.n_times_assigned << ','
        << format_double(row.observed_death) << ',' << format_double(row.death_mean) << ','
        << format_double(row.death_q025) << ',' << format_double(row.death_q975) << ','
        << format_double(row.observed_missing) << ',' << format_double(row.missing_mean) << ','
        << format_double(row.missing_q025) << ',' << format_double(row.missing_q975) << '\n';
  }
  finish_out(out, path);
}

// ---------------------------------------------------------------------------
// Held-out evaluation
// ---------------------------------------------------------------------------

void save_holdout_plans(const std::string& path, std::span<const HoldoutPlan> plans) {
  auto out = open_out(path);
  out << "replication,site,time,y_true,fraction,seed\n";
  for (const auto& plan : plans) {
    for (const auto& cell : plan.cells) {
      out << plan.replication << ',' << cell.site << ',' << cell.time << ','
          << static_cast<int>(cell.y_true) << ',' << format_double(plan.fraction) << ','
          << plan.seed << '\n';
    }
  }
  finish_out(out, path);
}

void save_elpd_pointwise(const std::string& path, std::span<const HoldoutPlan> plans,
                         std::span<const PointwiseElpd> elpds) {
  if (plans.size() != elpds.size()) {
    fail(ErrorCode::LengthMismatch, "save_elpd_pointwise: " + std::to_string(plans.size()) +
                                        " plans vs " + std::to_string(elpds.size()) +
                                        " ELPD results");
  }
  auto out = open_out(path);
  out << "replication,site,time,y_true,elpd,mc_se\n";
  for (std::size_t r = 0; r < plans.size(); ++r) {
    const auto& plan = plans[r];
    const auto& elpd = elpds[r];
    if (plan.cells.size() != elpd.cell_elpd.size()) {
      fail(ErrorCode::LengthMismatch,
           "save_elpd_pointwise: replication " + std::to_string(plan.replication) + " has " +
               std::to_string(plan.cells.size()) + " cells but " +
               std::to_string(elpd.cell_elpd.size()) + " ELPD values");
    }
    for (std::size_t j = 0; j < plan.cells.size(); ++j) {
      const auto& cell = plan.cells[j];
      out << plan.replication << ',' << cell.site << ',' << cell.time << ','
          << static_cast<int>(cell.y_true) << ',' << format_double(elpd.cell_elpd[j]) << ','
          << format_double(elpd.cell_mc_se[j]) << '\n';
    }
  }
  finish_out(out, path);
}

void save_elpd_compare(const std::string& path, std::span<const PointwiseElpd> a,
                       std::span<const PointwiseElpd> b, const ElpdDiff& diff) {
  if (a.size() != b.size()) {
    fail(ErrorCode::LengthMismatch, "save_elpd_compare: replication counts differ");
  }
  auto out = open_out(path);
  out << "replication,total_a,total_b,diff,mean_diff,se_diff\n";
  for (std::size_t r = 0; r < a.size(); ++r) {
    out << a[r].replication << ',' << format_double(a[r].total) << ','
        << format_double(b[r].total) << ',' << format_double(a[r].total - b[r].total) << ','
        << format_double(diff.mean) << ',' << format_double(diff.se) << '\n';
  }
  finish_out(out, path);
}

// ---------------------------------------------------------------------------
// SVG plots
// ---------------------------------------------------------------------------

namespace {

constexpr int kSvgW = 880, kSvgH = 420;
constexpr int kMarL = 64, kMarR = 16, kMarT = 40, kMarB = 48;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
constexpr int kPaletteSize = 6;

struct AxisRange {
  double lo = 0.0, hi = 1.0;
  void update(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

// Tick step rounded to a 1/2/5 x 10^k "nice" value.
double nice_step(double range) {
  if (!(range > 0.0)) return 1.0;
  const double raw = range / 4.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  const double nice = frac < 1.5 ? 1.0 : frac < 3.5 ? 2.0 : frac < 7.5 ? 5.0 : 10.0;
  return nice * mag;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_svg_plot(const std::string& path, const std::string& title,
                    std::span<const PlotSeries> series, const std::string& x_label,
                    const std::string& y_label) {
  if (series.empty()) fail(ErrorCode::DegenerateInput, "write_svg_plot: no series");

  bool any_finite = false;
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size() ||
        (!s.lo.empty() && (s.lo.size() != s.x.size() || s.hi.size() != s.x.size()))) {
      fail(ErrorCode::LengthMismatch, "write_svg_plot: series '" + s.label +
                                          "' has mismatched coordinate lengths");
    }
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      if (!any_finite) {
        x_lo = x_hi = s.x[k];
        y_lo = y_hi = s.y[k];
        any_finite = true;
      }
      x_lo = std::min(x_lo, s.x[k]);
      x_hi = std::max(x_hi, s.x[k]);
      y_lo = std::min(y_lo, s.y[k]);
      y_hi = std::max(y_hi, s.y[k]);
      if (!s.lo.empty() && std::isfinite(s.lo[k]) && std::isfinite(s.hi[k])) {
        y_lo = std::min(y_lo, s.lo[k]);
        y_hi = std::max(y_hi, s.hi[k]);
      }
    }
  }
  if (!any_finite) fail(ErrorCode::DegenerateInput, "write_svg_plot: no finite points");
  if (x_hi == x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi == y_lo) {
    const double pad = std::max(0.5, std::abs(y_hi) * 0.1);
    y_lo -= pad;
    y_hi += pad;
  }
  const double y_pad = 0.04 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  const double plot_w = kSvgW - kMarL - kMarR;
  const double plot_h = kSvgH - kMarT - kMarB;
  const auto px = [&](double x) { return kMarL + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  const auto py = [&](double y) { return kMarT + (y_hi - y) / (y_hi - y_lo) * plot_h; };
  const auto pt = [&](double x, double y) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(x), py(y));
    return std::string(buf);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgW << "\" height=\""
      << kSvgH << "\" viewBox=\"0 0 " << kSvgW << ' ' << kSvgH << "\">\n"
      << "<rect width=\"" << kSvgW << "\" height=\"" << kSvgH << "\" fill=\"white\"/>\n"
      << "<text x=\"" << kMarL << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" "
         "font-weight=\"bold\">"
      << escape_xml(title) << "</text>\n";

  // Axes and ticks.
  svg << "<rect x=\"" << kMarL << "\" y=\"" << kMarT << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
  const double xs = nice_step(x_hi - x_lo);
  for (double v = std::ceil(x_lo / xs) * xs; v <= x_hi + 1e-9 * xs; v += xs) {
    svg << "<line x1=\"" << px(v) << "\" y1=\"" << kMarT + plot_h << "\" x2=\"" << px(v)
        << "\" y2=\"" << kMarT + plot_h + 5 << "\" stroke=\"#444\"/>\n"
        << "<text x=\"" << px(v) << "\" y=\"" << kMarT + plot_h + 20
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
        << tick_label(v) << "</text>\n";
  }
  const double ys = nice_step(y_hi - y_lo);
  for (double v = std::ceil(y_lo / ys) * ys; v <= y_hi + 1e-9 * ys; v += ys) {
    svg << "<line x1=\"" << kMarL - 5 << "\" y1=\"" << py(v) << "\" x2=\"" << kMarL
        << "\" y2=\"" << py(v) << "\" stroke=\"#444\"/>\n"
        << "<text x=\"" << kMarL - 8 << "\" y=\"" << py(v) + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
        << tick_label(v) << "</text>\n";
  }
  if (!x_label.empty()) {
    svg << "<text x=\"" << kMarL + plot_w / 2 << "\" y=\"" << kSvgH - 8
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
        << escape_xml(x_label) << "</text>\n";
  }
  if (!y_label.empty()) {
    svg << "<text x=\"14\" y=\"" << kMarT + plot_h / 2
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 14 "
        << kMarT + plot_h / 2 << ")\">" << escape_xml(y_label) << "</text>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % kPaletteSize];

    if (!s.lo.empty()) {
      std::string fwd, rev;
      for (std::size_t k = 0; k < s.x.size(); ++k) {
        if (!std::isfinite(s.x[k]) || !std::isfinite(s.lo[k]) || !std::isfinite(s.hi[k])) {
          continue;
        }
        fwd += pt(s.x[k], s.hi[k]);
        rev = pt(s.x[k], s.lo[k]) + rev;
      }
      if (!fwd.empty()) {
        svg << "<polygon points=\"" << fwd << rev << "\" fill=\"" << color
            << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
      }
    }

    // Polyline segments split at non-finite points.
    std::string seg;
    int seg_points = 0;
    const auto flush = [&] {
      if (seg_points >= 2) {
        svg << "<polyline points=\"" << seg << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.6\"/>\n";
      } else if (seg_points == 1) {
        // Isolated point: draw a small marker so it stays visible.
        svg << "<circle r=\"2.4\" fill=\"" << color << "\" cx=\""
            << seg.substr(0, seg.find(',')) << "\" cy=\""
            << seg.substr(seg.find(',') + 1, seg.find(' ') - seg.find(',') - 1) << "\"/>\n";
      }
      seg.clear();
      seg_points = 0;
    };
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) {
        flush();
        continue;
      }
      seg += pt(s.x[k], s.y[k]);
      ++seg_points;
    }
    flush();

    if (!s.label.empty()) {
      const double ly = kMarT + 14 + 16 * static_cast<double>(si);
      svg << "<rect x=\"" << kMarL + plot_w - 150 << "\" y=\"" << ly - 9
          << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n"
          << "<text x=\"" << kMarL + plot_w - 134 << "\" y=\"" << ly + 1
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(s.label)
          << "</text>\n";
    }
  }
  svg << "</svg>\n";

  auto out = open_out(path);
  out << svg.str();
  finish_out(out, path);
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

namespace {

int config_int(const std::string& key, const std::string& value) {
  int v = 0;
  const std::string t = trim(value);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    fail(ErrorCode::ConfigError, "config key '" + key + "': not an integer: '" + value + "'");
  }
  return v;
}

std::uint64_t config_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const std::string t = trim(value);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    fail(ErrorCode::ConfigError,
         "config key '" + key + "': not a nonnegative integer: '" + value + "'");
  }
  return v;
}

double config_double(const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) {
    fail(ErrorCode::ConfigError, "config key '" + key + "': not a number: '" + value + "'");
  }
  return v;
}

bool config_bool(const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  fail(ErrorCode::ConfigError, "config key '" + key + "': not a boolean: '" + value + "'");
}

}  // namespace

void set_config_key(RunConfig& cfg, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "panel") cfg.panel = value;
  else if (key == "edges") cfg.edges = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "labels") cfg.labels = value;
  else if (key == "init") cfg.init = value;
  else if (key == "draws_path") cfg.draws_path = value;
  else if (key == "n_sites") cfg.n_sites = config_int(key, value);
  else if (key == "n_times") cfg.n_times = config_int(key, value);
  else if (key == "start_month") cfg.start_month = config_int(key, value);
  else if (key == "n_states") cfg.n_states = config_int(key, value);
  else if (key == "shared_sigma_phi") cfg.shared_sigma_phi = config_bool(key, value);
  else if (key == "model_missingness") cfg.model_missingness = config_bool(key, value);
  else if (key == "include_spatial") cfg.include_spatial = config_bool(key, value);
  else if (key == "edges_one_based") cfg.edges_one_based = config_bool(key, value);
  else if (key == "chains") cfg.chains = config_int(key, value);
  else if (key == "warmup") cfg.warmup = config_int(key, value);
  else if (key == "draws") cfg.draws = config_int(key, value);
  else if (key == "max_tree_depth") cfg.max_tree_depth = config_int(key, value);
  else if (key == "target_accept") cfg.target_accept = config_double(key, value);
  else if (key == "jitter") cfg.jitter = config_double(key, value);
  else if (key == "seed") cfg.seed = config_u64(key, value);
  else if (key == "sim_rows") cfg.sim_rows = config_int(key, value);
  else if (key == "sim_cols") cfg.sim_cols = config_int(key, value);
  else if (key == "sim_regime") cfg.sim_regime = value;
  else if (key == "sim_blackout_max") cfg.sim_blackout_max = config_int(key, value);
  else if (key == "sample_trajectories") cfg.sample_trajectories = config_int(key, value);
  else if (key == "predict_reps") cfg.predict_reps = config_int(key, value);
  else if (key == "predict_modal") cfg.predict_modal = config_bool(key, value);
  else if (key == "cp_bundle") cfg.cp_bundle = value;
  else if (key == "cp_sweeps") cfg.cp_sweeps = config_int(key, value);
  else if (key == "cp_burnin") cfg.cp_burnin = config_int(key, value);
  else if (key == "cp_categories") cfg.cp_categories = config_int(key, value);
  else if (key == "holdout_fraction") cfg.holdout_fraction = config_double(key, value);
  else if (key == "replications") cfg.replications = config_int(key, value);
  else if (key == "alt_config") cfg.alt_config = value;
  else fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::ConfigError,
           where(path, line_no) + ": expected key = value, got '" + body + "'");
    }
    set_config_key(cfg, body.substr(0, eq), body.substr(eq + 1));
  }
  return cfg;
}

void RunConfig::check() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::ConfigError, msg); };
  if (n_states < 1) bad("n_states must be >= 1");
  if (start_month < 1 || start_month > 12) bad("start_month must be in 1..12");
  if (n_sites < 0 || n_times < 0) bad("panel dimensions must be nonnegative");
  if (chains < 1) bad("chains must be >= 1");
  if (warmup < 0) bad("warmup must be >= 0");
  if (draws < 1) bad("draws must be >= 1");
  if (max_tree_depth < 1 || max_tree_depth > 20) bad("max_tree_depth must be in 1..20");
  if (!(target_accept > 0.0 && target_accept < 1.0)) bad("target_accept must be in (0,1)");
  if (jitter < 0.0) bad("jitter must be >= 0");
  if (sim_rows < 0 || sim_cols < 0) bad("grid dimensions must be nonnegative");
  if (sim_regime != "state_dependent" && sim_regime != "none") {
    bad("sim_regime must be 'state_dependent' or 'none'");
  }
  if (sim_blackout_max < 0) bad("sim_blackout_max must be >= 0");
  if (sample_trajectories < 0) bad("sample_trajectories must be >= 0");
  if (predict_reps < 1) bad("predict_reps must be >= 1");
  if (cp_sweeps < 1) bad("cp_sweeps must be >= 1");
  if (cp_burnin < 0 || cp_burnin >= cp_sweeps) bad("cp_burnin must be in [0, cp_sweeps)");
  if (cp_categories < 0) bad("cp_categories must be >= 0");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 0.5)) {
    bad("holdout_fraction must be in (0, 0.5)");
  }
  if (replications < 1) bad("replications must be >= 1");
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

namespace {

namespace fs = std::filesystem;

bool artifact_exists(const fs::path& dir, const char* name) {
  std::error_code ec;
  return fs::exists(dir / name, ec);
}

// Raw CSV cells straight into a markdown table.
void markdown_table(std::ostringstream& md, const CsvTable& table, std::size_t max_rows) {
  md << '|';
  for (const auto& c : table.columns) md << ' ' << c << " |";
  md << "\n|";
  for (std::size_t j = 0; j < table.columns.size(); ++j) md << "---|";
  md << '\n';
  for (std::size_t k = 0; k < table.rows.size() && k < max_rows; ++k) {
    md << '|';
    for (const auto& f : table.rows[k]) md << ' ' << f << " |";
    md << '\n';
  }
  if (table.rows.size() > max_rows) {
    md << "\n(" << table.rows.size() - max_rows << " more rows in `" << fs::path(table.path).filename().string()
       << "`)\n";
  }
  md << '\n';
}

bool scalar_param(const std::string& name) {
  return !(name.rfind("lambda[", 0) == 0 || name.rfind("phi[", 0) == 0 ||
           name.rfind("gamma[", 0) == 0);
}

}  // namespace

std::string compose_report(const std::string& out_dir, const std::string& labels_path) {
  const fs::path dir(out_dir);
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    fail(ErrorCode::MissingArtifacts, "output directory does not exist: " + out_dir);
  }

  std::ostringstream md;
  md << "# Run report\n\nArtifacts read from `" << out_dir << "`.\n\n";
  bool any = false;

  if (artifact_exists(dir, "diagnostics.csv")) {
    any = true;
    auto table = read_csv((dir / "diagnostics.csv").string());
    CsvTable scalars;
    scalars.path = table.path;
    scalars.columns = table.columns;
    for (auto& row : table.rows) {
      if (scalar_param(row[0])) scalars.rows.push_back(std::move(row));
    }
    md << "## Posterior summaries\n\nScalar parameters (site and month effects live in the "
          "full `diagnostics.csv`):\n\n";
    markdown_table(md, scalars, 48);
  }

  for (const char* svg : {"proportion_series.svg", "missingness_curves.svg", "seasonal.svg"}) {
    if (artifact_exists(dir, svg)) {
      any = true;
      std::string heading(svg);
      heading = heading.substr(0, heading.size() - 4);
      std::replace(heading.begin(), heading.end(), '_', ' ');
      md << "## " << heading << "\n\n![" << heading << "](" << svg << ")\n\n";
    }
  }

  if (artifact_exists(dir, "state_table.csv")) {
    any = true;
    md << "## State summary\n\nObserved versus model death and missingness rates by modal "
          "state:\n\n";
    markdown_table(md, read_csv((dir / "state_table.csv").string()), 16);
  }

  std::vector<std::string> labels;
  for (int s = 1; s <= 16; ++s) {
    const std::string name = "state_map_s" + std::to_string(s) + ".csv";
    if (!artifact_exists(dir, name.c_str())) continue;
    any = true;
    const auto table = read_csv((dir / name).string());
    if (labels.empty() && !labels_path.empty()) {
      labels = load_site_labels(labels_path, static_cast<int>(table.rows.size()));
    }
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
      char* end = nullptr;
      const double v = std::strtod(table.rows[k][1].c_str(), &end);
      ranked.emplace_back(v, k);
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    md << "## State " << s << " map\n\nHighest-probability sites (full map in `" << name
       << "`):\n\n| site | probability |\n|---|---|\n";
    for (std::size_t k = 0; k < ranked.size() && k < 5; ++k) {
      const std::size_t site = ranked[k].second;
      md << "| " << (site < labels.size() ? labels[site] : "site_" + std::to_string(site))
         << " | " << table.rows[ranked[k].second][1] << " |\n";
    }
    md << '\n';
  }

  if (artifact_exists(dir, "changepoint.csv")) {
    any = true;
    const auto table = read_csv((dir / "changepoint.csv").string());
    std::string best_time = "never";
    double best_prob = -1.0, never_prob = 0.0;
    for (const auto& row : table.rows) {
      char* end = nullptr;
      const double prob = std::strtod(row[1].c_str(), &end);
      if (row[0] == "never") never_prob = prob;
      if (prob > best_prob) {
        best_prob = prob;
        best_time = row[0];
      }
    }
    md << "## Change point\n\nPosterior mode at time " << best_time << " (probability "
       << tick_label(best_prob) << "); P(no change) = " << tick_label(never_prob)
       << ". Full distribution in `changepoint.csv`.\n\n";
  }

  if (artifact_exists(dir, "elpd_compare.csv")) {
    any = true;
    md << "## Held-out comparison\n\nPer-replication ELPD totals and the pairwise "
          "difference:\n\n";
    markdown_table(md, read_csv((dir / "elpd_compare.csv").string()), 16);
  }

  if (!any) {
    fail(ErrorCode::MissingArtifacts, "no artifacts found in " + out_dir);
  }
  return md.str();
}

}  // namespace spathmm
