#pragma once

#include <cstdint>
#include <vector>

namespace spathmm {

inline constexpr std::int8_t kMissing = -1;

/// Site-by-time binary panel with explicit missingness. Cells hold 0, 1, or
/// kMissing. The missingness indicator r[i][t] is y(i,t) == kMissing, and
/// first_obs[i] is the first time with a non-missing cell (n_times when the
/// site is never observed). Cells flagged held-out contribute to neither the
/// outcome nor the missingness likelihood; they exist for out-of-sample
/// evaluation and are not treated as model missingness.
class ObservationPanel {
 public:
  ObservationPanel() = default;
  ObservationPanel(int n_sites, int n_times, std::vector<std::int8_t> cells,
                   int start_month = 1);

  int n_sites() const { return n_sites_; }
  int n_times() const { return n_times_; }
  int start_month() const { return start_month_; }

  std::int8_t y(int i, int t) const { return cells_[idx(i, t)]; }
  bool missing(int i, int t) const { return cells_[idx(i, t)] == kMissing; }
  bool held_out(int i, int t) const {
    return !held_out_.empty() && held_out_[idx(i, t)] != 0;
  }
  bool has_holdout() const { return !held_out_.empty(); }

  /// First time index with a non-missing cell; n_times() when never observed.
  int first_obs(int i) const { return first_obs_[static_cast<std::size_t>(i)]; }

  /// Calendar month of time index t, in 1..12.
  int month_of(int t) const { return month_of_[static_cast<std::size_t>(t)]; }

  /// Scaled time t' = t / (T - 1) for zero-based t; 0 when T == 1.
  double scaled_time(int t) const {
    return n_times_ > 1 ? static_cast<double>(t) / static_cast<double>(n_times_ - 1) : 0.0;
  }

  void set_cell(int i, int t, std::int8_t value);
  /// Marks a cell as held out (its y becomes missing; first_obs is preserved).
  void mark_held_out(int i, int t);
  /// Overrides first_obs; used when reloading a masked panel whose held-out
  /// cells were observed in the source data.
  void set_first_obs(std::vector<int> first_obs);

  /// Share of missing cells over the whole panel.
  double missing_rate() const;
  /// Share of missing cells restricted to t >= first_obs per site.
  double missing_rate_after_first_obs() const;
  int count_observed() const;

  void validate_indices(int i, int t) const;

 private:
  std::size_t idx(int i, int t) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_times_) +
           static_cast<std::size_t>(t);
  }
  void recompute_first_obs();
  void recompute_months();

  int n_sites_ = 0;
  int n_times_ = 0;
  int start_month_ = 1;
  std::vector<std::int8_t> cells_;
  std::vector<std::uint8_t> held_out_;
  std::vector<int> first_obs_;
  std::vector<int> month_of_;
};

}  // namespace spathmm
