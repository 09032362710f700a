#include "spathmm/panel.hpp"

#include <string>

#include "spathmm/errors.hpp"

namespace spathmm {

ObservationPanel::ObservationPanel(int n_sites, int n_times,
                                   std::vector<std::int8_t> cells, int start_month)
    : n_sites_(n_sites), n_times_(n_times), start_month_(start_month),
      cells_(std::move(cells)) {
  if (n_sites <= 0 || n_times <= 0) {
    fail(ErrorCode::RangeError, "panel dimensions must be positive");
  }
  if (start_month < 1 || start_month > 12) {
    fail(ErrorCode::RangeError, "start month must lie in 1..12");
  }
  if (cells_.size() != static_cast<std::size_t>(n_sites) * static_cast<std::size_t>(n_times)) {
    fail(ErrorCode::LengthMismatch, "cell buffer does not match n_sites * n_times");
  }
  for (const std::int8_t c : cells_) {
    if (c != 0 && c != 1 && c != kMissing) {
      fail(ErrorCode::RangeError, "panel cells must be 0, 1 or missing");
    }
  }
  recompute_first_obs();
  recompute_months();
}

void ObservationPanel::validate_indices(int i, int t) const {
  if (i < 0 || i >= n_sites_ || t < 0 || t >= n_times_) {
    fail(ErrorCode::IndexOutOfRange,
         "cell (" + std::to_string(i) + "," + std::to_string(t) + ") outside " +
             std::to_string(n_sites_) + "x" + std::to_string(n_times_) + " panel");
  }
}

void ObservationPanel::set_cell(int i, int t, std::int8_t value) {
  validate_indices(i, t);
  if (value != 0 && value != 1 && value != kMissing) {
    fail(ErrorCode::RangeError, "cell value must be 0, 1 or missing");
  }
  cells_[idx(i, t)] = value;
  recompute_first_obs();
}

void ObservationPanel::mark_held_out(int i, int t) {
  validate_indices(i, t);
  if (held_out_.empty()) held_out_.assign(cells_.size(), 0);
  held_out_[idx(i, t)] = 1;
  cells_[idx(i, t)] = kMissing;
  // first_obs_ deliberately not recomputed: held-out cells were observed in
  // the source panel and the likelihood indexing must not shift.
}

void ObservationPanel::set_first_obs(std::vector<int> first_obs) {
  if (first_obs.size() != static_cast<std::size_t>(n_sites_)) {
    fail(ErrorCode::LengthMismatch, "first_obs length must equal n_sites");
  }
  for (const int f : first_obs) {
    if (f < 0 || f > n_times_) {
      fail(ErrorCode::RangeError, "first_obs entries must lie in [0, n_times]");
    }
  }
  first_obs_ = std::move(first_obs);
}

void ObservationPanel::recompute_first_obs() {
  first_obs_.assign(static_cast<std::size_t>(n_sites_), n_times_);
  for (int i = 0; i < n_sites_; ++i) {
    for (int t = 0; t < n_times_; ++t) {
      if (cells_[idx(i, t)] != kMissing) {
        first_obs_[static_cast<std::size_t>(i)] = t;
        break;
      }
    }
  }
}

void ObservationPanel::recompute_months() {
  month_of_.resize(static_cast<std::size_t>(n_times_));
  for (int t = 0; t < n_times_; ++t) {
    month_of_[static_cast<std::size_t>(t)] = 1 + (start_month_ - 1 + t) % 12;
  }
}

double ObservationPanel::missing_rate() const {
  std::size_t miss = 0;
  for (const std::int8_t c : cells_) miss += (c == kMissing);
  return static_cast<double>(miss) / static_cast<double>(cells_.size());
}

double ObservationPanel::missing_rate_after_first_obs() const {
  std::size_t miss = 0, total = 0;
  for (int i = 0; i < n_sites_; ++i) {
    for (int t = first_obs(i); t < n_times_; ++t) {
      ++total;
      miss += (cells_[idx(i, t)] == kMissing);
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(miss) / static_cast<double>(total);
}

int ObservationPanel::count_observed() const {
  int n = 0;
  for (const std::int8_t c : cells_) n += (c != kMissing);
  return n;
}

}  // namespace spathmm
