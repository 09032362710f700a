#include "spathmm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spathmm/errors.hpp"
#include "spathmm/math_util.hpp"

namespace spathmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ChainMatrix {  // rectangular: C chains of n draws
  int n_chains = 0;
  int n = 0;
  std::vector<double> x;  // chain-major

  double at(int c, int i) const {
    return x[static_cast<std::size_t>(c) * static_cast<std::size_t>(n) +
             static_cast<std::size_t>(i)];
  }
  double& at(int c, int i) {
    return x[static_cast<std::size_t>(c) * static_cast<std::size_t>(n) +
             static_cast<std::size_t>(i)];
  }
};

ChainMatrix split_halves(std::span<const double> values, int n_chains) {
  if (n_chains < 2) fail(ErrorCode::DegenerateInput, "diagnostics need at least 2 chains");
  if (values.empty() || values.size() % static_cast<std::size_t>(n_chains) != 0)
    fail(ErrorCode::DegenerateInput, "draw count is not a multiple of the chain count");
  const int n = static_cast<int>(values.size()) / n_chains;
  if (n < 4) fail(ErrorCode::DegenerateInput, "diagnostics need at least 4 draws per chain");

  ChainMatrix m;
  m.n = n / 2;  // odd middles are dropped
  m.n_chains = 2 * n_chains;
  m.x.resize(static_cast<std::size_t>(m.n_chains) * static_cast<std::size_t>(m.n));
  for (int c = 0; c < n_chains; ++c) {
    const double* src = values.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(n);
    for (int i = 0; i < m.n; ++i) {
      m.at(2 * c, i) = src[i];
      m.at(2 * c + 1, i) = src[n - m.n + i];
    }
  }
  return m;
}

bool is_constant(const ChainMatrix& m) {
  const auto [lo, hi] = std::minmax_element(m.x.begin(), m.x.end());
  return *lo == *hi;
}

// Zero within-chain variance in every chain (infinite R̂ when they disagree).
bool chains_individually_constant(const ChainMatrix& m) {
  for (int c = 0; c < m.n_chains; ++c) {
    const double first = m.at(c, 0);
    for (int i = 1; i < m.n; ++i)
      if (m.at(c, i) != first) return false;
  }
  return true;
}

// Pooled average ranks (ties averaged) -> normal scores.
ChainMatrix rank_normalize(const ChainMatrix& m) {
  const std::size_t total = m.x.size();
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return m.x[a] < m.x[b]; });

  std::vector<double> rank(total);
  std::size_t i = 0;
  while (i < total) {
    std::size_t j = i;
    while (j + 1 < total && m.x[order[j + 1]] == m.x[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }

  ChainMatrix z = m;
  const double denom = static_cast<double>(total) + 0.25;
  for (std::size_t k = 0; k < total; ++k)
    z.x[k] = std_normal_quantile((rank[k] - 0.375) / denom);
  return z;
}

// Classic split-R̂ on the (already transformed) half-chains.
double basic_rhat(const ChainMatrix& m) {
  const double n = static_cast<double>(m.n);
  std::vector<double> means(static_cast<std::size_t>(m.n_chains));
  double w = 0.0;
  for (int c = 0; c < m.n_chains; ++c) {
    std::span<const double> chain(m.x.data() + static_cast<std::size_t>(c) *
                                                   static_cast<std::size_t>(m.n),
                                  static_cast<std::size_t>(m.n));
    means[static_cast<std::size_t>(c)] = mean_of(chain);
    w += variance_of(chain);
  }
  w /= static_cast<double>(m.n_chains);
  const double b_over_n = variance_of(means);
  if (w <= 0.0) return b_over_n > 0.0 ? std::numeric_limits<double>::infinity() : kNaN;
  return std::sqrt((n - 1.0) / n + b_over_n / w);
}

// Biased (1/n) autocovariance of one chain at a given lag.
double autocov(std::span<const double> chain, double mean, int lag) {
  const int n = static_cast<int>(chain.size());
  double acc = 0.0;
  for (int i = 0; i + lag < n; ++i)
    acc += (chain[static_cast<std::size_t>(i)] - mean) *
           (chain[static_cast<std::size_t>(i + lag)] - mean);
  return acc / static_cast<double>(n);
}

// Multi-chain ESS with Geyer initial-monotone truncation (applied to whatever
// transform the caller already made).
double basic_ess(const ChainMatrix& m) {
  const int cc = m.n_chains;
  const int n = m.n;
  const double nd = static_cast<double>(n);

  std::vector<std::span<const double>> chains;
  std::vector<double> means(static_cast<std::size_t>(cc));
  double w = 0.0;
  for (int c = 0; c < cc; ++c) {
    chains.emplace_back(m.x.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(n),
                        static_cast<std::size_t>(n));
    means[static_cast<std::size_t>(c)] = mean_of(chains.back());
    w += variance_of(chains.back());
  }
  w /= static_cast<double>(cc);
  if (w <= 0.0) return kNaN;
  const double var_plus = w * (nd - 1.0) / nd + variance_of(means);

  const auto rho_at = [&](int t) {
    double num = 0.0;
    for (int c = 0; c < cc; ++c)
      num += autocov(chains[static_cast<std::size_t>(c)], means[static_cast<std::size_t>(c)], t) *
             nd / (nd - 1.0);
    num /= static_cast<double>(cc);
    return 1.0 - (w - num) / var_plus;
  };

  // Geyer: sum initial positive pairs, forced monotone nonincreasing.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (int t = 0; t + 1 < n; t += 2) {
    double pair = rho_at(t) + rho_at(t + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau = std::max(tau, 1e-12);

  const double total = static_cast<double>(cc) * nd;
  return std::min(total / tau, total * std::log10(total));
}

}  // namespace

double rhat(std::span<const double> values, int n_chains) {
  const ChainMatrix m = split_halves(values, n_chains);
  if (is_constant(m)) return kNaN;
  if (chains_individually_constant(m)) return std::numeric_limits<double>::infinity();

  const double bulk = basic_rhat(rank_normalize(m));

  ChainMatrix folded = m;
  const double med = quantile(std::vector<double>(m.x.begin(), m.x.end()), 0.5);
  for (double& v : folded.x) v = std::abs(v - med);
  const double tail = basic_rhat(rank_normalize(folded));

  // Either variant can degenerate to a constant (e.g. folding two constant
  // chains symmetric about the median); the other still carries the signal.
  if (std::isnan(bulk)) return tail;
  if (std::isnan(tail)) return bulk;
  return std::max(bulk, tail);
}

double ess_bulk(std::span<const double> values, int n_chains) {
  const ChainMatrix m = split_halves(values, n_chains);
  if (is_constant(m)) return kNaN;
  return basic_ess(rank_normalize(m));
}

double ess_tail(std::span<const double> values, int n_chains) {
  const ChainMatrix m = split_halves(values, n_chains);
  if (is_constant(m)) return kNaN;

  const double q05 = quantile(std::vector<double>(m.x.begin(), m.x.end()), 0.05);
  const double q95 = quantile(std::vector<double>(m.x.begin(), m.x.end()), 0.95);
  ChainMatrix lo = m, hi = m;
  for (std::size_t k = 0; k < m.x.size(); ++k) {
    lo.x[k] = m.x[k] <= q05 ? 1.0 : 0.0;
    hi.x[k] = m.x[k] <= q95 ? 1.0 : 0.0;
  }
  if (is_constant(lo) || is_constant(hi)) return kNaN;
  return std::min(basic_ess(lo), basic_ess(hi));
}

ScalarSummary summarize_scalar(std::span<const double> values, int n_chains) {
  ScalarSummary s;
  s.mean = mean_of(values);
  s.sd = std::sqrt(variance_of(values));
  std::vector<double> pool(values.begin(), values.end());
  s.q025 = quantile(pool, 0.025);
  s.q975 = quantile(pool, 0.975);
  s.ess_bulk = ess_bulk(values, n_chains);
  s.ess_tail = ess_tail(values, n_chains);
  s.rhat = rhat(values, n_chains);
  return s;
}

}  // namespace spathmm
