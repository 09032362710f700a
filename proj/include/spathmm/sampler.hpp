#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace spathmm {

/// Log density with gradient: returns log p(x) and fills `grad` (same length
/// as x). Out-of-support points return -inf; the gradient is then ignored.
/// Must be safe to call concurrently from several chains.
using LogDensityGradient =
    std::function<double(std::span<const double>, std::span<double>)>;

struct SamplerConfig {
  int n_chains = 4;
  int n_warmup = 5000;
  int n_draws = 10000;
  std::uint64_t seed = 0;
  double target_acceptance = 0.8;
  int max_tree_depth = 10;  // caps a trajectory at 2^depth leapfrog steps

  enum class Init { jitter, user };
  Init init_mode = Init::jitter;
  /// Center of the +/- jitter_scale uniform jitter (Init::jitter) or the exact
  /// starting point (Init::user). Empty means the origin.
  std::vector<double> init_point;
  double jitter_scale = 2.0;
};

/// Per-chain adaptation outcome and sampling health.
struct ChainStats {
  int divergences = 0;       // post-warmup only
  double step_size = 0.0;    // frozen after warmup
  double mean_accept = 0.0;  // post-warmup mean acceptance statistic
  std::vector<double> inv_metric;
};

struct PosteriorDraws {
  int n_chains = 0;
  int n_draws = 0;  // kept draws per chain; warmup is never stored
  int dim = 0;
  std::vector<double> draws;            // [chain][draw][coordinate]
  std::vector<double> lp;               // [chain][draw]
  std::vector<std::uint8_t> divergent;  // [chain][draw]
  std::vector<ChainStats> chains;

  std::span<const double> draw_at(int chain, int k) const {
    const std::size_t base =
        (static_cast<std::size_t>(chain) * static_cast<std::size_t>(n_draws) +
         static_cast<std::size_t>(k)) * static_cast<std::size_t>(dim);
    return {draws.data() + base, static_cast<std::size_t>(dim)};
  }
  double lp_at(int chain, int k) const {
    return lp[static_cast<std::size_t>(chain) * static_cast<std::size_t>(n_draws) +
              static_cast<std::size_t>(k)];
  }
  int total_divergences() const {
    int n = 0;
    for (const auto& c : chains) n += c.divergences;
    return n;
  }
};

/// Multinomial no-U-turn sampler with dual-averaging step size and windowed
/// diagonal mass adaptation. Chains run in parallel on independent RNG
/// streams derived from cfg.seed; results are reproducible for a fixed seed
/// regardless of thread schedule.
PosteriorDraws run_chains(const LogDensityGradient& target, int dim, const SamplerConfig& cfg);

}  // namespace spathmm
