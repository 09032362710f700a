#include "spathmm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "spathmm/errors.hpp"
#include "spathmm/math_util.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spathmm {

namespace {

constexpr double kMaxEnergyError = 1000.0;  // divergence threshold

std::size_t uz(int v) { return static_cast<std::size_t>(v); }

struct Psi {  // one phase-space point
  std::vector<double> q, p, grad;
  double logp = 0.0;
};

// Everything a subtree contributes when merged into the trajectory.
struct Tree {
  Psi first, last;               // endpoints in build order
  std::vector<double> q_sample;  // multinomial pick among the leaves
  std::vector<double> sample_grad;
  double sample_lp = 0.0;
  std::vector<double> rho;       // momentum sum over leaves
  double log_sum_w = kNegInf;    // logsumexp of (H0 - H) over leaves
  double sum_accept = 0.0;
  long n_leaves = 0;
  bool divergent = false;
  bool ok = false;
};

class ChainRunner {
 public:
  ChainRunner(const LogDensityGradient& target, int dim, const SamplerConfig& cfg,
              std::uint64_t seed)
      : target_(target), dim_(dim), cfg_(cfg), rng_(seed),
        inv_metric_(uz(dim), 1.0) {}

  void run(std::span<double> out_draws, std::span<double> out_lp,
           std::span<std::uint8_t> out_div, ChainStats& stats);

 private:
  double eval(std::span<const double> q, std::span<double> grad) const {
    const double v = target_(q, grad);
    if (std::isnan(v)) return kNegInf;
    return v;
  }

  double kinetic(std::span<const double> p) const {
    double k = 0.0;
    for (int j = 0; j < dim_; ++j) k += inv_metric_[uz(j)] * p[uz(j)] * p[uz(j)];
    return 0.5 * k;
  }

  void draw_momentum(std::span<double> p) {
    for (int j = 0; j < dim_; ++j) p[uz(j)] = normal01(rng_) / std::sqrt(inv_metric_[uz(j)]);
  }

  // One leapfrog step in place; returns the resulting Hamiltonian (-logp + K).
  double leapfrog(Psi& z, double direction) {
    const double e = direction * step_size_;
    for (int j = 0; j < dim_; ++j) z.p[uz(j)] += 0.5 * e * z.grad[uz(j)];
    for (int j = 0; j < dim_; ++j) z.q[uz(j)] += e * inv_metric_[uz(j)] * z.p[uz(j)];
    z.logp = eval(z.q, z.grad);
    if (z.logp == kNegInf) return std::numeric_limits<double>::infinity();
    for (int j = 0; j < dim_; ++j) z.p[uz(j)] += 0.5 * e * z.grad[uz(j)];
    return -z.logp + kinetic(z.p);
  }

  bool no_u_turn(const Psi& first, const Psi& last, std::span<const double> rho) const {
    double d_first = 0.0, d_last = 0.0;
    for (int j = 0; j < dim_; ++j) {
      d_first += inv_metric_[uz(j)] * first.p[uz(j)] * rho[uz(j)];
      d_last += inv_metric_[uz(j)] * last.p[uz(j)] * rho[uz(j)];
    }
    return d_first > 0.0 && d_last > 0.0;
  }

  // Builds 2^depth leapfrog steps ahead of `z` (which advances to the far end).
  Tree build_tree(int depth, Psi& z, double direction, double h0) {
    Tree t;
    if (depth == 0) {
      const double h = leapfrog(z, direction);
      t.first = z;
      t.last = z;
      t.n_leaves = 1;
      t.divergent = std::isinf(h) || (h - h0) > kMaxEnergyError;
      if (t.divergent) return t;  // ok stays false
      t.q_sample = z.q;
      t.sample_grad = z.grad;
      t.sample_lp = z.logp;
      t.rho = z.p;
      t.log_sum_w = h0 - h;
      t.sum_accept = std::min(1.0, std::exp(h0 - h));
      t.ok = true;
      return t;
    }

    Tree a = build_tree(depth - 1, z, direction, h0);
    if (!a.ok) return a;
    Tree b = build_tree(depth - 1, z, direction, h0);
    // Structural bookkeeping must survive even when b is invalid so the
    // caller sees divergences and leaf counts.
    a.n_leaves += b.n_leaves;
    a.sum_accept += b.sum_accept;
    a.divergent = a.divergent || b.divergent;
    if (!b.ok) {
      a.ok = false;
      return a;
    }
    const double lsw = log_sum_exp(a.log_sum_w, b.log_sum_w);
    if (uniform01(rng_) < std::exp(b.log_sum_w - lsw)) {
      a.q_sample = std::move(b.q_sample);
      a.sample_grad = std::move(b.sample_grad);
      a.sample_lp = b.sample_lp;
    }
    a.log_sum_w = lsw;
    for (int j = 0; j < dim_; ++j) a.rho[uz(j)] += b.rho[uz(j)];
    a.last = std::move(b.last);
    a.ok = no_u_turn(a.first, a.last, a.rho);
    return a;
  }

  // One NUTS transition from `cur`; returns the acceptance statistic and
  // whether any subtree diverged.
  struct Transition {
    double accept_stat = 0.0;
    bool divergent = false;
  };

  Transition transit(Psi& cur) {
    draw_momentum(cur.p);
    const double h0 = -cur.logp + kinetic(cur.p);

    Psi fwd = cur, bwd = cur;
    std::vector<double> rho = cur.p;
    std::vector<double> sample_q = cur.q;
    std::vector<double> sample_grad = cur.grad;
    double sample_lp = cur.logp;
    double log_sum_w = 0.0;  // initial point carries weight exp(h0 - h0)
    double sum_accept = 0.0;
    long n_leaves = 0;
    Transition res;

    for (int depth = 0; depth < cfg_.max_tree_depth; ++depth) {
      const double direction = uniform01(rng_) < 0.5 ? -1.0 : 1.0;
      Psi& end = direction > 0.0 ? fwd : bwd;
      Tree sub = build_tree(depth, end, direction, h0);
      sum_accept += sub.sum_accept;
      n_leaves += sub.n_leaves;
      res.divergent = res.divergent || sub.divergent;
      if (!sub.ok) break;

      // Biased progressive sampling: favour the fresh subtree.
      if (uniform01(rng_) < std::exp(sub.log_sum_w - log_sum_w)) {
        sample_q = std::move(sub.q_sample);
        sample_grad = std::move(sub.sample_grad);
        sample_lp = sub.sample_lp;
      }
      log_sum_w = log_sum_exp(log_sum_w, sub.log_sum_w);
      for (int j = 0; j < dim_; ++j) rho[uz(j)] += sub.rho[uz(j)];
      if (!no_u_turn(bwd, fwd, rho)) break;
    }

    cur.q = std::move(sample_q);
    cur.grad = std::move(sample_grad);
    cur.logp = sample_lp;
    res.accept_stat = n_leaves > 0 ? sum_accept / static_cast<double>(n_leaves) : 0.0;
    return res;
  }

  Psi initialize() {
    std::vector<double> center = cfg_.init_point;
    if (center.empty()) center.assign(uz(dim_), 0.0);

    Psi z;
    z.q.assign(uz(dim_), 0.0);
    z.p.assign(uz(dim_), 0.0);
    z.grad.assign(uz(dim_), 0.0);

    const int max_tries = cfg_.init_mode == SamplerConfig::Init::user ? 1 : 100;
    for (int k = 0; k < max_tries; ++k) {
      for (int j = 0; j < dim_; ++j) {
        const double jit = cfg_.init_mode == SamplerConfig::Init::user
                               ? 0.0
                               : cfg_.jitter_scale * (2.0 * uniform01(rng_) - 1.0);
        z.q[uz(j)] = center[uz(j)] + jit;
      }
      z.logp = eval(z.q, z.grad);
      bool finite = z.logp != kNegInf;
      for (int j = 0; finite && j < dim_; ++j) finite = std::isfinite(z.grad[uz(j)]);
      if (finite) return z;
    }
    fail(ErrorCode::InitializationFailure,
         "no finite log density found after " + std::to_string(max_tries) + " start attempts");
  }

  // Classic doubling/halving heuristic for the initial step size.
  void find_reasonable_step_size(const Psi& origin) {
    step_size_ = 1.0;
    Psi probe = origin;
    draw_momentum(probe.p);
    const Psi start = probe;
    const double h0 = -probe.logp + kinetic(probe.p);
    double h = leapfrog(probe, 1.0);
    double accept = std::exp(h0 - h);
    if (std::isnan(accept)) accept = 0.0;
    const double dir = accept > 0.5 ? 1.0 : -1.0;
    for (int k = 0; k < 50; ++k) {
      if (dir > 0.0 && !(accept > 0.5)) break;
      if (dir < 0.0 && !(accept < 0.5)) break;
      step_size_ *= dir > 0.0 ? 2.0 : 0.5;
      if (step_size_ > 1e7 || step_size_ < 1e-10) break;
      probe = start;
      h = leapfrog(probe, 1.0);
      accept = std::exp(h0 - h);
      if (std::isnan(accept)) accept = 0.0;
    }
  }

  // Nesterov dual averaging toward the target acceptance statistic.
  struct DualAveraging {
    double mu = 0.0, log_eps_bar = 0.0, h_bar = 0.0;
    long m = 0;
    static constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;

    void restart(double eps) {
      mu = std::log(10.0 * eps);
      log_eps_bar = std::log(eps);
      h_bar = 0.0;
      m = 0;
    }
    double update(double accept, double target) {
      ++m;
      const double md = static_cast<double>(m);
      h_bar += (target - accept - h_bar) / (md + t0);
      const double log_eps = mu - std::sqrt(md) / gamma * h_bar;
      const double w = std::pow(md, -kappa);
      log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
      return std::exp(log_eps);
    }
  };

  const LogDensityGradient& target_;
  int dim_;
  const SamplerConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<double> inv_metric_;
  double step_size_ = 1.0;
};

void ChainRunner::run(std::span<double> out_draws, std::span<double> out_lp,
                      std::span<std::uint8_t> out_div, ChainStats& stats) {
  Psi cur = initialize();

  // Warmup schedule: stepsize-only buffers flank doubling variance windows.
  const int w = cfg_.n_warmup;
  int init_buf = 75, term_buf = 50, window = 25;
  if (w < init_buf + term_buf + window) {
    init_buf = static_cast<int>(0.15 * w);
    term_buf = static_cast<int>(0.10 * w);
    window = w - init_buf - term_buf;
  }
  int window_end = init_buf + window;

  find_reasonable_step_size(cur);
  DualAveraging da;
  da.restart(step_size_);

  // Welford accumulators for the current variance window.
  std::vector<double> mean(uz(dim_), 0.0), m2(uz(dim_), 0.0);
  long n_acc = 0;
  const auto accumulate = [&](std::span<const double> q) {
    ++n_acc;
    for (int j = 0; j < dim_; ++j) {
      const double d = q[uz(j)] - mean[uz(j)];
      mean[uz(j)] += d / static_cast<double>(n_acc);
      m2[uz(j)] += d * (q[uz(j)] - mean[uz(j)]);
    }
  };

  for (int it = 0; it < w; ++it) {
    const Transition tr = transit(cur);
    step_size_ = da.update(tr.accept_stat, cfg_.target_acceptance);

    const bool in_window = it >= init_buf && it < w - term_buf;
    if (in_window) accumulate(cur.q);

    if (in_window && it + 1 == window_end) {
      // Freeze this window's variance estimate into the metric, regularized
      // toward unit scale like a weak inverse-gamma prior.
      const double nd = static_cast<double>(n_acc);
      for (int j = 0; j < dim_; ++j) {
        const double var = n_acc > 1 ? m2[uz(j)] / (nd - 1.0) : 1.0;
        inv_metric_[uz(j)] = nd / (nd + 5.0) * var + 1e-3 * (5.0 / (nd + 5.0));
      }
      std::fill(mean.begin(), mean.end(), 0.0);
      std::fill(m2.begin(), m2.end(), 0.0);
      n_acc = 0;

      window *= 2;
      const int next_end = window_end + window;
      // Absorb a remainder too small for another doubling.
      window_end = (next_end + 2 * window > w - term_buf) ? w - term_buf : next_end;

      find_reasonable_step_size(cur);
      da.restart(step_size_);
    }
  }
  step_size_ = std::exp(da.log_eps_bar);

  stats.step_size = step_size_;
  stats.inv_metric = inv_metric_;
  stats.divergences = 0;

  double accept_acc = 0.0;
  for (int k = 0; k < cfg_.n_draws; ++k) {
    const Transition tr = transit(cur);
    accept_acc += tr.accept_stat;
    if (tr.divergent) ++stats.divergences;
    out_div[uz(k)] = tr.divergent ? 1 : 0;
    out_lp[uz(k)] = cur.logp;
    std::copy(cur.q.begin(), cur.q.end(),
              out_draws.begin() + static_cast<std::ptrdiff_t>(uz(k) * uz(dim_)));
  }
  stats.mean_accept = cfg_.n_draws > 0 ? accept_acc / cfg_.n_draws : 0.0;
}

}  // namespace

PosteriorDraws run_chains(const LogDensityGradient& target, int dim, const SamplerConfig& cfg) {
  if (dim < 1) fail(ErrorCode::ConfigError, "sampler dimension must be positive");
  if (cfg.n_chains < 1) fail(ErrorCode::ConfigError, "n_chains must be at least 1");
  if (cfg.n_warmup < 100) fail(ErrorCode::ConfigError, "n_warmup must be at least 100");
  if (cfg.n_draws < 1) fail(ErrorCode::ConfigError, "n_draws must be at least 1");
  if (!(cfg.target_acceptance > 0.0 && cfg.target_acceptance < 1.0))
    fail(ErrorCode::ConfigError, "target_acceptance must lie in (0,1)");
  if (cfg.max_tree_depth < 1) fail(ErrorCode::ConfigError, "max_tree_depth must be positive");
  if (!cfg.init_point.empty() && static_cast<int>(cfg.init_point.size()) != dim)
    fail(ErrorCode::ConfigError, "init_point length does not match the target dimension");

  PosteriorDraws out;
  out.n_chains = cfg.n_chains;
  out.n_draws = cfg.n_draws;
  out.dim = dim;
  out.draws.resize(uz(cfg.n_chains) * uz(cfg.n_draws) * uz(dim));
  out.lp.resize(uz(cfg.n_chains) * uz(cfg.n_draws));
  out.divergent.resize(uz(cfg.n_chains) * uz(cfg.n_draws));
  out.chains.resize(uz(cfg.n_chains));

  std::vector<std::string> errors(uz(cfg.n_chains));
#pragma omp parallel for schedule(static, 1)
  for (int c = 0; c < cfg.n_chains; ++c) {
    try {
      ChainRunner runner(target, dim, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
      const std::size_t qbase = uz(c) * uz(cfg.n_draws) * uz(dim);
      const std::size_t sbase = uz(c) * uz(cfg.n_draws);
      runner.run({out.draws.data() + qbase, uz(cfg.n_draws) * uz(dim)},
                 {out.lp.data() + sbase, uz(cfg.n_draws)},
                 {out.divergent.data() + sbase, uz(cfg.n_draws)}, out.chains[uz(c)]);
    } catch (const std::exception& e) {
      errors[uz(c)] = e.what();
    }
  }
  for (const auto& msg : errors) {
    if (!msg.empty()) {
      // Re-raise the first chain failure with its original code when possible.
      if (msg.rfind("InitializationFailure", 0) == 0)
        fail(ErrorCode::InitializationFailure, msg.substr(msg.find(": ") + 2));
      fail(ErrorCode::NonFinite, msg);
    }
  }
  return out;
}

}  // namespace spathmm
