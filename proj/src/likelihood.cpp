#include "spathmm/likelihood.hpp"

#include <cmath>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "spathmm/errors.hpp"
#include "spathmm/math_util.hpp"

namespace spathmm {

namespace {

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

std::vector<double> emission_matrix_from_tables(const EmissionContext& ctx,
                                                const EmissionTables& tab) {
  const int t_count = ctx.n_times;
  const int s_count = tab.n_states;
  std::vector<double> omega(uz(t_count) * uz(s_count), 0.0);

#pragma omp parallel for schedule(static)
  for (int t = 0; t < t_count; ++t) {
    const int m0 = ctx.month0[uz(t)];
    const int lo = ctx.obs_offset[uz(t)];
    const int hi = ctx.obs_offset[uz(t) + 1];
    for (int s = 0; s < s_count; ++s) {
      double acc = 0.0;
      if (ctx.model_missingness) {
        const std::size_t rts = uz(t) * uz(s_count) + uz(s);
        acc += ctx.n_r1[uz(t)] * tab.lr1[rts] + ctx.n_r0[uz(t)] * tab.lr0[rts];
      }
      for (int k = lo; k < hi; ++k) {
        const int i = ctx.obs_site[uz(k)];
        const std::size_t yi = tab.y_idx(s, i, m0);
        acc += ctx.obs_y[uz(k)] ? tab.lp1[yi] : tab.lp0[yi];
      }
      omega[uz(t) * uz(s_count) + uz(s)] = acc;
    }
  }
  return omega;
}

}  // namespace

EmissionContext make_emission_context(const ObservationPanel& panel, const ModelSpec& spec) {
  const int n = panel.n_sites();
  const int t_count = panel.n_times();
  EmissionContext ctx;
  ctx.n_sites = n;
  ctx.n_times = t_count;
  ctx.model_missingness = spec.model_missingness;
  ctx.obs_offset.assign(uz(t_count) + 1, 0);
  ctx.n_r1.assign(uz(t_count), 0);
  ctx.n_r0.assign(uz(t_count), 0);
  ctx.month0.resize(uz(t_count));
  ctx.scaled_t.resize(uz(t_count));

  for (int t = 0; t < t_count; ++t) {
    ctx.month0[uz(t)] = panel.month_of(t) - 1;
    ctx.scaled_t[uz(t)] = panel.scaled_time(t);
    for (int i = 0; i < n; ++i) {
      if (panel.held_out(i, t)) continue;
      if (!panel.missing(i, t)) {
        ctx.obs_site.push_back(i);
        ctx.obs_y.push_back(panel.y(i, t));
        ++ctx.n_r0[uz(t)];
      } else if (t >= panel.first_obs(i)) {
        ++ctx.n_r1[uz(t)];
      }
    }
    ctx.obs_offset[uz(t) + 1] = static_cast<int>(ctx.obs_site.size());
  }
  return ctx;
}

EmissionTables make_emission_tables(const EmissionContext& ctx, const ModelParams& p) {
  const int s_count = p.n_states;
  const int n = p.n_sites;
  if (n != ctx.n_sites) fail(ErrorCode::LengthMismatch, "emission tables: site count mismatch");
  EmissionTables tab;
  tab.n_states = s_count;
  tab.n_sites = n;
  tab.lp0.resize(uz(s_count) * uz(n) * 12);
  tab.lp1.resize(tab.lp0.size());
  tab.p1.resize(tab.lp0.size());

#pragma omp parallel for schedule(static)
  for (int s = 0; s < s_count; ++s) {
    for (int i = 0; i < n; ++i) {
      const double base = p.mu[uz(s)] + p.lambda[uz(i)] + p.phi_at(s, i);
      for (int m0 = 0; m0 < 12; ++m0) {
        const double eta = base + p.gamma[uz(m0)];
        const std::size_t at = tab.y_idx(s, i, m0);
        tab.lp1[at] = -log1pexp(-eta);
        tab.lp0[at] = -log1pexp(eta);
        tab.p1[at] = inv_logit(eta);
      }
    }
  }

  if (ctx.model_missingness) {
    const int t_count = ctx.n_times;
    tab.lr0.resize(uz(t_count) * uz(s_count));
    tab.lr1.resize(tab.lr0.size());
    tab.pr.resize(tab.lr0.size());
    for (int t = 0; t < t_count; ++t) {
      for (int s = 0; s < s_count; ++s) {
        const double eta = p.xi[uz(s)] + p.beta[uz(s)] * ctx.scaled_t[uz(t)];
        const std::size_t at = uz(t) * uz(s_count) + uz(s);
        tab.lr1[at] = -log1pexp(-eta);
        tab.lr0[at] = -log1pexp(eta);
        tab.pr[at] = inv_logit(eta);
      }
    }
  }
  return tab;
}

std::vector<double> emission_matrix(const EmissionContext& ctx, const ModelParams& p) {
  return emission_matrix_from_tables(ctx, make_emission_tables(ctx, p));
}

double emission_logprob(const ObservationPanel& panel, const ModelSpec& spec,
                        const ModelParams& p, int t, int s) {
  if (t < 0 || t >= panel.n_times()) fail(ErrorCode::IndexOutOfRange, "emission_logprob: bad time");
  if (s < 0 || s >= p.n_states) fail(ErrorCode::IndexOutOfRange, "emission_logprob: bad state");
  const double tp = panel.scaled_time(t);
  const int m0 = panel.month_of(t) - 1;
  double acc = 0.0;
  for (int i = 0; i < panel.n_sites(); ++i) {
    if (t < panel.first_obs(i) || panel.held_out(i, t)) continue;
    if (spec.model_missingness) {
      acc += bernoulli_logit_lpmf(panel.missing(i, t) ? 1 : 0,
                                  p.xi[uz(s)] + p.beta[uz(s)] * tp);
    }
    if (!panel.missing(i, t)) {
      const double eta =
          p.mu[uz(s)] + p.lambda[uz(i)] + p.phi_at(s, i) + p.gamma[uz(m0)];
      acc += bernoulli_logit_lpmf(panel.y(i, t), eta);
    }
  }
  return acc;
}

double forward_loglik(std::span<const double> omega, int n_times, const ModelParams& p) {
  const int s_count = p.n_states;
  if (n_times < 1) fail(ErrorCode::LengthMismatch, "forward_loglik: need at least one time");
  if (static_cast<int>(omega.size()) != n_times * s_count) {
    fail(ErrorCode::LengthMismatch, "forward_loglik: omega shape mismatch");
  }

  std::vector<double> log_a(uz(s_count) * uz(s_count));
  for (std::size_t k = 0; k < log_a.size(); ++k) log_a[k] = std::log(p.a[k]);

  std::vector<double> alpha(uz(s_count)), next(uz(s_count)), work(uz(s_count));
  for (int s = 0; s < s_count; ++s) {
    alpha[uz(s)] = std::log(p.rho[uz(s)]) + omega[uz(s)];
  }
  for (int t = 1; t < n_times; ++t) {
    for (int s2 = 0; s2 < s_count; ++s2) {
      for (int s = 0; s < s_count; ++s) {
        work[uz(s)] = alpha[uz(s)] + log_a[uz(s) * uz(s_count) + uz(s2)];
      }
      next[uz(s2)] = log_sum_exp(work) + omega[uz(t) * uz(s_count) + uz(s2)];
    }
    alpha.swap(next);
  }
  return log_sum_exp(alpha);
}

double forward_loglik(const ObservationPanel& panel, const ModelSpec& spec,
                      const ModelParams& p) {
  const EmissionContext ctx = make_emission_context(panel, spec);
  return forward_loglik(emission_matrix(ctx, p), panel.n_times(), p);
}

ForwardBackward forward_backward(std::span<const double> omega, int n_times,
                                 const ModelParams& p) {
  const int s_count = p.n_states;
  if (n_times < 1) fail(ErrorCode::LengthMismatch, "forward_backward: need at least one time");
  if (static_cast<int>(omega.size()) != n_times * s_count) {
    fail(ErrorCode::LengthMismatch, "forward_backward: omega shape mismatch");
  }

  ForwardBackward fb;
  fb.n_times = n_times;
  fb.n_states = s_count;
  fb.log_alpha.resize(uz(n_times) * uz(s_count));
  fb.log_beta.resize(fb.log_alpha.size());
  fb.gamma.resize(fb.log_alpha.size());
  fb.xi_sum.assign(uz(s_count) * uz(s_count), 0.0);

  std::vector<double> log_a(uz(s_count) * uz(s_count));
  for (std::size_t k = 0; k < log_a.size(); ++k) log_a[k] = std::log(p.a[k]);

  std::vector<double> work(uz(s_count));
  for (int s = 0; s < s_count; ++s) {
    fb.log_alpha[uz(s)] = std::log(p.rho[uz(s)]) + omega[uz(s)];
  }
  for (int t = 1; t < n_times; ++t) {
    for (int s2 = 0; s2 < s_count; ++s2) {
      for (int s = 0; s < s_count; ++s) {
        work[uz(s)] = fb.log_alpha[uz(t - 1) * uz(s_count) + uz(s)] +
                      log_a[uz(s) * uz(s_count) + uz(s2)];
      }
      fb.log_alpha[uz(t) * uz(s_count) + uz(s2)] =
          log_sum_exp(work) + omega[uz(t) * uz(s_count) + uz(s2)];
    }
  }
  for (int s = 0; s < s_count; ++s) fb.log_beta[uz(n_times - 1) * uz(s_count) + uz(s)] = 0.0;
  for (int t = n_times - 2; t >= 0; --t) {
    for (int s = 0; s < s_count; ++s) {
      for (int s2 = 0; s2 < s_count; ++s2) {
        work[uz(s2)] = log_a[uz(s) * uz(s_count) + uz(s2)] +
                       omega[uz(t + 1) * uz(s_count) + uz(s2)] +
                       fb.log_beta[uz(t + 1) * uz(s_count) + uz(s2)];
      }
      fb.log_beta[uz(t) * uz(s_count) + uz(s)] = log_sum_exp(work);
    }
  }

  fb.loglik = log_sum_exp(
      std::span<const double>(fb.log_alpha).subspan(uz(n_times - 1) * uz(s_count), uz(s_count)));

  for (int t = 0; t < n_times; ++t) {
    for (int s = 0; s < s_count; ++s) {
      const std::size_t at = uz(t) * uz(s_count) + uz(s);
      fb.gamma[at] = std::exp(fb.log_alpha[at] + fb.log_beta[at] - fb.loglik);
    }
  }
  for (int t = 1; t < n_times; ++t) {
    for (int s = 0; s < s_count; ++s) {
      const double la = fb.log_alpha[uz(t - 1) * uz(s_count) + uz(s)];
      if (la == kNegInf) continue;
      for (int s2 = 0; s2 < s_count; ++s2) {
        const double term = la + log_a[uz(s) * uz(s_count) + uz(s2)] +
                            omega[uz(t) * uz(s_count) + uz(s2)] +
                            fb.log_beta[uz(t) * uz(s_count) + uz(s2)] - fb.loglik;
        fb.xi_sum[uz(s) * uz(s_count) + uz(s2)] += std::exp(term);
      }
    }
  }
  return fb;
}

double icar_logpdf(const NeighborhoodGraph& graph, std::span<const double> phi_row,
                   double sigma) {
  if (static_cast<int>(phi_row.size()) != graph.n_sites) {
    fail(ErrorCode::LengthMismatch, "icar_logpdf: field length must match graph");
  }
  if (!(sigma > 0.0)) fail(ErrorCode::RangeError, "icar_logpdf: sigma must be positive");
  double sum = 0.0;
  for (double v : phi_row) sum += v;
  if (std::abs(sum) > 1e-10) {
    fail(ErrorCode::ConstraintViolation, "icar_logpdf: field must sum to zero");
  }
  const double q = quadratic_form(graph, phi_row);
  return -(graph.n_sites - 1) * std::log(sigma) - q / (2.0 * sigma * sigma);
}

double log_posterior(const ObservationPanel& panel, const NeighborhoodGraph& graph,
                     const ParamLayout& layout, const ModelParams& p) {
  if (graph.n_sites != panel.n_sites() || layout.n_sites() != panel.n_sites()) {
    fail(ErrorCode::LengthMismatch, "log_posterior: site counts disagree");
  }
  layout.validate(p);
  double lp = forward_loglik(panel, layout.spec(), p);
  if (layout.spec().include_spatial) {
    const int n = p.n_sites;
    for (int s = 0; s < p.n_states; ++s) {
      lp += icar_logpdf(graph, std::span<const double>(p.phi).subspan(uz(s) * uz(n), uz(n)),
                        p.sigma_phi[uz(s)]);
    }
  }
  return lp + log_prior(p, layout);
}

PosteriorEval grad_log_posterior(const EmissionContext& ctx, const NeighborhoodGraph& graph,
                                 const ParamLayout& layout, std::span<const double> u) {
  const int s_count = layout.spec().n_states;
  const int n = layout.n_sites();
  const int t_count = ctx.n_times;
  if (graph.n_sites != n || ctx.n_sites != n) {
    fail(ErrorCode::LengthMismatch, "grad_log_posterior: site counts disagree");
  }

  double log_jac = 0.0;
  const ModelParams p = layout.constrain(u, &log_jac);
  const EmissionTables tab = make_emission_tables(ctx, p);
  const std::vector<double> omega = emission_matrix_from_tables(ctx, tab);
  const ForwardBackward fb = forward_backward(omega, t_count, p);

  ConstrainedGrad cg(p);

  for (int s = 0; s < s_count; ++s) {
    if (p.rho[uz(s)] > 0.0) cg.rho[uz(s)] += fb.gamma[uz(s)] / p.rho[uz(s)];
  }
  for (int s = 0; s < s_count; ++s) {
    for (int s2 = 0; s2 < s_count; ++s2) {
      const std::size_t at = uz(s) * uz(s_count) + uz(s2);
      if (p.a[at] > 0.0) cg.a[at] += fb.xi_sum[at] / p.a[at];
    }
  }

  // Emission-parameter scores, gamma-weighted. Parallel over times with
  // per-thread accumulators merged in thread order so results do not depend
  // on scheduling.
  int n_threads = 1;
#ifdef _OPENMP
  n_threads = omp_get_max_threads();
#endif
  struct ScoreBuf {
    std::vector<double> mu, lambda, phi, month, xi, beta;
  };
  std::vector<ScoreBuf> bufs(uz(n_threads));
  for (ScoreBuf& b : bufs) {
    b.mu.assign(uz(s_count), 0.0);
    b.lambda.assign(uz(n), 0.0);
    b.phi.assign(uz(s_count) * uz(n), 0.0);
    b.month.assign(12, 0.0);
    b.xi.assign(uz(s_count), 0.0);
    b.beta.assign(uz(s_count), 0.0);
  }

#pragma omp parallel for schedule(static)
  for (int t = 0; t < t_count; ++t) {
    int tid = 0;
#ifdef _OPENMP
    tid = omp_get_thread_num();
#endif
    ScoreBuf& b = bufs[uz(tid)];
    const int m0 = ctx.month0[uz(t)];
    const int lo = ctx.obs_offset[uz(t)];
    const int hi = ctx.obs_offset[uz(t) + 1];
    for (int s = 0; s < s_count; ++s) {
      const double w = fb.gamma[uz(t) * uz(s_count) + uz(s)];
      if (w == 0.0) continue;
      if (ctx.model_missingness) {
        const std::size_t rts = uz(t) * uz(s_count) + uz(s);
        const double score_r = ctx.n_r1[uz(t)] * (1.0 - tab.pr[rts]) -
                               ctx.n_r0[uz(t)] * tab.pr[rts];
        b.xi[uz(s)] += w * score_r;
        b.beta[uz(s)] += w * score_r * ctx.scaled_t[uz(t)];
      }
      for (int k = lo; k < hi; ++k) {
        const int i = ctx.obs_site[uz(k)];
        const double e = w * (ctx.obs_y[uz(k)] - tab.p1[tab.y_idx(s, i, m0)]);
        b.mu[uz(s)] += e;
        b.lambda[uz(i)] += e;
        b.phi[uz(s) * uz(n) + uz(i)] += e;
        b.month[uz(m0)] += e;
      }
    }
  }
  for (const ScoreBuf& b : bufs) {
    for (int s = 0; s < s_count; ++s) {
      cg.mu[uz(s)] += b.mu[uz(s)];
      cg.xi[uz(s)] += b.xi[uz(s)];
      cg.beta[uz(s)] += b.beta[uz(s)];
    }
    for (int i = 0; i < n; ++i) cg.lambda[uz(i)] += b.lambda[uz(i)];
    for (std::size_t k = 0; k < b.phi.size(); ++k) cg.phi[k] += b.phi[k];
    for (int m0 = 0; m0 < 12; ++m0) cg.gamma[uz(m0)] += b.month[uz(m0)];
  }

  accumulate_log_prior_grad(p, layout, cg);

  double icar_total = 0.0;
  if (layout.spec().include_spatial) {
    for (int s = 0; s < s_count; ++s) {
      const std::size_t base = uz(s) * uz(n);
      const double sg = p.sigma_phi[uz(s)];
      const double inv_s2 = 1.0 / (sg * sg);
      double q = 0.0;
      for (const auto& [ea, eb] : graph.edges) {
        const double d = p.phi[base + uz(ea)] - p.phi[base + uz(eb)];
        q += d * d;
        cg.phi[base + uz(ea)] -= d * inv_s2;
        cg.phi[base + uz(eb)] += d * inv_s2;
      }
      icar_total += -(n - 1) * std::log(sg) - 0.5 * q * inv_s2;
      cg.sigma_phi[uz(s)] += -(n - 1) / sg + q * inv_s2 / sg;
    }
  }

  PosteriorEval out;
  out.grad.assign(u.size(), 0.0);
  layout.pullback(u, cg, out.grad);
  out.value = fb.loglik + icar_total + log_prior(p, layout) + log_jac;
  return out;
}

namespace ref {

std::vector<double> emission_matrix(const ObservationPanel& panel, const ModelSpec& spec,
                                    const ModelParams& p) {
  std::vector<double> omega(uz(panel.n_times()) * uz(p.n_states));
  for (int t = 0; t < panel.n_times(); ++t) {
    for (int s = 0; s < p.n_states; ++s) {
      omega[uz(t) * uz(p.n_states) + uz(s)] = emission_logprob(panel, spec, p, t, s);
    }
  }
  return omega;
}

double forward_loglik_scaled(std::span<const double> omega, int n_times, const ModelParams& p) {
  const int s_count = p.n_states;
  if (static_cast<int>(omega.size()) != n_times * s_count) {
    fail(ErrorCode::LengthMismatch, "forward_loglik_scaled: omega shape mismatch");
  }
  std::vector<double> alpha(uz(s_count)), next(uz(s_count));
  double loglik = 0.0;
  for (int s = 0; s < s_count; ++s) {
    alpha[uz(s)] = p.rho[uz(s)] * std::exp(omega[uz(s)]);
  }
  for (int t = 1; t <= n_times; ++t) {
    double scale = 0.0;
    for (double v : alpha) scale += v;
    if (!(scale > 0.0)) fail(ErrorCode::NonFinite, "forward_loglik_scaled: vanishing forward mass");
    loglik += std::log(scale);
    if (t == n_times) break;
    for (int s2 = 0; s2 < s_count; ++s2) {
      double acc = 0.0;
      for (int s = 0; s < s_count; ++s) {
        acc += (alpha[uz(s)] / scale) * p.a_at(s, s2);
      }
      next[uz(s2)] = acc * std::exp(omega[uz(t) * uz(s_count) + uz(s2)]);
    }
    alpha.swap(next);
  }
  return loglik;
}

}  // namespace ref

}  // namespace spathmm
