#include "spathmm/params.hpp"

#include <cmath>
#include <cstddef>

#include "spathmm/errors.hpp"
#include "spathmm/math_util.hpp"

namespace spathmm {

namespace {

std::size_t uz(int i) { return static_cast<std::size_t>(i); }

void check_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) fail(ErrorCode::NonFinite, std::string(what) + " contains a non-finite value");
  }
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

std::vector<double> state_means(double mu1, double muS, std::span<const double> m) {
  const int s_count = static_cast<int>(m.size());
  if (s_count < 1) fail(ErrorCode::LengthMismatch, "state_means: m must have one entry per state");
  if (s_count == 1) return {mu1};
  if (!(muS >= mu1)) fail(ErrorCode::OrderViolation, "state_means: muS must be >= mu1");
  if (m[0] != 0.0) fail(ErrorCode::InvariantViolation, "state_means: m[0] must be 0");
  double total = 0.0;
  for (double v : m) {
    if (v < 0.0) fail(ErrorCode::InvariantViolation, "state_means: m entries must be nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-10) fail(ErrorCode::InvariantViolation, "state_means: m must sum to 1");

  std::vector<double> mu(uz(s_count));
  mu[0] = mu1;
  double cum = 0.0;
  for (int k = 1; k < s_count - 1; ++k) {
    cum += m[uz(k)];
    mu[uz(k)] = mu1 + (muS - mu1) * cum;
  }
  mu[uz(s_count - 1)] = muS;  // exact endpoint, no rounding from the cumulative sum
  return mu;
}

ConstrainedGrad::ConstrainedGrad(const ModelParams& p)
    : mu(uz(p.n_states), 0.0),
      m(uz(p.n_states), 0.0),
      lambda(uz(p.n_sites), 0.0),
      phi(uz(p.n_states) * uz(p.n_sites), 0.0),
      sigma_phi(uz(p.n_states), 0.0),
      gamma(12, 0.0),
      rho(uz(p.n_states), 0.0),
      a(uz(p.n_states) * uz(p.n_states), 0.0),
      xi(uz(p.n_states), 0.0),
      beta(uz(p.n_states), 0.0) {}

// ---------------------------------------------------------------------------
// Stick-breaking simplex transform (Stan's parameterization: the zero vector
// maps to the uniform simplex).

double simplex_constrain(std::span<const double> u, std::span<double> x) {
  const int k_total = static_cast<int>(x.size());
  if (static_cast<int>(u.size()) != k_total - 1) {
    fail(ErrorCode::LengthMismatch, "simplex_constrain: need K-1 free coordinates");
  }
  double log_jac = 0.0;
  double stick = 1.0;
  for (int k = 0; k + 1 < k_total; ++k) {
    const double z = inv_logit(u[uz(k)] - std::log(static_cast<double>(k_total - 1 - k)));
    x[uz(k)] = stick * z;
    log_jac += std::log(stick) + std::log(z) + std::log1p(-z);
    stick *= 1.0 - z;
  }
  x[uz(k_total - 1)] = stick;
  return log_jac;
}

void simplex_unconstrain(std::span<const double> x, std::span<double> u) {
  const int k_total = static_cast<int>(x.size());
  if (static_cast<int>(u.size()) != k_total - 1) {
    fail(ErrorCode::LengthMismatch, "simplex_unconstrain: need K-1 free coordinates");
  }
  double stick = 1.0;
  for (int k = 0; k + 1 < k_total; ++k) {
    const double z = x[uz(k)] / stick;
    if (!(z > 0.0) || !(z < 1.0)) {
      fail(ErrorCode::ConstraintViolation, "simplex_unconstrain: entries must be strictly inside the simplex");
    }
    u[uz(k)] = logit(z) + std::log(static_cast<double>(k_total - 1 - k));
    stick -= x[uz(k)];
  }
  if (!(stick > 0.0)) {
    fail(ErrorCode::ConstraintViolation, "simplex_unconstrain: entries must be strictly inside the simplex");
  }
}

void simplex_pullback(std::span<const double> u, std::span<const double> x_grad,
                      std::span<double> u_grad) {
  const int k_total = static_cast<int>(x_grad.size());
  if (static_cast<int>(u.size()) != k_total - 1 || u_grad.size() != u.size()) {
    fail(ErrorCode::LengthMismatch, "simplex_pullback: size mismatch");
  }
  if (k_total == 1) return;

  // Forward sweep to recover the z's and sticks.
  std::vector<double> z(uz(k_total - 1)), stick(uz(k_total));
  stick[0] = 1.0;
  for (int k = 0; k + 1 < k_total; ++k) {
    z[uz(k)] = inv_logit(u[uz(k)] - std::log(static_cast<double>(k_total - 1 - k)));
    stick[uz(k + 1)] = stick[uz(k)] * (1.0 - z[uz(k)]);
  }
  // Reverse sweep; the log-Jacobian terms log(stick_k) + log z_k + log(1-z_k)
  // contribute the 1/stick and 1/z - 1/(1-z) pieces.
  double stick_bar = x_grad[uz(k_total - 1)];
  for (int k = k_total - 2; k >= 0; --k) {
    const double zk = z[uz(k)];
    const double sk = stick[uz(k)];
    const double z_bar =
        x_grad[uz(k)] * sk - stick_bar * sk + (1.0 / zk - 1.0 / (1.0 - zk));
    u_grad[uz(k)] += z_bar * zk * (1.0 - zk);
    stick_bar = x_grad[uz(k)] * zk + stick_bar * (1.0 - zk) + 1.0 / sk;
  }
}

// ---------------------------------------------------------------------------
// Layout

ParamLayout::ParamLayout(const ModelSpec& spec, int n_sites) : spec_(spec), n_sites_(n_sites) {
  const int s_count = spec.n_states;
  if (s_count < 1) fail(ErrorCode::ConfigError, "ParamLayout: n_states must be >= 1");
  if (n_sites < 2) fail(ErrorCode::ConfigError, "ParamLayout: need at least 2 sites");

  int off = 0;
  off_mu1_ = off;
  off += 1;
  off_gap_ = off;
  off += (s_count >= 2) ? 1 : 0;
  off_m_ = off;
  n_m_free_ = std::max(0, s_count - 2);
  off += n_m_free_;
  off_lambda_ = off;
  off += n_sites - 1;
  off_log_sigma_lambda_ = off;
  off += 1;
  off_phi_ = off;
  off += spec.include_spatial ? s_count * (n_sites - 1) : 0;
  off_log_sigma_phi_ = off;
  n_sigma_phi_free_ = spec.include_spatial ? (spec.shared_sigma_phi ? 1 : s_count) : 0;
  off += n_sigma_phi_free_;
  off_gamma_ = off;
  off += 11;
  off_rho_ = off;
  off += s_count - 1;
  off_a_ = off;
  off += s_count * (s_count - 1);
  off_xi_ = off;
  off += spec.model_missingness ? s_count : 0;
  off_beta_ = off;
  off += spec.model_missingness ? s_count : 0;
  dim_ = off;
}

ModelParams ParamLayout::constrain(std::span<const double> u, double* log_jacobian) const {
  if (static_cast<int>(u.size()) != dim_) {
    fail(ErrorCode::LengthMismatch, "constrain: expected " + std::to_string(dim_) +
                                        " coordinates, got " + std::to_string(u.size()));
  }
  check_finite(u, "constrain: input");

  const int s_count = spec_.n_states;
  const int n = n_sites_;
  double lj = 0.0;

  ModelParams p;
  p.n_states = s_count;
  p.n_sites = n;

  p.mu1 = u[uz(off_mu1_)];
  p.m.assign(uz(s_count), 0.0);
  if (s_count >= 2) {
    const double gap = u[uz(off_gap_)];
    p.muS = p.mu1 + std::exp(gap);
    lj += gap;
    // m[1:] is a simplex over the S-1 mean increments.
    lj += simplex_constrain(u.subspan(uz(off_m_), uz(n_m_free_)),
                            std::span<double>(p.m).subspan(1));
  } else {
    p.muS = p.mu1;
  }
  p.mu = state_means(p.mu1, p.muS, p.m);

  p.lambda.assign(uz(n), 0.0);
  {
    double sum = 0.0;
    for (int j = 0; j + 1 < n; ++j) {
      p.lambda[uz(j)] = u[uz(off_lambda_ + j)];
      sum += p.lambda[uz(j)];
    }
    p.lambda[uz(n - 1)] = -sum;
  }

  {
    const double ls = u[uz(off_log_sigma_lambda_)];
    p.sigma_lambda = std::exp(ls);
    lj += ls;
  }

  p.phi.assign(uz(s_count) * uz(n), 0.0);
  p.sigma_phi.assign(uz(s_count), 1.0);
  if (spec_.include_spatial) {
    for (int s = 0; s < s_count; ++s) {
      double sum = 0.0;
      const int base = off_phi_ + s * (n - 1);
      for (int j = 0; j + 1 < n; ++j) {
        const double v = u[uz(base + j)];
        p.phi[uz(s) * uz(n) + uz(j)] = v;
        sum += v;
      }
      p.phi[uz(s) * uz(n) + uz(n - 1)] = -sum;
    }
    for (int k = 0; k < n_sigma_phi_free_; ++k) {
      lj += u[uz(off_log_sigma_phi_ + k)];
    }
    if (spec_.shared_sigma_phi) {
      const double v = std::exp(u[uz(off_log_sigma_phi_)]);
      p.sigma_phi.assign(uz(s_count), v);
    } else {
      for (int s = 0; s < s_count; ++s) {
        p.sigma_phi[uz(s)] = std::exp(u[uz(off_log_sigma_phi_ + s)]);
      }
    }
  }

  p.gamma.assign(12, 0.0);
  {
    double sum = 0.0;
    for (int j = 0; j < 11; ++j) {
      p.gamma[uz(j)] = u[uz(off_gamma_ + j)];
      sum += p.gamma[uz(j)];
    }
    p.gamma[11] = -sum;
  }

  p.rho.assign(uz(s_count), 0.0);
  lj += simplex_constrain(u.subspan(uz(off_rho_), uz(s_count - 1)), p.rho);

  p.a.assign(uz(s_count) * uz(s_count), 0.0);
  for (int s = 0; s < s_count; ++s) {
    lj += simplex_constrain(u.subspan(uz(off_a_ + s * (s_count - 1)), uz(s_count - 1)),
                            std::span<double>(p.a).subspan(uz(s) * uz(s_count), uz(s_count)));
  }

  p.xi.assign(uz(s_count), 0.0);
  p.beta.assign(uz(s_count), 0.0);
  if (spec_.model_missingness) {
    for (int s = 0; s < s_count; ++s) {
      p.xi[uz(s)] = u[uz(off_xi_ + s)];
      p.beta[uz(s)] = u[uz(off_beta_ + s)];
    }
  }

  if (log_jacobian != nullptr) *log_jacobian = lj;
  return p;
}

std::vector<double> ParamLayout::unconstrain(const ModelParams& p) const {
  validate(p);
  const int s_count = spec_.n_states;
  const int n = n_sites_;
  std::vector<double> u(uz(dim_), 0.0);

  u[uz(off_mu1_)] = p.mu1;
  if (s_count >= 2) {
    const double gap = p.muS - p.mu1;
    if (!(gap > 0.0)) fail(ErrorCode::OrderViolation, "unconstrain: muS must exceed mu1");
    u[uz(off_gap_)] = std::log(gap);
    simplex_unconstrain(std::span<const double>(p.m).subspan(1),
                        std::span<double>(u).subspan(uz(off_m_), uz(n_m_free_)));
  }

  for (int j = 0; j + 1 < n; ++j) u[uz(off_lambda_ + j)] = p.lambda[uz(j)];
  u[uz(off_log_sigma_lambda_)] = std::log(p.sigma_lambda);

  if (spec_.include_spatial) {
    for (int s = 0; s < s_count; ++s) {
      for (int j = 0; j + 1 < n; ++j) {
        u[uz(off_phi_ + s * (n - 1) + j)] = p.phi[uz(s) * uz(n) + uz(j)];
      }
    }
    if (spec_.shared_sigma_phi) {
      u[uz(off_log_sigma_phi_)] = std::log(p.sigma_phi[0]);
    } else {
      for (int s = 0; s < s_count; ++s) {
        u[uz(off_log_sigma_phi_ + s)] = std::log(p.sigma_phi[uz(s)]);
      }
    }
  }

  for (int j = 0; j < 11; ++j) u[uz(off_gamma_ + j)] = p.gamma[uz(j)];

  simplex_unconstrain(p.rho, std::span<double>(u).subspan(uz(off_rho_), uz(s_count - 1)));
  for (int s = 0; s < s_count; ++s) {
    simplex_unconstrain(
        std::span<const double>(p.a).subspan(uz(s) * uz(s_count), uz(s_count)),
        std::span<double>(u).subspan(uz(off_a_ + s * (s_count - 1)), uz(s_count - 1)));
  }

  if (spec_.model_missingness) {
    for (int s = 0; s < s_count; ++s) {
      u[uz(off_xi_ + s)] = p.xi[uz(s)];
      u[uz(off_beta_ + s)] = p.beta[uz(s)];
    }
  }
  return u;
}

void ParamLayout::pullback(std::span<const double> u, const ConstrainedGrad& grad,
                           std::span<double> out) const {
  if (static_cast<int>(u.size()) != dim_ || out.size() != u.size()) {
    fail(ErrorCode::LengthMismatch, "pullback: size mismatch");
  }
  const int s_count = spec_.n_states;
  const int n = n_sites_;
  const ModelParams p = constrain(u);
  std::fill(out.begin(), out.end(), 0.0);

  // Fold the state-mean gradient into (mu1, muS, m). Only the interior means
  // depend on the cumulative increments; the endpoints are assigned exactly.
  double g_mu1 = grad.mu1 + grad.mu[0];
  double g_muS = grad.muS;
  std::vector<double> g_m = grad.m;
  if (s_count >= 2) {
    g_muS += grad.mu[uz(s_count - 1)];
    double cum = 0.0;
    for (int k = 1; k < s_count - 1; ++k) {
      cum += p.m[uz(k)];
      g_mu1 += grad.mu[uz(k)] * (1.0 - cum);
      g_muS += grad.mu[uz(k)] * cum;
    }
    double suffix = 0.0;
    for (int j = s_count - 1; j >= 1; --j) {
      if (j <= s_count - 2) suffix += grad.mu[uz(j)];
      g_m[uz(j)] += (p.muS - p.mu1) * suffix;
    }
    out[uz(off_mu1_)] = g_mu1 + g_muS;
    out[uz(off_gap_)] = g_muS * (p.muS - p.mu1) + 1.0;  // +1 from d(gap)/d(gap) in the log-Jacobian
    simplex_pullback(u.subspan(uz(off_m_), uz(n_m_free_)),
                     std::span<const double>(g_m).subspan(1),
                     out.subspan(uz(off_m_), uz(n_m_free_)));
  } else {
    out[uz(off_mu1_)] = g_mu1 + g_muS;  // muS aliases mu1 when S == 1
  }

  for (int j = 0; j + 1 < n; ++j) {
    out[uz(off_lambda_ + j)] = grad.lambda[uz(j)] - grad.lambda[uz(n - 1)];
  }
  out[uz(off_log_sigma_lambda_)] = grad.sigma_lambda * p.sigma_lambda + 1.0;

  if (spec_.include_spatial) {
    for (int s = 0; s < s_count; ++s) {
      const double g_last = grad.phi[uz(s) * uz(n) + uz(n - 1)];
      const int base = off_phi_ + s * (n - 1);
      for (int j = 0; j + 1 < n; ++j) {
        out[uz(base + j)] = grad.phi[uz(s) * uz(n) + uz(j)] - g_last;
      }
    }
    if (spec_.shared_sigma_phi) {
      double g = 0.0;
      for (int s = 0; s < s_count; ++s) g += grad.sigma_phi[uz(s)];
      out[uz(off_log_sigma_phi_)] = g * p.sigma_phi[0] + 1.0;
    } else {
      for (int s = 0; s < s_count; ++s) {
        out[uz(off_log_sigma_phi_ + s)] = grad.sigma_phi[uz(s)] * p.sigma_phi[uz(s)] + 1.0;
      }
    }
  }

  for (int j = 0; j < 11; ++j) {
    out[uz(off_gamma_ + j)] = grad.gamma[uz(j)] - grad.gamma[11];
  }

  simplex_pullback(u.subspan(uz(off_rho_), uz(s_count - 1)), grad.rho,
                   out.subspan(uz(off_rho_), uz(s_count - 1)));
  for (int s = 0; s < s_count; ++s) {
    simplex_pullback(u.subspan(uz(off_a_ + s * (s_count - 1)), uz(s_count - 1)),
                     std::span<const double>(grad.a).subspan(uz(s) * uz(s_count), uz(s_count)),
                     out.subspan(uz(off_a_ + s * (s_count - 1)), uz(s_count - 1)));
  }

  if (spec_.model_missingness) {
    for (int s = 0; s < s_count; ++s) {
      out[uz(off_xi_ + s)] = grad.xi[uz(s)];
      out[uz(off_beta_ + s)] = grad.beta[uz(s)];
    }
  }
}

void ParamLayout::validate(const ModelParams& p, double tol) const {
  const int s_count = spec_.n_states;
  const int n = n_sites_;
  auto require = [](bool ok, const char* msg) {
    if (!ok) fail(ErrorCode::InvariantViolation, msg);
  };

  require(p.n_states == s_count && p.n_sites == n, "validate: dimensions do not match layout");
  require(static_cast<int>(p.mu.size()) == s_count, "validate: mu has wrong length");
  require(static_cast<int>(p.m.size()) == s_count, "validate: m has wrong length");
  require(static_cast<int>(p.lambda.size()) == n, "validate: lambda has wrong length");
  require(p.phi.size() == uz(s_count) * uz(n), "validate: phi has wrong shape");
  require(static_cast<int>(p.sigma_phi.size()) == s_count, "validate: sigma_phi has wrong length");
  require(p.gamma.size() == 12, "validate: gamma must have 12 entries");
  require(static_cast<int>(p.rho.size()) == s_count, "validate: rho has wrong length");
  require(p.a.size() == uz(s_count) * uz(s_count), "validate: A has wrong shape");
  require(static_cast<int>(p.xi.size()) == s_count, "validate: xi has wrong length");
  require(static_cast<int>(p.beta.size()) == s_count, "validate: beta has wrong length");

  check_finite(std::span<const double>(&p.mu1, 1), "validate: mu1");
  check_finite(p.mu, "validate: mu");
  check_finite(p.lambda, "validate: lambda");
  check_finite(p.phi, "validate: phi");
  check_finite(p.gamma, "validate: gamma");
  check_finite(p.xi, "validate: xi");
  check_finite(p.beta, "validate: beta");

  require(p.mu[0] == p.mu1, "validate: mu[0] must equal mu1");
  require(p.mu[uz(s_count - 1)] == p.muS, "validate: mu[S] must equal muS");
  for (int k = 0; k + 1 < s_count; ++k) {
    if (!(p.mu[uz(k)] <= p.mu[uz(k + 1)])) {
      fail(ErrorCode::OrderViolation, "validate: state means must be nondecreasing");
    }
  }
  require(p.m[0] == 0.0, "validate: m[0] must be 0");
  if (s_count >= 2) {
    double sum_m = 0.0;
    for (double v : p.m) {
      require(v >= 0.0, "validate: m entries must be nonnegative");
      sum_m += v;
    }
    require(std::abs(sum_m - 1.0) <= tol, "validate: m must sum to 1");
  }

  double sum_l = 0.0;
  for (double v : p.lambda) sum_l += v;
  require(std::abs(sum_l) <= tol, "validate: lambda must sum to 0");
  require(p.sigma_lambda > 0.0, "validate: sigma_lambda must be positive");

  for (int s = 0; s < s_count; ++s) {
    double sum_p = 0.0;
    for (int i = 0; i < n; ++i) sum_p += p.phi_at(s, i);
    require(std::abs(sum_p) <= tol, "validate: each phi row must sum to 0");
    require(p.sigma_phi[uz(s)] > 0.0, "validate: sigma_phi must be positive");
  }
  if (spec_.shared_sigma_phi) {
    for (int s = 1; s < s_count; ++s) {
      require(p.sigma_phi[uz(s)] == p.sigma_phi[0], "validate: shared sigma_phi entries must match");
    }
  }

  double sum_g = 0.0;
  for (double v : p.gamma) sum_g += v;
  require(std::abs(sum_g) <= tol, "validate: gamma must sum to 0");

  auto check_simplex = [&](std::span<const double> x, const char* msg) {
    double sum = 0.0;
    for (double v : x) {
      require(v >= 0.0 && std::isfinite(v), msg);
      sum += v;
    }
    require(std::abs(sum - 1.0) <= tol, msg);
  };
  check_simplex(p.rho, "validate: rho must be a simplex");
  for (int s = 0; s < s_count; ++s) {
    check_simplex(std::span<const double>(p.a).subspan(uz(s) * uz(s_count), uz(s_count)),
                  "validate: each row of A must be a simplex");
  }
}

std::vector<std::string> ParamLayout::column_names() const {
  const int s_count = spec_.n_states;
  const int n = n_sites_;
  std::vector<std::string> names;
  auto idx1 = [](const std::string& base, int i) { return base + "[" + std::to_string(i + 1) + "]"; };
  for (int s = 0; s < s_count; ++s) names.push_back(idx1("mu", s));
  for (int i = 0; i < n; ++i) names.push_back(idx1("lambda", i));
  if (spec_.include_spatial) {
    for (int s = 0; s < s_count; ++s) {
      for (int i = 0; i < n; ++i) {
        names.push_back("phi[" + std::to_string(s + 1) + "][" + std::to_string(i + 1) + "]");
      }
    }
  }
  for (int j = 0; j < 12; ++j) names.push_back(idx1("gamma", j));
  for (int s = 0; s < s_count; ++s) names.push_back(idx1("rho", s));
  for (int s = 0; s < s_count; ++s) {
    for (int s2 = 0; s2 < s_count; ++s2) {
      names.push_back("A[" + std::to_string(s + 1) + "][" + std::to_string(s2 + 1) + "]");
    }
  }
  names.push_back("sigma_lambda");
  if (spec_.include_spatial) {
    if (spec_.shared_sigma_phi) {
      names.push_back("sigma_phi");
    } else {
      for (int s = 0; s < s_count; ++s) names.push_back(idx1("sigma_phi", s));
    }
  }
  if (spec_.model_missingness) {
    for (int s = 0; s < s_count; ++s) names.push_back(idx1("xi", s));
    for (int s = 0; s < s_count; ++s) names.push_back(idx1("beta", s));
  }
  return names;
}

std::vector<double> ParamLayout::flatten(const ModelParams& p) const {
  const int s_count = spec_.n_states;
  const int n = n_sites_;
  std::vector<double> row;
  row.reserve(column_names().size());
  for (int s = 0; s < s_count; ++s) row.push_back(p.mu[uz(s)]);
  for (int i = 0; i < n; ++i) row.push_back(p.lambda[uz(i)]);
  if (spec_.include_spatial) {
    for (double v : p.phi) row.push_back(v);
  }
  for (double v : p.gamma) row.push_back(v);
  for (double v : p.rho) row.push_back(v);
  for (double v : p.a) row.push_back(v);
  row.push_back(p.sigma_lambda);
  if (spec_.include_spatial) {
    if (spec_.shared_sigma_phi) {
      row.push_back(p.sigma_phi[0]);
    } else {
      for (double v : p.sigma_phi) row.push_back(v);
    }
  }
  if (spec_.model_missingness) {
    for (double v : p.xi) row.push_back(v);
    for (double v : p.beta) row.push_back(v);
  }
  return row;
}

ModelParams ParamLayout::unflatten(std::span<const double> row) const {
  const int s_count = spec_.n_states;
  const int n = n_sites_;
  if (row.size() != column_names().size()) {
    fail(ErrorCode::LengthMismatch, "unflatten: row has " + std::to_string(row.size()) +
                                        " values, expected " + std::to_string(column_names().size()));
  }
  ModelParams p;
  p.n_states = s_count;
  p.n_sites = n;
  std::size_t at = 0;
  auto take = [&](std::size_t count) {
    std::span<const double> piece = row.subspan(at, count);
    at += count;
    return piece;
  };

  auto mu = take(uz(s_count));
  p.mu.assign(mu.begin(), mu.end());
  p.mu1 = p.mu[0];
  p.muS = p.mu[uz(s_count - 1)];
  p.m.assign(uz(s_count), 0.0);
  if (s_count >= 2) {
    const double gap = p.muS - p.mu1;
    if (!(gap > 0.0)) fail(ErrorCode::OrderViolation, "unflatten: muS must exceed mu1");
    for (int k = 1; k + 1 < s_count; ++k) {
      p.m[uz(k)] = (p.mu[uz(k)] - p.mu[uz(k - 1)]) / gap;
    }
    double partial = 0.0;
    for (int k = 1; k + 1 < s_count; ++k) partial += p.m[uz(k)];
    p.m[uz(s_count - 1)] = 1.0 - partial;  // close the simplex exactly
  }

  auto lam = take(uz(n));
  p.lambda.assign(lam.begin(), lam.end());
  if (spec_.include_spatial) {
    auto ph = take(uz(s_count) * uz(n));
    p.phi.assign(ph.begin(), ph.end());
  } else {
    p.phi.assign(uz(s_count) * uz(n), 0.0);
  }
  auto gam = take(12);
  p.gamma.assign(gam.begin(), gam.end());
  auto rho = take(uz(s_count));
  p.rho.assign(rho.begin(), rho.end());
  auto a = take(uz(s_count) * uz(s_count));
  p.a.assign(a.begin(), a.end());
  p.sigma_lambda = take(1)[0];
  if (spec_.include_spatial) {
    if (spec_.shared_sigma_phi) {
      p.sigma_phi.assign(uz(s_count), take(1)[0]);
    } else {
      auto sp = take(uz(s_count));
      p.sigma_phi.assign(sp.begin(), sp.end());
    }
  } else {
    p.sigma_phi.assign(uz(s_count), 1.0);
  }
  if (spec_.model_missingness) {
    auto xi = take(uz(s_count));
    p.xi.assign(xi.begin(), xi.end());
    auto beta = take(uz(s_count));
    p.beta.assign(beta.begin(), beta.end());
  } else {
    p.xi.assign(uz(s_count), 0.0);
    p.beta.assign(uz(s_count), 0.0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Priors

namespace prior {
constexpr double kMu1Mean = -4.5, kMu1Sd = 0.25;
constexpr double kMuSMean = -1.75, kMuSSd = 0.5;
constexpr double kMAlpha = 5.0;
constexpr double kXiBetaSd = 5.0;
constexpr double kLogTwo = 0.6931471805599453;
}  // namespace prior

double log_prior(const ModelParams& p, const ParamLayout& layout) {
  const ModelSpec& spec = layout.spec();
  const int s_count = spec.n_states;
  double lp = 0.0;

  lp += normal_lpdf(p.mu1, prior::kMu1Mean, prior::kMu1Sd);
  if (s_count >= 2) {
    // muS is normal truncated below at mu1; the normalizer depends on mu1.
    lp += normal_lpdf(p.muS, prior::kMuSMean, prior::kMuSSd);
    lp -= normal_lccdf((p.mu1 - prior::kMuSMean) / prior::kMuSSd);
    std::vector<double> alpha(uz(s_count - 1), prior::kMAlpha);
    lp += dirichlet_lpdf(std::span<const double>(p.m).subspan(1), alpha);
  }

  for (double v : p.lambda) lp += normal_lpdf(v, 0.0, p.sigma_lambda);
  lp += prior::kLogTwo + std_normal_lpdf(p.sigma_lambda);  // half-normal(1)

  if (spec.include_spatial) {
    const int n_free = spec.shared_sigma_phi ? 1 : s_count;
    for (int k = 0; k < n_free; ++k) {
      lp += prior::kLogTwo + std_normal_lpdf(p.sigma_phi[uz(k)]);
    }
  }

  for (double v : p.gamma) lp += std_normal_lpdf(v);

  {
    std::vector<double> ones(uz(s_count), 1.0);
    lp += dirichlet_lpdf(p.rho, ones);
  }
  {
    std::vector<double> alpha(uz(s_count));
    for (int s = 0; s < s_count; ++s) {
      for (int s2 = 0; s2 < s_count; ++s2) {
        alpha[uz(s2)] = (s2 == s) ? 2.0 * s_count : 0.5;
      }
      lp += dirichlet_lpdf(std::span<const double>(p.a).subspan(uz(s) * uz(s_count), uz(s_count)),
                           alpha);
    }
  }

  if (spec.model_missingness) {
    for (int s = 0; s < s_count; ++s) {
      lp += normal_lpdf(p.xi[uz(s)], 0.0, prior::kXiBetaSd);
      lp += normal_lpdf(p.beta[uz(s)], 0.0, prior::kXiBetaSd);
    }
  }
  return lp;
}

void accumulate_log_prior_grad(const ModelParams& p, const ParamLayout& layout,
                               ConstrainedGrad& grad) {
  const ModelSpec& spec = layout.spec();
  const int s_count = spec.n_states;
  const int n = layout.n_sites();

  grad.mu1 += -(p.mu1 - prior::kMu1Mean) / (prior::kMu1Sd * prior::kMu1Sd);
  if (s_count >= 2) {
    grad.muS += -(p.muS - prior::kMuSMean) / (prior::kMuSSd * prior::kMuSSd);
    // d/dmu1 of -log(1 - Phi(z)), z = (mu1 - mean)/sd, is the inverse Mills
    // ratio at z divided by sd.
    const double z = (p.mu1 - prior::kMuSMean) / prior::kMuSSd;
    grad.mu1 += mills_ratio_inv(z) / prior::kMuSSd;
    for (int k = 1; k < s_count; ++k) {
      grad.m[uz(k)] += (prior::kMAlpha - 1.0) / p.m[uz(k)];
    }
  }

  const double sl2 = p.sigma_lambda * p.sigma_lambda;
  double sum_l2 = 0.0;
  for (int i = 0; i < n; ++i) {
    grad.lambda[uz(i)] += -p.lambda[uz(i)] / sl2;
    sum_l2 += p.lambda[uz(i)] * p.lambda[uz(i)];
  }
  grad.sigma_lambda += -static_cast<double>(n) / p.sigma_lambda + sum_l2 / (sl2 * p.sigma_lambda);
  grad.sigma_lambda += -p.sigma_lambda;  // half-normal(1)

  if (spec.include_spatial) {
    if (spec.shared_sigma_phi) {
      grad.sigma_phi[0] += -p.sigma_phi[0];
    } else {
      for (int s = 0; s < s_count; ++s) grad.sigma_phi[uz(s)] += -p.sigma_phi[uz(s)];
    }
  }

  for (int j = 0; j < 12; ++j) grad.gamma[uz(j)] += -p.gamma[uz(j)];

  // rho ~ Dirichlet(1,...,1): flat, no gradient.
  for (int s = 0; s < s_count; ++s) {
    for (int s2 = 0; s2 < s_count; ++s2) {
      const double alpha = (s2 == s) ? 2.0 * s_count : 0.5;
      grad.a[uz(s) * uz(s_count) + uz(s2)] += (alpha - 1.0) / p.a_at(s, s2);
    }
  }

  if (spec.model_missingness) {
    const double v2 = prior::kXiBetaSd * prior::kXiBetaSd;
    for (int s = 0; s < s_count; ++s) {
      grad.xi[uz(s)] += -p.xi[uz(s)] / v2;
      grad.beta[uz(s)] += -p.beta[uz(s)] / v2;
    }
  }
}

}  // namespace spathmm
