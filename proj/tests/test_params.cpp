#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "spathmm/errors.hpp"
#include "spathmm/math_util.hpp"
#include "spathmm/params.hpp"
#include "test_util.hpp"

using namespace spathmm;

TEST_SUITE_BEGIN("params");

namespace {

ModelSpec full_spec(int s) { return ModelSpec{s, false, true, true}; }

// The free coordinates of the constrained point, block for block, in the same
// order as the unconstrained layout. Restricting constrain to these outputs
// makes its Jacobian square, so log|det| can be checked numerically.
std::vector<double> free_view(const ParamLayout& layout, const ModelParams& p) {
  const int s_count = layout.spec().n_states;
  const int n = layout.n_sites();
  std::vector<double> v;
  v.push_back(p.mu1);
  if (s_count >= 2) {
    v.push_back(p.muS);
    for (int k = 1; k + 1 < s_count; ++k) v.push_back(p.m[static_cast<std::size_t>(k)]);
  }
  for (int j = 0; j + 1 < n; ++j) v.push_back(p.lambda[static_cast<std::size_t>(j)]);
  v.push_back(p.sigma_lambda);
  if (layout.spec().include_spatial) {
    for (int s = 0; s < s_count; ++s) {
      for (int j = 0; j + 1 < n; ++j) v.push_back(p.phi_at(s, j));
    }
    if (layout.spec().shared_sigma_phi) {
      v.push_back(p.sigma_phi[0]);
    } else {
      for (int s = 0; s < s_count; ++s) v.push_back(p.sigma_phi[static_cast<std::size_t>(s)]);
    }
  }
  for (int j = 0; j < 11; ++j) v.push_back(p.gamma[static_cast<std::size_t>(j)]);
  for (int s = 0; s + 1 < s_count; ++s) v.push_back(p.rho[static_cast<std::size_t>(s)]);
  for (int s = 0; s < s_count; ++s) {
    for (int s2 = 0; s2 + 1 < s_count; ++s2) v.push_back(p.a_at(s, s2));
  }
  if (layout.spec().model_missingness) {
    for (int s = 0; s < s_count; ++s) v.push_back(p.xi[static_cast<std::size_t>(s)]);
    for (int s = 0; s < s_count; ++s) v.push_back(p.beta[static_cast<std::size_t>(s)]);
  }
  return v;
}

}  // namespace

TEST_CASE("layout dimension bookkeeping") {
  // Full model at paper shape: S=5, N=387.
  const ParamLayout full(full_spec(5), 387);
  // 1 mu1 + 1 gap + 3 simplex sticks for the 4 increments + 386 lambda + 1
  // sigma_lambda + 5*386 phi + 5 sigma_phi + 11 gamma + 4 rho + 20 A + 5 xi
  // + 5 beta.
  CHECK(full.dim() == 1 + 1 + 3 + 386 + 1 + 5 * 386 + 5 + 11 + 4 + 20 + 5 + 5);

  const ParamLayout reduced(ModelSpec{5, true, false, true}, 10);
  CHECK(reduced.dim() == 1 + 1 + 3 + 9 + 1 + 5 * 9 + 1 + 11 + 4 + 20);

  const ParamLayout degenerate(ModelSpec{1, false, true, true}, 3);
  CHECK(degenerate.dim() == 1 + 0 + 0 + 2 + 1 + 2 + 1 + 11 + 0 + 0 + 1 + 1);

  const ParamLayout nospace(ModelSpec{2, false, true, false}, 4);
  CHECK(nospace.dim() == 1 + 1 + 0 + 3 + 1 + 0 + 0 + 11 + 1 + 2 + 2 + 2);
}

TEST_CASE("state_means examples") {
  SUBCASE("S=2 endpoints only") {
    std::vector<double> m = {0.0, 1.0};
    CHECK(state_means(0.0, 1.0, m) == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("S=3 cumulative sums") {
    std::vector<double> m = {0.0, 0.4, 0.6};
    const auto mu = state_means(0.0, 1.0, m);
    CHECK(mu[0] == 0.0);
    CHECK(mu[1] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(mu[2] == 1.0);
  }
  SUBCASE("published five-state means recovered from normalized increments") {
    const std::vector<double> target = {-4.63, -3.93, -2.74, -2.39, -1.66};
    const double range = target.back() - target.front();
    std::vector<double> m = {0.0};
    for (std::size_t k = 1; k < target.size(); ++k) {
      m.push_back((target[k] - target[k - 1]) / range);
    }
    // Increments normalize to approximately (0, .2357, .4007, .1178, .2458).
    CHECK(m[1] == doctest::Approx(0.2357).epsilon(1e-3));
    CHECK(m[2] == doctest::Approx(0.4007).epsilon(1e-3));
    const auto mu = state_means(target.front(), target.back(), m);
    for (std::size_t k = 0; k < target.size(); ++k) {
      CHECK(mu[k] == doctest::Approx(target[k]).epsilon(1e-10));
    }
  }
  SUBCASE("order violation") {
    std::vector<double> m = {0.0, 1.0};
    CHECK_THROWS_WITH_AS(state_means(1.0, 0.0, m), doctest::Contains("OrderViolation"), Error);
  }
  SUBCASE("non-simplex rejected") {
    std::vector<double> m = {0.0, 0.3, 0.3};
    CHECK_THROWS_AS(state_means(0.0, 1.0, m), Error);
  }
}

TEST_CASE("simplex transform basics") {
  SUBCASE("zero maps to uniform") {
    for (int k = 2; k <= 6; ++k) {
      std::vector<double> u(static_cast<std::size_t>(k - 1), 0.0);
      std::vector<double> x(static_cast<std::size_t>(k));
      simplex_constrain(u, x);
      for (double v : x) CHECK(v == doctest::Approx(1.0 / k).epsilon(1e-14));
    }
  }
  SUBCASE("round trip") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> norm(0.0, 1.5);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> u(4), x(5), u2(4);
      for (double& v : u) v = norm(rng);
      simplex_constrain(u, x);
      double sum = 0.0;
      for (double v : x) {
        CHECK(v > 0.0);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
      simplex_unconstrain(x, u2);
      for (int k = 0; k < 4; ++k) CHECK(u2[k] == doctest::Approx(u[k]).epsilon(1e-10));
    }
  }
}

TEST_CASE("constrain produces valid params and round-trips") {
  std::mt19937_64 rng(2024);
  for (const ModelSpec& spec :
       {full_spec(5), full_spec(3), ModelSpec{2, true, false, true}, ModelSpec{1, false, true, true},
        ModelSpec{3, false, true, false}}) {
    const int n = 6;
    const ParamLayout layout(spec, n);
    for (int rep = 0; rep < 5; ++rep) {
      const auto u = testutil::random_unconstrained(layout, rng, 0.8);
      const ModelParams p = layout.constrain(u);
      CHECK_NOTHROW(layout.validate(p));
      const auto u2 = layout.unconstrain(p);
      REQUIRE(u2.size() == u.size());
      for (std::size_t k = 0; k < u.size(); ++k) {
        CHECK(u2[k] == doctest::Approx(u[k]).epsilon(1e-10));
      }
      // Spec round trip: constrain(unconstrain(p)) reproduces p.
      const ModelParams p2 = layout.constrain(u2);
      CHECK(p2.mu1 == doctest::Approx(p.mu1).epsilon(1e-10));
      CHECK(p2.muS == doctest::Approx(p.muS).epsilon(1e-10));
      for (int s = 0; s < spec.n_states; ++s) {
        CHECK(p2.mu[s] == doctest::Approx(p.mu[s]).epsilon(1e-10));
        CHECK(p2.sigma_phi[s] == doctest::Approx(p.sigma_phi[s]).epsilon(1e-10));
        CHECK(p2.rho[s] == doctest::Approx(p.rho[s]).epsilon(1e-10));
      }
      for (int i = 0; i < n; ++i) CHECK(p2.lambda[i] == doctest::Approx(p.lambda[i]).epsilon(1e-10));
      for (std::size_t k = 0; k < p.phi.size(); ++k) {
        CHECK(p2.phi[k] == doctest::Approx(p.phi[k]).epsilon(1e-10));
      }
      for (std::size_t k = 0; k < p.a.size(); ++k) {
        CHECK(p2.a[k] == doctest::Approx(p.a[k]).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("mean-zero closure example") {
  const ParamLayout layout(ModelSpec{1, false, false, true}, 3);
  std::vector<double> u(static_cast<std::size_t>(layout.dim()), 0.0);
  u[static_cast<std::size_t>(layout.off_lambda())] = 1.0;
  u[static_cast<std::size_t>(layout.off_lambda()) + 1] = -1.0;
  const ModelParams p = layout.constrain(u);
  CHECK(p.lambda == std::vector<double>{1.0, -1.0, 0.0});
}

TEST_CASE("non-finite input rejected") {
  const ParamLayout layout(full_spec(2), 3);
  std::vector<double> u(static_cast<std::size_t>(layout.dim()), 0.0);
  u[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(layout.constrain(u), doctest::Contains("NonFinite"), Error);
}

TEST_CASE("log-Jacobian matches numerical determinant of the free-coordinate map") {
  std::mt19937_64 rng(31);
  for (const ModelSpec& spec : {full_spec(3), ModelSpec{2, true, false, true}}) {
    const ParamLayout layout(spec, 4);
    const auto u0 = testutil::random_unconstrained(layout, rng, 0.6);
    double lj = 0.0;
    layout.constrain(u0, &lj);

    const int d = layout.dim();
    Eigen::MatrixXd jac(d, d);
    const double h = 1e-6;
    std::vector<double> u = u0;
    for (int k = 0; k < d; ++k) {
      u[static_cast<std::size_t>(k)] = u0[static_cast<std::size_t>(k)] + h;
      const auto fp = free_view(layout, layout.constrain(u));
      u[static_cast<std::size_t>(k)] = u0[static_cast<std::size_t>(k)] - h;
      const auto fm = free_view(layout, layout.constrain(u));
      u[static_cast<std::size_t>(k)] = u0[static_cast<std::size_t>(k)];
      REQUIRE(static_cast<int>(fp.size()) == d);
      for (int r = 0; r < d; ++r) {
        jac(r, k) = (fp[static_cast<std::size_t>(r)] - fm[static_cast<std::size_t>(r)]) / (2.0 * h);
      }
    }
    const double log_det = std::log(std::abs(jac.partialPivLu().determinant()));
    CHECK(lj == doctest::Approx(log_det).epsilon(1e-6));
  }
}

TEST_CASE("pullback agrees with finite differences of a synthetic functional") {
  std::mt19937_64 rng(57);
  std::normal_distribution<double> norm(0.0, 1.0);
  for (const ModelSpec& spec :
       {full_spec(3), ModelSpec{2, true, false, true}, ModelSpec{1, false, true, true}}) {
    const int n = 5;
    const ParamLayout layout(spec, n);
    const int s_count = spec.n_states;

    // F(p) = sum over all blocks of w1*x + w2*x^2 with fixed random weights.
    struct Weights {
      std::vector<double> lin, quad;
    };
    auto make_w = [&](std::size_t count) {
      Weights w;
      w.lin.resize(count);
      w.quad.resize(count);
      for (auto& v : w.lin) v = norm(rng);
      for (auto& v : w.quad) v = norm(rng);
      return w;
    };
    const auto w_mu = make_w(static_cast<std::size_t>(s_count));
    const auto w_m = make_w(static_cast<std::size_t>(s_count));
    const auto w_lambda = make_w(static_cast<std::size_t>(n));
    const auto w_phi = make_w(static_cast<std::size_t>(s_count * n));
    const auto w_sp = make_w(static_cast<std::size_t>(s_count));
    const auto w_gamma = make_w(12);
    const auto w_rho = make_w(static_cast<std::size_t>(s_count));
    const auto w_a = make_w(static_cast<std::size_t>(s_count * s_count));
    const auto w_xi = make_w(static_cast<std::size_t>(s_count));
    const auto w_beta = make_w(static_cast<std::size_t>(s_count));
    const double w_mu1 = norm(rng), w_muS = norm(rng), w_sl = norm(rng);

    auto block = [](const Weights& w, std::span<const double> x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) {
        acc += w.lin[k] * x[k] + w.quad[k] * x[k] * x[k];
      }
      return acc;
    };
    auto functional = [&](const ModelParams& p) {
      double acc = w_mu1 * p.mu1 + w_muS * p.muS + w_sl * p.sigma_lambda * p.sigma_lambda;
      acc += block(w_mu, p.mu) + block(w_m, p.m) + block(w_lambda, p.lambda);
      acc += block(w_phi, p.phi) + block(w_sp, p.sigma_phi) + block(w_gamma, p.gamma);
      acc += block(w_rho, p.rho) + block(w_a, p.a) + block(w_xi, p.xi) + block(w_beta, p.beta);
      return acc;
    };
    auto analytic_grad = [&](const ModelParams& p) {
      ConstrainedGrad g(p);
      g.mu1 = w_mu1;
      g.muS = w_muS;
      g.sigma_lambda = 2.0 * w_sl * p.sigma_lambda;
      auto fill = [](const Weights& w, std::span<const double> x, std::span<double> out) {
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = w.lin[k] + 2.0 * w.quad[k] * x[k];
      };
      fill(w_mu, p.mu, g.mu);
      fill(w_m, p.m, g.m);
      fill(w_lambda, p.lambda, g.lambda);
      fill(w_phi, p.phi, g.phi);
      fill(w_sp, p.sigma_phi, g.sigma_phi);
      fill(w_gamma, p.gamma, g.gamma);
      fill(w_rho, p.rho, g.rho);
      fill(w_a, p.a, g.a);
      fill(w_xi, p.xi, g.xi);
      fill(w_beta, p.beta, g.beta);
      return g;
    };

    const auto u0 = testutil::random_unconstrained(layout, rng, 0.5);
    const ModelParams p0 = layout.constrain(u0);
    const ConstrainedGrad cg = analytic_grad(p0);
    std::vector<double> got(u0.size());
    layout.pullback(u0, cg, got);

    auto target = [&](const std::vector<double>& u) {
      double lj = 0.0;
      const ModelParams p = layout.constrain(u, &lj);
      return functional(p) + lj;
    };
    const auto want = testutil::fd_gradient(target, u0);
    CHECK(testutil::max_rel_err(got, want) < 1e-6);
  }
}

TEST_CASE("log_prior gradient matches finite differences") {
  std::mt19937_64 rng(91);
  for (const ModelSpec& spec :
       {full_spec(3), ModelSpec{4, true, false, true}, ModelSpec{1, false, true, true}}) {
    const ParamLayout layout(spec, 5);
    const auto u0 = testutil::random_unconstrained(layout, rng, 0.5);
    const ModelParams p0 = layout.constrain(u0);

    ConstrainedGrad cg(p0);
    accumulate_log_prior_grad(p0, layout, cg);
    std::vector<double> got(u0.size());
    layout.pullback(u0, cg, got);

    auto target = [&](const std::vector<double>& u) {
      double lj = 0.0;
      const ModelParams p = layout.constrain(u, &lj);
      return log_prior(p, layout) + lj;
    };
    const auto want = testutil::fd_gradient(target, u0);
    CHECK(testutil::max_rel_err(got, want) < 1e-6);
  }
}

TEST_CASE("log_prior pieces behave as documented") {
  SUBCASE("mu1 term is the stated normal density (S=1 isolates it)") {
    const ParamLayout layout(ModelSpec{1, false, false, true}, 3);
    std::vector<double> u(static_cast<std::size_t>(layout.dim()), 0.0);
    u[0] = -4.5;
    ModelParams p = layout.constrain(u);
    const double base = log_prior(p, layout);
    u[0] = -4.5 + 0.25;
    ModelParams p_shift = layout.constrain(u);
    // One-sd move costs exactly 1/2 in log density.
    CHECK(log_prior(p_shift, layout) - base == doctest::Approx(-0.5).epsilon(1e-12));
  }
  SUBCASE("truncation normalizer reacts to mu1") {
    // With the normalizer, moving mu1 toward muS's prior mean raises the
    // penalty term log(1 - Phi) and so changes log_prior by more than the
    // mu1-normal difference alone.
    const ParamLayout layout(full_spec(2), 3);
    std::vector<double> u(static_cast<std::size_t>(layout.dim()), 0.0);
    u[0] = -4.5;
    const ModelParams p_low = layout.constrain(u);
    u[0] = -1.75;
    const ModelParams p_high = layout.constrain(u);
    const double got = log_prior(p_high, layout) - log_prior(p_low, layout);
    const double mu1_part = normal_lpdf(-1.75, -4.5, 0.25) - normal_lpdf(-4.5, -4.5, 0.25);
    const double mus_part = normal_lpdf(p_high.muS, -1.75, 0.5) - normal_lpdf(p_low.muS, -1.75, 0.5);
    const double trunc_part = -normal_lccdf((-1.75 + 1.75) / 0.5) + normal_lccdf((-4.5 + 1.75) / 0.5);
    CHECK(got == doctest::Approx(mu1_part + mus_part + trunc_part).epsilon(1e-10));
  }
  SUBCASE("uniform-increment Dirichlet(5) term appears verbatim") {
    const ParamLayout layout(full_spec(5), 3);
    std::mt19937_64 rng(5);
    const auto u = testutil::random_unconstrained(layout, rng, 0.3);
    const ModelParams p = layout.constrain(u);
    ModelParams q = p;
    // Move m to the uniform increments, keeping everything else fixed.
    const int s_count = 5;
    for (int k = 1; k < s_count; ++k) q.m[k] = 1.0 / (s_count - 1);
    q.mu = state_means(q.mu1, q.muS, q.m);
    std::vector<double> alpha(4, 5.0);
    const double want =
        dirichlet_lpdf(std::span<const double>(q.m).subspan(1), alpha) -
        dirichlet_lpdf(std::span<const double>(p.m).subspan(1), alpha);
    CHECK(log_prior(q, layout) - log_prior(p, layout) == doctest::Approx(want).epsilon(1e-10));
  }
  SUBCASE("concentrated transition rows get finite prior mass") {
    const ParamLayout layout(full_spec(5), 3);
    std::mt19937_64 rng(6);
    auto u = testutil::random_unconstrained(layout, rng, 0.3);
    ModelParams p = layout.constrain(u);
    for (int s2 = 1; s2 < 5; ++s2) p.a[static_cast<std::size_t>(s2)] = 0.0075;
    p.a[0] = 1.0 - 3 * 0.0075 - 0.0075;
    CHECK(std::isfinite(log_prior(p, layout)));
  }
  SUBCASE("finite on random interior points") {
    const ParamLayout layout(full_spec(4), 6);
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 10; ++rep) {
      const auto u = testutil::random_unconstrained(layout, rng, 1.0);
      CHECK(std::isfinite(log_prior(layout.constrain(u), layout)));
    }
  }
}

TEST_CASE("validate rejects tampered params") {
  const ParamLayout layout(full_spec(3), 4);
  std::mt19937_64 rng(17);
  const auto u = testutil::random_unconstrained(layout, rng, 0.4);
  const ModelParams good = layout.constrain(u);
  CHECK_NOTHROW(layout.validate(good));

  SUBCASE("broken lambda sum") {
    ModelParams p = good;
    p.lambda[0] += 1e-6;
    CHECK_THROWS_AS(layout.validate(p), Error);
  }
  SUBCASE("negative scale") {
    ModelParams p = good;
    p.sigma_lambda = -1.0;
    CHECK_THROWS_AS(layout.validate(p), Error);
  }
  SUBCASE("decreasing means") {
    ModelParams p = good;
    std::swap(p.mu[0], p.mu[2]);
    CHECK_THROWS_AS(layout.validate(p), Error);
  }
  SUBCASE("row simplex broken") {
    ModelParams p = good;
    p.a[0] += 0.01;
    CHECK_THROWS_AS(layout.validate(p), Error);
  }
}

TEST_CASE("flatten/unflatten round trip and column names") {
  for (const ModelSpec& spec :
       {full_spec(3), ModelSpec{2, true, false, true}, ModelSpec{3, false, true, false}}) {
    const ParamLayout layout(spec, 4);
    std::mt19937_64 rng(23);
    const auto u = testutil::random_unconstrained(layout, rng, 0.5);
    const ModelParams p = layout.constrain(u);
    const auto names = layout.column_names();
    const auto row = layout.flatten(p);
    REQUIRE(names.size() == row.size());
    const ModelParams q = layout.unflatten(row);
    CHECK_NOTHROW(layout.validate(q));
    const auto u2 = layout.unconstrain(q);
    for (std::size_t k = 0; k < u.size(); ++k) {
      CHECK(u2[k] == doctest::Approx(u[k]).epsilon(1e-9));
    }
  }
  const ParamLayout shared(ModelSpec{3, true, true, true}, 4);
  const auto names = shared.column_names();
  int sigma_phi_cols = 0;
  for (const auto& nm : names) {
    if (nm.rfind("sigma_phi", 0) == 0) ++sigma_phi_cols;
  }
  CHECK(sigma_phi_cols == 1);
}

TEST_SUITE_END();
