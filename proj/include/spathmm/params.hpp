#pragma once

#include <span>
#include <string>
#include <vector>

namespace spathmm {

/// Structural switches of the observation model. The full model uses
/// state-dependent spatial scales and the missingness submodel; the reduced
/// variants exist for model comparison.
struct ModelSpec {
  int n_states = 5;
  bool shared_sigma_phi = false;
  bool model_missingness = true;
  bool include_spatial = true;
};

/// All constrained model parameters. Invariants:
///   - mu is nondecreasing with mu.front() == mu1 and mu.back() == muS;
///   - lambda, gamma, and each row of phi sum to zero;
///   - rho and each row of A are simplexes;
///   - all scale parameters are strictly positive.
struct ModelParams {
  int n_states = 0;
  int n_sites = 0;

  double mu1 = 0.0;
  double muS = 0.0;
  std::vector<double> m;         // length S, m[0] == 0, sums to 1
  std::vector<double> mu;        // length S, derived state means
  std::vector<double> lambda;    // length N, mean zero
  double sigma_lambda = 1.0;
  std::vector<double> phi;       // S x N row-major, each row mean zero
  std::vector<double> sigma_phi; // length S (equal entries when shared)
  std::vector<double> gamma;     // length 12, mean zero
  std::vector<double> rho;       // length S simplex
  std::vector<double> a;         // S x S row-major, rows are simplexes
  std::vector<double> xi;        // length S (zeros when missingness is off)
  std::vector<double> beta;      // length S

  double phi_at(int s, int i) const {
    return phi[static_cast<std::size_t>(s) * static_cast<std::size_t>(n_sites) +
               static_cast<std::size_t>(i)];
  }
  double a_at(int s, int s2) const {
    return a[static_cast<std::size_t>(s) * static_cast<std::size_t>(n_states) +
             static_cast<std::size_t>(s2)];
  }
};

/// mu_s = mu1 + (muS - mu1) * cumsum(m)_s with exact endpoints.
std::vector<double> state_means(double mu1, double muS, std::span<const double> m);

/// Gradient of the log target with respect to the constrained parameters.
/// Likelihood and prior code accumulate into this; the layout then pulls the
/// result back to unconstrained coordinates.
struct ConstrainedGrad {
  double mu1 = 0.0;
  double muS = 0.0;
  std::vector<double> mu, m, lambda, phi, sigma_phi, gamma, rho, a, xi, beta;
  double sigma_lambda = 0.0;

  explicit ConstrainedGrad(const ModelParams& p);
};

/// Maps between the flat unconstrained sampler space and ModelParams.
///
/// Segment order: mu1, log-gap to muS, increment-simplex sticks, lambda free
/// coordinates, log sigma_lambda, phi free coordinates per state, log
/// sigma_phi, gamma free coordinates, rho sticks, transition sticks, xi, beta.
/// Simplexes use stick-breaking, positives the exponential map, and mean-zero
/// blocks k-1 free coordinates with a negated-sum closure.
class ParamLayout {
 public:
  ParamLayout(const ModelSpec& spec, int n_sites);

  const ModelSpec& spec() const { return spec_; }
  int n_sites() const { return n_sites_; }
  int dim() const { return dim_; }

  /// Unconstrained -> constrained; accumulates the log-Jacobian of the map
  /// (constant terms from linear blocks are dropped).
  ModelParams constrain(std::span<const double> u, double* log_jacobian = nullptr) const;

  /// Constrained -> unconstrained; validates the invariants first.
  std::vector<double> unconstrain(const ModelParams& p) const;

  /// Pulls a constrained-space gradient back to unconstrained coordinates and
  /// adds the gradient of the log-Jacobian. `u` must be the point at which
  /// `grad` was accumulated.
  void pullback(std::span<const double> u, const ConstrainedGrad& grad,
                std::span<double> out) const;

  /// Throws InvariantViolation when any ModelParams invariant fails.
  void validate(const ModelParams& p, double tol = 1e-12) const;

  /// Column labels of the wide draw CSV, in serialization order.
  std::vector<std::string> column_names() const;
  /// Flattens constrained params in serialization order (same as column_names).
  std::vector<double> flatten(const ModelParams& p) const;
  /// Inverse of flatten.
  ModelParams unflatten(std::span<const double> row) const;

  // Segment offsets into the unconstrained vector (sizes implied by spec).
  int off_mu1() const { return off_mu1_; }
  int off_gap() const { return off_gap_; }
  int off_m() const { return off_m_; }
  int n_m_free() const { return n_m_free_; }
  int off_lambda() const { return off_lambda_; }
  int off_log_sigma_lambda() const { return off_log_sigma_lambda_; }
  int off_phi() const { return off_phi_; }
  int off_log_sigma_phi() const { return off_log_sigma_phi_; }
  int n_sigma_phi_free() const { return n_sigma_phi_free_; }
  int off_gamma() const { return off_gamma_; }
  int off_rho() const { return off_rho_; }
  int off_a() const { return off_a_; }
  int off_xi() const { return off_xi_; }
  int off_beta() const { return off_beta_; }

 private:
  ModelSpec spec_;
  int n_sites_ = 0;
  int dim_ = 0;
  int off_mu1_ = 0, off_gap_ = 0, off_m_ = 0, n_m_free_ = 0;
  int off_lambda_ = 0, off_log_sigma_lambda_ = 0, off_phi_ = 0;
  int off_log_sigma_phi_ = 0, n_sigma_phi_free_ = 0;
  int off_gamma_ = 0, off_rho_ = 0, off_a_ = 0, off_xi_ = 0, off_beta_ = 0;
};

/// Complete prior log-density of the constrained parameters, excluding the
/// spatial ICAR terms (those are added once in the posterior, not here).
/// Mean-zero normal blocks are evaluated over all k coordinates including the
/// closure coordinate.
double log_prior(const ModelParams& p, const ParamLayout& layout);

/// Adds d log_prior / d(constrained params) into `grad`.
void accumulate_log_prior_grad(const ModelParams& p, const ParamLayout& layout,
                               ConstrainedGrad& grad);

// Stick-breaking simplex transform (shared with the reduced change-point
// model). `u` has x.size()-1 entries; returns the log-Jacobian.
double simplex_constrain(std::span<const double> u, std::span<double> x);
void simplex_unconstrain(std::span<const double> x, std::span<double> u);
/// Adjoint of simplex_constrain with the log-Jacobian gradient included:
/// given dL/dx, adds dL/du + d logjac/du into `u_grad`.
void simplex_pullback(std::span<const double> u, std::span<const double> x_grad,
                      std::span<double> u_grad);

}  // namespace spathmm
