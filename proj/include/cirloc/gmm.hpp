#pragma once

#include "cirloc/model.hpp"
#include "cirloc/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cirloc {

/// One weighted Gaussian with its Cholesky factor cached.
struct GaussianComponent {
  double weight = 0.0;
  Vector mean;
  Matrix covariance;
  Matrix chol;      // lower triangular, chol * chol^T == covariance
  double log_det = 0.0;
};

struct FitConfig {
  int max_components = 2;
  int max_iter = 10'000;
  double tol = 1e-3;
  double weight_concentration_prior = 1e-3;
  double reg_covar = 1e-6;
  int n_init = 1;
  std::uint64_t seed = 0;

  /// Defaults for per-bin (univariate) and joint (multi-bin) fits.
  static FitConfig univariate() { return {}; }
  static FitConfig multivariate() {
    FitConfig c;
    c.max_components = 5;
    return c;
  }
};

/// Fitted Gaussian mixture used as a plug-in density.
///
/// Immutable after construction; safe to share across threads.
class GmmModel {
 public:
  GmmModel() = default;

  /// Builds a model from weights/means/covariances. Weights are
  /// renormalized; throws ArgumentError when a covariance is not SPD or
  /// dimensions disagree.
  GmmModel(std::span<const double> weights, std::span<const Vector> means,
           std::span<const Matrix> covariances);

  /// Rebuilds a persisted model together with its fit record.
  static GmmModel restore(std::span<const double> weights,
                          std::span<const Vector> means,
                          std::span<const Matrix> covariances, bool converged,
                          int n_iter, std::vector<double> elbo_trace = {});

  int dim() const { return dim_; }
  const std::vector<GaussianComponent>& components() const {
    return components_;
  }
  std::size_t size() const { return components_.size(); }

  const std::vector<double>& elbo_trace() const { return elbo_trace_; }
  bool converged() const { return converged_; }
  int n_iter() const { return n_iter_; }

  /// log sum_k w_k N(x; mu_k, Sigma_k).
  double log_pdf(const Eigen::Ref<const Vector>& x) const;
  /// Univariate fast path; requires dim() == 1.
  double log_pdf(double x) const;

  std::vector<double> log_pdf_batch(std::span<const Vector> xs) const;
  Vector responsibilities(const Eigen::Ref<const Vector>& x) const;

  /// Draws one sample from the mixture.
  Vector sample(Philox& rng) const;

 private:
  friend GmmModel fit_vb(std::span<const Vector>, const FitConfig&);

  void check_dim(Eigen::Index n) const;
  /// log w_k + log N(x; k) for every component.
  void component_log_terms(const Eigen::Ref<const Vector>& x,
                           Eigen::Ref<Vector> out) const;

  int dim_ = 0;
  std::vector<GaussianComponent> components_;
  // Evaluation caches: inverse Cholesky factors and the constant part of
  // each weighted log-density.
  std::vector<Matrix> chol_inv_;
  std::vector<double> log_const_;
  // All inverse factors stacked for a single product, applied around the
  // mixture mean.
  Vector center_;
  Matrix stacked_;
  Vector offsets_;
  std::vector<double> elbo_trace_;
  bool converged_ = false;
  int n_iter_ = 0;
};

/// Variational Bayesian fit of a full-covariance Gaussian mixture with a
/// truncated stick-breaking (Dirichlet-process) weight prior and a
/// Gaussian-Wishart prior on each component.
///
/// Priors: mean = sample mean with precision scale 1, Wishart degrees of
/// freedom = dim, inverse scale = diag(sample variance) + reg_covar*I.
/// Each sample enters the sufficient statistics with an isotropic
/// reg_covar spread, which keeps every covariance update SPD while leaving
/// the coordinate-ascent updates exact, so the recorded lower bound is
/// monotone. Samples are put in lexicographic order before fitting, making
/// the result independent of input order. Iteration stops when the lower
/// bound moves by less than tol. Components with final weight below 1e-5
/// are dropped.
GmmModel fit_vb(std::span<const Vector> samples, const FitConfig& cfg);

/// Component weights below this are pruned after fitting.
inline constexpr double kPruneWeight = 1e-5;

}  // namespace cirloc
