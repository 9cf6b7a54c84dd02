#include "cirloc/gmm.hpp"

#include "cirloc/errors.hpp"

#include <Eigen/Cholesky>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace cirloc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)
constexpr double kEps = std::numeric_limits<double>::epsilon();

double digamma(double x) { return boost::math::digamma(x); }
double lgamma(double x) { return boost::math::lgamma(x); }

/// Cholesky factor, adding reg*I with doubling until it succeeds.
Matrix robust_cholesky(Matrix cov, double reg) {
  const auto d = cov.rows();
  double jitter = reg;
  for (int attempt = 0; attempt < 60; ++attempt) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    cov.diagonal().array() += jitter;
    jitter *= 2.0;
  }
  throw TrainingError("covariance could not be regularized to SPD (dim " +
                      std::to_string(d) + ")");
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

// ---------------------------------------------------------------------------
// GmmModel

GmmModel::GmmModel(std::span<const double> weights,
                   std::span<const Vector> means,
                   std::span<const Matrix> covariances) {
  if (weights.empty() || weights.size() != means.size() ||
      weights.size() != covariances.size()) {
    throw ArgumentError("GmmModel: weights/means/covariances size mismatch");
  }
  dim_ = static_cast<int>(means.front().size());
  if (dim_ <= 0) throw ArgumentError("GmmModel: zero dimension");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ArgumentError("GmmModel: weights must be finite and >= 0");
    }
    total += w;
  }
  if (!(total > 0.0)) throw ArgumentError("GmmModel: weights sum to zero");
  // Leave already-normalized weights bit-identical.
  if (std::abs(total - 1.0) <= 1e-13) total = 1.0;

  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (means[k].size() != dim_ || covariances[k].rows() != dim_ ||
        covariances[k].cols() != dim_) {
      throw ArgumentError("GmmModel: component dimension mismatch");
    }
    GaussianComponent c;
    c.weight = weights[k] / total;
    c.mean = means[k];
    c.covariance = 0.5 * (covariances[k] + covariances[k].transpose());
    Eigen::LLT<Matrix> llt(c.covariance);
    if (llt.info() != Eigen::Success) {
      throw ArgumentError("GmmModel: covariance is not positive definite");
    }
    c.chol = llt.matrixL();
    c.log_det = 2.0 * c.chol.diagonal().array().log().sum();
    components_.push_back(std::move(c));
  }

  const auto kc = static_cast<Eigen::Index>(components_.size());
  center_ = Vector::Zero(dim_);
  for (const auto& c : components_) center_ += c.weight * c.mean;
  stacked_.resize(kc * dim_, dim_);
  offsets_.resize(kc * dim_);
  for (Eigen::Index k = 0; k < kc; ++k) {
    const auto& c = components_[static_cast<std::size_t>(k)];
    const Matrix ident = Matrix::Identity(dim_, dim_);
    chol_inv_.push_back(c.chol.triangularView<Eigen::Lower>().solve(ident));
    log_const_.push_back(std::log(c.weight) -
                         0.5 * (dim_ * kLog2Pi + c.log_det));
    stacked_.middleRows(k * dim_, dim_) = chol_inv_.back();
    offsets_.segment(k * dim_, dim_) =
        chol_inv_.back().triangularView<Eigen::Lower>() * (c.mean - center_);
  }
}

GmmModel GmmModel::restore(std::span<const double> weights,
                           std::span<const Vector> means,
                           std::span<const Matrix> covariances, bool converged,
                           int n_iter, std::vector<double> elbo_trace) {
  GmmModel m(weights, means, covariances);
  m.converged_ = converged;
  m.n_iter_ = n_iter;
  m.elbo_trace_ = std::move(elbo_trace);
  return m;
}

void GmmModel::check_dim(Eigen::Index n) const {
  if (components_.empty()) throw ArgumentError("GmmModel: empty model");
  if (n != dim_) {
    throw ArgumentError("GmmModel: expected dimension " +
                        std::to_string(dim_) + ", got " + std::to_string(n));
  }
}

void GmmModel::component_log_terms(const Eigen::Ref<const Vector>& x,
                                   Eigen::Ref<Vector> out) const {
  thread_local Vector shifted;
  thread_local Vector y;
  shifted = x - center_;
  y.noalias() = stacked_ * shifted;
  y -= offsets_;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out[i] = log_const_[k] - 0.5 * y.segment(i * dim_, dim_).squaredNorm();
  }
}

double GmmModel::log_pdf(const Eigen::Ref<const Vector>& x) const {
  check_dim(x.size());
  thread_local Vector terms;
  terms.resize(static_cast<Eigen::Index>(components_.size()));
  component_log_terms(x, terms);
  return log_sum_exp(terms);
}

double GmmModel::log_pdf(double x) const {
  check_dim(1);
  double best = -std::numeric_limits<double>::infinity();
  // At most a handful of components in 1-D.
  double terms[16];
  const std::size_t k_count = components_.size();
  double* t = k_count <= 16 ? terms : nullptr;
  std::vector<double> heap;
  if (t == nullptr) {
    heap.resize(k_count);
    t = heap.data();
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    const double z = (x - components_[k].mean[0]) * chol_inv_[k](0, 0);
    t[k] = log_const_[k] - 0.5 * z * z;
    best = std::max(best, t[k]);
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) acc += std::exp(t[k] - best);
  return best + std::log(acc);
}

std::vector<double> GmmModel::log_pdf_batch(std::span<const Vector> xs) const {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(log_pdf(x));
  return out;
}

Vector GmmModel::responsibilities(const Eigen::Ref<const Vector>& x) const {
  check_dim(x.size());
  Vector terms(static_cast<Eigen::Index>(components_.size()));
  component_log_terms(x, terms);
  const double norm = log_sum_exp(terms);
  return (terms.array() - norm).exp().matrix();
}

Vector GmmModel::sample(Philox& rng) const {
  if (components_.empty()) throw ArgumentError("GmmModel: empty model");
  double u = rng.uniform();
  std::size_t k = 0;
  for (; k + 1 < components_.size(); ++k) {
    if (u < components_[k].weight) break;
    u -= components_[k].weight;
  }
  Vector z(dim_);
  for (int i = 0; i < dim_; ++i) z[i] = rng.normal();
  return components_[k].mean +
         components_[k].chol.triangularView<Eigen::Lower>() * z;
}

// ---------------------------------------------------------------------------
// Variational fit

namespace {

/// Row-major sample matrix in canonical (lexicographic) order.
Matrix canonical_samples(std::span<const Vector> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     const auto& x = samples[a];
                     const auto& y = samples[b];
                     return std::lexicographical_compare(
                         x.data(), x.data() + x.size(), y.data(),
                         y.data() + y.size());
                   });
  const auto d = samples.front().size();
  Matrix x(static_cast<Eigen::Index>(samples.size()), d);
  for (std::size_t i = 0; i < order.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = samples[order[i]].transpose();
  }
  return x;
}

/// Hard k-means++ / Lloyd assignment used to seed the responsibilities.
Matrix kmeans_responsibilities(const Matrix& x, int k, Philox rng) {
  const auto n = x.rows();
  Matrix centers(k, x.cols());
  centers.row(0) = x.row(static_cast<Eigen::Index>(
      rng.below(static_cast<std::uint64_t>(n))));
  Vector d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        if (u < d2[pick]) break;
        u -= d2[pick];
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = x.row(pick);
    d2 = d2.cwiseMin(
        (x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (x.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double dc = (x.row(i) - centers.row(c)).squaredNorm();
        if (dc < best_d) {
          best_d = dc;
          best = c;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = assign[static_cast<std::size_t>(i)];
      sums.row(a) += x.row(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) =
            sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
  }

  Matrix resp = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    resp(i, assign[static_cast<std::size_t>(i)]) = 1.0;
  }
  return resp;
}

struct Prior {
  Vector mean;
  double beta = 1.0;
  double nu = 0.0;
  Matrix scale_inv;  // W0^{-1}
  double log_det_scale = 0.0;  // ln|W0|
  double alpha = 0.0;
};

/// ln B(W, nu) of the Wishart normalizer, given ln|W|.
double log_wishart_b(double log_det_w, double nu, int d) {
  double s = -0.5 * nu * log_det_w - 0.5 * nu * d * std::numbers::ln2 -
             0.25 * d * (d - 1) * std::log(std::numbers::pi);
  for (int i = 0; i < d; ++i) s -= lgamma(0.5 * (nu - i));
  return s;
}

/// Variational posterior over stick fractions and component parameters.
struct Posterior {
  Vector nk;        // effective counts used in updates
  Vector nk_raw;    // plain responsibility sums
  Matrix xbar;      // K x D
  std::vector<Matrix> scatter;  // S_k, including reg_covar * I
  Vector beta, nu;
  Matrix mean;      // K x D
  std::vector<Matrix> scale_inv_chol;  // chol(W_k^{-1})
  std::vector<Matrix> chol_inv;        // inverse of the above, L^{-1}
  Vector log_det_w;                    // ln|W_k|
  Vector stick_a, stick_b;
  // Expectations derived from the above.
  Vector e_log_pi;
  Vector e_log_lambda;
};

Posterior m_step(const Matrix& x, const Matrix& resp, const Prior& prior,
                 double reg) {
  const auto k = resp.cols();
  const auto d = x.cols();
  Posterior p;
  p.nk_raw = resp.colwise().sum().transpose();
  p.nk = p.nk_raw.array() + 10.0 * kEps;
  p.xbar = (resp.transpose() * x).array().colwise() / p.nk.array();
  p.beta = prior.beta + p.nk.array();
  p.nu = prior.nu + p.nk.array();
  p.mean.resize(k, d);
  p.log_det_w.resize(k);
  p.scatter.resize(static_cast<std::size_t>(k));
  p.scale_inv_chol.resize(static_cast<std::size_t>(k));
  p.chol_inv.resize(static_cast<std::size_t>(k));
  const Matrix ident = Matrix::Identity(d, d);

  for (Eigen::Index c = 0; c < k; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const Matrix weighted = (x.rowwise() - p.xbar.row(c)).array().colwise() *
                            resp.col(c).array().sqrt();
    Matrix s = Matrix::Zero(d, d);
    s.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose());
    s = s.selfadjointView<Eigen::Lower>();
    s /= p.nk[c];
    s.diagonal().array() += reg;
    p.scatter[ci] = s;

    const Vector xb = p.xbar.row(c).transpose();
    p.mean.row(c) =
        ((prior.beta * prior.mean + p.nk[c] * xb) / p.beta[c]).transpose();
    const Vector dm = xb - prior.mean;
    Matrix winv = prior.scale_inv + p.nk[c] * s +
                  (prior.beta * p.nk[c] / (prior.beta + p.nk[c])) *
                      (dm * dm.transpose());
    winv = 0.5 * (winv + winv.transpose());
    p.scale_inv_chol[ci] = robust_cholesky(winv, reg);
    p.chol_inv[ci] =
        p.scale_inv_chol[ci].triangularView<Eigen::Lower>().solve(ident);
    p.log_det_w[c] =
        -2.0 * p.scale_inv_chol[ci].diagonal().array().log().sum();
  }

  // Stick-breaking: v_k ~ Beta(1 + N_k, alpha + sum_{j>k} N_j).
  p.stick_a = 1.0 + p.nk.array();
  p.stick_b.resize(k);
  double tail = 0.0;
  for (Eigen::Index c = k - 1; c >= 0; --c) {
    p.stick_b[c] = prior.alpha + tail;
    tail += p.nk[c];
  }

  p.e_log_pi.resize(k);
  double prefix = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const double dsum = digamma(p.stick_a[c] + p.stick_b[c]);
    p.e_log_pi[c] = digamma(p.stick_a[c]) - dsum + prefix;
    prefix += digamma(p.stick_b[c]) - dsum;
  }

  p.e_log_lambda.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    double s = static_cast<double>(d) * std::numbers::ln2 + p.log_det_w[c];
    for (Eigen::Index i = 0; i < d; ++i) s += digamma(0.5 * (p.nu[c] - i));
    p.e_log_lambda[c] = s;
  }
  return p;
}

/// Returns log responsibilities (N x K). A component listed in `excluded`
/// receives zero responsibility.
Matrix e_step(const Matrix& x, const Posterior& p, double reg,
              Eigen::Index excluded = -1) {
  const auto n = x.rows();
  const auto k = p.mean.rows();
  const auto d = static_cast<double>(x.cols());
  Matrix log_rho(n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const Matrix centered = x.rowwise() - p.mean.row(c);
    // rows of centered * L^{-T} are L^{-1} (x - m)
    const Matrix y =
        centered * p.chol_inv[ci].transpose().triangularView<Eigen::Upper>();
    const double trace_w = p.chol_inv[ci].squaredNorm();
    const double base = p.e_log_pi[c] + 0.5 * p.e_log_lambda[c] -
                        0.5 * d * kLog2Pi - 0.5 * d / p.beta[c] -
                        0.5 * reg * p.nu[c] * trace_w;
    log_rho.col(c) =
        (base - 0.5 * p.nu[c] * y.rowwise().squaredNorm().array()).matrix();
  }
  if (excluded >= 0) {
    log_rho.col(excluded).setConstant(-std::numeric_limits<double>::infinity());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = log_sum_exp(log_rho.row(i).transpose());
    log_rho.row(i).array() -= norm;
  }
  return log_rho;
}

double lower_bound(const Matrix& log_resp, const Posterior& p,
                   const Prior& prior) {
  const auto k = p.mean.rows();
  const int d = static_cast<int>(p.mean.cols());
  const double dd = d;
  const double log_b0 = log_wishart_b(prior.log_det_scale, prior.nu, d);

  double e_log_px = 0.0, e_log_pz = 0.0, e_log_pv = 0.0, e_log_pml = 0.0;
  double e_log_qv = 0.0, e_log_qml = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const Matrix w = p.chol_inv[ci].transpose() * p.chol_inv[ci];
    const Vector dx = p.xbar.row(c).transpose() - p.mean.row(c).transpose();
    const Vector dm = p.mean.row(c).transpose() - prior.mean;
    const double nu = p.nu[c];
    const double ell = p.e_log_lambda[c];

    e_log_px += 0.5 * p.nk_raw[c] *
                (ell - dd / p.beta[c] -
                 nu * (p.scatter[ci].cwiseProduct(w)).sum() -
                 nu * dx.dot(w * dx) - dd * kLog2Pi);
    e_log_pz += p.nk_raw[c] * p.e_log_pi[c];

    const double a = p.stick_a[c], b = p.stick_b[c];
    const double dab = digamma(a + b);
    const double e_log_v = digamma(a) - dab;
    const double e_log_1mv = digamma(b) - dab;
    e_log_pv += lgamma(1.0 + prior.alpha) - lgamma(prior.alpha) +
                (prior.alpha - 1.0) * e_log_1mv;
    e_log_qv += lgamma(a + b) - lgamma(a) - lgamma(b) +
                (a - 1.0) * e_log_v + (b - 1.0) * e_log_1mv;

    e_log_pml += 0.5 * (dd * std::log(prior.beta / (2.0 * std::numbers::pi)) +
                        ell - dd * prior.beta / p.beta[c] -
                        prior.beta * nu * dm.dot(w * dm)) +
                 log_b0 + 0.5 * (prior.nu - dd - 1.0) * ell -
                 0.5 * nu * (prior.scale_inv.cwiseProduct(w)).sum();

    const double entropy_lambda = -log_wishart_b(p.log_det_w[c], nu, d) -
                                  0.5 * (nu - dd - 1.0) * ell + 0.5 * nu * dd;
    e_log_qml += 0.5 * ell +
                 0.5 * dd * std::log(p.beta[c] / (2.0 * std::numbers::pi)) -
                 0.5 * dd - entropy_lambda;
  }
  const double e_log_qz =
      (log_resp.array() > -std::numeric_limits<double>::infinity())
          .select(log_resp.array().exp() * log_resp.array(), 0.0)
          .sum();
  return e_log_px + e_log_pz + e_log_pv + e_log_pml - e_log_qz - e_log_qv -
         e_log_qml;
}

GmmModel point_estimate(const Posterior& p, double reg) {
  const auto k = p.mean.rows();
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  Vector expected(k);
  double remain = 1.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const double ab = p.stick_a[c] + p.stick_b[c];
    expected[c] = remain * p.stick_a[c] / ab;
    remain *= p.stick_b[c] / ab;
  }
  expected /= expected.sum();
  for (Eigen::Index c = 0; c < k; ++c) {
    if (expected[c] < kPruneWeight) continue;
    const auto ci = static_cast<std::size_t>(c);
    weights.push_back(expected[c]);
    means.push_back(p.mean.row(c).transpose());
    const Matrix& l = p.scale_inv_chol[ci];
    Matrix cov = (l * l.transpose()) / p.nu[c];
    cov = 0.5 * (cov + cov.transpose());
    const Matrix chol = robust_cholesky(cov, reg);
    covs.push_back(chol * chol.transpose());
  }
  if (weights.empty()) {
    // Cannot happen for a sane posterior, but keep the heaviest component.
    Eigen::Index best = 0;
    expected.maxCoeff(&best);
    const auto bi = static_cast<std::size_t>(best);
    weights.push_back(1.0);
    means.push_back(p.mean.row(best).transpose());
    const Matrix& l = p.scale_inv_chol[bi];
    covs.push_back((l * l.transpose()) / p.nu[best]);
  }
  return GmmModel(weights, means, covs);
}

struct FitRun {
  Posterior posterior;
  std::vector<double> trace;
  bool converged = false;
  int n_iter = 0;
};

/// Coordinate ascent from the given responsibilities until the bound
/// stalls. `budget` counts the iterations still allowed.
FitRun iterate(const Matrix& x, const Prior& prior, const FitConfig& cfg,
               const Matrix& resp, int& budget) {
  FitRun run;
  run.posterior = m_step(x, resp, prior, cfg.reg_covar);
  double previous = -std::numeric_limits<double>::infinity();
  while (budget > 0) {
    --budget;
    const Matrix log_resp = e_step(x, run.posterior, cfg.reg_covar);
    run.posterior = m_step(x, log_resp.array().exp().matrix(), prior,
                           cfg.reg_covar);
    const double bound = lower_bound(log_resp, run.posterior, prior);
    run.trace.push_back(bound);
    ++run.n_iter;
    if (std::abs(bound - previous) < cfg.tol) {
      run.converged = true;
      break;
    }
    previous = bound;
  }
  return run;
}

/// Fit from a k-means start, followed by greedy delete moves: each
/// occupied component is in turn emptied and the fit restarted; the
/// restart is kept when it ends at a higher bound. Coordinate ascent
/// alone tends to stall with a unimodal cluster split in two, which the
/// stick-breaking prior only resolves over very many iterations.
FitRun run_once(const Matrix& x, const Prior& prior, const FitConfig& cfg,
                Philox rng) {
  int budget = cfg.max_iter;
  FitRun best = iterate(
      x, prior, cfg, kmeans_responsibilities(x, cfg.max_components, rng),
      budget);
  bool improved = true;
  while (improved && budget > 0) {
    improved = false;
    const Vector& nk = best.posterior.nk_raw;
    std::vector<Eigen::Index> order;
    for (Eigen::Index c = 0; c < nk.size(); ++c) {
      if (nk[c] >= 1.0) order.push_back(c);
    }
    if (order.size() < 2) break;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return nk[a] < nk[b]; });
    for (const Eigen::Index victim : order) {
      const Matrix resp =
          e_step(x, best.posterior, cfg.reg_covar, victim).array().exp().matrix();
      FitRun trial = iterate(x, prior, cfg, resp, budget);
      if (!trial.trace.empty() &&
          trial.trace.back() > best.trace.back() + cfg.tol) {
        trial.n_iter += best.n_iter;
        best = std::move(trial);
        improved = true;
        break;
      }
      if (budget <= 0) break;
    }
  }
  return best;
}

}  // namespace

GmmModel fit_vb(std::span<const Vector> samples, const FitConfig& cfg) {
  if (cfg.max_components < 1 || cfg.max_iter < 1 || cfg.n_init < 1 ||
      !(cfg.tol > 0.0) || !(cfg.weight_concentration_prior > 0.0) ||
      !(cfg.reg_covar > 0.0) || !std::isfinite(cfg.tol) ||
      !std::isfinite(cfg.weight_concentration_prior) ||
      !std::isfinite(cfg.reg_covar)) {
    throw ArgumentError("fit_vb: invalid FitConfig");
  }
  if (samples.size() < static_cast<std::size_t>(cfg.max_components)) {
    throw ArgumentError("fit_vb: " + std::to_string(samples.size()) +
                        " samples for " + std::to_string(cfg.max_components) +
                        " components");
  }
  const auto d = samples.front().size();
  if (d <= 0) throw ArgumentError("fit_vb: zero-dimensional samples");
  for (const auto& s : samples) {
    if (s.size() != d) throw ArgumentError("fit_vb: inconsistent dimensions");
    if (!s.allFinite()) throw ArgumentError("fit_vb: non-finite sample");
  }

  const Matrix x = canonical_samples(samples);
  const auto n = x.rows();

  Prior prior;
  prior.mean = x.colwise().mean().transpose();
  prior.beta = 1.0;
  prior.nu = static_cast<double>(d);
  prior.alpha = cfg.weight_concentration_prior;
  const Matrix centered = x.rowwise() - prior.mean.transpose();
  const double ddof = n > 1 ? static_cast<double>(n - 1) : 1.0;
  const Vector var = centered.array().square().colwise().sum() / ddof;
  prior.scale_inv = Matrix::Zero(d, d);
  prior.scale_inv.diagonal() = var.array() + cfg.reg_covar;
  prior.log_det_scale = -prior.scale_inv.diagonal().array().log().sum();

  const Philox root(cfg.seed);
  FitRun best;
  bool have_best = false;
  for (int init = 0; init < cfg.n_init; ++init) {
    FitRun run = run_once(x, prior, cfg,
                          root.split(static_cast<std::uint64_t>(init)));
    if (!have_best || run.trace.back() > best.trace.back()) {
      best = std::move(run);
      have_best = true;
    }
  }

  GmmModel model = point_estimate(best.posterior, cfg.reg_covar);
  model.elbo_trace_ = std::move(best.trace);
  model.converged_ = best.converged;
  model.n_iter_ = best.n_iter;
  return model;
}

}  // namespace cirloc
