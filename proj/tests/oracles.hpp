// Reference implementations used only by the tests. None of them share code
// with the library.
#pragma once

#include "cirloc/model.hpp"
#include "cirloc/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <vector>

namespace oracle {

using cirloc::Complex;
using cirloc::Matrix;
using cirloc::Vector;

/// O(N^2) DFT, sign -1 forward.
inline std::vector<Complex> dft(const std::vector<Complex>& x, bool inverse = false) {
  const auto n = x.size();
  std::vector<Complex> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<long double> acc = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const long double ang = sign * 2.0L * std::numbers::pi_v<long double> *
                              static_cast<long double>((k * t) % n) / n;
      acc += std::complex<long double>(x[t].real(), x[t].imag()) *
             std::complex<long double>(std::cos(ang), std::sin(ang));
    }
    out[k] = Complex(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
  }
  return out;
}

/// Ideal half-band low-pass followed by 2x decimation, written directly from
/// the definition: keep frequencies |f| < 12.5 of the 50-point spectrum,
/// inverse at 25 points.
inline std::vector<Complex> halfband_decimate(const std::vector<Complex>& x) {
  const auto X = dft(x);
  std::vector<Complex> out(25);
  for (int n = 0; n < 25; ++n) {
    std::complex<long double> acc = 0;
    for (int f = -12; f <= 12; ++f) {
      const auto& c = X[static_cast<std::size_t>((f + 50) % 50)];
      const long double ang = 2.0L * std::numbers::pi_v<long double> * f * n / 25.0L;
      acc += std::complex<long double>(c.real(), c.imag()) *
             std::complex<long double>(std::cos(ang), std::sin(ang));
    }
    acc /= 50.0L;
    out[static_cast<std::size_t>(n)] =
        Complex(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
  }
  return out;
}

using LMatrix = std::vector<std::vector<long double>>;

/// Gauss-Jordan inverse and log-determinant with partial pivoting.
inline void invert(const Matrix& a, LMatrix& inv, long double& log_det) {
  const auto n = static_cast<std::size_t>(a.rows());
  LMatrix m(n, std::vector<long double>(2 * n, 0.0L));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i][j] = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    m[i][n + i] = 1.0L;
  }
  log_det = 0.0L;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(m[r][c]) > std::fabs(m[piv][c])) piv = r;
    std::swap(m[c], m[piv]);
    const long double p = m[c][c];
    log_det += std::log(std::fabs(p));
    for (auto& v : m[c]) v /= p;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const long double f = m[r][c];
      if (f == 0.0L) continue;
      for (std::size_t k = 0; k < 2 * n; ++k) m[r][k] -= f * m[c][k];
    }
  }
  inv.assign(n, std::vector<long double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) inv[i][j] = m[i][n + j];
}

struct Mixture {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
};

/// log sum_k w_k N(x; mu_k, S_k) in long double, weights normalized here.
inline long double mixture_log_pdf(const Mixture& g, const Vector& x) {
  const auto d = static_cast<std::size_t>(x.size());
  long double wsum = 0.0L;
  for (double w : g.weights) wsum += w;
  std::vector<long double> terms;
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    LMatrix inv;
    long double ld = 0;
    invert(g.covs[k], inv, ld);
    long double q = 0.0L;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        q += (static_cast<long double>(x[static_cast<Eigen::Index>(i)]) - g.means[k][static_cast<Eigen::Index>(i)]) *
             inv[i][j] *
             (static_cast<long double>(x[static_cast<Eigen::Index>(j)]) - g.means[k][static_cast<Eigen::Index>(j)]);
    terms.push_back(std::log(g.weights[k] / wsum) -
                    0.5L * (d * std::log(2.0L * std::numbers::pi_v<long double>) + ld + q));
  }
  const long double mx = *std::max_element(terms.begin(), terms.end());
  long double s = 0.0L;
  for (auto t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

/// Random SPD matrix A A^T / d + floor * I.
inline Matrix random_spd(cirloc::Philox& rng, int d, double floor) {
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  Matrix s = a * a.transpose() / d;
  for (int i = 0; i < d; ++i) s(i, i) += floor;
  return s;
}

/// Two-pass population variance of every entry pooled.
inline double pooled_variance(const std::vector<Vector>& xs) {
  long double sum = 0.0L;
  std::size_t n = 0;
  for (const auto& x : xs)
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      sum += x[i];
      ++n;
    }
  const long double mean = sum / n;
  long double ss = 0.0L;
  for (const auto& x : xs)
    for (Eigen::Index i = 0; i < x.size(); ++i) ss += (x[i] - mean) * (x[i] - mean);
  return static_cast<double>(ss / n);
}

/// Projection onto {0 <= a <= C, y^T a = 0} by bisection on the multiplier.
inline Vector project_box_hyperplane(const Vector& v, const Vector& y, double c) {
  auto at = [&](double lambda) {
    Vector a = v - lambda * y;
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i], 0.0, c);
    return a;
  };
  const double span = v.cwiseAbs().maxCoeff() + c + 1.0;
  double lo = -span, hi = span;
  // y^T a(lambda) is non-increasing in lambda.
  for (int it = 0; it < 64; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (y.dot(at(mid)) > 0.0) lo = mid; else hi = mid;
  }
  return at(0.5 * (lo + hi));
}

/// Binary soft-margin dual min 1/2 a^T Q a - 1^T a by accelerated projected
/// gradient. Returns the objective at the solution.
inline double dual_qp(const Matrix& kernel, const Vector& y, double c, int iters = 20000) {
  const Matrix q = (y * y.transpose()).cwiseProduct(kernel);
  const double lip = Eigen::SelfAdjointEigenSolver<Matrix>(q).eigenvalues().maxCoeff();
  const double step = 1.0 / std::max(lip, 1e-12);
  const Vector ones = Vector::Ones(y.size());
  Vector a = Vector::Zero(y.size());
  Vector z = a;
  double obj = 0.0;
  double t = 1.0;
  for (int it = 0; it < iters; ++it) {
    const Vector next = project_box_hyperplane(z - step * (q * z - ones), y, c);
    const double next_obj = 0.5 * next.dot(q * next) - next.sum();
    if (next_obj > obj) {
      // Momentum overshoot: restart from the last iterate.
      z = a;
      t = 1.0;
      continue;
    }
    const double move = (next - a).cwiseAbs().maxCoeff();
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / tn) * (next - a);
    a = next;
    obj = next_obj;
    t = tn;
    if (move < 1e-14 * std::max(1.0, c)) break;
  }
  return obj;
}

/// Voting rule in its sign-function form: argmax_c sum_t (1 - sgn|c - p_t|),
/// lowest c on ties.
inline int literal_vote(const std::vector<int>& preds, int n_classes) {
  int best = 0;
  long best_score = -1;
  for (int c = 0; c < n_classes; ++c) {
    long s = 0;
    for (int p : preds) {
      const int diff = std::abs(c - p);
      const int sgn = diff > 0 ? 1 : 0;
      s += 1 - sgn;
    }
    if (s > best_score) {
      best_score = s;
      best = c;
    }
  }
  return best;
}

}  // namespace oracle
