#include "cirloc/svc.hpp"

#include "cirloc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace cirloc {

double rbf_kernel(const Vector& a, const Vector& b, double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

double resolve_gamma(std::span<const Vector> features, const SvcConfig& cfg) {
  if (features.empty()) throw ArgumentError("resolve_gamma: no features");
  if (cfg.gamma_mode == GammaMode::fixed) {
    if (!(cfg.gamma_value > 0.0)) {
      throw ArgumentError("resolve_gamma: fixed gamma must be positive");
    }
    return cfg.gamma_value;
  }
  const auto d = static_cast<double>(features.front().size());
  double count = 0.0, mean = 0.0, m2 = 0.0;
  // Welford over every entry of every feature vector.
  for (const auto& f : features) {
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      count += 1.0;
      const double delta = f[i] - mean;
      mean += delta / count;
      m2 += delta * (f[i] - mean);
    }
  }
  const double var = m2 / count;
  return var > 0.0 ? 1.0 / (d * var) : 1.0 / d;
}

double dual_objective(const Matrix& kernel, const Vector& y,
                      const Vector& alpha) {
  const Vector ya = y.cwiseProduct(alpha);
  return 0.5 * ya.dot(kernel * ya) - alpha.sum();
}

DualSolution solve_smo(const Matrix& kernel, const Vector& y, double c,
                       double tol, int max_iter) {
  const auto n = y.size();
  constexpr double kTau = 1e-12;
  DualSolution sol;
  sol.alpha = Vector::Zero(n);
  Vector& alpha = sol.alpha;
  Vector grad = Vector::Constant(n, -1.0);  // Q alpha - e

  auto in_up = [&](Eigen::Index t) {
    return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0);
  };
  auto in_low = [&](Eigen::Index t) {
    return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c);
  };

  while (true) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_max2 = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * grad[t] >= g_max) {
        if (-y[t] * grad[t] > g_max || i < 0) i = t;
        g_max = -y[t] * grad[t];
      }
    }
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_low(t) && y[t] * grad[t] >= g_max2) {
        if (y[t] * grad[t] > g_max2 || j < 0) j = t;
        g_max2 = y[t] * grad[t];
      }
    }
    if (i < 0 || j < 0 || g_max + g_max2 < tol) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= max_iter) break;
    ++sol.iterations;

    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = kernel(i, i) + kernel(j, j) + 2.0 * y[i] * y[j] * kernel(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }

    const double d_i = alpha[i] - old_i;
    const double d_j = alpha[j] - old_j;
    for (Eigen::Index t = 0; t < n; ++t) {
      grad[t] += y[t] * (y[i] * kernel(t, i) * d_i + y[j] * kernel(t, j) * d_j);
    }
  }

  // Bias from free vectors, or the middle of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  int free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / free_count : 0.5 * (ub + lb);
  sol.bias = -rho;
  sol.objective = dual_objective(kernel, y, alpha);
  return sol;
}

SvcModel train_svc(std::span<const SimilarityVector> features,
                   std::span<const AreaId> labels, const SvcConfig& cfg,
                   std::span<const AreaId> declared) {
  if (features.size() != labels.size()) {
    throw ArgumentError("train_svc: features and labels differ in length");
  }
  if (features.empty()) throw ArgumentError("train_svc: empty training set");
  if (!(cfg.c_penalty > 0.0) || cfg.max_iter < 1 || !(cfg.tol > 0.0)) {
    throw ArgumentError("train_svc: invalid SvcConfig");
  }
  const auto dim = features.front().z.size();
  std::vector<Vector> xs;
  xs.reserve(features.size());
  for (const auto& f : features) {
    if (f.z.size() != dim) throw ArgumentError("train_svc: ragged features");
    if (!f.z.allFinite()) throw ArgumentError("train_svc: non-finite feature");
    xs.push_back(f.z);
  }

  std::map<AreaId, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const AreaId c : declared) {
    if (!by_class.contains(c)) {
      throw TrainingError("train_svc: class " + std::to_string(c.id) +
                          " has no samples");
    }
  }

  SvcModel model;
  model.config = cfg;
  model.dim = static_cast<int>(dim);
  model.gamma = resolve_gamma(xs, cfg);
  for (const auto& [c, idx] : by_class) model.classes.push_back(c);

  for (std::size_t a = 0; a < model.classes.size(); ++a) {
    for (std::size_t b = a + 1; b < model.classes.size(); ++b) {
      std::vector<std::size_t> members = by_class[model.classes[a]];
      const auto& neg = by_class[model.classes[b]];
      members.insert(members.end(), neg.begin(), neg.end());
      const auto n = static_cast<Eigen::Index>(members.size());
      const auto n_pos = static_cast<Eigen::Index>(by_class[model.classes[a]].size());

      Vector y(n);
      Matrix kernel(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        y[r] = r < n_pos ? 1.0 : -1.0;
        kernel(r, r) = 1.0;
        for (Eigen::Index s = 0; s < r; ++s) {
          const double k = rbf_kernel(xs[members[static_cast<std::size_t>(r)]],
                                      xs[members[static_cast<std::size_t>(s)]],
                                      model.gamma);
          kernel(r, s) = k;
          kernel(s, r) = k;
        }
      }
      const DualSolution sol =
          solve_smo(kernel, y, cfg.c_penalty, cfg.tol, cfg.max_iter);

      BinaryMachine machine;
      machine.positive = model.classes[a];
      machine.negative = model.classes[b];
      machine.bias = sol.bias;
      machine.iterations = sol.iterations;
      machine.converged = sol.converged;
      for (Eigen::Index r = 0; r < n; ++r) {
        if (sol.alpha[r] > 0.0) {
          machine.support.push_back(xs[members[static_cast<std::size_t>(r)]]);
          machine.coef.push_back(sol.alpha[r] * y[r]);
        }
      }
      model.machines.push_back(std::move(machine));
    }
  }
  return model;
}

double decision_value(const BinaryMachine& machine, double gamma,
                      const Vector& z) {
  double f = machine.bias;
  for (std::size_t i = 0; i < machine.support.size(); ++i) {
    f += machine.coef[i] * rbf_kernel(machine.support[i], z, gamma);
  }
  return f;
}

AreaId predict_svc(const SvcModel& model, const SimilarityVector& z) {
  if (model.classes.empty()) throw ArgumentError("predict_svc: empty model");
  if (z.z.size() != model.dim) {
    throw ArgumentError("predict_svc: expected dimension " +
                        std::to_string(model.dim) + ", got " +
                        std::to_string(z.z.size()));
  }
  std::map<AreaId, int> votes;
  for (const AreaId c : model.classes) votes[c] = 0;
  for (const auto& m : model.machines) {
    const double f = decision_value(m, model.gamma, z.z);
    ++votes[(f > 0.0 || std::abs(f) < 1e-12) ? m.positive : m.negative];
  }
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

}  // namespace cirloc
