#pragma once

#include "cirloc/classify.hpp"
#include "cirloc/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace cirloc {

enum class GammaMode { scale, fixed };

struct SvcConfig {
  double c_penalty = 1.0;
  GammaMode gamma_mode = GammaMode::scale;
  double gamma_value = 1.0;  // used when gamma_mode == fixed
  int max_iter = 10'000;     // SMO pair updates per binary machine
  double tol = 1e-3;
  std::uint64_t seed = 0;    // SMO is deterministic; kept for the model echo
};

/// One-vs-one soft-margin machine; `positive` is the lower AreaId (y = +1).
struct BinaryMachine {
  AreaId positive;
  AreaId negative;
  std::vector<Vector> support;
  std::vector<double> coef;  // alpha_i * y_i
  double bias = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct SvcModel {
  std::vector<AreaId> classes;  // ascending
  std::vector<BinaryMachine> machines;
  double gamma = 1.0;
  int dim = 0;
  SvcConfig config;
};

/// RBF kernel matrix entry exp(-gamma * |a - b|^2).
double rbf_kernel(const Vector& a, const Vector& b, double gamma);

/// "scale" rule: 1 / (d * var) over all feature entries pooled, falling back
/// to 1 / d when the variance is zero. "fixed" returns gamma_value.
double resolve_gamma(std::span<const Vector> features, const SvcConfig& cfg);

/// Solution of the binary soft-margin dual
///   min 1/2 a^T Q a - sum(a),  Q_ij = y_i y_j K_ij,
///   0 <= a_i <= C,  y^T a = 0.
struct DualSolution {
  Vector alpha;
  double bias = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// SMO with maximal-violating-pair selection. Stops when the KKT gap drops
/// below tol or after max_iter pair updates.
DualSolution solve_smo(const Matrix& kernel, const Vector& y, double c_penalty,
                       double tol, int max_iter);

double dual_objective(const Matrix& kernel, const Vector& y,
                      const Vector& alpha);

/// Trains one machine per class pair. `declared` lists classes that must be
/// present (defaults to the labels seen).
SvcModel train_svc(std::span<const SimilarityVector> features,
                   std::span<const AreaId> labels, const SvcConfig& cfg,
                   std::span<const AreaId> declared = {});

double decision_value(const BinaryMachine& machine, double gamma,
                      const Vector& z);

AreaId predict_svc(const SvcModel& model, const SimilarityVector& z);

}  // namespace cirloc
