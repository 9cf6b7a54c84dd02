#pragma once

#include "cirloc/gmm.hpp"
#include "cirloc/model.hpp"

#include <span>
#include <vector>

namespace cirloc {

/// Per-area, per-bin univariate densities g_c^m.
struct AreaModelSet1D {
  std::vector<AreaId> areas;                  // ascending
  std::vector<std::vector<GmmModel>> models;  // [area][bin]

  int bins() const {
    return models.empty() ? 0 : static_cast<int>(models.front().size());
  }
};

/// Per-area joint densities g_c over all bins.
struct AreaModelSetMD {
  std::vector<AreaId> areas;     // ascending
  std::vector<GmmModel> models;  // [area]

  int dim() const { return models.empty() ? 0 : models.front().dim(); }
};

/// Per-area set log-likelihood sums z_c, in ascending area order.
struct SimilarityVector {
  Vector z;
};

/// Fits one univariate mixture per (area, bin) on the bin magnitudes.
/// Requires a processed, fully labeled dataset.
AreaModelSet1D fit_area_models_1d(const Dataset& train, const FitConfig& cfg);
AreaModelSetMD fit_area_models_md(const Dataset& train, const FitConfig& cfg);

/// Per-area sum over bins of log g_c^m(x[m]).
Vector score_1d(const AreaModelSet1D& models, const MagnitudeVector& x);
/// Per-area joint log-density log g_c(x).
Vector score_md(const AreaModelSetMD& models, const MagnitudeVector& x);

/// Index of the largest score; ties go to the lowest index.
std::size_t argmax_lowest(const Vector& scores);

AreaId predict_1d(const AreaModelSet1D& models, const MagnitudeVector& x);
AreaId predict_md(const AreaModelSetMD& models, const MagnitudeVector& x);

/// Most frequent label; ties go to the lowest AreaId.
AreaId majority_vote(std::span<const AreaId> predictions);

SimilarityVector similarity_vector(const AreaModelSetMD& models,
                                   const SnapshotWindow& window);
AreaId predict_maxsim(const AreaModelSetMD& models,
                      const SnapshotWindow& window);

}  // namespace cirloc
