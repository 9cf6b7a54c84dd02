#include "cirloc/classify.hpp"

#include "cirloc/errors.hpp"

#include <algorithm>
#include <map>
#include <thread>

namespace cirloc {

namespace {

/// Magnitude vectors grouped by area, after checking training preconditions.
std::vector<std::vector<Vector>> training_groups(const Dataset& train,
                                                 const FitConfig& cfg) {
  if (!train.processed() && !train.empty()) {
    throw StateError("training requires a processed dataset");
  }
  for (const auto& s : train.snapshots()) {
    if (!s.label) {
      throw TrainingError("training set contains an unlabeled snapshot (seq " +
                          std::to_string(s.seq) + ")");
    }
  }
  if (train.areas().empty()) throw TrainingError("training set has no areas");
  std::vector<std::vector<Vector>> groups;
  for (const AreaId area : train.areas()) {
    std::vector<Vector> mags;
    for (const auto* s : train.of_area(area)) mags.push_back(magnitude(*s));
    if (mags.size() < static_cast<std::size_t>(cfg.max_components) ||
        mags.empty()) {
      throw TrainingError("area " + std::to_string(area.id) + " has " +
                          std::to_string(mags.size()) +
                          " samples; need at least " +
                          std::to_string(std::max(cfg.max_components, 1)));
    }
    groups.push_back(std::move(mags));
  }
  return groups;
}

/// Runs f(i) for i in [0, n) on up to hardware_concurrency threads. Each
/// index writes only its own output slot, so results match a serial run.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

AreaModelSet1D fit_area_models_1d(const Dataset& train, const FitConfig& cfg) {
  const auto groups = training_groups(train, cfg);
  const auto bins = static_cast<std::size_t>(groups.front().front().size());
  AreaModelSet1D set;
  set.areas = train.areas();
  set.models.assign(groups.size(), std::vector<GmmModel>(bins));
  parallel_for(groups.size() * bins, [&](std::size_t job) {
    const auto a = job / bins;
    const auto m = job % bins;
    std::vector<Vector> column;
    column.reserve(groups[a].size());
    for (const auto& v : groups[a]) {
      column.push_back(Vector::Constant(1, v[static_cast<Eigen::Index>(m)]));
    }
    set.models[a][m] = fit_vb(column, cfg);
  });
  return set;
}

AreaModelSetMD fit_area_models_md(const Dataset& train, const FitConfig& cfg) {
  const auto groups = training_groups(train, cfg);
  AreaModelSetMD set;
  set.areas = train.areas();
  set.models.resize(groups.size());
  parallel_for(groups.size(),
               [&](std::size_t a) { set.models[a] = fit_vb(groups[a], cfg); });
  return set;
}

Vector score_1d(const AreaModelSet1D& models, const MagnitudeVector& x) {
  if (x.size() != models.bins()) {
    throw ArgumentError("score_1d: expected " + std::to_string(models.bins()) +
                        " bins, got " + std::to_string(x.size()));
  }
  Vector scores(static_cast<Eigen::Index>(models.models.size()));
  for (std::size_t c = 0; c < models.models.size(); ++c) {
    double s = 0.0;
    for (std::size_t m = 0; m < models.models[c].size(); ++m) {
      s += models.models[c][m].log_pdf(x[static_cast<Eigen::Index>(m)]);
    }
    scores[static_cast<Eigen::Index>(c)] = s;
  }
  return scores;
}

Vector score_md(const AreaModelSetMD& models, const MagnitudeVector& x) {
  if (x.size() != models.dim()) {
    throw ArgumentError("score_md: expected dimension " +
                        std::to_string(models.dim()) + ", got " +
                        std::to_string(x.size()));
  }
  Vector scores(static_cast<Eigen::Index>(models.models.size()));
  for (std::size_t c = 0; c < models.models.size(); ++c) {
    scores[static_cast<Eigen::Index>(c)] = models.models[c].log_pdf(x);
  }
  return scores;
}

std::size_t argmax_lowest(const Vector& scores) {
  if (scores.size() == 0) throw ArgumentError("argmax of an empty score vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return static_cast<std::size_t>(best);
}

AreaId predict_1d(const AreaModelSet1D& models, const MagnitudeVector& x) {
  return models.areas[argmax_lowest(score_1d(models, x))];
}

AreaId predict_md(const AreaModelSetMD& models, const MagnitudeVector& x) {
  return models.areas[argmax_lowest(score_md(models, x))];
}

AreaId majority_vote(std::span<const AreaId> predictions) {
  if (predictions.empty()) throw ArgumentError("majority_vote: empty list");
  std::map<AreaId, std::size_t> counts;
  for (const AreaId p : predictions) ++counts[p];
  // std::map iterates in ascending order, so strict > keeps the lowest id.
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

SimilarityVector similarity_vector(const AreaModelSetMD& models,
                                   const SnapshotWindow& window) {
  if (window.members.empty()) {
    throw ArgumentError("similarity_vector: empty window");
  }
  SimilarityVector out{Vector::Zero(static_cast<Eigen::Index>(models.models.size()))};
  for (const auto& member : window.members) out.z += score_md(models, member);
  return out;
}

AreaId predict_maxsim(const AreaModelSetMD& models,
                      const SnapshotWindow& window) {
  return models.areas[argmax_lowest(similarity_vector(models, window).z)];
}

}  // namespace cirloc
