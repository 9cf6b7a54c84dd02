#pragma once

#include "cirloc/classify.hpp"
#include "cirloc/gmm.hpp"
#include "cirloc/svc.hpp"

#include <filesystem>
#include <optional>

namespace cirloc {

/// Everything `train` produces, persisted as one file.
///
/// Layout: magic "CLB1", u32 section count, then per section a 4-byte tag
/// ("G1D ", "GMD ", "SVC "), a u32-length JSON header (dims, counts,
/// config echo, fit record), a u64 count of float64 values and the values
/// themselves, all little-endian.
struct ModelBundle {
  std::optional<AreaModelSet1D> gmm_1d;
  std::optional<AreaModelSetMD> gmm_md;
  std::optional<SvcModel> svc;
  FitConfig fit_1d = FitConfig::univariate();
  FitConfig fit_md = FitConfig::multivariate();
  int svc_window = 0;  // window length the SVC was trained with
};

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace cirloc
