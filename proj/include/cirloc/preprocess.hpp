#pragma once

#include "cirloc/model.hpp"

namespace cirloc {

struct PreprocessConfig {
  int input_bins = static_cast<int>(kRawBins);
  int output_bins = static_cast<int>(kProcessedBins);
  // Remove the per-snapshot mean before filtering. Off by default.
  bool dc_centering = false;
};

/// Half-band low-pass and factor-2 decimation done in the frequency domain.
///
/// The input is transformed with a length-`input_bins` DFT, the
/// `output_bins` lowest-frequency coefficients (non-negative frequencies
/// 0..h and negative frequencies -h..-1 with h = output_bins/2) are kept,
/// and the result is inverse-transformed at length `output_bins`. The
/// inverse carries the 1/output_bins normalization times the decimation
/// factor 1/2, so a DC or in-band tone keeps its amplitude.
CirSnapshot lowpass_downsample(const CirSnapshot& snapshot,
                               const PreprocessConfig& cfg = {});

Dataset preprocess_dataset(const Dataset& dataset,
                           const PreprocessConfig& cfg = {});

}  // namespace cirloc
