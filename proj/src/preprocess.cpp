#include "cirloc/preprocess.hpp"

#include "cirloc/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <numeric>

namespace cirloc {

namespace {

void validate(const PreprocessConfig& cfg) {
  if (cfg.output_bins <= 0 || cfg.input_bins != 2 * cfg.output_bins) {
    throw ArgumentError("preprocess: input_bins must be twice output_bins");
  }
  if (static_cast<std::size_t>(cfg.input_bins) != kRawBins ||
      static_cast<std::size_t>(cfg.output_bins) != kProcessedBins) {
    throw ArgumentError("preprocess: only 50 -> 25 bins is supported");
  }
}

}  // namespace

CirSnapshot lowpass_downsample(const CirSnapshot& snapshot,
                               const PreprocessConfig& cfg) {
  validate(cfg);
  if (snapshot.processed) {
    throw StateError("lowpass_downsample: snapshot is already processed");
  }
  const auto n_in = static_cast<std::size_t>(cfg.input_bins);
  const auto n_out = static_cast<std::size_t>(cfg.output_bins);
  if (snapshot.bins.size() != n_in) {
    throw FormatError("lowpass_downsample: expected " + std::to_string(n_in) +
                      " bins, got " + std::to_string(snapshot.bins.size()));
  }

  std::vector<Complex> time(snapshot.bins);
  if (cfg.dc_centering) {
    const Complex mean =
        std::accumulate(time.begin(), time.end(), Complex{}) /
        static_cast<double>(n_in);
    for (auto& v : time) v -= mean;
  }

  thread_local Eigen::FFT<double> fft;
  std::vector<Complex> spectrum;
  fft.fwd(spectrum, time);

  // Positive frequencies 0..h, negative frequencies -(n_out-1-h)..-1. With
  // n_out odd there is no split Nyquist coefficient.
  const std::size_t h = n_out / 2;
  std::vector<Complex> band(n_out);
  for (std::size_t k = 0; k <= h; ++k) band[k] = spectrum[k];
  for (std::size_t k = h + 1; k < n_out; ++k) {
    band[k] = spectrum[n_in - (n_out - k)];
  }

  std::vector<Complex> out;
  fft.inv(out, band);  // scaled by 1/n_out
  for (auto& v : out) v *= 0.5;

  CirSnapshot result;
  result.bins = std::move(out);
  result.label = snapshot.label;
  result.seq = snapshot.seq;
  result.processed = true;
  return result;
}

Dataset preprocess_dataset(const Dataset& dataset,
                           const PreprocessConfig& cfg) {
  std::vector<CirSnapshot> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset.snapshots()) {
    out.push_back(lowpass_downsample(s, cfg));
  }
  return Dataset(std::move(out), dataset.areas(), dataset.meta());
}

}  // namespace cirloc
