#pragma once

#include <Eigen/Core>

#include <complex>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cirloc {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr std::size_t kRawBins = 50;
inline constexpr std::size_t kProcessedBins = 25;

/// Index of a reference area. Areas are numbered 0..|C|-1.
struct AreaId {
  int id = 0;

  constexpr AreaId() = default;
  constexpr explicit AreaId(int v) : id(v) {}
  friend constexpr auto operator<=>(AreaId, AreaId) = default;
};

/// One complex CIR as read off the receiver (50 bins) or after
/// preprocessing (25 bins).
struct CirSnapshot {
  std::vector<Complex> bins;
  std::optional<AreaId> label;
  std::int64_t seq = 0;
  bool processed = false;

  friend bool operator==(const CirSnapshot&, const CirSnapshot&) = default;
};

/// Per-bin moduli of a processed CIR.
using MagnitudeVector = Vector;

/// Expected bin count for a processing state.
constexpr std::size_t bin_count(bool processed) {
  return processed ? kProcessedBins : kRawBins;
}

/// Immutable collection of snapshots sharing one processing state.
///
/// Construction validates: uniform bin length matching the processed flag,
/// strictly increasing seq, and every label drawn from `areas`. When `areas`
/// is empty it is derived from the labels present.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<CirSnapshot> snapshots,
                   std::vector<AreaId> areas = {}, std::string meta = {});

  const std::vector<CirSnapshot>& snapshots() const { return snapshots_; }
  const std::vector<AreaId>& areas() const { return areas_; }
  const std::string& meta() const { return meta_; }

  std::size_t size() const { return snapshots_.size(); }
  bool empty() const { return snapshots_.empty(); }
  /// Processing state; an empty dataset reports raw.
  bool processed() const {
    return !snapshots_.empty() && snapshots_.front().processed;
  }
  std::size_t bins() const { return bin_count(processed()); }

  /// Snapshots carrying the given label, in capture order.
  std::vector<const CirSnapshot*> of_area(AreaId area) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.snapshots_ == b.snapshots_ && a.areas_ == b.areas_;
  }

 private:
  std::vector<CirSnapshot> snapshots_;
  std::vector<AreaId> areas_;
  std::string meta_;
};

enum class DatasetFormat { csv, binary };

/// Parses "csv" / "binary"; throws ArgumentError otherwise.
DatasetFormat parse_format(const std::string& name);

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format);

MagnitudeVector magnitude(const CirSnapshot& snapshot);

/// T consecutive magnitude vectors treated as one sample set.
struct SnapshotWindow {
  std::vector<MagnitudeVector> members;
  std::optional<AreaId> label;
  std::size_t origin = 0;  // index of the first member in the source
};

/// Sliding windows of `window` snapshots, advancing by `stride`, taken
/// within each maximal run of consecutive snapshots with equal labels.
std::vector<SnapshotWindow> slice_windows(const Dataset& dataset,
                                          int window, int stride);

/// Same as slice_windows, but each area's snapshots are first gathered in
/// capture order and treated as a single run. Needed for datasets whose
/// areas are interleaved. `origin` is the position within the area's
/// subsequence. Unlabeled snapshots are skipped.
std::vector<SnapshotWindow> slice_area_windows(const Dataset& dataset,
                                               int window, int stride);

}  // namespace cirloc
