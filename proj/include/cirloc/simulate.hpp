#pragma once

#include "cirloc/model.hpp"
#include "cirloc/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cirloc {

/// One propagation path of the synthetic channel.
struct PathTap {
  double delay = 0.0;             // raw-bin units, [0, 50)
  double amplitude = 0.0;
  double phase_jitter_std = 0.0;  // radians, redrawn every packet
};

struct AreaProfile {
  AreaId area;
  std::vector<PathTap> taps;
  double snr_db = 30.0;  // +inf disables noise
};

struct SimConfig {
  std::vector<AreaProfile> profiles;
  int snapshots_per_area = 100;
  double global_shift_std = 0.0;  // packet timing jitter, raw bins
  std::uint64_t seed = 0;
  double layout_perturbation = 0.0;  // magnitude last applied by perturb_layout
};

/// Independent random streams consumed by one snapshot. Each is a Philox
/// child keyed by (seed, area, index, purpose), so draws do not depend on
/// generation order.
struct SnapshotStreams {
  Philox shift;
  Philox phase;
  Philox jitter;
  Philox noise;

  static SnapshotStreams derive(std::uint64_t seed, AreaId area,
                                std::uint64_t index);
};

/// Complex noise variance per bin: mean per-bin tap energy over the SNR.
double noise_variance(const AreaProfile& profile);

/// Synthesizes one raw, labeled 50-bin CIR.
///
/// Each tap contributes amplitude * exp(i(global phase + tap phase noise))
/// times a sinc pulse centred at delay + global shift. The shift
/// ~ N(0, global_shift_std) and the global phase ~ U[0, 2pi) are drawn once
/// per snapshot. Centres pushed outside [0, 50) are clamped into the window
/// and counted in `clipped`. Circularly-symmetric complex Gaussian noise of
/// noise_variance(profile) is added to every bin. seq is left at 0.
CirSnapshot generate_snapshot(const AreaProfile& profile, const SimConfig& cfg,
                              SnapshotStreams& streams,
                              int* clipped = nullptr);

/// snapshots_per_area per profile, interleaved round-robin in profile order,
/// seq = capture index.
Dataset generate_dataset(const SimConfig& cfg);

/// Emulates a changed room layout. Every tap but the first of each profile
/// gets amplitude *= 1 + magnitude*u and delay += magnitude*v with
/// u, v ~ U[-1, 1]; the first (dominant) tap is left in place.
SimConfig perturb_layout(const SimConfig& cfg, double magnitude,
                         std::uint64_t seed);

/// The three shipped scenarios: "separable", "los", "nlos".
std::vector<std::pair<std::string, SimConfig>> benchmark_scenarios();
/// Looks a shipped scenario up by name; throws ArgumentError if unknown.
SimConfig benchmark_scenario(const std::string& name);

void to_json(nlohmann::json& j, const SimConfig& cfg);
void from_json(const nlohmann::json& j, SimConfig& cfg);

}  // namespace cirloc
