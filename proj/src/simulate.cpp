#include "cirloc/simulate.hpp"

#include "cirloc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cirloc {

namespace {

constexpr double kWindow = static_cast<double>(kRawBins);

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

void validate(const SimConfig& cfg) {
  if (cfg.profiles.empty()) throw ArgumentError("SimConfig: no profiles");
  if (cfg.snapshots_per_area < 1) {
    throw ArgumentError("SimConfig: snapshots_per_area must be >= 1");
  }
  if (!(cfg.global_shift_std >= 0.0)) {
    throw ArgumentError("SimConfig: global_shift_std must be >= 0");
  }
  std::vector<AreaId> seen;
  for (const auto& p : cfg.profiles) {
    if (p.taps.empty()) {
      throw ArgumentError("SimConfig: area " + std::to_string(p.area.id) +
                          " has no taps");
    }
    if (std::isnan(p.snr_db) || p.snr_db == -std::numeric_limits<double>::infinity()) {
      throw ArgumentError("SimConfig: invalid snr");
    }
    for (const auto& t : p.taps) {
      if (!(t.amplitude >= 0.0) || !(t.delay >= 0.0 && t.delay < kWindow)) {
        throw ArgumentError("SimConfig: tap outside [0, 50) or negative amplitude");
      }
    }
    seen.push_back(p.area);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw ArgumentError("SimConfig: duplicate area ids");
  }
}

}  // namespace

SnapshotStreams SnapshotStreams::derive(std::uint64_t seed, AreaId area,
                                        std::uint64_t index) {
  const Philox base = Philox(seed)
                          .split(static_cast<std::uint64_t>(area.id))
                          .split(index);
  return {base.split(1), base.split(2), base.split(3), base.split(4)};
}

double noise_variance(const AreaProfile& profile) {
  if (std::isinf(profile.snr_db) && profile.snr_db > 0) return 0.0;
  double energy = 0.0;
  for (const auto& t : profile.taps) energy += t.amplitude * t.amplitude;
  return energy / kWindow / std::pow(10.0, profile.snr_db / 10.0);
}

CirSnapshot generate_snapshot(const AreaProfile& profile, const SimConfig& cfg,
                              SnapshotStreams& streams, int* clipped) {
  CirSnapshot s;
  s.bins.assign(kRawBins, Complex{});
  s.label = profile.area;
  s.processed = false;

  const double shift =
      cfg.global_shift_std > 0.0 ? streams.shift.normal(0.0, cfg.global_shift_std) : 0.0;
  const double global_phase = streams.phase.uniform(0.0, 2.0 * std::numbers::pi);

  int clip_count = 0;
  for (const auto& tap : profile.taps) {
    double center = tap.delay + shift;
    if (center < 0.0 || center >= kWindow) {
      center = std::clamp(center, 0.0, kWindow - 1.0);
      ++clip_count;
    }
    const double wobble =
        tap.phase_jitter_std > 0.0 ? streams.jitter.normal(0.0, tap.phase_jitter_std) : 0.0;
    const Complex gain = std::polar(tap.amplitude, global_phase + wobble);
    for (std::size_t n = 0; n < kRawBins; ++n) {
      s.bins[n] += gain * sinc(static_cast<double>(n) - center);
    }
  }

  const double var = noise_variance(profile);
  if (var > 0.0) {
    const double sd = std::sqrt(0.5 * var);
    for (auto& b : s.bins) {
      const double re = streams.noise.normal(0.0, sd);
      const double im = streams.noise.normal(0.0, sd);
      b += Complex(re, im);
    }
  }
  if (clipped != nullptr) *clipped += clip_count;
  return s;
}

Dataset generate_dataset(const SimConfig& cfg) {
  validate(cfg);
  const auto areas = cfg.profiles.size();
  std::vector<CirSnapshot> snaps;
  snaps.reserve(areas * static_cast<std::size_t>(cfg.snapshots_per_area));
  std::vector<AreaId> ids;
  for (const auto& p : cfg.profiles) ids.push_back(p.area);
  for (int i = 0; i < cfg.snapshots_per_area; ++i) {
    for (const auto& p : cfg.profiles) {
      auto streams = SnapshotStreams::derive(cfg.seed, p.area,
                                             static_cast<std::uint64_t>(i));
      CirSnapshot s = generate_snapshot(p, cfg, streams);
      s.seq = static_cast<std::int64_t>(snaps.size());
      snaps.push_back(std::move(s));
    }
  }
  return Dataset(std::move(snaps), std::move(ids),
                 "simulated seed=" + std::to_string(cfg.seed));
}

SimConfig perturb_layout(const SimConfig& cfg, double magnitude,
                         std::uint64_t seed) {
  if (!(magnitude >= 0.0 && magnitude <= 1.0)) {
    throw ArgumentError("perturb_layout: magnitude must be in [0, 1]");
  }
  SimConfig out = cfg;
  out.layout_perturbation = magnitude;
  if (magnitude == 0.0) {
    out.layout_perturbation = cfg.layout_perturbation;
    return out;
  }
  const Philox root = Philox(seed).split(0x1a7007);
  for (auto& p : out.profiles) {
    Philox rng = root.split(static_cast<std::uint64_t>(p.area.id));
    for (std::size_t t = 1; t < p.taps.size(); ++t) {
      auto& tap = p.taps[t];
      const double u = rng.uniform(-1.0, 1.0);
      const double v = rng.uniform(-1.0, 1.0);
      tap.amplitude *= 1.0 + magnitude * u;
      tap.delay = std::clamp(tap.delay + magnitude * v, 0.0, kWindow - 1.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shipped scenarios. Each builder is a pure function of its fixed seed.

namespace {

constexpr int kAreas = 12;

/// Small-scale analogue: every area has its own dominant path.
SimConfig separable_scenario() {
  SimConfig cfg;
  cfg.seed = 101;
  cfg.global_shift_std = 1.0;
  Philox rng = Philox(cfg.seed).split(0x5ce);
  for (int a = 0; a < kAreas; ++a) {
    AreaProfile p;
    p.area = AreaId(a);
    p.snr_db = 30.0;
    const double d0 = 3.0 + 3.6 * a;
    p.taps.push_back({d0, 1.0, 0.05});
    p.taps.push_back({std::fmod(d0 + 5.0 + rng.uniform(0.0, 2.0), kWindow - 1.0),
                      0.35, 0.2});
    cfg.profiles.push_back(std::move(p));
  }
  return cfg;
}

/// Line of sight: one strong shared path, area-specific weak echoes.
SimConfig los_scenario() {
  SimConfig cfg;
  cfg.seed = 202;
  cfg.global_shift_std = 1.0;
  Philox rng = Philox(cfg.seed).split(0x5ce);
  for (int a = 0; a < kAreas; ++a) {
    AreaProfile p;
    p.area = AreaId(a);
    p.snr_db = 3.0;
    p.taps.push_back({6.0, 1.0, 0.02});
    for (int k = 0; k < 8; ++k) {
      p.taps.push_back({rng.uniform(10.0, 46.0), rng.uniform(0.1, 0.3), 0.4});
    }
    cfg.profiles.push_back(std::move(p));
  }
  return cfg;
}

/// Obstructed: no shared dominant path, a moderate first path per pair of
/// areas over dense weak echoes, low SNR and large timing jitter. The two
/// areas of a pair (2k, 2k+1) share their geometry and differ only in noise
/// level, so their magnitude distributions nest.
SimConfig nlos_scenario() {
  SimConfig cfg;
  cfg.seed = 303;
  cfg.global_shift_std = 1.5;
  Philox rng = Philox(cfg.seed).split(0x5ce);
  for (int pair = 0; pair < kAreas / 2; ++pair) {
    std::vector<PathTap> taps;
    for (int k = 0; k < 10; ++k) {
      taps.push_back({rng.uniform(4.0, 46.0), rng.uniform(0.05, 0.2), 0.8});
    }
    taps.front().amplitude = 0.7;
    for (int member = 0; member < 2; ++member) {
      AreaProfile p;
      p.area = AreaId(2 * pair + member);
      p.snr_db = member == 0 ? -3.5 : -4.3;
      p.taps = taps;
      cfg.profiles.push_back(std::move(p));
    }
  }
  return cfg;
}

}  // namespace

std::vector<std::pair<std::string, SimConfig>> benchmark_scenarios() {
  return {{"separable", separable_scenario()},
          {"los", los_scenario()},
          {"nlos", nlos_scenario()}};
}

SimConfig benchmark_scenario(const std::string& name) {
  for (auto& [n, cfg] : benchmark_scenarios()) {
    if (n == name) return cfg;
  }
  throw ArgumentError("unknown scenario '" + name + "'");
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const SimConfig& cfg) {
  nlohmann::json profiles = nlohmann::json::array();
  for (const auto& p : cfg.profiles) {
    nlohmann::json taps = nlohmann::json::array();
    for (const auto& t : p.taps) {
      taps.push_back({{"delay", t.delay},
                      {"amplitude", t.amplitude},
                      {"phase_jitter_std", t.phase_jitter_std}});
    }
    nlohmann::json pj = {{"area", p.area.id}, {"taps", taps}};
    if (std::isinf(p.snr_db)) {
      pj["snr_db"] = "inf";
    } else {
      pj["snr_db"] = p.snr_db;
    }
    profiles.push_back(pj);
  }
  j = {{"profiles", profiles},
       {"snapshots_per_area", cfg.snapshots_per_area},
       {"global_shift_std", cfg.global_shift_std},
       {"seed", cfg.seed},
       {"layout_perturbation", cfg.layout_perturbation}};
}

void from_json(const nlohmann::json& j, SimConfig& cfg) {
  cfg = SimConfig{};
  for (const auto& pj : j.at("profiles")) {
    AreaProfile p;
    p.area = AreaId(pj.at("area").get<int>());
    const auto& snr = pj.at("snr_db");
    p.snr_db = snr.is_string() ? std::numeric_limits<double>::infinity()
                               : snr.get<double>();
    for (const auto& tj : pj.at("taps")) {
      p.taps.push_back({tj.at("delay").get<double>(), tj.at("amplitude").get<double>(),
                        tj.value("phase_jitter_std", 0.0)});
    }
    cfg.profiles.push_back(std::move(p));
  }
  cfg.snapshots_per_area = j.at("snapshots_per_area").get<int>();
  cfg.global_shift_std = j.at("global_shift_std").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.layout_perturbation = j.value("layout_perturbation", 0.0);
}

}  // namespace cirloc
