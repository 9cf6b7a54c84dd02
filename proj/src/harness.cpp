#include "cirloc/harness.hpp"

#include "cirloc/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cirloc {

std::string method_name(Method m) {
  switch (m) {
    case Method::gmm_1d: return "1d";
    case Method::gmm_md: return "md";
    case Method::maxsim: return "maxsim";
    case Method::svc: return "svc";
  }
  return "?";
}

std::string method_label(Method m) {
  switch (m) {
    case Method::gmm_1d: return "1D-GMM";
    case Method::gmm_md: return "MD-GMM";
    case Method::maxsim: return "MD-GMM-MaxSim";
    case Method::svc: return "MD-GMM-SVC";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::gmm_1d, Method::gmm_md, Method::maxsim, Method::svc}) {
    if (name == method_name(m)) return m;
  }
  throw SpecError("unknown method '" + name + "'");
}

std::string mode_label(WindowMode mode, int window) {
  switch (mode) {
    case WindowMode::single: return "1 snapshot";
    case WindowMode::vote: return "MV" + std::to_string(window);
    case WindowMode::set: return std::to_string(window) + " snapshots";
  }
  return "?";
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  throw SpecError("unknown report format '" + name + "'");
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.methods.empty()) throw SpecError("no methods requested");
  if (spec.vote_window < 1) throw SpecError("vote window must be >= 1");
  for (const auto* f : {&spec.fit_1d, &spec.fit_md}) {
    if (f->max_components < 1 || f->max_iter < 1 || f->n_init < 1 ||
        !(f->tol > 0.0) || !(f->weight_concentration_prior > 0.0) ||
        !(f->reg_covar > 0.0)) {
      throw SpecError("invalid GMM fit configuration");
    }
  }
  const bool wants_svc =
      std::find(spec.methods.begin(), spec.methods.end(), Method::svc) != spec.methods.end();
  if (wants_svc) {
    if (!(spec.svc.c_penalty > 0.0) || spec.svc.max_iter < 1 || !(spec.svc.tol > 0.0) ||
        (spec.svc.gamma_mode == GammaMode::fixed && !(spec.svc.gamma_value > 0.0))) {
      throw SpecError("invalid SVC configuration");
    }
  }
  if (spec.preprocess.input_bins != 2 * spec.preprocess.output_bins ||
      spec.preprocess.output_bins != static_cast<int>(kProcessedBins)) {
    throw SpecError("invalid preprocess configuration");
  }
}

// ---------------------------------------------------------------------------
// Report

const AccuracyCell* AccuracyReport::find(Method method, WindowMode mode,
                                         const std::string& test_set) const {
  for (const auto& c : cells) {
    if (c.method == method && c.mode == mode && c.test_set == test_set) return &c;
  }
  return nullptr;
}

double AccuracyReport::accuracy(Method method, WindowMode mode,
                                const std::string& test_set) const {
  const auto* c = find(method, mode, test_set);
  if (c == nullptr) {
    throw ArgumentError("report has no cell for " + method_name(method) + " / " +
                        test_set);
  }
  return c->accuracy;
}

std::vector<std::string> AccuracyReport::test_sets() const {
  std::vector<std::string> out;
  for (const auto& c : cells) {
    if (std::find(out.begin(), out.end(), c.test_set) == out.end()) {
      out.push_back(c.test_set);
    }
  }
  return out;
}

void AccuracyReport::merge(const AccuracyReport& other) {
  if (areas.empty()) areas = other.areas;
  if (vote_window == 0) vote_window = other.vote_window;
  cells.insert(cells.end(), other.cells.begin(), other.cells.end());
}

bool operator==(const AccuracyReport& a, const AccuracyReport& b) {
  if (a.areas != b.areas || a.vote_window != b.vote_window ||
      a.cells.size() != b.cells.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const auto& x = a.cells[i];
    const auto& y = b.cells[i];
    if (x.method != y.method || x.mode != y.mode || x.test_set != y.test_set ||
        x.evaluated != y.evaluated || x.correct != y.correct ||
        x.accuracy != y.accuracy || x.confusion != y.confusion) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Training and evaluation

namespace {

Dataset ensure_processed(const Dataset& d, const PreprocessConfig& cfg) {
  if (d.empty() || d.processed()) return d;
  return preprocess_dataset(d, cfg);
}

bool wants(const ExperimentSpec& spec, Method m) {
  return std::find(spec.methods.begin(), spec.methods.end(), m) != spec.methods.end();
}

bool wants_md(const ExperimentSpec& spec) {
  return wants(spec, Method::gmm_md) || wants(spec, Method::maxsim) ||
         wants(spec, Method::svc);
}

/// Snapshot indices per area, in capture order.
std::vector<std::vector<std::size_t>> area_indices(const Dataset& d,
                                                   const std::vector<AreaId>& areas) {
  std::vector<std::vector<std::size_t>> out(areas.size());
  const auto& snaps = d.snapshots();
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    if (!snaps[i].label) continue;
    const auto it = std::lower_bound(areas.begin(), areas.end(), *snaps[i].label);
    if (it == areas.end() || *it != *snaps[i].label) continue;
    out[static_cast<std::size_t>(it - areas.begin())].push_back(i);
  }
  return out;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

class CellBuilder {
 public:
  CellBuilder(Method method, WindowMode mode, std::string set, std::size_t areas)
      : cell_{} {
    cell_.method = method;
    cell_.mode = mode;
    cell_.test_set = std::move(set);
    cell_.confusion.assign(areas, std::vector<std::size_t>(areas, 0));
  }
  void add(std::size_t truth, std::size_t predicted) {
    ++cell_.confusion[truth][predicted];
    ++cell_.evaluated;
    if (truth == predicted) ++cell_.correct;
  }
  AccuracyCell finish(double seconds_per_snapshot) {
    cell_.accuracy = cell_.evaluated == 0
                         ? 0.0
                         : static_cast<double>(cell_.correct) /
                               static_cast<double>(cell_.evaluated);
    cell_.seconds_per_snapshot = seconds_per_snapshot;
    return std::move(cell_);
  }

 private:
  AccuracyCell cell_;
};

std::size_t area_index(const std::vector<AreaId>& areas, AreaId a) {
  return static_cast<std::size_t>(
      std::lower_bound(areas.begin(), areas.end(), a) - areas.begin());
}

}  // namespace

std::vector<std::pair<SimilarityVector, AreaId>> window_features(
    const AreaModelSetMD& models, const Dataset& processed, int window,
    int stride) {
  if (window < 1 || stride < 1) throw ArgumentError("window and stride must be >= 1");
  std::vector<std::pair<SimilarityVector, AreaId>> out;
  const auto groups = area_indices(processed, processed.areas());
  const auto& snaps = processed.snapshots();
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t a = 0; a < groups.size(); ++a) {
    const auto& idx = groups[a];
    std::vector<Vector> scores;
    scores.reserve(idx.size());
    for (const auto i : idx) scores.push_back(score_md(models, magnitude(snaps[i])));
    for (std::size_t start = 0; start + w <= idx.size();
         start += static_cast<std::size_t>(stride)) {
      SimilarityVector z{Vector::Zero(static_cast<Eigen::Index>(models.models.size()))};
      for (std::size_t t = start; t < start + w; ++t) z.z += scores[t];
      out.emplace_back(std::move(z), processed.areas()[a]);
    }
  }
  return out;
}

TrainedModels train_models(const ExperimentSpec& spec, const Dataset& train) {
  validate_spec(spec);
  const Dataset processed = ensure_processed(train, spec.preprocess);
  TrainedModels models;
  if (wants(spec, Method::gmm_1d)) {
    models.gmm_1d = fit_area_models_1d(processed, spec.fit_1d);
  }
  if (wants_md(spec)) models.gmm_md = fit_area_models_md(processed, spec.fit_md);
  if (wants(spec, Method::svc)) {
    const auto features = window_features(*models.gmm_md, processed, spec.vote_window, 1);
    if (features.empty()) {
      throw TrainingError("no training windows of length " +
                          std::to_string(spec.vote_window) + " for the SVC");
    }
    std::vector<SimilarityVector> z;
    std::vector<AreaId> labels;
    for (const auto& [f, l] : features) {
      z.push_back(f);
      labels.push_back(l);
    }
    models.svc = train_svc(z, labels, spec.svc, processed.areas());
  }
  return models;
}

AccuracyReport evaluate(const ExperimentSpec& spec, const TrainedModels& models,
                        std::span<const NamedDataset> tests) {
  validate_spec(spec);
  if (wants(spec, Method::gmm_1d) && !models.gmm_1d) {
    throw SpecError("method 1d requested but no 1D models are available");
  }
  if (wants_md(spec) && !models.gmm_md) {
    throw SpecError("md/maxsim/svc requested but no MD models are available");
  }
  if (wants(spec, Method::svc) && !models.svc) {
    throw SpecError("method svc requested but no SVC model is available");
  }

  AccuracyReport report;
  report.vote_window = spec.vote_window;
  report.areas = models.gmm_md ? models.gmm_md->areas : models.gmm_1d->areas;
  const auto& areas = report.areas;
  const auto n_areas = areas.size();
  const auto window = static_cast<std::size_t>(spec.vote_window);

  for (const auto& test : tests) {
    const Dataset data = ensure_processed(test.data, spec.preprocess);
    const auto& snaps = data.snapshots();
    std::vector<MagnitudeVector> mags;
    mags.reserve(snaps.size());
    for (const auto& s : snaps) mags.push_back(magnitude(s));
    const auto groups = area_indices(data, areas);

    // Per-snapshot predictions (and MD scores, reused by the set methods).
    std::vector<std::size_t> pred_1d, pred_md;
    std::vector<Vector> scores_md;
    double time_1d = 0.0, time_md = 0.0;
    if (models.gmm_1d && wants(spec, Method::gmm_1d)) {
      const auto start = Clock::now();
      for (const auto& m : mags) pred_1d.push_back(argmax_lowest(score_1d(*models.gmm_1d, m)));
      time_1d = seconds_since(start) / static_cast<double>(std::max<std::size_t>(mags.size(), 1));
    }
    if (models.gmm_md && wants_md(spec)) {
      const auto start = Clock::now();
      for (const auto& m : mags) {
        scores_md.push_back(score_md(*models.gmm_md, m));
        pred_md.push_back(argmax_lowest(scores_md.back()));
      }
      time_md = seconds_since(start) / static_cast<double>(std::max<std::size_t>(mags.size(), 1));
    }

    for (const Method method : spec.methods) {
      const bool per_snapshot = method == Method::gmm_1d || method == Method::gmm_md;
      const auto& preds = method == Method::gmm_1d ? pred_1d : pred_md;
      const double t = method == Method::gmm_1d ? time_1d : time_md;

      if (per_snapshot) {
        CellBuilder single(method, WindowMode::single, test.name, n_areas);
        for (std::size_t a = 0; a < n_areas; ++a) {
          for (const auto i : groups[a]) single.add(a, preds[i]);
        }
        report.cells.push_back(single.finish(t));
      }

      CellBuilder windowed(method, per_snapshot ? WindowMode::vote : WindowMode::set,
                           test.name, n_areas);
      const auto start = Clock::now();
      std::size_t scored = 0;
      for (std::size_t a = 0; a < n_areas; ++a) {
        const auto& idx = groups[a];
        for (std::size_t begin = 0; begin + window <= idx.size(); begin += window) {
          std::size_t predicted = 0;
          if (per_snapshot) {
            std::vector<AreaId> votes;
            votes.reserve(window);
            for (std::size_t t2 = begin; t2 < begin + window; ++t2) {
              votes.push_back(areas[preds[idx[t2]]]);
            }
            predicted = area_index(areas, majority_vote(votes));
          } else {
            SimilarityVector z{Vector::Zero(static_cast<Eigen::Index>(n_areas))};
            for (std::size_t t2 = begin; t2 < begin + window; ++t2) z.z += scores_md[idx[t2]];
            predicted = method == Method::maxsim
                            ? argmax_lowest(z.z)
                            : area_index(areas, predict_svc(*models.svc, z));
          }
          windowed.add(a, predicted);
          scored += window;
        }
      }
      const double overhead =
          scored == 0 ? 0.0 : seconds_since(start) / static_cast<double>(scored);
      report.cells.push_back(windowed.finish(t + overhead));
    }
  }
  return report;
}

AccuracyReport run_experiment(const ExperimentSpec& spec, const Dataset& train,
                              std::span<const NamedDataset> tests,
                              TrainedModels* trained) {
  validate_spec(spec);
  TrainedModels models = train_models(spec, train);
  AccuracyReport report = evaluate(spec, models, tests);
  if (trained != nullptr) *trained = std::move(models);
  return report;
}

AccuracyReport run_experiment(const ExperimentSpec& spec) {
  validate_spec(spec);
  if (spec.train_path.empty() || spec.test_paths.empty()) {
    throw SpecError("experiment needs a training set and at least one test set");
  }
  const Dataset train = load_dataset(spec.train_path, spec.format);
  std::vector<NamedDataset> tests;
  for (const auto& t : spec.test_paths) {
    tests.push_back({t.name, load_dataset(t.path, spec.format)});
  }
  AccuracyReport report = run_experiment(spec, train, tests);
  if (!spec.report_path.empty()) emit_report(report, spec.report_format, spec.report_path);
  return report;
}

// ---------------------------------------------------------------------------
// Rendering

std::string format_percent(double accuracy) {
  // Half-up on the decimal representation; the small bias absorbs binary
  // representation error such as 0.7715 being stored as 0.77149999...
  const double permille = std::floor(accuracy * 1000.0 + 0.5 + 1e-9);
  const auto whole = static_cast<long long>(permille) / 10;
  const auto tenth = static_cast<long long>(permille) % 10;
  return std::to_string(whole) + "." + std::to_string(tenth);
}

namespace {

struct Row {
  Method method;
  WindowMode mode;
};

std::vector<Row> report_rows(const AccuracyReport& report) {
  std::vector<Row> rows;
  for (Method m : {Method::gmm_1d, Method::gmm_md, Method::maxsim, Method::svc}) {
    for (WindowMode w : {WindowMode::single, WindowMode::vote, WindowMode::set}) {
      const bool present = std::any_of(report.cells.begin(), report.cells.end(),
                                       [&](const AccuracyCell& c) {
                                         return c.method == m && c.mode == w;
                                       });
      if (present) rows.push_back({m, w});
    }
  }
  return rows;
}

}  // namespace

std::string render_report(const AccuracyReport& report, ReportFormat format) {
  const auto sets = report.test_sets();
  const auto rows = report_rows(report);
  std::ostringstream os;
  if (format == ReportFormat::markdown) {
    os << "| Method | Mode |";
    for (const auto& s : sets) os << ' ' << s << " |";
    os << "\n|---|---|";
    for (std::size_t i = 0; i < sets.size(); ++i) os << "---|";
    os << '\n';
    for (const auto& r : rows) {
      os << "| " << method_label(r.method) << " | "
         << mode_label(r.mode, report.vote_window) << " |";
      for (const auto& s : sets) {
        const auto* c = report.find(r.method, r.mode, s);
        os << ' ' << (c ? format_percent(c->accuracy) + "%" : std::string("-")) << " |";
      }
      os << '\n';
    }
  } else {
    os << "method,mode";
    for (const auto& s : sets) os << ',' << s;
    os << '\n';
    for (const auto& r : rows) {
      os << method_label(r.method) << ',' << mode_label(r.mode, report.vote_window);
      for (const auto& s : sets) {
        const auto* c = report.find(r.method, r.mode, s);
        os << ',' << (c ? format_percent(c->accuracy) : std::string());
      }
      os << '\n';
    }
  }
  return os.str();
}

void emit_report(const AccuracyReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << render_report(report, format);
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<ReportEntry> parse_report_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ls(l);
    while (std::getline(ls, field, ',')) out.push_back(field);
    if (!l.empty() && l.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(is, line)) throw ParseError(1, "empty report");
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "method" || header[1] != "mode") {
    throw ParseError(1, "malformed report header");
  }
  std::vector<ReportEntry> out;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) throw ParseError(row, "wrong field count");
    for (std::size_t i = 2; i < f.size(); ++i) {
      if (f[i].empty()) continue;
      try {
        out.push_back({f[0], f[1], header[i], std::stod(f[i])});
      } catch (const std::exception&) {
        throw ParseError(row, "invalid percentage '" + f[i] + "'");
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runtime comparison

double compare_runtime(const AreaModelSet1D& models_1d,
                       const AreaModelSetMD& models_md,
                       std::span<const MagnitudeVector> probes) {
  if (probes.empty()) throw ArgumentError("compare_runtime: empty probe set");
  volatile double sink = 0.0;
  auto time_1d = [&] {
    const auto start = Clock::now();
    for (const auto& p : probes) sink = sink + score_1d(models_1d, p)[0];
    return seconds_since(start) / static_cast<double>(probes.size());
  };
  auto time_md = [&] {
    const auto start = Clock::now();
    for (const auto& p : probes) sink = sink + score_md(models_md, p)[0];
    return seconds_since(start) / static_cast<double>(probes.size());
  };
  time_1d();
  time_md();
  std::vector<double> ratios;
  for (int rep = 0; rep < 5; ++rep) {
    const double a = time_1d();
    const double b = time_md();
    ratios.push_back(a / b);
  }
  std::sort(ratios.begin(), ratios.end());
  return ratios[2];
}

// ---------------------------------------------------------------------------
// Scenario runs

AccuracyReport run_scenario(const std::string& name, const SimConfig& cfg,
                            const ExperimentSpec& spec, const ScenarioRun& run,
                            TrainedModels* trained) {
  validate_spec(spec);
  SimConfig train_cfg = cfg;
  train_cfg.snapshots_per_area = run.train_per_area;

  SimConfig same_cfg = cfg;
  same_cfg.snapshots_per_area = run.test_per_area;
  same_cfg.seed = cfg.seed + 1;

  std::vector<NamedDataset> tests;
  tests.push_back({name + " A1->A2", generate_dataset(same_cfg)});
  if (run.with_layout_change) {
    SimConfig changed = perturb_layout(cfg, run.layout_change, cfg.seed + 2);
    changed.snapshots_per_area = run.test_per_area;
    changed.seed = cfg.seed + 3;
    tests.push_back({name + " A1->B", generate_dataset(changed)});
  }
  return run_experiment(spec, generate_dataset(train_cfg), tests, trained);
}

}  // namespace cirloc
