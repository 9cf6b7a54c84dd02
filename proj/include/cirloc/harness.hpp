#pragma once

#include "cirloc/bundle.hpp"
#include "cirloc/classify.hpp"
#include "cirloc/gmm.hpp"
#include "cirloc/model.hpp"
#include "cirloc/preprocess.hpp"
#include "cirloc/simulate.hpp"
#include "cirloc/svc.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cirloc {

enum class Method { gmm_1d, gmm_md, maxsim, svc };
enum class WindowMode { single, vote, set };
enum class ReportFormat { csv, markdown };

std::string method_name(Method m);   // "1d", "md", "maxsim", "svc"
std::string method_label(Method m);  // table label, e.g. "MD-GMM"
Method parse_method(const std::string& name);
std::string mode_label(WindowMode mode, int window);
ReportFormat parse_report_format(const std::string& name);

struct NamedPath {
  std::string name;
  std::filesystem::path path;
};

struct NamedDataset {
  std::string name;
  Dataset data;
};

struct ExperimentSpec {
  std::filesystem::path train_path;
  std::vector<NamedPath> test_paths;
  DatasetFormat format = DatasetFormat::binary;
  std::vector<Method> methods = {Method::gmm_1d, Method::gmm_md, Method::maxsim,
                                 Method::svc};
  int vote_window = 100;
  FitConfig fit_1d = FitConfig::univariate();
  FitConfig fit_md = FitConfig::multivariate();
  SvcConfig svc;
  PreprocessConfig preprocess;
  std::filesystem::path report_path;  // empty: no report file
  ReportFormat report_format = ReportFormat::markdown;
};

/// Throws SpecError on an inconsistent specification.
void validate_spec(const ExperimentSpec& spec);

/// Accuracy of one method in one window mode on one test set.
struct AccuracyCell {
  Method method = Method::gmm_md;
  WindowMode mode = WindowMode::single;
  std::string test_set;
  std::size_t evaluated = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  double seconds_per_snapshot = 0.0;
};

struct AccuracyReport {
  std::vector<AreaId> areas;
  int vote_window = 0;
  std::vector<AccuracyCell> cells;

  const AccuracyCell* find(Method method, WindowMode mode,
                           const std::string& test_set) const;
  /// Accuracy of a cell; throws ArgumentError when absent.
  double accuracy(Method method, WindowMode mode,
                  const std::string& test_set) const;
  std::vector<std::string> test_sets() const;
  void merge(const AccuracyReport& other);

  friend bool operator==(const AccuracyReport& a, const AccuracyReport& b);
};

/// Models fitted during an experiment; reusable for evaluation.
struct TrainedModels {
  std::optional<AreaModelSet1D> gmm_1d;
  std::optional<AreaModelSetMD> gmm_md;
  std::optional<SvcModel> svc;
};

TrainedModels train_models(const ExperimentSpec& spec, const Dataset& train);

/// Labeled similarity vectors for every window of `window` snapshots,
/// advancing by `stride`, within each area.
std::vector<std::pair<SimilarityVector, AreaId>> window_features(
    const AreaModelSetMD& models, const Dataset& processed, int window,
    int stride);

/// Scores every test set with the trained models. 1d/md get a single
/// snapshot cell and a majority-vote cell; maxsim/svc get a set cell.
/// Test windows are disjoint and never straddle two areas.
AccuracyReport evaluate(const ExperimentSpec& spec, const TrainedModels& models,
                        std::span<const NamedDataset> tests);

/// preprocess -> fit -> evaluate on in-memory datasets (raw or processed).
/// The fitted models are handed back through `trained` when given.
AccuracyReport run_experiment(const ExperimentSpec& spec, const Dataset& train,
                              std::span<const NamedDataset> tests,
                              TrainedModels* trained = nullptr);
/// Loads the spec's files, runs, and writes the report when report_path is
/// set.
AccuracyReport run_experiment(const ExperimentSpec& spec);

/// Percentage with one decimal, rounded half up: 0.7715 -> "77.2".
std::string format_percent(double accuracy);

/// Table with one row per method x window mode and one column per test set.
std::string render_report(const AccuracyReport& report, ReportFormat format);
void emit_report(const AccuracyReport& report, ReportFormat format,
                 const std::filesystem::path& path);

/// Parsed CSV report cell: (method label, mode label, test set) -> percent.
struct ReportEntry {
  std::string method;
  std::string mode;
  std::string test_set;
  double percent = 0.0;
};
std::vector<ReportEntry> parse_report_csv(const std::string& text);

/// Median over 5 timed repetitions (after one warm-up) of the mean
/// per-snapshot score_1d time divided by the mean score_md time.
double compare_runtime(const AreaModelSet1D& models_1d,
                       const AreaModelSetMD& models_md,
                       std::span<const MagnitudeVector> probes);

/// Sizes used when running a shipped scenario end to end.
struct ScenarioRun {
  int train_per_area = 1000;
  int test_per_area = 1000;
  double layout_change = 0.3;
  bool with_layout_change = true;
};

/// Generates training set A1, same-layout test set A2 and (optionally) a
/// perturbed-layout test set B from a scenario, then runs the experiment.
/// Test sets are named "<scenario> A1->A2" and "<scenario> A1->B".
AccuracyReport run_scenario(const std::string& name, const SimConfig& cfg,
                            const ExperimentSpec& spec, const ScenarioRun& run,
                            TrainedModels* trained = nullptr);

}  // namespace cirloc
