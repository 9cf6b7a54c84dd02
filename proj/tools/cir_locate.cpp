// cir-locate: simulate, preprocess, train, evaluate and report.

#include "cirloc/bundle.hpp"
#include "cirloc/errors.hpp"
#include "cirloc/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace cirloc;

constexpr int kExitSpec = 2;
constexpr int kExitData = 3;

DatasetFormat format_for(const std::string& flag, const std::filesystem::path& path) {
  if (!flag.empty()) return parse_format(flag);
  return path.extension() == ".csv" ? DatasetFormat::csv : DatasetFormat::binary;
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) {
    if (n == "all") {
      return {Method::gmm_1d, Method::gmm_md, Method::maxsim, Method::svc};
    }
    const Method m = parse_method(n);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

/// "name=path" or a bare path (named after its stem).
NamedPath parse_named(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) {
    const std::filesystem::path p(arg);
    return {p.stem().string(), p};
  }
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << text;
}

struct Options {
  std::string scenario = "separable";
  std::string in;
  std::vector<std::string> tests;
  std::string out;
  std::string model;
  std::string format;
  std::string report_format = "markdown";
  std::vector<std::string> methods = {"all"};
  int vote_window = 100;
  std::optional<std::uint64_t> seed;
  std::optional<double> perturb;
  int per_area = 1000;
  int probes = 1000;
  std::string config_out;
};

int cmd_simulate(const Options& o) {
  SimConfig cfg = benchmark_scenario(o.scenario);
  if (o.perturb) cfg = perturb_layout(cfg, *o.perturb, cfg.seed + 2);
  if (o.seed) cfg.seed = *o.seed;
  cfg.snapshots_per_area = o.per_area;
  save_dataset(generate_dataset(cfg), o.out, format_for(o.format, o.out));
  if (!o.config_out.empty()) {
    nlohmann::json j = cfg;
    write_text(j.dump(2) + "\n", o.config_out);
  }
  return 0;
}

int cmd_preprocess(const Options& o) {
  const Dataset raw = load_dataset(o.in, format_for(o.format, o.in));
  save_dataset(preprocess_dataset(raw, {}), o.out, format_for(o.format, o.out));
  return 0;
}

ExperimentSpec spec_from(const Options& o) {
  ExperimentSpec spec;
  spec.methods = parse_methods(o.methods);
  spec.vote_window = o.vote_window;
  if (o.seed) {
    spec.fit_1d.seed = spec.fit_md.seed = spec.svc.seed = *o.seed;
  }
  spec.report_format = parse_report_format(o.report_format);
  validate_spec(spec);
  return spec;
}

int cmd_train(const Options& o) {
  const ExperimentSpec spec = spec_from(o);
  const Dataset train = load_dataset(o.in, format_for(o.format, o.in));
  TrainedModels models = train_models(spec, train);
  ModelBundle bundle;
  bundle.gmm_1d = std::move(models.gmm_1d);
  bundle.gmm_md = std::move(models.gmm_md);
  bundle.svc = std::move(models.svc);
  bundle.fit_1d = spec.fit_1d;
  bundle.fit_md = spec.fit_md;
  bundle.svc_window = bundle.svc ? spec.vote_window : 0;
  save_bundle(bundle, o.out);
  return 0;
}

int cmd_eval(const Options& o) {
  ExperimentSpec spec = spec_from(o);
  ModelBundle bundle = load_bundle(o.model);
  if (bundle.svc && bundle.svc_window != spec.vote_window &&
      std::find(spec.methods.begin(), spec.methods.end(), Method::svc) != spec.methods.end()) {
    throw SpecError("SVC was trained with window " + std::to_string(bundle.svc_window) +
                    ", not " + std::to_string(spec.vote_window));
  }
  TrainedModels models{bundle.gmm_1d, bundle.gmm_md, bundle.svc};
  std::vector<NamedDataset> tests;
  for (const auto& t : o.tests) {
    const NamedPath np = parse_named(t);
    tests.push_back({np.name, load_dataset(np.path, format_for(o.format, np.path))});
  }
  const AccuracyReport report = evaluate(spec, models, tests);
  write_text(render_report(report, spec.report_format), o.out);
  return 0;
}

int cmd_report(const Options& o) {
  const ExperimentSpec spec = spec_from(o);
  ScenarioRun run;
  run.train_per_area = o.per_area;
  run.test_per_area = o.per_area;
  run.layout_change = o.perturb.value_or(0.3);
  AccuracyReport all;
  for (auto& [name, cfg] : benchmark_scenarios()) {
    if (o.scenario != "all" && o.scenario != name) continue;
    if (o.seed) cfg.seed = *o.seed;
    all.merge(run_scenario(name, cfg, spec, run));
  }
  if (all.cells.empty()) throw SpecError("unknown scenario '" + o.scenario + "'");
  write_text(render_report(all, spec.report_format), o.out);
  return 0;
}

int cmd_bench(const Options& o) {
  SimConfig cfg = benchmark_scenario(o.scenario);
  if (o.seed) cfg.seed = *o.seed;
  cfg.snapshots_per_area = o.per_area;
  const Dataset train = preprocess_dataset(generate_dataset(cfg), {});
  const auto m1 = fit_area_models_1d(train, FitConfig::univariate());
  const auto md = fit_area_models_md(train, FitConfig::multivariate());
  cfg.seed += 1;
  cfg.snapshots_per_area =
      std::max(1, (o.probes + static_cast<int>(cfg.profiles.size()) - 1) /
                      static_cast<int>(cfg.profiles.size()));
  const Dataset probe_set = preprocess_dataset(generate_dataset(cfg), {});
  std::vector<MagnitudeVector> probes;
  for (const auto& s : probe_set.snapshots()) probes.push_back(magnitude(s));
  const double ratio = compare_runtime(m1, md, probes);
  std::cout << "scenario " << o.scenario << ": 1D/MD scoring time ratio " << ratio
            << " over " << probes.size() << " probes\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-anchor UWB localization from CIR statistics"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { o.seed = s; }, "Override the seed");
  };
  auto add_methods = [&](CLI::App* c) {
    c->add_option("--method", o.methods, "1d, md, maxsim, svc or all (repeatable)")
        ->capture_default_str();
    c->add_option("--vote-window", o.vote_window, "Window length T")->capture_default_str();
  };

  auto* sim = app.add_subcommand("simulate", "Generate a labeled raw CIR dataset");
  sim->add_option("--scenario", o.scenario, "separable, los or nlos")->capture_default_str();
  sim->add_option("--out", o.out, "Output dataset")->required();
  sim->add_option("--format", o.format, "csv or binary (default: by extension)");
  sim->add_option_function<double>(
      "--perturb", [&](const double& m) { o.perturb = m; }, "Layout change magnitude in [0, 1]");
  sim->add_option("--per-area", o.per_area, "Snapshots per area")->capture_default_str();
  sim->add_option("--config-out", o.config_out, "Write the scenario profile as JSON");
  add_seed(sim);

  auto* pre = app.add_subcommand("preprocess", "Band-select raw 50-bin CIRs to 25 bins");
  pre->add_option("--in", o.in, "Raw dataset")->required();
  pre->add_option("--out", o.out, "Processed dataset")->required();
  pre->add_option("--format", o.format, "csv or binary (default: by extension)");

  auto* train = app.add_subcommand("train", "Fit models and write a bundle");
  train->add_option("--in", o.in, "Training dataset")->required();
  train->add_option("--out", o.out, "Model bundle")->required();
  train->add_option("--format", o.format, "csv or binary (default: by extension)");
  add_methods(train);
  add_seed(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a bundle on test sets");
  eval->add_option("--model", o.model, "Model bundle")->required();
  eval->add_option("--in", o.tests, "Test dataset, optionally name=path (repeatable)")
      ->required();
  eval->add_option("--out", o.out, "Report file (default: stdout)");
  eval->add_option("--format", o.format, "Dataset format (default: by extension)");
  eval->add_option("--report-format", o.report_format, "markdown or csv")
      ->capture_default_str();
  add_methods(eval);

  auto* report = app.add_subcommand("report", "Run the shipped scenarios end to end");
  report->add_option("--scenario", o.scenario, "separable, los, nlos or all")
      ->capture_default_str();
  report->add_option("--out", o.out, "Report file (default: stdout)");
  report->add_option("--report-format", o.report_format, "markdown or csv")
      ->capture_default_str();
  report->add_option("--per-area", o.per_area, "Snapshots per area and set")
      ->capture_default_str();
  report->add_option_function<double>(
      "--perturb", [&](const double& m) { o.perturb = m; }, "Layout change magnitude");
  add_methods(report);
  add_seed(report);

  auto* bench = app.add_subcommand("bench", "Compare 1D and MD scoring time");
  bench->add_option("--scenario", o.scenario, "separable, los or nlos")->capture_default_str();
  bench->add_option("--per-area", o.per_area, "Training snapshots per area")
      ->capture_default_str();
  bench->add_option("--probes", o.probes, "Number of probe snapshots")->capture_default_str();
  add_seed(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitSpec;
  }

  try {
    if (*sim) return cmd_simulate(o);
    if (*pre) return cmd_preprocess(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*report) return cmd_report(o);
    if (*bench) return cmd_bench(o);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSpec;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitSpec;
}
