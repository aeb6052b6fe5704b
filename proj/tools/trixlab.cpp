#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "trixlab/errors.hpp"
#include "trixlab/metrics.hpp"
#include "trixlab/run.hpp"

namespace fs = std::filesystem;
using namespace trixlab;
using nlohmann::json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

// Leftover "--a.b value" or "--a.b=value" pairs become config overrides.
std::vector<std::pair<std::string, std::string>> dotted_overrides(const std::vector<std::string>& rest) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const std::string& arg = rest[i];
    if (arg.rfind("--", 0) != 0 || arg.find('.') == std::string::npos) {
      throw ConfigError("unexpected argument '" + arg + "'");
    }
    const std::string body = arg.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= rest.size()) throw ConfigError("override " + arg + " needs a value");
      out.emplace_back(body, rest[++i]);
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

struct DataFlags {
  std::string config;
  std::string csv;
  std::string idx_images;
  std::string idx_labels;
  std::string split = "test";
  std::optional<std::size_t> num_classes;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "Run config whose data section defines the dataset");
    app->add_option("--csv", csv, "CSV dataset (label,x0,...)");
    app->add_option("--idx-images", idx_images, "IDX image file");
    app->add_option("--idx-labels", idx_labels, "IDX label file");
    app->add_option("--split", split, "train or test (with --config)")->check(CLI::IsMember({"train", "test"}));
    app->add_option("--num-classes", num_classes, "Class count for CSV/IDX input");
  }

  Dataset load() const {
    const int given = !config.empty() + !csv.empty() + (!idx_images.empty() || !idx_labels.empty());
    if (given != 1) throw ConfigError("give exactly one of --config, --csv or --idx-images/--idx-labels");
    if (!csv.empty()) return read_csv(csv, num_classes);
    if (!idx_images.empty() || !idx_labels.empty()) {
      if (idx_images.empty() || idx_labels.empty()) throw ConfigError("--idx-images and --idx-labels go together");
      return load_idx(idx_images, idx_labels, num_classes);
    }
    const RunConfig rc = load_config(config);
    return split == "train" ? rc.data.load_train() : rc.data.load_test();
  }
};

void check_compatible(const MlpClassifier& model, const Dataset& data) {
  if (model.input_dim() != data.dim() || model.num_classes() != data.num_classes) {
    throw ConfigError("checkpoint expects " + std::to_string(model.input_dim()) + " features and " +
                      std::to_string(model.num_classes()) + " classes; dataset has " + std::to_string(data.dim()) +
                      " and " + std::to_string(data.num_classes));
  }
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& method,
              std::optional<double> beta, const std::string& out, const std::vector<std::string>& rest) {
  auto overrides = dotted_overrides(rest);
  if (seed) overrides.emplace_back("seed", std::to_string(*seed));
  if (!method.empty()) overrides.emplace_back("train.method", json(method).dump());
  if (beta) overrides.emplace_back("train.beta", format_double(*beta));
  const RunConfig rc = load_config(config_path, overrides);
  const fs::path dir = out.empty() ? fs::path("runs") / default_run_id(rc.train.seed) : fs::path(out);
  const RunArtifacts art = execute_run(rc, dir);
  const auto clean = worst_avg(ClassAccuracyVector{art.clean_acc});
  const auto robust = worst_avg(ClassAccuracyVector{art.robust_acc});
  std::cout << "run " << dir.string() << "\n"
            << "clean  avg " << format_double(clean.avg) << " worst " << format_double(clean.worst) << "\n"
            << "robust avg " << format_double(robust.avg) << " worst " << format_double(robust.worst) << "\n";
  return 0;
}

struct EvalFlags {
  std::string model;
  DataFlags data;
  std::string eps = "8/255";
  std::string eps_sweep;
  int steps = 20;
  std::optional<std::string> step_size;
  std::string mode = "untargeted_ce";
  std::uint64_t seed = 0;
  bool no_random_start = false;
  std::string out;
};

int cmd_eval(const EvalFlags& f) {
  const MlpClassifier model = load_model(f.model);
  const Dataset data = f.data.load();
  check_compatible(model, data);
  std::vector<Epsilon> radii = f.eps_sweep.empty() ? std::vector<Epsilon>{Epsilon::parse(f.eps)}
                                                   : parse_eps_sweep(f.eps_sweep);
  AttackConfig base = AttackConfig::evaluation_default(radii.back().value > 0 ? radii.back().value : 1.0, f.seed);
  base.num_steps = f.steps;
  base.mode = attack_mode_from_string(f.mode);
  if (base.mode == AttackMode::TargetedCe) throw ConfigError("--mode targeted_ce needs per-sample targets; use untargeted_ce or untargeted_kl");
  base.random_start = !f.no_random_start;
  std::optional<double> step;
  if (f.step_size) step = Epsilon::parse(*f.step_size).value;
  write_text(f.out, sweep_to_csv(evaluate_sweep(model, data, radii, base, step)));
  return 0;
}

int cmd_report(const std::string& variant, const std::string& baseline, const std::string& out) {
  const AccuracyTable v = read_accuracy_table(variant);
  std::optional<AccuracyTable> b;
  if (!baseline.empty()) b = read_accuracy_table(baseline);
  const json metrics = report_metrics(v, b ? &*b : nullptr);
  write_text(out, metrics.dump(2) + "\n");
  return 0;
}

struct AnalyzeFlags {
  std::string which;
  std::string model;
  DataFlags data;
  bool attack = false;
  std::string eps = "8/255";
  std::size_t k = 3;
  std::size_t bins = 1000;
  std::uint64_t seed = 0;
  std::optional<std::size_t> classes;
  double r = 1.0;
  double spacing = 1.0;
  std::string out;
};

int analyze_pca(const AnalyzeFlags& f) {
  const MlpClassifier model = load_model(f.model);
  const Dataset data = f.data.load();
  check_compatible(model, data);
  Tensor inputs = data.inputs;
  if (f.attack) {
    AttackConfig cfg = AttackConfig::evaluation_default(Epsilon::parse(f.eps).value, f.seed);
    inputs = pgd_attack(model, data.inputs, data.labels, cfg);
  }
  const Tensor features = model.predict(inputs).features;
  const PcaResult pca = pca_project(features, f.k);
  if (pca.rank < f.k) {
    std::cerr << "warning: feature covariance has rank " << pca.rank << " < k=" << f.k
              << "; trailing components are arbitrary\n";
  }
  std::string csv = "class";
  for (std::size_t j = 0; j < f.k; ++j) csv += ",pc" + std::to_string(j + 1);
  csv += "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    csv += std::to_string(data.labels[i]);
    for (std::size_t j = 0; j < f.k; ++j) csv += "," + format_double(pca.coordinates(i, j));
    csv += "\n";
  }
  write_text(f.out.empty() ? "pca.csv" : f.out, csv);
  json summary;
  summary["eigenvalues"] = pca.eigenvalues;
  summary["rank"] = pca.rank;
  if (pca.rank < f.k) summary["warning"] = "rank " + std::to_string(pca.rank) + " < k";
  std::cout << summary.dump() << "\n";
  return 0;
}

int analyze_coverage(const AnalyzeFlags& f) {
  const MlpClassifier model = load_model(f.model);
  const Dataset data = f.data.load();
  check_compatible(model, data);
  const Tensor features = model.predict(data.inputs).features;
  std::vector<std::vector<std::size_t>> rows(data.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) rows[static_cast<std::size_t>(data.labels[i])].push_back(i);
  std::vector<Tensor> per_class;
  for (const auto& idx : rows) {
    if (idx.empty()) {
      per_class.emplace_back();
      continue;
    }
    std::vector<double> values;
    for (std::size_t i : idx) {
      auto r = features.row(i);
      values.insert(values.end(), r.begin(), r.end());
    }
    per_class.push_back(Tensor::matrix(idx.size(), features.cols(), std::move(values)));
  }
  const CoverageResult cov = feature_space_coverage(per_class, f.bins, f.seed);
  std::string csv = "class,samples,occupied,zero_excluded,coverage\n";
  for (std::size_t c = 0; c < data.num_classes; ++c) {
    csv += std::to_string(c) + "," + std::to_string(rows[c].size()) + "," + std::to_string(cov.occupied[c]) + "," +
           std::to_string(cov.zero_excluded[c]) + "," + format_double(cov.coverage[c]) + "\n";
  }
  write_text(f.out.empty() ? "coverage.csv" : f.out, csv);
  return 0;
}

int analyze_ovo_ova(const AnalyzeFlags& f) {
  if (!f.classes) throw ConfigError("ovo-ova needs --k (number of classes)");
  const OvoOvaResult res = ovo_ova_min_weights(*f.classes, f.r, f.spacing);
  json out;
  json ovo = json::array();
  for (std::size_t i = 0; i < res.ovo.rows(); ++i) {
    auto row = res.ovo.row(i);
    ovo.push_back(std::vector<double>(row.begin(), row.end()));
  }
  out["ovo"] = ovo;
  json ova = json::array();
  for (const auto& o : res.ova) {
    ova.push_back(o.feasible ? json{{"feasible", true}, {"min_weight", o.min_weight}}
                             : json{{"feasible", false}, {"min_weight", nullptr}});
  }
  out["ova"] = ova;
  write_text(f.out, out.dump(2) + "\n");
  return 0;
}

int cmd_analyze(AnalyzeFlags& f) {
  if (f.which == "pca") return analyze_pca(f);
  if (f.which == "coverage") return analyze_coverage(f);
  if (f.which == "ovo-ova") {
    return analyze_ovo_ova(f);
  }
  throw ConfigError("unknown analysis '" + f.which + "' (expected pca, coverage or ovo-ova)");
}

int cmd_export(const DataFlags& data, const std::string& csv, const std::string& images, const std::string& labels) {
  const Dataset d = data.load();
  if (csv.empty() && images.empty()) throw ConfigError("give --out-csv or --out-idx-images/--out-idx-labels");
  if (!csv.empty()) write_csv(d, csv);
  if (!images.empty()) {
    if (labels.empty()) throw ConfigError("--out-idx-labels is required with --out-idx-images");
    write_idx(d, images, labels);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trixlab: class-aware adversarial training experiments"};
  app.require_subcommand(1);

  std::string train_config, train_method, train_out;
  std::optional<std::uint64_t> train_seed;
  std::optional<double> train_beta;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a run directory");
  train_cmd->add_option("--config", train_config, "JSON config")->required();
  train_cmd->add_option("--seed", train_seed, "Run seed");
  train_cmd->add_option("--method", train_method, "trades, targeted_trades or trix");
  train_cmd->add_option("--beta", train_beta, "Adversarial term weight");
  train_cmd->add_option("--out", train_out, "Run directory (default runs/<timestamp>-s<seed>)");
  train_cmd->allow_extras();
  train_cmd->footer("Any config field can be overridden as --section.field value, e.g. --train.tau 20");

  EvalFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval", "Per-class clean and PGD accuracy of a checkpoint");
  eval_cmd->add_option("--model", eval_flags.model, "model.json")->required();
  eval_flags.data.add_to(eval_cmd);
  eval_cmd->add_option("--eps", eval_flags.eps, "Radius, n/255 or decimal");
  eval_cmd->add_option("--eps-sweep", eval_flags.eps_sweep, "start:stop:step numerators over 255");
  eval_cmd->add_option("--steps", eval_flags.steps, "PGD steps");
  eval_cmd->add_option("--step-size", eval_flags.step_size, "PGD step (default eps/10)");
  eval_cmd->add_option("--mode", eval_flags.mode, "untargeted_ce or untargeted_kl");
  eval_cmd->add_option("--seed", eval_flags.seed, "Attack seed");
  eval_cmd->add_flag("--no-random-start", eval_flags.no_random_start, "Start PGD at the clean input");
  eval_cmd->add_option("--out", eval_flags.out, "CSV path (default stdout)");

  std::string report_variant, report_baseline, report_out = "metrics.json";
  auto* report_cmd = app.add_subcommand("report", "Fairness metrics from run directories or CSVs");
  report_cmd->add_option("--variant", report_variant, "Run dir, report.csv or summary CSV")->required();
  report_cmd->add_option("--baseline", report_baseline, "Baseline for rho");
  report_cmd->add_option("--out", report_out, "Output JSON (- for stdout)");

  AnalyzeFlags analyze_flags;
  auto* analyze_cmd = app.add_subcommand("analyze", "pca, coverage or ovo-ova");
  analyze_cmd->add_option("which", analyze_flags.which, "Analysis name")->required();
  analyze_cmd->add_option("--model", analyze_flags.model, "model.json");
  analyze_flags.data.add_to(analyze_cmd);
  analyze_cmd->add_flag("--attack", analyze_flags.attack, "Project PGD adversarial features (pca)");
  analyze_cmd->add_option("--eps", analyze_flags.eps, "Attack radius for --attack");
  analyze_cmd->add_option("--components", analyze_flags.k, "PCA components");
  analyze_cmd->add_option("--bins", analyze_flags.bins, "Coverage bins");
  analyze_cmd->add_option("--seed", analyze_flags.seed, "Seed for bins or attack");
  analyze_cmd->add_option("--k", analyze_flags.classes, "Number of classes (ovo-ova)");
  analyze_cmd->add_option("--r", analyze_flags.r, "Margin R (ovo-ova)");
  analyze_cmd->add_option("--spacing", analyze_flags.spacing, "Representative spacing (ovo-ova)");
  analyze_cmd->add_option("--out", analyze_flags.out, "Output path");

  DataFlags export_data;
  std::string export_csv, export_images, export_labels;
  auto* export_cmd = app.add_subcommand("export-data", "Write a dataset as CSV or IDX");
  export_data.add_to(export_cmd);
  export_cmd->add_option("--out-csv", export_csv, "CSV output");
  export_cmd->add_option("--out-idx-images", export_images, "IDX images output");
  export_cmd->add_option("--out-idx-labels", export_labels, "IDX labels output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*train_cmd) {
      return cmd_train(train_config, train_seed, train_method, train_beta, train_out, train_cmd->remaining());
    }
    if (*eval_cmd) return cmd_eval(eval_flags);
    if (*report_cmd) return cmd_report(report_variant, report_baseline, report_out);
    if (*analyze_cmd) return cmd_analyze(analyze_flags);
    if (*export_cmd) return cmd_export(export_data, export_csv, export_images, export_labels);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
