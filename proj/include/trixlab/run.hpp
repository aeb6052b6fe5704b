#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trixlab/data.hpp"
#include "trixlab/metrics.hpp"
#include "trixlab/training.hpp"

namespace trixlab {

// A radius either given as an exact n/255 rational or as a plain decimal.
struct Epsilon {
  std::optional<int> numerator_255;
  double value = 0.0;

  static Epsilon from_255(int numerator) { return {numerator, numerator / 255.0}; }
  static Epsilon parse(const std::string& text);  // "8/255" or a decimal such as "0.1"
  static Epsilon from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::string label() const;
};

enum class DataKind { Synthetic, Idx, Csv };

struct DataSpec {
  DataKind kind = DataKind::Synthetic;
  SynthConfig synth;
  std::size_t test_samples_per_class = 500;
  std::uint64_t test_seed = 1;
  std::filesystem::path train_images, train_labels, test_images, test_labels;  // idx
  std::filesystem::path train_csv, test_csv;                                   // csv
  std::optional<std::size_t> num_classes;

  Dataset load_train() const;
  Dataset load_test() const;
};

struct RunConfig {
  nlohmann::json resolved;  // every field explicit
  DataSpec data;
  TrainConfig train;
  Epsilon train_eps;
  Epsilon eval_eps;
};

// Built-in defaults for the desk-scale experiment.
nlohmann::json default_config_json();

// Applies "a.b.c" = value overrides; values are parsed as JSON when possible
// and kept as strings otherwise.
void apply_overrides(nlohmann::json& config, const std::vector<std::pair<std::string, std::string>>& overrides);

// Merges the user JSON over the defaults and validates every field. Throws
// ConfigError naming the offending field.
RunConfig resolve_config(const nlohmann::json& user);
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Git-style blob hash (SHA-1 of "blob <len>\0<content>") in hex.
std::string content_hash(const std::string& content);

std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

nlohmann::json record_to_json(const EpochRecord& record);

struct RunArtifacts {
  std::filesystem::path dir;
  TrainResult result;
  std::vector<std::optional<double>> clean_acc;   // final, on the test split
  std::vector<std::optional<double>> robust_acc;
};

// Trains per the config and writes config.json, metrics.jsonl, model.json,
// report.csv and manifest.json into out_dir (created if needed).
RunArtifacts execute_run(const RunConfig& config, const std::filesystem::path& out_dir);
std::string default_run_id(std::uint64_t seed);

// One row per (class, radius): clean and PGD accuracy.
struct SweepRow {
  std::size_t cls = 0;
  Epsilon eps;
  std::optional<double> clean_acc;
  std::optional<double> robust_acc;
};

std::vector<SweepRow> evaluate_sweep(const MlpClassifier& model, const Dataset& data, const std::vector<Epsilon>& radii,
                                     const AttackConfig& base, std::optional<double> step_size = std::nullopt);
// "a:b:s" with integer numerators over 255, inclusive.
std::vector<Epsilon> parse_eps_sweep(const std::string& text);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

// report.csv (header class,clean_acc,robust_acc) or a summary CSV
// (header split,avg,worst with rows clean and robust).
struct AccuracyTable {
  std::optional<ClassAccuracyVector> clean;
  std::optional<ClassAccuracyVector> robust;
  std::optional<WorstAvg> clean_summary;
  std::optional<WorstAvg> robust_summary;

  std::optional<WorstAvg> clean_worst_avg() const;
  std::optional<WorstAvg> robust_worst_avg() const;
};

AccuracyTable read_accuracy_table(const std::filesystem::path& path);  // file or run dir
std::string accuracy_table_csv(const std::vector<std::optional<double>>& clean,
                               const std::vector<std::optional<double>>& robust);
nlohmann::json report_metrics(const AccuracyTable& variant, const AccuracyTable* baseline);

}  // namespace trixlab
