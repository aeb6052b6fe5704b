#include "trixlab/run.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "trixlab/errors.hpp"
#include "trixlab/rng.hpp"

namespace trixlab {

using nlohmann::json;

namespace {

// Overlays user values onto defaults, rejecting keys the defaults do not know.
void merge_known(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("field " + (prefix.empty() ? std::string("<root>") : prefix) + ": expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown field " + path);
    if (base[key].is_object() && !value.is_null()) {
      merge_known(base[key], value, path);
    } else {
      base[key] = value;
    }
  }
}

template <typename T>
T field(const json& root, const std::string& path) {
  const json* node = &root;
  std::stringstream parts(path);
  std::string part;
  while (std::getline(parts, part, '.')) node = &node->at(part);
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field " + path + ": invalid value " + node->dump());
  }
}

bool is_null(const json& root, const std::string& path) {
  const json* node = &root;
  std::stringstream parts(path);
  std::string part;
  while (std::getline(parts, part, '.')) node = &node->at(part);
  return node->is_null();
}

json& node_at(json& root, const std::string& path) {
  json* node = &root;
  std::stringstream parts(path);
  std::string part;
  while (std::getline(parts, part, '.')) node = &(*node)[part];
  return *node;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json optional_array(const std::vector<std::optional<double>>& values) {
  json out = json::array();
  for (const auto& v : values) out.push_back(v ? json(*v) : json(nullptr));
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  return s;
}

std::optional<double> parse_cell(const std::string& cell, const std::string& where) {
  const std::string t = trim(cell);
  if (t.empty() || t == "nan" || t == "NA" || t == "null") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw FormatError(where + ": '" + t + "' is not a number");
  }
}

json accuracy_json(const ClassAccuracyVector& acc) {
  json out;
  out["per_class"] = optional_array(acc.values);
  const auto wa = worst_avg(acc);
  out["worst"] = wa.worst;
  out["avg"] = wa.avg;
  if (acc.present().size() >= 2) {
    const Disparity d = disparity(acc);
    out["disparity"] = {{"std_dev", d.std_dev}, {"min_max", d.min_max}, {"variance", d.variance},
                        {"avg", d.avg}, {"min", d.min}};
  }
  return out;
}

json table_json(const AccuracyTable& t) {
  json out = json::object();
  if (t.clean) {
    out["clean"] = accuracy_json(*t.clean);
  } else if (t.clean_summary) {
    out["clean"] = {{"worst", t.clean_summary->worst}, {"avg", t.clean_summary->avg}};
  }
  if (t.robust) {
    out["robust"] = accuracy_json(*t.robust);
    std::vector<std::optional<double>> asr;
    for (const auto& v : t.robust->values) asr.push_back(v ? std::optional<double>(1.0 - *v) : std::nullopt);
    out["asr_untargeted"] = optional_array(asr);
  } else if (t.robust_summary) {
    out["robust"] = {{"worst", t.robust_summary->worst}, {"avg", t.robust_summary->avg}};
  }
  if (t.clean && t.robust) out["nonrobust_drop"] = optional_array(nonrobust_drop(*t.clean, *t.robust));
  return out;
}

std::size_t table_classes(const AccuracyTable& t) {
  if (t.clean) return t.clean->num_classes();
  if (t.robust) return t.robust->num_classes();
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Epsilon

Epsilon Epsilon::parse(const std::string& text) {
  const std::string t = trim(text);
  if (const auto slash = t.find('/'); slash != std::string::npos) {
    int num = 0, den = 0;
    const auto* begin = t.data();
    auto r1 = std::from_chars(begin, begin + slash, num);
    auto r2 = std::from_chars(begin + slash + 1, begin + t.size(), den);
    if (r1.ec != std::errc() || r1.ptr != begin + slash || r2.ec != std::errc() || r2.ptr != begin + t.size() ||
        den != 255 || num < 0) {
      throw ConfigError("epsilon '" + text + "': rationals must be written n/255 with n >= 0");
    }
    return from_255(num);
  }
  double v = 0.0;
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size() || !(v >= 0.0) || v > 1.0) {
    throw ConfigError("epsilon '" + text + "': expected n/255 or a decimal in [0, 1]");
  }
  return {std::nullopt, v};
}

Epsilon Epsilon::from_json(const json& j) {
  if (j.is_string()) return parse(j.get<std::string>());
  if (j.is_number()) {
    const double v = j.get<double>();
    if (!(v >= 0.0) || v > 1.0) throw ConfigError("epsilon " + j.dump() + " outside [0, 1]");
    return {std::nullopt, v};
  }
  throw ConfigError("epsilon must be \"n/255\" or a number, got " + j.dump());
}

json Epsilon::to_json() const {
  if (numerator_255) return std::to_string(*numerator_255) + "/255";
  return value;
}

std::string Epsilon::label() const {
  if (numerator_255) return std::to_string(*numerator_255) + "/255";
  return format_double(value);
}

// ---------------------------------------------------------------------------
// Data

Dataset DataSpec::load_train() const {
  switch (kind) {
    case DataKind::Synthetic:
      return synth_gaussian_mixture(synth);
    case DataKind::Idx:
      return load_idx(train_images, train_labels, num_classes);
    case DataKind::Csv:
      return read_csv(train_csv, num_classes);
  }
  throw ConfigError("unknown data kind");
}

Dataset DataSpec::load_test() const {
  switch (kind) {
    case DataKind::Synthetic: {
      SynthConfig cfg = synth;
      cfg.samples_per_class = test_samples_per_class;
      cfg.seed = test_seed;
      return synth_gaussian_mixture(cfg);
    }
    case DataKind::Idx:
      if (test_images.empty()) return load_train();
      return load_idx(test_images, test_labels, num_classes);
    case DataKind::Csv:
      if (test_csv.empty()) return load_train();
      return read_csv(test_csv, num_classes);
  }
  throw ConfigError("unknown data kind");
}

// ---------------------------------------------------------------------------
// Config

json default_config_json() {
  return json::parse(R"({
    "seed": 0,
    "data": {
      "kind": "synthetic",
      "num_classes": 4,
      "dim": 8,
      "samples_per_class": 500,
      "test_samples_per_class": 500,
      "std": 1.0,
      "layout_unit": null,
      "strong_separation": 6.0,
      "weak_separation": 1.5,
      "pair_offset": 3.0,
      "centers": null,
      "seed": 0,
      "test_seed": 1,
      "train_images": null, "train_labels": null,
      "test_images": null, "test_labels": null,
      "train_csv": null, "test_csv": null
    },
    "model": {"hidden": [64, 64]},
    "train": {
      "method": "trix",
      "beta": 6.0,
      "lambda": 1.0,
      "mu": 1e-8,
      "tau": 30,
      "epochs": 60,
      "batch_size": 128,
      "lr": 0.1,
      "lr_decay_epochs": null,
      "lr_decay_factor": 0.1,
      "momentum": 0.9,
      "weight_decay": 5e-4,
      "nesterov": true,
      "stats": "epoch",
      "weight_average": "batch",
      "robust_stats": "untargeted",
      "eps_scale_min": 0.5,
      "eps_scale_max": 1.5,
      "eval_every": 0
    },
    "attack": {
      "train": {"epsilon": 0.1, "step_size": null, "steps": 10, "random_start": true},
      "eval": {"epsilon": 0.1, "step_size": null, "steps": 20, "random_start": true, "mode": "untargeted_ce"}
    }
  })");
}

void apply_overrides(json& config, const std::vector<std::pair<std::string, std::string>>& overrides) {
  for (const auto& [key, text] : overrides) {
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;
    }
    node_at(config, key) = value;
  }
}

RunConfig resolve_config(const json& user) {
  json c = default_config_json();
  merge_known(c, user, "");
  RunConfig rc;

  const auto seed = field<std::uint64_t>(c, "seed");

  // data
  const auto kind = field<std::string>(c, "data.kind");
  DataSpec& data = rc.data;
  if (kind == "synthetic") {
    data.kind = DataKind::Synthetic;
    SynthConfig& s = data.synth;
    s.num_classes = field<std::size_t>(c, "data.num_classes");
    s.dim = field<std::size_t>(c, "data.dim");
    s.samples_per_class = field<std::size_t>(c, "data.samples_per_class");
    s.strong_separation = field<double>(c, "data.strong_separation");
    s.weak_separation = field<double>(c, "data.weak_separation");
    s.pair_offset = field<double>(c, "data.pair_offset");
    s.seed = field<std::uint64_t>(c, "data.seed");
    if (c["data"]["std"].is_array()) {
      s.class_std = field<std::vector<double>>(c, "data.std");
    } else {
      s.class_std.assign(s.num_classes, field<double>(c, "data.std"));
    }
    // The default layout is measured in the mean class std unless told otherwise.
    if (is_null(c, "data.layout_unit")) {
      double mean = 0.0;
      for (double v : s.class_std) mean += v;
      s.layout_unit = s.class_std.empty() ? 1.0 : mean / static_cast<double>(s.class_std.size());
    } else {
      s.layout_unit = field<double>(c, "data.layout_unit");
    }
    c["data"]["layout_unit"] = s.layout_unit;
    if (!is_null(c, "data.centers")) s.centers = field<std::vector<std::vector<double>>>(c, "data.centers");
    data.test_samples_per_class = field<std::size_t>(c, "data.test_samples_per_class");
    data.test_seed = field<std::uint64_t>(c, "data.test_seed");
    try {
      s.validate();
      if (s.centers.empty()) default_layout(s);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("field data: ") + e.what());
    }
    if (data.test_samples_per_class < 1) throw ConfigError("field data.test_samples_per_class: must be >= 1");
  } else if (kind == "idx") {
    data.kind = DataKind::Idx;
    if (is_null(c, "data.train_images") || is_null(c, "data.train_labels")) {
      throw ConfigError("field data.train_images/data.train_labels: required for kind idx");
    }
    data.train_images = field<std::string>(c, "data.train_images");
    data.train_labels = field<std::string>(c, "data.train_labels");
    if (!is_null(c, "data.test_images")) data.test_images = field<std::string>(c, "data.test_images");
    if (!is_null(c, "data.test_labels")) data.test_labels = field<std::string>(c, "data.test_labels");
    data.num_classes = field<std::size_t>(c, "data.num_classes");
  } else if (kind == "csv") {
    data.kind = DataKind::Csv;
    if (is_null(c, "data.train_csv")) throw ConfigError("field data.train_csv: required for kind csv");
    data.train_csv = field<std::string>(c, "data.train_csv");
    if (!is_null(c, "data.test_csv")) data.test_csv = field<std::string>(c, "data.test_csv");
    data.num_classes = field<std::size_t>(c, "data.num_classes");
  } else {
    throw ConfigError("field data.kind: unknown kind '" + kind + "' (expected synthetic, idx or csv)");
  }

  // train
  TrainConfig& t = rc.train;
  try {
    t.method = method_from_string(field<std::string>(c, "train.method"));
    t.stats = stats_granularity_from_string(field<std::string>(c, "train.stats"));
    t.weight_average = weight_average_from_string(field<std::string>(c, "train.weight_average"));
    t.robust_stats = robust_stats_source_from_string(field<std::string>(c, "train.robust_stats"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("field train: ") + e.what());
  }
  t.beta = field<double>(c, "train.beta");
  t.lambda = field<double>(c, "train.lambda");
  t.mu = field<double>(c, "train.mu");
  t.tau = field<int>(c, "train.tau");
  t.total_epochs = field<int>(c, "train.epochs");
  const auto batch = field<long long>(c, "train.batch_size");
  if (batch < 1) throw ConfigError("field train.batch_size: must be >= 1");
  t.batch_size = static_cast<std::size_t>(batch);
  t.lr.initial = field<double>(c, "train.lr");
  t.lr.decay_factor = field<double>(c, "train.lr_decay_factor");
  if (is_null(c, "train.lr_decay_epochs")) {
    t.lr.decay_epochs.clear();
    for (int d : {t.total_epochs - 10, t.total_epochs - 5}) {
      if (d >= 1) t.lr.decay_epochs.push_back(d);
    }
    c["train"]["lr_decay_epochs"] = t.lr.decay_epochs;
  } else {
    t.lr.decay_epochs = field<std::vector<int>>(c, "train.lr_decay_epochs");
  }
  t.optimizer.momentum = field<double>(c, "train.momentum");
  t.optimizer.weight_decay = field<double>(c, "train.weight_decay");
  t.optimizer.nesterov = field<bool>(c, "train.nesterov");
  t.eps_scaling.min_factor = field<double>(c, "train.eps_scale_min");
  t.eps_scaling.max_factor = field<double>(c, "train.eps_scale_max");
  t.eval_every = field<int>(c, "train.eval_every");
  const auto hidden = field<std::vector<long long>>(c, "model.hidden");
  t.hidden.clear();
  for (long long h : hidden) {
    if (h < 1) throw ConfigError("field model.hidden: sizes must be >= 1");
    t.hidden.push_back(static_cast<std::size_t>(h));
  }
  t.seed = seed;

  // attacks
  rc.train_eps = Epsilon::from_json(c["attack"]["train"]["epsilon"]);
  rc.eval_eps = Epsilon::from_json(c["attack"]["eval"]["epsilon"]);
  if (!(rc.train_eps.value > 0.0)) throw ConfigError("field attack.train.epsilon: must be > 0");
  if (!(rc.eval_eps.value > 0.0)) throw ConfigError("field attack.eval.epsilon: must be > 0");
  t.train_attack = AttackConfig::training_default(rc.train_eps.value, seed);
  t.eval_attack = AttackConfig::evaluation_default(rc.eval_eps.value, stream_seed(seed, 0xe7a1));
  if (!is_null(c, "attack.train.step_size")) {
    t.train_attack.step_size = Epsilon::from_json(c["attack"]["train"]["step_size"]).value;
  } else {
    c["attack"]["train"]["step_size"] = t.train_attack.step_size;
  }
  if (!is_null(c, "attack.eval.step_size")) {
    t.eval_attack.step_size = Epsilon::from_json(c["attack"]["eval"]["step_size"]).value;
  } else {
    c["attack"]["eval"]["step_size"] = t.eval_attack.step_size;
  }
  t.train_attack.num_steps = field<int>(c, "attack.train.steps");
  t.train_attack.random_start = field<bool>(c, "attack.train.random_start");
  t.eval_attack.num_steps = field<int>(c, "attack.eval.steps");
  t.eval_attack.random_start = field<bool>(c, "attack.eval.random_start");
  try {
    t.eval_attack.mode = attack_mode_from_string(field<std::string>(c, "attack.eval.mode"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("field attack.eval.mode: ") + e.what());
  }

  try {
    t.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  rc.resolved = std::move(c);
  return rc;
}

RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  json user;
  try {
    user = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": not valid JSON: " + e.what());
  }
  apply_overrides(user, overrides);
  return resolve_config(user);
}

std::string content_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

json record_to_json(const EpochRecord& r) {
  json j;
  j["epoch"] = r.epoch;
  j["loss"] = r.loss;
  j["ce"] = r.ce;
  j["adv_kl"] = r.adv_kl;
  j["lr"] = r.lr;
  j["clean_acc"] = optional_array(r.clean_acc);
  j["robust_acc"] = optional_array(r.robust_acc);
  j["class_weights"] = r.class_weights;
  if (r.similarity) {
    json rows = json::array();
    for (std::size_t i = 0; i < r.similarity->rows(); ++i) {
      auto row = r.similarity->row(i);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["similarity"] = std::move(rows);
  } else {
    j["similarity"] = nullptr;
  }
  j["targeted_samples"] = r.targeted_samples;
  if (!r.eval_clean_acc.empty()) {
    j["eval_clean_acc"] = optional_array(r.eval_clean_acc);
    j["eval_robust_acc"] = optional_array(r.eval_robust_acc);
  }
  return j;
}

std::string default_run_id(std::uint64_t seed) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream id;
  id << std::put_time(&tm, "%Y%m%dT%H%M%SZ") << "-s" << seed;
  return id.str();
}

std::string accuracy_table_csv(const std::vector<std::optional<double>>& clean,
                               const std::vector<std::optional<double>>& robust) {
  std::ostringstream out;
  out << "class,clean_acc,robust_acc\n";
  for (std::size_t c = 0; c < clean.size(); ++c) {
    out << c << ',' << format_optional(clean[c]) << ',' << format_optional(robust[c]) << '\n';
  }
  return out.str();
}

RunArtifacts execute_run(const RunConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string config_text = config.resolved.dump(2) + "\n";
  {
    std::ofstream out(out_dir / "config.json");
    out << config_text;
  }
  const Dataset train_set = config.data.load_train();
  const Dataset test_set = config.data.load_test();
  if (test_set.dim() != train_set.dim() || test_set.num_classes != train_set.num_classes) {
    throw ConfigError("field data: train and test splits differ in width or class count");
  }

  std::ofstream metrics(out_dir / "metrics.jsonl");
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) { metrics << record_to_json(r).dump() << '\n' << std::flush; };
  RunArtifacts art{out_dir, train(train_set, config.train, &test_set, hooks), {}, {}};

  save_model(art.result.model, out_dir / "model.json");
  const EpochRecord& last = art.result.records.back();
  art.clean_acc = last.eval_clean_acc;
  art.robust_acc = last.eval_robust_acc;
  {
    std::ofstream out(out_dir / "report.csv");
    out << accuracy_table_csv(art.clean_acc, art.robust_acc);
  }
  json manifest;
  manifest["run_id"] = out_dir.filename().string();
  manifest["seed"] = config.train.seed;
  manifest["config_hash"] = content_hash(config_text);
  manifest["artifacts"] = {{"config", "config.json"}, {"metrics", "metrics.jsonl"}, {"model", "model.json"},
                           {"report", "report.csv"}};
  std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << '\n';
  return art;
}

// ---------------------------------------------------------------------------
// Evaluation sweeps

std::vector<SweepRow> evaluate_sweep(const MlpClassifier& model, const Dataset& data, const std::vector<Epsilon>& radii,
                                     const AttackConfig& base, std::optional<double> step_size) {
  if (model.input_dim() != data.dim() || model.num_classes() != data.num_classes) {
    throw ConfigError("checkpoint architecture " + std::to_string(model.input_dim()) + "->" +
                      std::to_string(model.num_classes()) + " does not match the dataset (" +
                      std::to_string(data.dim()) + " features, " + std::to_string(data.num_classes) + " classes)");
  }
  const std::size_t c_count = data.num_classes;
  std::vector<std::vector<SweepRow>> by_class(c_count);
  for (const Epsilon& eps : radii) {
    std::vector<std::optional<double>> clean, robust;
    if (eps.value == 0.0) {
      const auto preds = argmax_rows(model.predict(data.inputs).logits);
      clean = classwise_accuracy(preds, data.labels, c_count).values;
      robust = clean;
    } else {
      AttackConfig cfg = base;
      cfg.epsilon = eps.value;
      cfg.step_size = step_size.value_or(eps.value / 10.0);
      cfg.validate();
      const EvalResult ev = evaluate(model, data, cfg);
      clean = ev.clean_acc;
      robust = ev.robust_acc;
    }
    for (std::size_t c = 0; c < c_count; ++c) by_class[c].push_back({c, eps, clean[c], robust[c]});
  }
  std::vector<SweepRow> rows;
  for (auto& v : by_class) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

std::vector<Epsilon> parse_eps_sweep(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw ConfigError("--eps-sweep expects start:stop:step (numerators over 255)");
  int v[3];
  for (int i = 0; i < 3; ++i) {
    const auto& p = parts[static_cast<std::size_t>(i)];
    auto r = std::from_chars(p.data(), p.data() + p.size(), v[i]);
    if (r.ec != std::errc() || r.ptr != p.data() + p.size()) {
      throw ConfigError("--eps-sweep: '" + p + "' is not an integer");
    }
  }
  if (v[0] < 0 || v[1] < v[0] || v[2] < 1 || v[1] > 255) {
    throw ConfigError("--eps-sweep needs 0 <= start <= stop <= 255 and step >= 1");
  }
  std::vector<Epsilon> out;
  for (int n = v[0]; n <= v[1]; n += v[2]) out.push_back(Epsilon::from_255(n));
  return out;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "class,epsilon,clean_acc,robust_acc\n";
  for (const auto& r : rows) {
    out << r.cls << ',' << r.eps.label() << ',' << format_optional(r.clean_acc) << ','
        << format_optional(r.robust_acc) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Reports

std::optional<WorstAvg> AccuracyTable::clean_worst_avg() const {
  if (clean) return worst_avg(*clean);
  return clean_summary;
}

std::optional<WorstAvg> AccuracyTable::robust_worst_avg() const {
  if (robust) return worst_avg(*robust);
  return robust_summary;
}

AccuracyTable read_accuracy_table(const std::filesystem::path& input) {
  const auto path = std::filesystem::is_directory(input) ? input / "report.csv" : input;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string header;
  std::getline(in, header);
  header = trim(header);
  AccuracyTable table;
  std::string line;
  std::size_t line_no = 1;
  if (header == "class,clean_acc,robust_acc") {
    std::vector<std::optional<double>> clean, robust;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto cells = split(trim(line), ',');
      const std::string where = path.string() + ":" + std::to_string(line_no);
      if (cells.size() != 3) throw FormatError(where + ": expected 3 columns");
      const auto cls = parse_cell(cells[0], where);
      if (!cls || *cls != static_cast<double>(clean.size())) {
        throw FormatError(where + ": classes must be listed in order starting at 0");
      }
      clean.push_back(parse_cell(cells[1], where));
      robust.push_back(parse_cell(cells[2], where));
    }
    if (clean.empty()) throw FormatError(path.string() + ": no rows");
    table.clean = ClassAccuracyVector{clean};
    table.robust = ClassAccuracyVector{robust};
    if (table.clean->present().empty()) table.clean.reset();
    if (table.robust->present().empty()) table.robust.reset();
  } else if (header == "split,avg,worst") {
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto cells = split(trim(line), ',');
      const std::string where = path.string() + ":" + std::to_string(line_no);
      if (cells.size() != 3) throw FormatError(where + ": expected 3 columns");
      const auto avg = parse_cell(cells[1], where);
      const auto worst = parse_cell(cells[2], where);
      if (!avg || !worst) throw FormatError(where + ": avg and worst are required");
      const std::string split_name = trim(cells[0]);
      if (split_name == "clean") {
        table.clean_summary = WorstAvg{*worst, *avg};
      } else if (split_name == "robust") {
        table.robust_summary = WorstAvg{*worst, *avg};
      } else {
        throw FormatError(where + ": split must be clean or robust");
      }
    }
  } else {
    throw FormatError(path.string() + ": unrecognised header '" + header +
                      "' (expected class,clean_acc,robust_acc or split,avg,worst)");
  }
  return table;
}

json report_metrics(const AccuracyTable& variant, const AccuracyTable* baseline) {
  json out;
  out["variant"] = table_json(variant);
  if (const std::size_t c = table_classes(variant); c > 0) out["num_classes"] = c;
  if (!baseline) return out;
  const std::size_t cv = table_classes(variant), cb = table_classes(*baseline);
  if (cv != 0 && cb != 0 && cv != cb) {
    throw ConfigError("baseline has " + std::to_string(cb) + " classes but the variant has " + std::to_string(cv));
  }
  out["baseline"] = table_json(*baseline);
  auto rho_json = [](const FairnessScore& s) {
    return json{{"rho", s.rho}, {"worst_ratio_delta", s.worst_ratio_delta}, {"avg_ratio_delta", s.avg_ratio_delta}};
  };
  if (auto b = baseline->clean_worst_avg(), v = variant.clean_worst_avg(); b && v) {
    out["rho_clean"] = rho_json(rho_fairness(*b, *v));
  }
  if (auto b = baseline->robust_worst_avg(), v = variant.robust_worst_avg(); b && v) {
    out["rho_robust"] = rho_json(rho_fairness(*b, *v));
  }
  return out;
}

}  // namespace trixlab
