#include "trixlab/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "trixlab/errors.hpp"
#include "trixlab/rng.hpp"

namespace trixlab {

namespace {

void validate_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw ConfigError("layer_dims needs at least an input and an output size");
  for (std::size_t d : dims) {
    if (d < 1) throw ConfigError("layer_dims entries must be >= 1");
  }
}

}  // namespace

MlpClassifier MlpClassifier::init(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
  validate_dims(layer_dims);
  Rng rng(seed);
  std::vector<Tensor> weights, biases;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t fan_in = layer_dims[l], fan_out = layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor w = Tensor::zeros({fan_in, fan_out});
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    weights.push_back(std::move(w));
    biases.push_back(Tensor::zeros({fan_out}));
  }
  return MlpClassifier(std::move(layer_dims), seed, std::move(weights), std::move(biases));
}

MlpClassifier::MlpClassifier(std::vector<std::size_t> layer_dims, std::uint64_t seed,
                             std::vector<Tensor> weights, std::vector<Tensor> biases)
    : dims_(std::move(layer_dims)), seed_(seed), weights_(std::move(weights)), biases_(std::move(biases)) {
  validate_dims(dims_);
  if (weights_.size() != dims_.size() - 1 || biases_.size() != dims_.size() - 1) {
    throw ConfigError("expected " + std::to_string(dims_.size() - 1) + " layers of parameters");
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].shape() != Shape{dims_[l], dims_[l + 1]}) {
      throw DimensionError("layer " + std::to_string(l) + " weight has shape " +
                           shape_string(weights_[l].shape()));
    }
    if (biases_[l].shape() != Shape{dims_[l + 1]}) {
      throw DimensionError("layer " + std::to_string(l) + " bias has shape " +
                           shape_string(biases_[l].shape()));
    }
  }
}

std::size_t MlpClassifier::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) total += dims_[l] * dims_[l + 1] + dims_[l + 1];
  return total;
}

std::vector<Tensor*> MlpClassifier::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

MlpClassifier::Bound MlpClassifier::bind(Tape& tape, bool requires_grad) const {
  Bound bound;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    bound.weights.push_back(tape.leaf(weights_[l], requires_grad));
    bound.biases.push_back(tape.leaf(biases_[l], requires_grad));
  }
  return bound;
}

MlpClassifier::Output MlpClassifier::forward(const Bound& params, Var x) const {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != input_dim()) {
    throw DimensionError("model expects inputs of width " + std::to_string(input_dim()) +
                         ", got shape " + shape_string(xv.shape()));
  }
  Var h = x;
  Var features = x;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    h = ops::add_bias(ops::matmul(h, params.weights[l]), params.biases[l]);
    if (l + 1 < params.weights.size()) {
      h = ops::relu(h);
      features = h;
    }
  }
  return {h, features};
}

MlpClassifier::Values MlpClassifier::predict(const Tensor& x) const {
  Tape tape;
  const Bound params = bind(tape, false);
  const Output out = forward(params, tape.leaf(x));
  return {out.logits.value(), out.features.value()};
}

std::string model_to_json(const MlpClassifier& model) {
  nlohmann::json j;
  j["layer_dims"] = model.layer_dims();
  j["seed"] = model.seed();
  nlohmann::json weights = nlohmann::json::array(), biases = nlohmann::json::array();
  for (const Tensor& w : model.weights()) {
    weights.push_back(std::vector<double>(w.values().begin(), w.values().end()));
  }
  for (const Tensor& b : model.biases()) {
    biases.push_back(std::vector<double>(b.values().begin(), b.values().end()));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  return j.dump();
}

MlpClassifier model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model checkpoint is not valid JSON: ") + e.what());
  }
  try {
    auto dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    validate_dims(dims);
    const auto seed = j.at("seed").get<std::uint64_t>();
    const auto& jw = j.at("weights");
    const auto& jb = j.at("biases");
    if (jw.size() != dims.size() - 1 || jb.size() != dims.size() - 1) {
      throw FormatError("checkpoint layer count does not match layer_dims");
    }
    std::vector<Tensor> weights, biases;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      weights.emplace_back(Shape{dims[l], dims[l + 1]}, jw[l].get<std::vector<double>>());
      biases.emplace_back(Shape{dims[l + 1]}, jb[l].get<std::vector<double>>());
    }
    return MlpClassifier(std::move(dims), seed, std::move(weights), std::move(biases));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model checkpoint: ") + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(std::string("malformed model checkpoint: ") + e.what());
  }
}

void save_model(const MlpClassifier& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << model_to_json(model) << '\n';
}

MlpClassifier load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read model checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace trixlab
