#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trixlab/tensor.hpp"

namespace trixlab {

// Feed-forward classifier: affine layers with ReLU on hidden layers only.
// Weights of layer l are stored as [dims[l] x dims[l+1]] so that
// logits = relu(x W0 + b0) W1 + b1 ...
class MlpClassifier {
 public:
  // Parameters bound as leaves on a tape for one forward pass.
  struct Bound {
    std::vector<Var> weights;
    std::vector<Var> biases;
  };

  struct Output {
    Var logits;
    Var features;  // post-activation of the last hidden layer (the input when there is none)
  };

  struct Values {
    Tensor logits;
    Tensor features;
  };

  // Kaiming-style uniform init in [-sqrt(6/fan_in), +sqrt(6/fan_in)], zero biases.
  static MlpClassifier init(std::vector<std::size_t> layer_dims, std::uint64_t seed);

  MlpClassifier(std::vector<std::size_t> layer_dims, std::uint64_t seed, std::vector<Tensor> weights,
                std::vector<Tensor> biases);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t num_classes() const { return dims_.back(); }
  std::size_t feature_dim() const { return dims_[dims_.size() - 2]; }
  std::size_t num_layers() const { return weights_.size(); }
  std::size_t parameter_count() const;

  const std::vector<Tensor>& weights() const { return weights_; }
  const std::vector<Tensor>& biases() const { return biases_; }
  std::vector<Tensor>& weights() { return weights_; }
  std::vector<Tensor>& biases() { return biases_; }

  // Parameters in a fixed order: w0, b0, w1, b1, ...
  std::vector<Tensor*> parameters();

  Bound bind(Tape& tape, bool requires_grad) const;
  Output forward(const Bound& params, Var x) const;
  // Tape-free convenience for evaluation.
  Values predict(const Tensor& x) const;

  bool operator==(const MlpClassifier&) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::uint64_t seed_ = 0;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

// Checkpoint as a flat JSON object:
// {"layer_dims": [...], "seed": n, "weights": [[...], ...], "biases": [[...], ...]}
// with each array the row-major values of that layer. Doubles are written in
// shortest round-trip form so a reload is bit-exact.
std::string model_to_json(const MlpClassifier& model);
MlpClassifier model_from_json(const std::string& text);
void save_model(const MlpClassifier& model, const std::filesystem::path& path);
MlpClassifier load_model(const std::filesystem::path& path);

}  // namespace trixlab
