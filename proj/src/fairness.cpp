#include "trixlab/fairness.hpp"

#include <algorithm>
#include <sstream>

#include "trixlab/errors.hpp"

namespace trixlab {

ClassMeanAccumulator::ClassMeanAccumulator(std::size_t num_classes)
    : sums_(num_classes * num_classes, 0.0), counts_(num_classes, 0) {
  if (num_classes < 1) throw ConfigError("need at least one class");
}

void ClassMeanAccumulator::add(const Tensor& probs, std::span<const int> labels) {
  const std::size_t c_count = counts_.size();
  if (probs.rank() != 2 || probs.cols() != c_count) {
    throw DimensionError("class means: probabilities must be N x " + std::to_string(c_count));
  }
  if (labels.size() != probs.rows()) throw DimensionError("class means: label count mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c_count) {
      throw IndexError("class means: label " + std::to_string(y) + " out of range");
    }
    auto row = probs.row(i);
    for (std::size_t j = 0; j < c_count; ++j) sums_[static_cast<std::size_t>(y) * c_count + j] += row[j];
    ++counts_[static_cast<std::size_t>(y)];
  }
}

ClassMeanPredictions ClassMeanAccumulator::finalize() const {
  const std::size_t c_count = counts_.size();
  Tensor matrix = Tensor::filled({c_count, c_count}, 1.0 / static_cast<double>(c_count));
  for (std::size_t c = 0; c < c_count; ++c) {
    if (counts_[c] == 0) continue;
    for (std::size_t j = 0; j < c_count; ++j) {
      matrix(c, j) = sums_[c * c_count + j] / static_cast<double>(counts_[c]);
    }
  }
  return {std::move(matrix), counts_};
}

void ClassMeanAccumulator::reset() {
  std::ranges::fill(sums_, 0.0);
  std::ranges::fill(counts_, 0);
}

ClassMeanPredictions class_mean_predictions(const Tensor& probs, std::span<const int> labels,
                                            std::size_t num_classes) {
  ClassMeanAccumulator acc(num_classes);
  acc.add(probs, labels);
  return acc.finalize();
}

SimilarityMatrix build_similarity(const ClassMeanPredictions& pbar, double mu) {
  if (mu < 0.0) throw ConfigError("diagonal regularizer mu must be >= 0");
  Tensor s = pbar.matrix;
  for (std::size_t c = 0; c < s.rows(); ++c) s(c, c) += mu;
  return {std::move(s), mu};
}

ClassWeights compute_weights(const SimilarityMatrix& s, double lambda) {
  const std::size_t c_count = s.num_classes();
  if (s.matrix.rank() != 2 || s.matrix.cols() != c_count) {
    throw DimensionError("similarity matrix must be square, got " + shape_string(s.matrix.shape()));
  }
  ClassWeights out{std::vector<double>(c_count), lambda};
  for (std::size_t c = 0; c < c_count; ++c) {
    double adjustment = 0.0;
    for (std::size_t j = 0; j < c_count; ++j) {
      if (j == c) continue;
      if (s(c, c) < s(j, j)) {
        adjustment += s(c, j) * s(j, j);
      } else {
        adjustment += -s(j, c) * s(c, c);
      }
    }
    out.w[c] = 1.0 + lambda * adjustment;
  }
  for (std::size_t c = 0; c < c_count; ++c) {
    if (!(out.w[c] > 0.0)) {
      std::ostringstream msg;
      msg << "class weight w[" << c << "] = " << out.w[c] << " is not positive (lambda = " << lambda
          << "); the similarity matrix is too skewed for this lambda";
      throw NumericalError(msg.str());
    }
  }
  return out;
}

std::string to_string(WeightAverage mode) {
  return mode == WeightAverage::BatchMean ? "batch" : "class";
}

WeightAverage weight_average_from_string(const std::string& name) {
  if (name == "batch") return WeightAverage::BatchMean;
  if (name == "class") return WeightAverage::ClassMean;
  throw ConfigError("unknown weight average '" + name + "' (expected batch or class)");
}

std::vector<bool> attack_policy(const ClassWeights& w, std::span<const int> labels, WeightAverage average) {
  if (labels.empty()) throw UsageError("attack_policy on an empty batch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= w.size()) {
      throw IndexError("attack_policy: label " + std::to_string(y) + " has no weight");
    }
  }
  double avg = 0.0;
  if (average == WeightAverage::BatchMean) {
    for (int y : labels) avg += w[static_cast<std::size_t>(y)];
    avg /= static_cast<double>(labels.size());
  } else {
    for (double v : w.w) avg += v;
    avg /= static_cast<double>(w.size());
  }
  std::vector<bool> targeted(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) targeted[i] = w[static_cast<std::size_t>(labels[i])] <= avg;
  return targeted;
}

std::vector<double> scale_epsilon(double eps_base, const ClassWeights& w, std::span<const int> labels,
                                  bool active, EpsilonScaling bounds) {
  if (!(eps_base > 0.0)) throw ConfigError("scale_epsilon: base radius must be positive");
  std::vector<double> eps(labels.size(), eps_base);
  if (!active) return eps;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= w.size()) {
      throw IndexError("scale_epsilon: label " + std::to_string(y) + " has no weight");
    }
    eps[i] = std::clamp(eps_base * w[static_cast<std::size_t>(y)], bounds.min_factor * eps_base,
                        bounds.max_factor * eps_base);
  }
  return eps;
}

}  // namespace trixlab
