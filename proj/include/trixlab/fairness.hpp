#pragma once

#include <span>
#include <string>
#include <vector>

#include "trixlab/tensor.hpp"

namespace trixlab {

// Row c is the mean predicted distribution over samples labelled c.
struct ClassMeanPredictions {
  Tensor matrix;                    // C x C
  std::vector<std::size_t> counts;  // samples behind each row

  std::size_t num_classes() const { return counts.size(); }
};

// Running per-class sum of predicted distributions.
class ClassMeanAccumulator {
 public:
  explicit ClassMeanAccumulator(std::size_t num_classes);

  void add(const Tensor& probs, std::span<const int> labels);
  // Classes without samples keep the uniform row 1/C.
  ClassMeanPredictions finalize() const;
  void reset();
  std::size_t num_classes() const { return counts_.size(); }

 private:
  std::vector<double> sums_;
  std::vector<std::size_t> counts_;
};

ClassMeanPredictions class_mean_predictions(const Tensor& probs, std::span<const int> labels,
                                            std::size_t num_classes);

struct SimilarityMatrix {
  Tensor matrix;  // P + mu I
  double mu = 0.0;

  std::size_t num_classes() const { return matrix.rows(); }
  double operator()(std::size_t c, std::size_t j) const { return matrix(c, j); }
};

inline constexpr double kDefaultDiagonalRegularizer = 1e-8;

SimilarityMatrix build_similarity(const ClassMeanPredictions& pbar,
                                  double mu = kDefaultDiagonalRegularizer);

struct ClassWeights {
  std::vector<double> w;
  double lambda = 0.0;

  std::size_t size() const { return w.size(); }
  double operator[](std::size_t c) const { return w[c]; }
  static ClassWeights uniform(std::size_t num_classes) { return {std::vector<double>(num_classes, 1.0), 0.0}; }
};

// w_c = 1 + lambda * sum_{j != c} ( S[c][j] * S[j][j]   if S[c][c] < S[j][j]
//                                  -S[j][c] * S[c][c]   otherwise )
// Ties take the second branch. Throws NumericalError if any w_c <= 0.
ClassWeights compute_weights(const SimilarityMatrix& s, double lambda);

// How avg(w) in the targeting rule is taken.
enum class WeightAverage {
  BatchMean,   // mean of w[y_i] over the batch
  ClassMean,   // mean of the C-vector w
};

std::string to_string(WeightAverage mode);
WeightAverage weight_average_from_string(const std::string& name);

// true = targeted: sample i is targeted iff w[y_i] <= avg(w).
std::vector<bool> attack_policy(const ClassWeights& w, std::span<const int> labels,
                                WeightAverage average = WeightAverage::BatchMean);

struct EpsilonScaling {
  double min_factor = 0.5;
  double max_factor = 1.5;
};

// active: eps_i = clamp(eps_base * w[y_i], min_factor * eps_base, max_factor * eps_base);
// inactive: eps_i = eps_base.
std::vector<double> scale_epsilon(double eps_base, const ClassWeights& w, std::span<const int> labels,
                                  bool active, EpsilonScaling bounds = {});

}  // namespace trixlab
