#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trixlab/tensor.hpp"

namespace trixlab {

// Per-class accuracy; a class with no samples is absent (nullopt), not 0.
struct ClassAccuracyVector {
  std::vector<std::optional<double>> values;

  std::size_t num_classes() const { return values.size(); }
  std::vector<double> present() const;
};

ClassAccuracyVector classwise_accuracy(std::span<const int> predictions, std::span<const int> labels,
                                       std::size_t num_classes);
ClassAccuracyVector accuracy_vector(std::vector<double> values);

struct WorstAvg {
  double worst = 0.0;
  double avg = 0.0;
};

WorstAvg worst_avg(std::span<const double> accuracies);
WorstAvg worst_avg(const ClassAccuracyVector& acc);

struct FairnessScore {
  double rho = 0.0;
  double worst_ratio_delta = 0.0;  // variant.worst / baseline.worst - 1
  double avg_ratio_delta = 0.0;    // variant.avg / baseline.avg - 1
};

// rho = (worst_v / worst_b - 1) - (avg_v / avg_b - 1)
FairnessScore rho_fairness(const WorstAvg& baseline, const WorstAvg& variant);

// Population statistics over the classes.
struct Disparity {
  double std_dev = 0.0;
  double min_max = 0.0;
  double variance = 0.0;
  double avg = 0.0;
  double min = 0.0;
};

Disparity disparity(std::span<const double> accuracies);
Disparity disparity(const ClassAccuracyVector& acc);

// Fraction of each class's samples misclassified under attack, regardless of
// whether the clean prediction was correct. Absent classes are nullopt.
std::vector<std::optional<double>> attack_success_rate(std::span<const int> adv_predictions,
                                                       std::span<const int> labels, std::size_t num_classes);

// preds_by_target[t][i] is the prediction for sample i under the attack aimed at
// class t. ASR_c is the mean over t != c of the fraction of class-c samples
// predicted as t.
std::vector<std::optional<double>> targeted_attack_success_rate(
    const std::vector<std::vector<int>>& preds_by_target, std::span<const int> labels, std::size_t num_classes);

// clean_c - robust_c.
std::vector<std::optional<double>> nonrobust_drop(const ClassAccuracyVector& clean, const ClassAccuracyVector& robust);

// Unit bin centers drawn from an isotropic Gaussian.
Tensor sample_bin_centers(std::size_t num_bins, std::size_t dim, std::uint64_t seed);

struct CoverageResult {
  std::vector<double> coverage;            // per class, occupied bins / M
  std::vector<std::size_t> occupied;       // per class
  std::vector<std::size_t> zero_excluded;  // zero vectors skipped per class
  std::size_t num_bins = 0;
};

// features_per_class[c] is an N_c x F matrix (or empty tensor for no samples).
CoverageResult feature_space_coverage(const std::vector<Tensor>& features_per_class, std::size_t num_bins,
                                      std::uint64_t seed);

struct PcaResult {
  Tensor coordinates;                        // N x k
  std::vector<double> eigenvalues;           // k, nonincreasing
  std::vector<std::vector<double>> components;  // k unit vectors of length F
  std::vector<double> mean;                  // F
  std::size_t rank = 0;                      // components with a non-negligible eigenvalue
  std::size_t iterations = 0;
};

struct PcaOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 10000;
};

// Top-k principal components of the covariance (1/N normalisation) by power
// iteration with deflation. Each component's largest-magnitude coordinate is
// positive.
PcaResult pca_project(const Tensor& features, std::size_t k = 3, PcaOptions options = {});

struct OvaResult {
  bool feasible = false;
  double min_weight = 0.0;  // meaningful only when feasible
};

struct OvoOvaResult {
  Tensor ovo;  // K x K minimal |w_ij| = 2R/|h_i - h_j|, zero diagonal
  std::vector<OvaResult> ova;
};

// One-dimensional linear-separation weight analysis for class representatives h.
OvoOvaResult ovo_ova_min_weights(std::span<const double> h, double margin);
// h_i = i * spacing.
OvoOvaResult ovo_ova_min_weights(std::size_t num_classes, double margin, double spacing = 1.0);

}  // namespace trixlab
