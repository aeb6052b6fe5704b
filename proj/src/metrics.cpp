#include "trixlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trixlab/errors.hpp"
#include "trixlab/rng.hpp"

namespace trixlab {

namespace {

void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": " + std::to_string(a) + " predictions for " +
                         std::to_string(b) + " labels");
  }
}

std::size_t label_index(int y, std::size_t num_classes) {
  if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
    throw IndexError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
  }
  return static_cast<std::size_t>(y);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<double> ClassAccuracyVector::present() const {
  std::vector<double> out;
  for (const auto& v : values) {
    if (v) out.push_back(*v);
  }
  return out;
}

ClassAccuracyVector classwise_accuracy(std::span<const int> predictions, std::span<const int> labels,
                                       std::size_t num_classes) {
  check_aligned(predictions.size(), labels.size(), "classwise_accuracy");
  std::vector<std::size_t> correct(num_classes, 0), count(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t y = label_index(labels[i], num_classes);
    ++count[y];
    if (predictions[i] == labels[i]) ++correct[y];
  }
  ClassAccuracyVector out;
  out.values.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (count[c] > 0) out.values[c] = static_cast<double>(correct[c]) / static_cast<double>(count[c]);
  }
  return out;
}

ClassAccuracyVector accuracy_vector(std::vector<double> values) {
  ClassAccuracyVector out;
  for (double v : values) out.values.emplace_back(v);
  return out;
}

WorstAvg worst_avg(std::span<const double> accuracies) {
  if (accuracies.empty()) throw UsageError("worst_avg of an empty accuracy vector");
  const double worst = *std::ranges::min_element(accuracies);
  const double total = std::accumulate(accuracies.begin(), accuracies.end(), 0.0);
  return {worst, total / static_cast<double>(accuracies.size())};
}

WorstAvg worst_avg(const ClassAccuracyVector& acc) {
  const auto present = acc.present();
  return worst_avg(present);
}

FairnessScore rho_fairness(const WorstAvg& baseline, const WorstAvg& variant) {
  if (!(baseline.avg > 0.0) || !(baseline.worst > 0.0)) {
    throw DegenerateInputError("rho: baseline average and worst accuracy must be positive (got avg " +
                               std::to_string(baseline.avg) + ", worst " + std::to_string(baseline.worst) + ")");
  }
  FairnessScore score;
  score.worst_ratio_delta = variant.worst / baseline.worst - 1.0;
  score.avg_ratio_delta = variant.avg / baseline.avg - 1.0;
  score.rho = score.worst_ratio_delta - score.avg_ratio_delta;
  return score;
}

Disparity disparity(std::span<const double> accuracies) {
  if (accuracies.size() < 2) throw UsageError("disparity needs at least two classes");
  const auto [lo, hi] = std::ranges::minmax_element(accuracies);
  Disparity d;
  d.min = *lo;
  d.min_max = *hi - *lo;
  d.avg = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
  double ss = 0.0;
  for (double v : accuracies) ss += (v - d.avg) * (v - d.avg);
  d.std_dev = std::sqrt(ss / static_cast<double>(accuracies.size()));
  d.variance = d.std_dev * d.std_dev;
  return d;
}

Disparity disparity(const ClassAccuracyVector& acc) {
  const auto present = acc.present();
  return disparity(present);
}

std::vector<std::optional<double>> attack_success_rate(std::span<const int> adv_predictions,
                                                       std::span<const int> labels, std::size_t num_classes) {
  const auto robust = classwise_accuracy(adv_predictions, labels, num_classes);
  std::vector<std::optional<double>> out(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (robust.values[c]) out[c] = 1.0 - *robust.values[c];
  }
  return out;
}

std::vector<std::optional<double>> targeted_attack_success_rate(
    const std::vector<std::vector<int>>& preds_by_target, std::span<const int> labels, std::size_t num_classes) {
  if (preds_by_target.size() != num_classes) {
    throw DimensionError("targeted ASR needs predictions for every target class");
  }
  std::vector<std::size_t> count(num_classes, 0);
  for (int y : labels) ++count[label_index(y, num_classes)];
  std::vector<std::optional<double>> out(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (count[c] == 0) continue;
    double total = 0.0;
    for (std::size_t t = 0; t < num_classes; ++t) {
      if (t == c) continue;
      check_aligned(preds_by_target[t].size(), labels.size(), "targeted ASR");
      std::size_t hits = 0;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (static_cast<std::size_t>(labels[i]) == c && preds_by_target[t][i] == static_cast<int>(t)) ++hits;
      }
      total += static_cast<double>(hits) / static_cast<double>(count[c]);
    }
    out[c] = total / static_cast<double>(num_classes - 1);
  }
  return out;
}

std::vector<std::optional<double>> nonrobust_drop(const ClassAccuracyVector& clean, const ClassAccuracyVector& robust) {
  if (clean.num_classes() != robust.num_classes()) {
    throw DimensionError("nonrobust_drop: class counts differ");
  }
  std::vector<std::optional<double>> out(clean.num_classes());
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (clean.values[c] && robust.values[c]) out[c] = *clean.values[c] - *robust.values[c];
  }
  return out;
}

Tensor sample_bin_centers(std::size_t num_bins, std::size_t dim, std::uint64_t seed) {
  if (num_bins < 1) throw ConfigError("coverage needs at least one bin");
  if (dim < 2) throw ConfigError("coverage needs feature dimension >= 2");
  Tensor centers = Tensor::zeros({num_bins, dim});
  Rng rng(seed);
  for (std::size_t b = 0; b < num_bins; ++b) {
    auto row = centers.row(b);
    double norm = 0.0;
    while (norm == 0.0) {
      for (double& v : row) v = rng.normal();
      norm = std::sqrt(dot(row, row));
    }
    for (double& v : row) v /= norm;
  }
  return centers;
}

CoverageResult feature_space_coverage(const std::vector<Tensor>& features_per_class, std::size_t num_bins,
                                      std::uint64_t seed) {
  std::size_t dim = 0;
  for (const Tensor& f : features_per_class) {
    if (f.size() == 0) continue;
    if (dim != 0 && f.cols() != dim) throw DimensionError("coverage: feature widths differ across classes");
    dim = f.cols();
  }
  if (dim == 0) throw DegenerateInputError("coverage: no features given");
  const Tensor centers = sample_bin_centers(num_bins, dim, seed);

  CoverageResult result;
  result.num_bins = num_bins;
  std::size_t nonzero_total = 0;
  for (const Tensor& f : features_per_class) {
    std::vector<bool> hit(num_bins, false);
    std::size_t zeros = 0;
    const std::size_t rows = f.size() == 0 ? 0 : f.rows();
    std::vector<double> unit(dim);
    for (std::size_t i = 0; i < rows; ++i) {
      auto row = f.row(i);
      const double norm = std::sqrt(dot(row, row));
      if (norm == 0.0) {
        ++zeros;
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d) unit[d] = row[d] / norm;
      std::size_t best = 0;
      double best_cos = -std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < num_bins; ++b) {
        const double c = dot(unit, centers.row(b));
        if (c > best_cos) {
          best_cos = c;
          best = b;
        }
      }
      hit[best] = true;
    }
    nonzero_total += rows - zeros;
    const auto occupied = static_cast<std::size_t>(std::ranges::count(hit, true));
    result.occupied.push_back(occupied);
    result.zero_excluded.push_back(zeros);
    result.coverage.push_back(static_cast<double>(occupied) / static_cast<double>(num_bins));
  }
  if (nonzero_total == 0) throw DegenerateInputError("coverage: every feature vector is zero");
  return result;
}

PcaResult pca_project(const Tensor& features, std::size_t k, PcaOptions options) {
  if (features.rank() != 2) throw DimensionError("pca: features must be an N x F matrix");
  const std::size_t n = features.rows(), f = features.cols();
  if (k < 1 || f < k) {
    throw DimensionError("pca: need 1 <= k <= F (k = " + std::to_string(k) + ", F = " + std::to_string(f) + ")");
  }
  PcaResult result;
  result.mean.assign(f, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < f; ++d) result.mean[d] += features(i, d);
  }
  for (double& m : result.mean) m /= static_cast<double>(n);
  Tensor centered = features;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < f; ++d) centered(i, d) -= result.mean[d];
  }
  std::vector<double> cov(f * f, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = centered.row(i);
    for (std::size_t a = 0; a < f; ++a) {
      for (std::size_t b = a; b < f; ++b) cov[a * f + b] += row[a] * row[b];
    }
  }
  for (std::size_t a = 0; a < f; ++a) {
    for (std::size_t b = a; b < f; ++b) {
      cov[a * f + b] /= static_cast<double>(n);
      cov[b * f + a] = cov[a * f + b];
    }
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < f; ++a) trace += cov[a * f + a];

  auto apply_cov = [&](const std::vector<double>& v) {
    std::vector<double> out(f, 0.0);
    for (std::size_t a = 0; a < f; ++a) out[a] = dot(std::span<const double>(cov).subspan(a * f, f), v);
    return out;
  };
  auto orthogonalize = [&](std::vector<double>& v) {
    // Two passes of Gram-Schmidt against the accepted components.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : result.components) {
        const double proj = dot(v, u);
        for (std::size_t d = 0; d < f; ++d) v[d] -= proj * u[d];
      }
    }
  };
  auto normalize = [&](std::vector<double>& v) {
    const double norm = std::sqrt(dot(v, v));
    if (norm > 0.0) {
      for (double& x : v) x /= norm;
    }
    return norm;
  };

  Rng rng(0x9ca5eedULL);
  for (std::size_t comp = 0; comp < k; ++comp) {
    std::vector<double> v(f);
    double norm = 0.0;
    while (norm < 1e-6) {
      for (double& x : v) x = rng.normal();
      orthogonalize(v);
      norm = normalize(v);
    }
    double eigenvalue = 0.0;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      ++result.iterations;
      std::vector<double> w = apply_cov(v);
      orthogonalize(w);
      const double wn = normalize(w);
      if (wn <= 1e-300) break;  // v lies in the null space of the deflated covariance
      double change = 0.0;
      for (std::size_t d = 0; d < f; ++d) change = std::max(change, std::abs(w[d] - v[d]));
      v = std::move(w);
      if (change < options.tolerance) break;
    }
    eigenvalue = std::max(0.0, dot(v, apply_cov(v)));
    result.components.push_back(std::move(v));
    result.eigenvalues.push_back(eigenvalue);
  }

  // Enforce nonincreasing order and the sign convention.
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
    return result.eigenvalues[a] > result.eigenvalues[b];
  });
  std::vector<std::vector<double>> components;
  std::vector<double> eigenvalues;
  for (std::size_t idx : order) {
    auto v = result.components[idx];
    std::size_t top = 0;
    for (std::size_t d = 1; d < f; ++d) {
      if (std::abs(v[d]) > std::abs(v[top])) top = d;
    }
    if (v[top] < 0.0) {
      for (double& x : v) x = -x;
    }
    components.push_back(std::move(v));
    eigenvalues.push_back(result.eigenvalues[idx]);
  }
  result.components = std::move(components);
  result.eigenvalues = std::move(eigenvalues);

  const double threshold = 1e-12 * std::max(1.0, trace);
  result.rank = static_cast<std::size_t>(
      std::ranges::count_if(result.eigenvalues, [&](double ev) { return ev > threshold; }));

  result.coordinates = Tensor::zeros({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) result.coordinates(i, c) = dot(centered.row(i), result.components[c]);
  }
  return result;
}

OvoOvaResult ovo_ova_min_weights(std::span<const double> h, double margin) {
  const std::size_t k = h.size();
  if (k < 2) throw ConfigError("ovo/ova analysis needs K >= 2");
  if (!(margin > 0.0)) throw ConfigError("ovo/ova analysis needs R > 0");
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (h[i] == h[j]) {
        throw ConfigError("class representatives must be distinct (h[" + std::to_string(i) + "] == h[" +
                          std::to_string(j) + "])");
      }
    }
  }
  OvoOvaResult result{Tensor::zeros({k, k}), std::vector<OvaResult>(k)};
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j) result.ovo(i, j) = 2.0 * margin / std::abs(h[i] - h[j]);
    }
  }
  // w_i (h_i - h_j) >= R for all j != i: satisfiable only when every gap has
  // the same sign, and then |w_i| >= R / min |h_i - h_j|.
  for (std::size_t i = 0; i < k; ++i) {
    bool all_positive = true, all_negative = true;
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      const double gap = h[i] - h[j];
      all_positive = all_positive && gap > 0.0;
      all_negative = all_negative && gap < 0.0;
      min_gap = std::min(min_gap, std::abs(gap));
    }
    if (all_positive || all_negative) result.ova[i] = {true, margin / min_gap};
  }
  return result;
}

OvoOvaResult ovo_ova_min_weights(std::size_t num_classes, double margin, double spacing) {
  if (!(spacing > 0.0) && !(spacing < 0.0)) throw ConfigError("spacing must be nonzero so h values are distinct");
  std::vector<double> h(num_classes);
  for (std::size_t i = 0; i < num_classes; ++i) h[i] = static_cast<double>(i) * spacing;
  return ovo_ova_min_weights(h, margin);
}

}  // namespace trixlab
