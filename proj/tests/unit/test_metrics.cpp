#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "reference_data.hpp"
#include "trixlab/errors.hpp"
#include "trixlab/metrics.hpp"

using namespace trixlab;

namespace {

WorstAvg summary(std::string_view method) {
  for (const auto& s : reference::kCleanSummaries) {
    if (s.method == method) return {s.worst, s.avg};
  }
  throw std::logic_error("no such method");
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("class-wise accuracy") {
  const std::vector<int> labels{0, 1, 0, 1};
  CHECK(classwise_accuracy(labels, labels, 2).present() == std::vector<double>{1.0, 1.0});
  const std::vector<int> preds{0, 1, 1, 1};
  CHECK(classwise_accuracy(preds, labels, 2).present() == std::vector<double>{0.5, 1.0});
  const auto absent = classwise_accuracy(preds, labels, 3);
  CHECK_FALSE(absent.values[2].has_value());
  CHECK_THROWS_AS(classwise_accuracy(preds, std::vector<int>{0, 1, 5, 1}, 3), IndexError);
  CHECK_THROWS_AS(classwise_accuracy(preds, std::vector<int>{0, 1}, 3), DimensionError);
}

TEST_CASE("class-wise accuracy matches a counting oracle") {
  std::mt19937_64 gen(13);
  const auto labels = oracle::random_labels(500, 6, gen);
  const auto preds = oracle::random_labels(500, 6, gen);
  const auto acc = classwise_accuracy(preds, labels, 6);
  for (int c = 0; c < 6; ++c) {
    int n = 0, hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      ++n;
      hit += preds[i] == c;
    }
    CHECK(*acc.values[static_cast<std::size_t>(c)] == static_cast<double>(hit) / n);
  }
}

TEST_CASE("worst and average") {
  const auto wa = worst_avg(reference::kTradesClean);
  CHECK(wa.worst == 0.668);
  CHECK(wa.avg == doctest::Approx(0.8241).epsilon(1e-9));
  const std::vector<double> flat{0.4, 0.4, 0.4};
  CHECK(worst_avg(flat).avg == doctest::Approx(worst_avg(flat).worst).epsilon(1e-15));
  const std::vector<double> one{0.3};
  CHECK(worst_avg(one).worst == 0.3);
  CHECK(worst_avg(one).avg == 0.3);
  CHECK_THROWS_AS(worst_avg(std::vector<double>{}), UsageError);
  const ClassAccuracyVector partial{{0.5, std::nullopt, 0.9}};
  CHECK(worst_avg(partial).avg == doctest::Approx(0.7));
}

TEST_CASE("rho from published clean summaries") {
  const auto base = summary("TRADES");
  CHECK(rho_fairness(base, base).rho == 0.0);
  CHECK(rho_fairness(base, summary("BAT")).rho == doctest::Approx(0.051).epsilon(0.02));
  CHECK(std::abs(rho_fairness(base, summary("BAT")).rho - 0.05) <= 0.015);
  CHECK(std::abs(rho_fairness(base, summary("FRL")).rho - 0.07) <= 0.015);
  CHECK(std::abs(rho_fairness(base, summary("TRIX")).rho - 0.05) <= 0.015);
  CHECK(std::abs(rho_fairness(base, summary("DAFA")).rho - 0.02) <= 0.015);
  const auto s = rho_fairness({0.5, 0.8}, {0.6, 0.8});
  CHECK(s.worst_ratio_delta == doctest::Approx(0.2));
  CHECK(s.avg_ratio_delta == 0.0);
  CHECK_THROWS_AS(rho_fairness({0.0, 0.8}, {0.6, 0.8}), DegenerateInputError);
}

TEST_CASE("disparity of the published TRADES vector") {
  const auto d = disparity(reference::kTradesClean);
  CHECK(std::abs(d.std_dev - reference::kTradesStdDev) <= 0.0005);
  CHECK(std::abs(d.min_max - reference::kTradesMinMax) <= 0.001);
  CHECK(std::abs(d.avg - reference::kTradesAvg) <= 0.0005);
  CHECK(d.min == reference::kTradesMin);
  CHECK(d.variance == d.std_dev * d.std_dev);
  const std::vector<double> flat{0.7, 0.7, 0.7};
  CHECK(disparity(flat).std_dev <= 1e-15);
  CHECK(disparity(flat).min_max == 0.0);
  CHECK_THROWS_AS(disparity(std::vector<double>{0.5}), UsageError);
}

TEST_CASE("untargeted attack success rate") {
  const double cat_robust = reference::kRobustCurves[3][8];
  const std::vector<int> labels(1000, 0);
  std::vector<int> adv(1000, 1);
  const auto correct = static_cast<std::size_t>(std::lround(cat_robust * 1000));
  std::fill(adv.begin(), adv.begin() + static_cast<std::ptrdiff_t>(correct), 0);
  const auto asr = attack_success_rate(adv, labels, 2);
  CHECK(*asr[0] == doctest::Approx(0.735));
  CHECK(std::abs(*asr[0] * 100.0 - reference::kCatUntargetedAsrPercent) <= 0.5);
  CHECK_FALSE(asr[1].has_value());
  CHECK(*attack_success_rate(labels, labels, 1)[0] == 0.0);

  std::mt19937_64 gen(3);
  const auto y = oracle::random_labels(300, 4, gen), p = oracle::random_labels(300, 4, gen);
  const auto rates = attack_success_rate(p, y, 4);
  for (int c = 0; c < 4; ++c) {
    int n = 0, wrong = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] != c) continue;
      ++n;
      wrong += p[i] != c;
    }
    CHECK(*rates[static_cast<std::size_t>(c)] == doctest::Approx(static_cast<double>(wrong) / n));
  }
}

TEST_CASE("targeted attack success rate") {
  const std::vector<int> labels{0, 0, 1, 1};
  const std::vector<std::vector<int>> preds{{1, 0, 0, 0}, {1, 1, 1, 0}};
  // class 0 attacked towards 1: preds_by_target[1] = {1,1,..} -> 2/2; class 1 towards 0: {.., 0, 0} -> 2/2
  const auto asr = targeted_attack_success_rate(preds, labels, 2);
  CHECK(*asr[0] == 1.0);
  CHECK(*asr[1] == 1.0);
  CHECK_THROWS_AS(targeted_attack_success_rate({{0, 0, 0, 0}}, labels, 2), DimensionError);
}

TEST_CASE("non-robust drop against the published curves") {
  for (std::size_t c = 0; c < 10; ++c) {
    for (std::size_t e = 0; e < 17; ++e) {
      const double clean = reference::kRobustCurves[c][0], robust = reference::kRobustCurves[c][e];
      const auto drop = nonrobust_drop(accuracy_vector({clean}), accuracy_vector({robust}));
      CHECK(std::abs(*drop[0] + robust - clean) <= 1e-12);
      CHECK(std::abs(*drop[0] - reference::kDropCurves[c][e]) <= 1e-3);
    }
  }
  const auto airplane = nonrobust_drop(accuracy_vector({0.878}), accuracy_vector({0.854}));
  CHECK(*airplane[0] == doctest::Approx(0.024));
  const auto same = nonrobust_drop(accuracy_vector({0.5, 0.6}), accuracy_vector({0.5, 0.6}));
  CHECK(*same[0] == 0.0);
  CHECK(*same[1] == 0.0);
}

TEST_CASE("coverage trivial cases") {
  const std::vector<Tensor> one{Tensor::matrix(1, 3, {0.2, 0.5, 0.1})};
  for (std::size_t m : {1u, 7u, 100u}) CHECK(feature_space_coverage(one, m, 4).coverage[0] == 1.0 / m);
  const std::vector<Tensor> same{Tensor::matrix(5, 2, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1})};
  CHECK(feature_space_coverage(same, 5, 1).coverage[0] == 0.2);
  const std::vector<Tensor> with_zero{Tensor::matrix(2, 2, {0, 0, 1, 0})};
  const auto r = feature_space_coverage(with_zero, 10, 1);
  CHECK(r.zero_excluded[0] == 1);
  CHECK(r.occupied[0] == 1);
  const std::vector<Tensor> zeros{Tensor::zeros({3, 2})};
  CHECK_THROWS_AS(feature_space_coverage(zeros, 10, 1), DegenerateInputError);
}

TEST_CASE("coverage matches a brute-force assignment oracle") {
  std::mt19937_64 gen(99);
  std::normal_distribution<double> n01;
  Tensor feats = Tensor::zeros({1000, 6});
  for (double& v : feats.values()) v = n01(gen);
  const Tensor centers = sample_bin_centers(100, 6, 1234);
  std::set<std::size_t> hit;
  for (std::size_t i = 0; i < 1000; ++i) {
    double best = -INFINITY;
    std::size_t arg = 0;
    for (std::size_t b = 0; b < 100; ++b) {
      // Nearest centre by Euclidean distance between unit vectors.
      double norm = 0.0;
      for (std::size_t d = 0; d < 6; ++d) norm += feats(i, d) * feats(i, d);
      norm = std::sqrt(norm);
      double dist = 0.0;
      for (std::size_t d = 0; d < 6; ++d) dist += std::pow(feats(i, d) / norm - centers(b, d), 2);
      if (-dist > best) {
        best = -dist;
        arg = b;
      }
    }
    hit.insert(arg);
  }
  const auto r = feature_space_coverage({feats}, 100, 1234);
  CHECK(r.occupied[0] == hit.size());
  CHECK(r.coverage[0] == static_cast<double>(hit.size()) / 100.0);
}

TEST_CASE("pca recovers a known spectrum") {
  // Axis-aligned data with variances 4, 1, 0.25: points +-2, +-1, +-0.5 on each axis.
  std::vector<double> v;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) {
        v.push_back(2.0 * sx);
        v.push_back(1.0 * sy);
        v.push_back(0.5 * sz);
      }
  const Tensor x = Tensor::matrix(8, 3, v);
  const auto r = pca_project(x, 3);
  CHECK(std::abs(r.eigenvalues[0] - 4.0) <= 1e-8);
  CHECK(std::abs(r.eigenvalues[1] - 1.0) <= 1e-8);
  CHECK(std::abs(r.eigenvalues[2] - 0.25) <= 1e-8);
  CHECK(r.rank == 3);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(std::abs(r.coordinates(i, c)) - std::abs(x(i, c))) <= 1e-8);
}

TEST_CASE("pca full-rank reconstruction") {
  std::mt19937_64 gen(8);
  Tensor x = oracle::random_matrix(40, 4, gen);
  for (std::size_t i = 0; i < 40; ++i) {
    x(i, 1) += 2.0 * x(i, 0);
    x(i, 3) *= 0.3;
  }
  const auto r = pca_project(x, 4);
  for (std::size_t k = 1; k < 4; ++k) CHECK(r.eigenvalues[k] <= r.eigenvalues[k - 1]);
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t d = 0; d < 4; ++d) {
      double back = 0.0;
      for (std::size_t c = 0; c < 4; ++c) back += r.coordinates(i, c) * r.components[c][d];
      CHECK(std::abs(back - (x(i, d) - r.mean[d])) <= 1e-8);
    }
  }
}

TEST_CASE("pca on degenerate data reports the rank") {
  const Tensor dup = Tensor::matrix(3, 4, {1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4});
  const auto r = pca_project(dup, 3);
  CHECK(r.rank == 0);
  for (double ev : r.eigenvalues) CHECK(ev == doctest::Approx(0.0));
  const auto two = pca_project(Tensor::matrix(2, 4, {0, 0, 0, 0, 1, 1, 0, 0}), 3);
  CHECK(two.rank == 1);
  CHECK_THROWS_AS(pca_project(Tensor::zeros({5, 2}), 3), DimensionError);
}

TEST_CASE("one-vs-one and one-vs-all minimal weights") {
  const auto two = ovo_ova_min_weights(2, 1.0);
  CHECK(two.ovo(0, 1) == 2.0);
  CHECK(two.ova[0].feasible);
  CHECK(two.ova[1].feasible);
  CHECK(two.ova[0].min_weight == 1.0);
  const auto four = ovo_ova_min_weights(4, 1.0);
  CHECK(four.ova[0].feasible);
  CHECK_FALSE(four.ova[1].feasible);
  CHECK_FALSE(four.ova[2].feasible);
  CHECK(four.ova[3].feasible);
  const std::vector<double> h{0.0, 0.25};
  CHECK(ovo_ova_min_weights(h, 0.5).ovo(1, 0) == 2.0 * 0.5 / 0.25);
  const std::vector<double> dup{1.0, 1.0};
  CHECK_THROWS_AS(ovo_ova_min_weights(dup, 1.0), ConfigError);
  CHECK_THROWS_AS(ovo_ova_min_weights(2, 0.0), ConfigError);
}

}
