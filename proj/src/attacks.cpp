#include "trixlab/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "trixlab/errors.hpp"
#include "trixlab/parallel.hpp"
#include "trixlab/rng.hpp"

namespace trixlab {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Attack loss summed (not averaged) over rows so that each row's gradient is
// independent of the batch it was computed in.
Var attack_objective(const MlpClassifier& model, const MlpClassifier::Bound& params, Var x_adv,
                     AttackMode mode, std::span<const int> labels, std::span<const int> targets,
                     const Tensor* clean_logits) {
  Tape& tape = *x_adv.tape;
  const Var logits = model.forward(params, x_adv).logits;
  switch (mode) {
    case AttackMode::UntargetedKl:
      return ops::sum(ops::kl_rows(tape.leaf(*clean_logits), logits));
    case AttackMode::UntargetedCe:
      return ops::sum(ops::cross_entropy_rows(logits, labels));
    case AttackMode::TargetedCe:
      return ops::sum(ops::cross_entropy_rows(logits, targets));
  }
  throw UsageError("unknown attack mode");
}

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
  const std::size_t cols = t.cols();
  std::vector<double> values(t.values().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                             t.values().begin() + static_cast<std::ptrdiff_t>(end * cols));
  return Tensor::matrix(end - begin, cols, std::move(values));
}

}  // namespace

std::string to_string(AttackMode mode) {
  switch (mode) {
    case AttackMode::UntargetedKl:
      return "untargeted_kl";
    case AttackMode::UntargetedCe:
      return "untargeted_ce";
    case AttackMode::TargetedCe:
      return "targeted_ce";
  }
  return "unknown";
}

AttackMode attack_mode_from_string(const std::string& name) {
  if (name == "untargeted_kl") return AttackMode::UntargetedKl;
  if (name == "untargeted_ce") return AttackMode::UntargetedCe;
  if (name == "targeted_ce") return AttackMode::TargetedCe;
  throw ConfigError("unknown attack mode '" + name + "'");
}

void AttackConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("attack epsilon must be in (0, 1]");
  if (!(step_size > 0.0)) throw ConfigError("attack step_size must be positive");
  if (num_steps < 1) throw ConfigError("attack num_steps must be >= 1");
}

AttackConfig AttackConfig::training_default(double epsilon, std::uint64_t seed) {
  return {epsilon, epsilon / 4.0, 10, AttackMode::UntargetedKl, true, seed};
}

AttackConfig AttackConfig::evaluation_default(double epsilon, std::uint64_t seed) {
  return {epsilon, epsilon / 10.0, 20, AttackMode::UntargetedCe, true, seed};
}

Tensor project_linf(const Tensor& x_adv, const Tensor& x, std::span<const double> eps) {
  if (x_adv.shape() != x.shape()) {
    throw DimensionError("project_linf: shape mismatch " + shape_string(x_adv.shape()) + " vs " +
                         shape_string(x.shape()));
  }
  if (eps.size() != x.rows()) {
    throw DimensionError("project_linf: " + std::to_string(eps.size()) + " radii for " +
                         std::to_string(x.rows()) + " samples");
  }
  Tensor out = x_adv;
  const std::size_t cols = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (eps[i] < 0.0) throw UsageError("project_linf: negative radius");
    for (std::size_t j = 0; j < cols; ++j) {
      const double base = x(i, j);
      const double delta = std::clamp(x_adv(i, j) - base, -eps[i], eps[i]);
      double v = std::clamp(base + delta, 0.0, 1.0);
      // base + delta can round one ulp outside the ball; step back toward base.
      while (v - base > eps[i]) v = std::nextafter(v, base);
      while (base - v > eps[i]) v = std::nextafter(v, base);
      out(i, j) = v;
    }
  }
  return out;
}

std::vector<int> sample_targets(std::span<const int> labels, int num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("sample_targets needs at least 2 classes");
  std::vector<int> targets(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw IndexError("sample_targets: label " + std::to_string(labels[i]) + " out of range");
    }
    Rng rng(stream_seed(seed, i));
    // Draw from C-1 slots and skip over the label.
    int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes - 1)));
    if (pick >= labels[i]) ++pick;
    targets[i] = pick;
  }
  return targets;
}

Tensor pgd_attack(const MlpClassifier& model, const Tensor& x, std::span<const int> labels,
                  const AttackConfig& config, std::span<const double> eps_per_sample,
                  std::span<const int> targets) {
  if (config.num_steps < 1) throw ConfigError("attack num_steps must be >= 1");
  const bool targeted = config.mode == AttackMode::TargetedCe;
  if (targeted != !targets.empty()) {
    throw UsageError("targets must be supplied exactly when the attack mode is targeted_ce");
  }
  const std::size_t n = x.rows();
  if (x.rank() != 2) throw DimensionError("pgd_attack: inputs must be a matrix");
  if (labels.size() != n) throw DimensionError("pgd_attack: label count does not match inputs");
  if (targeted && targets.size() != n) throw DimensionError("pgd_attack: target count does not match inputs");
  if (targeted) {
    const auto classes = static_cast<int>(model.num_classes());
    for (std::size_t i = 0; i < n; ++i) {
      if (targets[i] < 0 || targets[i] >= classes) throw IndexError("pgd_attack: target out of range");
      if (targets[i] == labels[i]) throw UsageError("pgd_attack: target equals the true label at row " + std::to_string(i));
    }
  }
  std::vector<double> eps(n, config.epsilon);
  if (!eps_per_sample.empty()) {
    if (eps_per_sample.size() != n) throw DimensionError("pgd_attack: radius count does not match inputs");
    eps.assign(eps_per_sample.begin(), eps_per_sample.end());
  }

  Tensor result = x;
  parallel_chunks(n, [&](std::size_t begin, std::size_t end) {
    const Tensor xs = slice_rows(x, begin, end);
    const std::span<const double> radii(eps.data() + begin, end - begin);
    const auto chunk_labels = labels.subspan(begin, end - begin);
    const auto chunk_targets = targeted ? targets.subspan(begin, end - begin) : std::span<const int>{};
    const std::size_t cols = xs.cols();

    // Initial perturbation, one RNG stream per row.
    Tensor adv = xs;
    for (std::size_t r = 0; r < xs.rows(); ++r) {
      Rng rng(stream_seed(config.seed, begin + r));
      for (std::size_t j = 0; j < cols; ++j) {
        if (config.mode == AttackMode::UntargetedKl) {
          adv(r, j) += 0.001 * rng.normal();
        } else if (config.random_start) {
          adv(r, j) += rng.uniform(-radii[r], radii[r]);
        }
      }
    }
    adv = project_linf(adv, xs, radii);

    Tensor clean_logits;
    if (config.mode == AttackMode::UntargetedKl) clean_logits = model.predict(xs).logits;

    const double direction = targeted ? -1.0 : 1.0;
    for (int step = 0; step < config.num_steps; ++step) {
      Tape tape;
      const auto params = model.bind(tape, false);
      const Var x_var = tape.leaf(adv, true);
      const Var loss = attack_objective(model, params, x_var, config.mode, chunk_labels, chunk_targets,
                                        &clean_logits);
      tape.backward(loss);
      const auto grad = tape.grad(x_var).values();
      for (std::size_t k = 0; k < adv.size(); ++k) {
        adv[k] += direction * config.step_size * sign(grad[k]);
      }
      adv = project_linf(adv, xs, radii);
    }
    std::ranges::copy(adv.values(), result.values().begin() + static_cast<std::ptrdiff_t>(begin * cols));
  });
  return result;
}

}  // namespace trixlab
