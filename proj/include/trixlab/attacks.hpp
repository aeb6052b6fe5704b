#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trixlab/model.hpp"
#include "trixlab/tensor.hpp"

namespace trixlab {

enum class AttackMode {
  UntargetedKl,  // ascend KL(f(x) || f(x + delta))
  UntargetedCe,  // ascend CE(f(x + delta), y)
  TargetedCe,    // descend CE(f(x + delta), target)
};

std::string to_string(AttackMode mode);
AttackMode attack_mode_from_string(const std::string& name);

// L-infinity PGD settings. Inputs live in [0, 1].
struct AttackConfig {
  double epsilon = 0.1;
  double step_size = 0.025;
  int num_steps = 10;
  AttackMode mode = AttackMode::UntargetedKl;
  bool random_start = true;
  std::uint64_t seed = 0;

  void validate() const;

  // K=10, step eps/4; the KL mode starts from a small Gaussian jitter.
  static AttackConfig training_default(double epsilon, std::uint64_t seed = 0);
  // K=20, step eps/10, CE mode with uniform random start.
  static AttackConfig evaluation_default(double epsilon, std::uint64_t seed = 0);
};

// Clamps each row of x_adv into the ball of radius eps[i] around x[i] and then
// into the [0, 1] box.
Tensor project_linf(const Tensor& x_adv, const Tensor& x, std::span<const double> eps);

// One target per sample, uniform over {0..C-1} minus the label, drawn from a
// stream keyed by (seed, position).
std::vector<int> sample_targets(std::span<const int> labels, int num_classes, std::uint64_t seed);

// Runs PGD on every row of x. eps_per_sample empty means config.epsilon for
// all rows; targets must be given exactly when mode is TargetedCe. Rows are
// independent (each has its own RNG stream keyed by (seed, row)), so the
// result does not depend on how the batch is split across workers.
Tensor pgd_attack(const MlpClassifier& model, const Tensor& x, std::span<const int> labels,
                  const AttackConfig& config, std::span<const double> eps_per_sample = {},
                  std::span<const int> targets = {});

}  // namespace trixlab
