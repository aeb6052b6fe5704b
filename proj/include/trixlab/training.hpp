#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trixlab/attacks.hpp"
#include "trixlab/data.hpp"
#include "trixlab/fairness.hpp"
#include "trixlab/model.hpp"

namespace trixlab {

enum class Method { Trades, TargetedTrades, Trix };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

// When the class statistics behind w are refreshed before the warm-up epoch.
enum class StatsGranularity {
  Epoch,  // accumulate over an epoch, recompute w at the epoch boundary
  Batch,  // running accumulation, recompute w after every batch's clean pass
};

std::string to_string(StatsGranularity g);
StatsGranularity stats_granularity_from_string(const std::string& name);

// Which adversaries the robust statistics at the warm-up epoch come from.
enum class RobustStatsSource {
  Untargeted,  // a fresh untargeted KL-PGD pass over the training set after epoch tau
  Training,    // the mixed adversaries used in the loss during epoch tau
};

std::string to_string(RobustStatsSource s);
RobustStatsSource robust_stats_source_from_string(const std::string& name);

struct LrSchedule {
  double initial = 0.1;
  std::vector<int> decay_epochs;  // 0-based epochs at which the rate is multiplied by decay_factor
  double decay_factor = 0.1;

  // decay at T-10 and T-5.
  static LrSchedule step_default(int total_epochs, double initial = 0.1);
};

// Rate for a 0-based epoch: initial * decay_factor^(number of decay epochs <= epoch).
double lr_at(int epoch, const LrSchedule& schedule);

struct OptimizerConfig {
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool nesterov = true;
};

struct TrainConfig {
  Method method = Method::Trix;
  double beta = 6.0;
  double lambda = 1.0;
  double mu = kDefaultDiagonalRegularizer;
  int tau = 30;
  int total_epochs = 60;
  std::size_t batch_size = 128;
  LrSchedule lr = LrSchedule::step_default(60);
  OptimizerConfig optimizer;
  AttackConfig train_attack = AttackConfig::training_default(0.1);
  AttackConfig eval_attack = AttackConfig::evaluation_default(0.1);
  StatsGranularity stats = StatsGranularity::Epoch;
  WeightAverage weight_average = WeightAverage::BatchMean;
  RobustStatsSource robust_stats = RobustStatsSource::Untargeted;
  EpsilonScaling eps_scaling;
  // Evaluate on the evaluation set every this many epochs (and always at the
  // last epoch); 0 disables intermediate evaluation.
  int eval_every = 0;
  std::vector<std::size_t> hidden = {64, 64};
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double ce = 0.0;
  double adv_kl = 0.0;
  double lr = 0.0;
  // On the training batches: clean predictions before the update and
  // predictions on the adversaries used in the loss.
  std::vector<std::optional<double>> clean_acc;
  std::vector<std::optional<double>> robust_acc;
  std::vector<double> class_weights;
  std::optional<Tensor> similarity;
  std::size_t targeted_samples = 0;
  // Filled on evaluation epochs: clean and PGD accuracy on the evaluation set.
  std::vector<std::optional<double>> eval_clean_acc;
  std::vector<std::optional<double>> eval_robust_acc;
};

// Per-sample loss weights w[y_i].
std::vector<double> per_sample_weights(const ClassWeights& w, std::span<const int> labels);

struct LossTerms {
  Var total;
  Var ce;   // mean_i w_i CE_i
  Var adv;  // the adversarial KL term before scaling by beta
  Var clean_logits;
  Var adv_logits;  // logits on the adversarial input each row's KL term used
};

// mean_i [w_i CE(f(x_i), y_i)] + beta KL(f(x) || f(x_adv)).
LossTerms trades_loss(const MlpClassifier& model, const MlpClassifier::Bound& params, Var x,
                      std::span<const int> labels, Var x_adv, std::span<const double> sample_weights, double beta);

// (1/B) sum_i [ t_i KL(f(xt_i) || f(x_i)) + (1 - t_i) KL(f(x_i) || f(xu_i)) ].
Var mixed_adv_loss(const MlpClassifier& model, const MlpClassifier::Bound& params, Var x, Var x_adv_untargeted,
                   Var x_adv_targeted, const std::vector<bool>& is_targeted);

// mean_i [w_i CE(f(x_i), y_i)] + beta * mixed_adv_loss.
LossTerms total_loss(const MlpClassifier& model, const MlpClassifier::Bound& params, Var x,
                     std::span<const int> labels, Var x_adv_untargeted, Var x_adv_targeted,
                     const std::vector<bool>& is_targeted, std::span<const double> sample_weights, double beta);

struct SgdState {
  std::vector<std::vector<double>> velocity;
};

// g = grad + wd * p; v = m v + g; p -= lr * (nesterov ? g + m v : v).
void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, SgdState& state, double lr,
              const OptimizerConfig& options);

struct TrainResult {
  MlpClassifier model;
  std::vector<EpochRecord> records;
  ClassWeights final_weights;
};

// Optional hooks; on_epoch sees every record as soon as it is produced.
struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
};

// Runs the two-phase schedule. Throws NumericalError on a NaN loss.
TrainResult train(const Dataset& train_set, const TrainConfig& config, const Dataset* eval_set = nullptr,
                  const TrainHooks& hooks = {});

// Continues from a given initial model instead of a fresh init.
TrainResult train_from(MlpClassifier model, const Dataset& train_set, const TrainConfig& config,
                       const Dataset* eval_set = nullptr, const TrainHooks& hooks = {});

struct EvalResult {
  std::vector<std::optional<double>> clean_acc;
  std::vector<std::optional<double>> robust_acc;
  std::vector<int> clean_predictions;
  std::vector<int> adv_predictions;
};

// Clean accuracy plus PGD accuracy with the given attack over the whole set.
EvalResult evaluate(const MlpClassifier& model, const Dataset& data, const AttackConfig& attack,
                    std::size_t chunk = 512);

}  // namespace trixlab
