#include "trixlab/training.hpp"

#include <algorithm>
#include <cmath>

#include "trixlab/errors.hpp"
#include "trixlab/metrics.hpp"
#include "trixlab/rng.hpp"

namespace trixlab {

namespace {

// Stream tags for seed derivation.
constexpr std::uint64_t kShuffleStream = 0x5f;
constexpr std::uint64_t kAttackStream = 0xa7;
constexpr std::uint64_t kTargetStream = 1;
constexpr std::uint64_t kTargetedAttackStream = 2;
constexpr std::uint64_t kUntargetedAttackStream = 3;
constexpr std::uint64_t kRobustStatsStream = 0x7b;

Var adversarial_kl(const MlpClassifier& model, const MlpClassifier::Bound& params, Var clean_logits,
                   Var x_adv_untargeted, Var x_adv_targeted, const std::vector<bool>& is_targeted,
                   Var* adv_logits_out) {
  const Var adv_input = ops::select_rows(is_targeted, x_adv_targeted, x_adv_untargeted);
  const Var adv_logits = model.forward(params, adv_input).logits;
  // Targeted rows use KL(f(x_t) || f(x)); untargeted rows KL(f(x) || f(x_u)).
  const Var p = ops::select_rows(is_targeted, adv_logits, clean_logits);
  const Var q = ops::select_rows(is_targeted, clean_logits, adv_logits);
  if (adv_logits_out) *adv_logits_out = adv_logits;
  return ops::mean(ops::kl_rows(p, q));
}

Var weighted_ce(Var clean_logits, std::span<const int> labels, std::span<const double> sample_weights) {
  const Var rows = ops::cross_entropy_rows(clean_logits, labels);
  if (sample_weights.empty()) return ops::mean(rows);
  if (sample_weights.size() != labels.size()) {
    throw DimensionError("loss weights: " + std::to_string(sample_weights.size()) + " weights for " +
                         std::to_string(labels.size()) + " samples");
  }
  return ops::weighted_sum(rows, sample_weights, static_cast<double>(labels.size()));
}

Tensor rows_of(const Tensor& t, const std::vector<std::size_t>& rows) {
  const std::size_t cols = t.cols();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (std::size_t r : rows) {
    auto row = t.row(r);
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor::matrix(rows.size(), cols, std::move(values));
}

template <typename T>
std::vector<T> pick(std::span<const T> values, const std::vector<std::size_t>& rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(values[r]);
  return out;
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::Trades:
      return "trades";
    case Method::TargetedTrades:
      return "targeted_trades";
    case Method::Trix:
      return "trix";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "trades") return Method::Trades;
  if (name == "targeted_trades") return Method::TargetedTrades;
  if (name == "trix") return Method::Trix;
  throw ConfigError("unknown method '" + name + "' (expected trades, targeted_trades or trix)");
}

std::string to_string(StatsGranularity g) { return g == StatsGranularity::Epoch ? "epoch" : "batch"; }

StatsGranularity stats_granularity_from_string(const std::string& name) {
  if (name == "epoch") return StatsGranularity::Epoch;
  if (name == "batch") return StatsGranularity::Batch;
  throw ConfigError("unknown stats granularity '" + name + "' (expected epoch or batch)");
}

std::string to_string(RobustStatsSource s) { return s == RobustStatsSource::Untargeted ? "untargeted" : "training"; }

RobustStatsSource robust_stats_source_from_string(const std::string& name) {
  if (name == "untargeted") return RobustStatsSource::Untargeted;
  if (name == "training") return RobustStatsSource::Training;
  throw ConfigError("unknown robust stats source '" + name + "' (expected untargeted or training)");
}

LrSchedule LrSchedule::step_default(int total_epochs, double initial) {
  return {initial, {total_epochs - 10, total_epochs - 5}, 0.1};
}

double lr_at(int epoch, const LrSchedule& schedule) {
  double rate = schedule.initial;
  for (int d : schedule.decay_epochs) {
    if (epoch >= d) rate *= schedule.decay_factor;
  }
  return rate;
}

void TrainConfig::validate() const {
  if (total_epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (tau < 1 || tau > total_epochs) throw ConfigError("train.tau must satisfy 0 < tau <= epochs");
  if (!(beta >= 0.0)) throw ConfigError("train.beta must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be >= 0");
  if (!(mu >= 0.0)) throw ConfigError("train.mu must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr.initial > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(lr.decay_factor > 0.0)) throw ConfigError("train.lr_decay_factor must be positive");
  if (optimizer.momentum < 0.0 || optimizer.weight_decay < 0.0) {
    throw ConfigError("optimizer momentum and weight_decay must be >= 0");
  }
  if (!(eps_scaling.min_factor > 0.0) || eps_scaling.max_factor < eps_scaling.min_factor) {
    throw ConfigError("epsilon scaling bounds must satisfy 0 < min <= max");
  }
  if (eval_every < 0) throw ConfigError("train.eval_every must be >= 0");
  for (std::size_t h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
  }
  train_attack.validate();
  eval_attack.validate();
}

std::vector<double> per_sample_weights(const ClassWeights& w, std::span<const int> labels) {
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= w.size()) {
      throw IndexError("loss weights: label " + std::to_string(labels[i]) + " has no weight");
    }
    out[i] = w[static_cast<std::size_t>(labels[i])];
  }
  return out;
}

LossTerms trades_loss(const MlpClassifier& model, const MlpClassifier::Bound& params, Var x,
                      std::span<const int> labels, Var x_adv, std::span<const double> sample_weights, double beta) {
  if (x.value().shape() != x_adv.value().shape()) {
    throw DimensionError("trades_loss: clean and adversarial batches differ in shape");
  }
  const Var clean = model.forward(params, x).logits;
  const Var adv_logits = model.forward(params, x_adv).logits;
  const Var ce = weighted_ce(clean, labels, sample_weights);
  const Var adv = ops::kl_divergence(clean, adv_logits);
  return {ops::add(ce, ops::scale(adv, beta)), ce, adv, clean, adv_logits};
}

Var mixed_adv_loss(const MlpClassifier& model, const MlpClassifier::Bound& params, Var x, Var x_adv_untargeted,
                   Var x_adv_targeted, const std::vector<bool>& is_targeted) {
  const Var clean = model.forward(params, x).logits;
  return adversarial_kl(model, params, clean, x_adv_untargeted, x_adv_targeted, is_targeted, nullptr);
}

LossTerms total_loss(const MlpClassifier& model, const MlpClassifier::Bound& params, Var x,
                     std::span<const int> labels, Var x_adv_untargeted, Var x_adv_targeted,
                     const std::vector<bool>& is_targeted, std::span<const double> sample_weights, double beta) {
  const Var clean = model.forward(params, x).logits;
  const Var ce = weighted_ce(clean, labels, sample_weights);
  Var adv_logits;
  const Var adv = adversarial_kl(model, params, clean, x_adv_untargeted, x_adv_targeted, is_targeted, &adv_logits);
  return {ops::add(ce, ops::scale(adv, beta)), ce, adv, clean, adv_logits};
}

void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, SgdState& state, double lr,
              const OptimizerConfig& options) {
  if (grads.size() != params.size()) throw DimensionError("sgd_step: one gradient per parameter required");
  if (state.velocity.empty()) {
    for (const Tensor* p : params) state.velocity.emplace_back(p->size(), 0.0);
  }
  if (state.velocity.size() != params.size()) throw DimensionError("sgd_step: optimizer state does not match");
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->values();
    const auto g = grads[k].values();
    auto& v = state.velocity[k];
    if (g.size() != p.size() || v.size() != p.size()) {
      throw DimensionError("sgd_step: gradient shape does not match parameter " + std::to_string(k));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = g[i] + options.weight_decay * p[i];
      v[i] = options.momentum * v[i] + d;
      const double update = options.nesterov ? d + options.momentum * v[i] : v[i];
      p[i] -= lr * update;
    }
  }
}

EvalResult evaluate(const MlpClassifier& model, const Dataset& data, const AttackConfig& attack, std::size_t chunk) {
  const std::size_t n = data.size();
  const std::size_t c_count = data.num_classes;
  EvalResult result;
  result.clean_predictions.reserve(n);
  result.adv_predictions.reserve(n);
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t start = 0, index = 0; start < n; start += chunk, ++index) {
    const std::size_t end = std::min(n, start + chunk);
    const Tensor x = rows_of(data.inputs, [&] {
      std::vector<std::size_t> rows(end - start);
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = start + i;
      return rows;
    }());
    const std::span<const int> labels(data.labels.data() + start, end - start);
    const auto clean = argmax_rows(model.predict(x).logits);
    AttackConfig cfg = attack;
    cfg.seed = stream_seed(attack.seed, index);
    std::vector<int> targets;
    if (cfg.mode == AttackMode::TargetedCe) {
      targets = sample_targets(labels, static_cast<int>(c_count), stream_seed(cfg.seed, kTargetStream));
    }
    const Tensor x_adv = pgd_attack(model, x, labels, cfg, {}, targets);
    const auto adv = argmax_rows(model.predict(x_adv).logits);
    result.clean_predictions.insert(result.clean_predictions.end(), clean.begin(), clean.end());
    result.adv_predictions.insert(result.adv_predictions.end(), adv.begin(), adv.end());
  }
  result.clean_acc = classwise_accuracy(result.clean_predictions, data.labels, c_count).values;
  result.robust_acc = classwise_accuracy(result.adv_predictions, data.labels, c_count).values;
  return result;
}

TrainResult train(const Dataset& train_set, const TrainConfig& config, const Dataset* eval_set,
                  const TrainHooks& hooks) {
  std::vector<std::size_t> dims{train_set.dim()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(train_set.num_classes);
  return train_from(MlpClassifier::init(std::move(dims), stream_seed(config.seed, 0)), train_set, config,
                    eval_set, hooks);
}

TrainResult train_from(MlpClassifier model, const Dataset& train_set, const TrainConfig& config,
                       const Dataset* eval_set, const TrainHooks& hooks) {
  config.validate();
  if (train_set.size() == 0) throw ConfigError("training set is empty");
  if (model.input_dim() != train_set.dim() || model.num_classes() != train_set.num_classes) {
    throw DimensionError("model dims do not match the training data");
  }
  const std::size_t c_count = train_set.num_classes;
  const bool trix = config.method == Method::Trix;
  const double eps_base = config.train_attack.epsilon;

  SgdState optimizer;
  ClassWeights weights = ClassWeights::uniform(c_count);
  std::optional<Tensor> similarity;
  ClassMeanAccumulator clean_stats(c_count);
  bool frozen = false;

  auto refresh_weights = [&](const ClassMeanAccumulator& acc) {
    const SimilarityMatrix s = build_similarity(acc.finalize(), config.mu);
    weights = compute_weights(s, config.lambda);
    similarity = s.matrix;
  };

  if (trix && config.stats == StatsGranularity::Epoch) {
    // Statistics of the initial model seed the policy for the first epoch.
    clean_stats.add(softmax(model.predict(train_set.inputs).logits), train_set.labels);
    refresh_weights(clean_stats);
  }

  TrainResult result{model, {}, weights};
  for (int epoch = 1; epoch <= config.total_epochs; ++epoch) {
    const double lr = lr_at(epoch - 1, config.lr);
    const bool after_warmup = trix && epoch > config.tau;
    const bool collect_robust =
        trix && epoch == config.tau && config.robust_stats == RobustStatsSource::Training;
    clean_stats.reset();
    ClassMeanAccumulator robust_stats(c_count);

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    std::vector<int> clean_preds, adv_preds, seen_labels;
    seen_labels.reserve(train_set.size());

    const auto order = batches(train_set.size(), config.batch_size, stream_seed(config.seed, kShuffleStream, epoch));
    for (std::size_t b = 0; b < order.size(); ++b) {
      const auto& idx = order[b];
      const Tensor x = train_set.gather_inputs(idx);
      const std::vector<int> y = train_set.gather_labels(idx);
      const std::uint64_t batch_seed = stream_seed(config.seed, kAttackStream, stream_seed(epoch, b));

      if (trix && !frozen) {
        clean_stats.add(softmax(model.predict(x).logits), y);
        if (config.stats == StatsGranularity::Batch) refresh_weights(clean_stats);
      }

      std::vector<bool> targeted(y.size(), false);
      if (config.method == Method::TargetedTrades) targeted.assign(y.size(), true);
      if (trix) targeted = attack_policy(weights, y, config.weight_average);
      const auto eps = scale_epsilon(eps_base, weights, y, after_warmup, config.eps_scaling);

      std::vector<std::size_t> t_rows, u_rows;
      for (std::size_t i = 0; i < y.size(); ++i) (targeted[i] ? t_rows : u_rows).push_back(i);
      record.targeted_samples += t_rows.size();

      Tensor x_untargeted = x, x_targeted = x;
      if (!u_rows.empty()) {
        AttackConfig cfg = config.train_attack;
        cfg.mode = AttackMode::UntargetedKl;
        cfg.seed = stream_seed(batch_seed, kUntargetedAttackStream);
        const auto y_u = pick<int>(y, u_rows);
        const auto eps_u = pick<double>(eps, u_rows);
        const Tensor adv = pgd_attack(model, rows_of(x, u_rows), y_u, cfg, eps_u);
        for (std::size_t r = 0; r < u_rows.size(); ++r) {
          std::ranges::copy(adv.row(r), x_untargeted.row(u_rows[r]).begin());
        }
      }
      if (!t_rows.empty()) {
        AttackConfig cfg = config.train_attack;
        cfg.mode = AttackMode::TargetedCe;
        cfg.seed = stream_seed(batch_seed, kTargetedAttackStream);
        const auto y_t = pick<int>(y, t_rows);
        const auto eps_t = pick<double>(eps, t_rows);
        const auto targets = sample_targets(y_t, static_cast<int>(c_count), stream_seed(batch_seed, kTargetStream));
        const Tensor adv = pgd_attack(model, rows_of(x, t_rows), y_t, cfg, eps_t, targets);
        for (std::size_t r = 0; r < t_rows.size(); ++r) {
          std::ranges::copy(adv.row(r), x_targeted.row(t_rows[r]).begin());
        }
      }

      const std::vector<double> loss_weights =
          after_warmup ? per_sample_weights(weights, y) : std::vector<double>(y.size(), 1.0);

      Tape tape;
      const auto params = model.bind(tape, true);
      const LossTerms terms = total_loss(model, params, tape.leaf(x), y, tape.leaf(std::move(x_untargeted)),
                                         tape.leaf(std::move(x_targeted)), targeted, loss_weights, config.beta);
      const double loss_value = terms.total.value().item();
      if (!std::isfinite(loss_value)) {
        throw NumericalError("training diverged: loss is " + std::to_string(loss_value) + " at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      tape.backward(terms.total);

      const double share = static_cast<double>(y.size()) / static_cast<double>(train_set.size());
      record.loss += share * loss_value;
      record.ce += share * terms.ce.value().item();
      record.adv_kl += share * terms.adv.value().item();
      const auto batch_clean = argmax_rows(terms.clean_logits.value());
      const auto batch_adv = argmax_rows(terms.adv_logits.value());
      clean_preds.insert(clean_preds.end(), batch_clean.begin(), batch_clean.end());
      adv_preds.insert(adv_preds.end(), batch_adv.begin(), batch_adv.end());
      seen_labels.insert(seen_labels.end(), y.begin(), y.end());
      if (collect_robust) robust_stats.add(softmax(terms.adv_logits.value()), y);

      std::vector<Tensor> grads;
      for (std::size_t l = 0; l < params.weights.size(); ++l) {
        grads.push_back(params.weights[l].grad());
        grads.push_back(params.biases[l].grad());
      }
      sgd_step(model.parameters(), grads, optimizer, lr, config.optimizer);
    }

    if (trix && !frozen) {
      if (epoch == config.tau && config.robust_stats == RobustStatsSource::Untargeted) {
        AttackConfig cfg = config.train_attack;
        cfg.mode = AttackMode::UntargetedKl;
        cfg.seed = stream_seed(config.seed, kRobustStatsStream, epoch);
        const Tensor adv = pgd_attack(model, train_set.inputs, train_set.labels, cfg);
        robust_stats.add(softmax(model.predict(adv).logits), train_set.labels);
        refresh_weights(robust_stats);
        frozen = true;
      } else if (collect_robust) {
        refresh_weights(robust_stats);
        frozen = true;
      } else if (config.stats == StatsGranularity::Epoch) {
        refresh_weights(clean_stats);
      }
    }

    record.clean_acc = classwise_accuracy(clean_preds, seen_labels, c_count).values;
    record.robust_acc = classwise_accuracy(adv_preds, seen_labels, c_count).values;
    record.class_weights = weights.w;
    record.similarity = similarity;
    const bool last = epoch == config.total_epochs;
    if (eval_set && (last || (config.eval_every > 0 && epoch % config.eval_every == 0))) {
      const EvalResult ev = evaluate(model, *eval_set, config.eval_attack);
      record.eval_clean_acc = ev.clean_acc;
      record.eval_robust_acc = ev.robust_acc;
    }
    if (hooks.on_epoch) hooks.on_epoch(record);
    result.records.push_back(std::move(record));
  }
  result.model = std::move(model);
  result.final_weights = weights;
  return result;
}

}  // namespace trixlab
