// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Usage: acceptance [--keep DIR] [criterion numbers...]

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "reference_data.hpp"
#include "temp_dir.hpp"
#include "trixlab/errors.hpp"
#include "trixlab/fairness.hpp"
#include "trixlab/metrics.hpp"
#include "trixlab/parallel.hpp"
#include "trixlab/run.hpp"
#include "trixlab/training.hpp"

using namespace trixlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. gradients

std::vector<std::size_t> random_dims(std::mt19937_64& gen) {
  std::uniform_int_distribution<std::size_t> in(2, 6), hidden(2, 8), out(2, 4), depth(0, 2);
  std::vector<std::size_t> dims{in(gen)};
  const std::size_t layers = depth(gen);
  for (std::size_t l = 0; l < layers; ++l) dims.push_back(hidden(gen));
  dims.push_back(out(gen));
  return dims;
}

Verdict gradient_fidelity() {
  const auto start = Clock::now();
  std::mt19937_64 gen(1001);
  double worst = 0.0;
  std::map<std::string, double> per_loss;
  for (int trial = 0; trial < 50; ++trial) {
    const auto dims = random_dims(gen);
    MlpClassifier model = MlpClassifier::init(dims, gen());
    const std::size_t n = 2 + gen() % 5;
    const Tensor x = oracle::random_matrix(n, dims.front(), gen, 0, 1);
    const Tensor xu = oracle::random_matrix(n, dims.front(), gen, 0, 1);
    const Tensor xt = oracle::random_matrix(n, dims.front(), gen, 0, 1);
    const auto labels = oracle::random_labels(n, dims.back(), gen);
    std::vector<double> weights;
    std::vector<bool> targeted;
    std::uniform_real_distribution<double> wdist(0.5, 1.5);
    for (std::size_t i = 0; i < n; ++i) {
      weights.push_back(wdist(gen));
      targeted.push_back(gen() % 2 == 0);
    }

    using Loss = std::function<Var(Tape&, const MlpClassifier::Bound&)>;
    const std::vector<std::pair<std::string, Loss>> losses = {
        {"cross_entropy",
         [&](Tape& t, const MlpClassifier::Bound& p) {
           return ops::cross_entropy(model.forward(p, t.leaf(x)).logits, labels);
         }},
        {"kl_divergence",
         [&](Tape& t, const MlpClassifier::Bound& p) {
           return ops::kl_divergence(model.forward(p, t.leaf(x)).logits, model.forward(p, t.leaf(xu)).logits);
         }},
        {"trades_loss",
         [&](Tape& t, const MlpClassifier::Bound& p) {
           return trades_loss(model, p, t.leaf(x), labels, t.leaf(xu), weights, 6.0).total;
         }},
        {"total_loss",
         [&](Tape& t, const MlpClassifier::Bound& p) {
           return total_loss(model, p, t.leaf(x), labels, t.leaf(xu), t.leaf(xt), targeted, weights, 6.0).total;
         }},
    };
    for (const auto& [name, loss] : losses) {
      Tape tape;
      const auto bound = model.bind(tape, true);
      tape.backward(loss(tape, bound));
      auto value = [&] {
        Tape t;
        return loss(t, model.bind(t, false)).value().item();
      };
      auto params = model.parameters();
      for (std::size_t l = 0; l < bound.weights.size(); ++l) {
        const double ew = oracle::max_relative_error(bound.weights[l].grad().values(),
                                                     oracle::finite_difference(*params[2 * l], value));
        const double eb = oracle::max_relative_error(bound.biases[l].grad().values(),
                                                     oracle::finite_difference(*params[2 * l + 1], value));
        per_loss[name] = std::max({per_loss[name], ew, eb});
        worst = std::max({worst, ew, eb});
      }
    }
  }
  const double elapsed = seconds_since(start);
  std::string detail = "max rel err " + fmt(worst, 3);
  for (const auto& [name, err] : per_loss) detail += ", " + name + " " + fmt(err, 3);
  detail += ", " + fmt(elapsed, 3) + " s";
  return {worst <= 1e-5 && elapsed < 30.0, detail};
}

// ---------------------------------------------------------------------------
// 2. weight formula

Verdict weight_oracle() {
  std::mt19937_64 gen(2002);
  std::uniform_int_distribution<std::size_t> classes(2, 20);
  const double lambdas[] = {0.0, 0.5, 1.0, 1.5};
  int matched = 0, nonpositive = 0, mismatched = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = classes(gen);
    const double lambda = lambdas[trial % 4];
    // Random row-stochastic mean-prediction matrix.
    std::vector<double> values(c * c);
    std::exponential_distribution<double> e(1.0);
    for (std::size_t i = 0; i < c; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < c; ++j) total += values[i * c + j] = e(gen) * (i == j ? 3.0 : 1.0);
      for (std::size_t j = 0; j < c; ++j) values[i * c + j] /= total;
    }
    const auto s = build_similarity(ClassMeanPredictions{Tensor::matrix(c, c, values), std::vector<std::size_t>(c, 1)});
    const auto expect = oracle::class_weights(oracle::nested(s.matrix), lambda);
    const bool expect_throw = std::any_of(expect.begin(), expect.end(), [](double w) { return w <= 0.0; });
    try {
      const auto w = compute_weights(s, lambda);
      if (!expect_throw && w.w == expect) {
        ++matched;
      } else {
        ++mismatched;
      }
    } catch (const NumericalError&) {
      if (expect_throw) {
        ++nonpositive;
      } else {
        ++mismatched;
      }
    }
  }
  const SimilarityMatrix hand{Tensor::matrix(2, 2, {0.8, 0.2, 0.3, 0.7}), 0.0};
  const auto w = compute_weights(hand, 1.0);
  const bool hand_ok = w.w == oracle::class_weights({{0.8, 0.2}, {0.3, 0.7}}, 1.0) && std::abs(w[0] - 0.76) <= 1e-15 &&
                       std::abs(w[1] - 1.24) <= 1e-15;
  return {mismatched == 0 && hand_ok,
          std::to_string(matched) + " bitwise matches, " + std::to_string(nonpositive) +
              " agreed nonpositive, " + std::to_string(mismatched) + " mismatches; hand example w = [" +
              fmt(w[0], 17) + ", " + fmt(w[1], 17) + "]"};
}

// ---------------------------------------------------------------------------
// 3. rho_clean

Verdict rho_clean() {
  const auto& trades = reference::kCleanSummaries[0];
  const WorstAvg base{trades.worst / 100.0, trades.avg / 100.0};
  bool pass = true;
  std::string detail;
  for (const auto& row : reference::kCleanSummaries) {
    if (row.method != "FRL" && row.method != "BAT" && row.method != "TRIX" && row.method != "DAFA") continue;
    const double rho = rho_fairness(base, {row.worst / 100.0, row.avg / 100.0}).rho;
    pass = pass && std::abs(rho - row.rho) <= 0.015;
    detail += std::string(row.method) + " " + fmt(rho, 3) + " (reported " + fmt(row.rho, 2) + ") ";
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 4. disparity

Verdict disparity_bars() {
  const auto d = disparity(std::vector<double>(reference::kTradesClean.begin(), reference::kTradesClean.end()));
  const bool pass = std::abs(d.std_dev - reference::kTradesStdDev) <= 0.0005 &&
                    std::abs(d.min_max - reference::kTradesMinMax) <= 0.001 &&
                    std::abs(d.avg - reference::kTradesAvg) <= 0.0005 && d.min == reference::kTradesMin;
  return {pass, "std_dev " + fmt(d.std_dev) + ", min_max " + fmt(d.min_max) + ", avg " + fmt(d.avg) + ", min " +
                    fmt(d.min)};
}

// ---------------------------------------------------------------------------
// 5. ASR and drops

Verdict asr_and_drops() {
  const double cat_robust = reference::kRobustCurves[3][8];
  const std::size_t n = 1000;
  const std::vector<int> labels(n, 0);
  std::vector<int> adv(n, 1);
  std::fill_n(adv.begin(), static_cast<std::ptrdiff_t>(std::lround(cat_robust * n)), 0);
  const double asr = *attack_success_rate(adv, labels, 1)[0];
  const bool asr_ok = std::abs(asr - 0.735) <= 1e-12 && std::abs(asr * 100.0 - reference::kCatUntargetedAsrPercent) <= 0.5;

  double worst_identity = 0.0, worst_drop = 0.0;
  for (std::size_t c = 0; c < 10; ++c) {
    const double clean = reference::kRobustCurves[c][0];
    for (std::size_t e = 0; e < 17; ++e) {
      const double robust = reference::kRobustCurves[c][e];
      worst_identity = std::max(worst_identity, std::abs(robust + reference::kDropCurves[c][e] - clean));
      const double drop = *nonrobust_drop(accuracy_vector({clean}), accuracy_vector({robust}))[0];
      worst_drop = std::max(worst_drop, std::abs(drop - reference::kDropCurves[c][e]));
    }
  }
  return {asr_ok && worst_identity <= 1e-3 && worst_drop <= 1e-3,
          "cat ASR " + fmt(asr) + " vs 73.7%, max |robust+drop-clean| " + fmt(worst_identity, 3) +
              ", max |computed drop - published| " + fmt(worst_drop, 3) + " over 170 points"};
}

// ---------------------------------------------------------------------------
// 6. degeneracy

TrainConfig short_config(Method method, double lambda) {
  TrainConfig cfg;
  cfg.method = method;
  cfg.lambda = lambda;
  cfg.total_epochs = 6;
  cfg.tau = 3;
  cfg.batch_size = 32;
  cfg.lr = LrSchedule::step_default(6);
  cfg.hidden = {16, 16};
  cfg.train_attack.num_steps = 4;
  cfg.eval_attack.num_steps = 4;
  cfg.seed = 11;
  return cfg;
}

Verdict degeneracy() {
  std::mt19937_64 gen(6006);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto dims = random_dims(gen);
    const MlpClassifier model = MlpClassifier::init(dims, gen());
    const std::size_t n = 2 + gen() % 30;
    const Tensor x = oracle::random_matrix(n, dims.front(), gen, 0, 1);
    const auto labels = oracle::random_labels(n, dims.back(), gen);
    const auto w = ClassWeights::uniform(dims.back());
    const auto eps = scale_epsilon(0.1, w, labels, false);
    const Tensor x_adv = pgd_attack(model, x, labels, AttackConfig::training_default(0.1, gen()), eps);
    const auto sample_w = per_sample_weights(w, labels);
    const std::vector<bool> untargeted(n, false);
    Tape tape;
    const auto p = model.bind(tape, false);
    const auto xv = tape.leaf(x), av = tape.leaf(x_adv);
    const double trix = total_loss(model, p, xv, labels, av, av, untargeted, sample_w, 6.0).total.value().item();
    const double trades = trades_loss(model, p, xv, labels, av, sample_w, 6.0).total.value().item();
    worst = std::max(worst, std::abs(trix - trades));
  }

  SynthConfig sc;
  sc.samples_per_class = 64;
  const Dataset data = synth_gaussian_mixture(sc);
  const auto a = train(data, short_config(Method::Trix, 0.0));
  const auto b = train(data, short_config(Method::TargetedTrades, 0.0));
  bool same_records = a.records.size() == b.records.size();
  for (std::size_t e = 0; same_records && e < a.records.size(); ++e) {
    same_records = a.records[e].loss == b.records[e].loss && a.records[e].ce == b.records[e].ce &&
                   a.records[e].adv_kl == b.records[e].adv_kl;
  }
  const bool same_model = a.model == b.model;
  return {worst <= 1e-12 && same_model && same_records,
          "max |TRIX - TRADES| loss " + fmt(worst, 3) + " over 50 batches; lambda=0 trajectory " +
              (same_model && same_records ? "bit-identical" : "differs") + " to the uniform-weight run"};
}

// ---------------------------------------------------------------------------
// 7. attack containment

Verdict containment() {
  std::mt19937_64 gen(7007);
  std::uniform_real_distribution<double> u(0, 1);
  const AttackMode modes[] = {AttackMode::UntargetedKl, AttackMode::UntargetedCe, AttackMode::TargetedCe};
  std::vector<MlpClassifier> models;
  for (int m = 0; m < 20; ++m) models.push_back(MlpClassifier::init({4, 6, 3}, 100 + m));
  std::size_t violations = 0;
  double worst_excess = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto& model = models[trial % models.size()];
    const std::size_t n = 1 + gen() % 4;
    const Tensor x = oracle::random_matrix(n, 4, gen, 0, 1);
    const auto labels = oracle::random_labels(n, 3, gen);
    AttackConfig cfg;
    cfg.mode = modes[trial % 3];
    cfg.epsilon = u(gen) * 0.3;
    cfg.step_size = u(gen) * 0.2;
    cfg.num_steps = 1 + static_cast<int>(gen() % 4);
    cfg.random_start = gen() % 2 == 0;
    cfg.seed = gen();
    std::vector<double> eps;
    if (gen() % 2 == 0) {
      for (std::size_t i = 0; i < n; ++i) eps.push_back(u(gen) * 0.3);
    }
    std::vector<int> targets;
    if (cfg.mode == AttackMode::TargetedCe) targets = sample_targets(labels, 3, cfg.seed);
    const Tensor adv = pgd_attack(model, x, labels, cfg, eps, targets);
    for (std::size_t i = 0; i < n; ++i) {
      const double radius = eps.empty() ? cfg.epsilon : eps[i];
      for (std::size_t j = 0; j < 4; ++j) {
        const double excess = std::max({std::abs(adv(i, j) - x(i, j)) - radius, -adv(i, j), adv(i, j) - 1.0});
        if (excess > 0.0) {
          ++violations;
          worst_excess = std::max(worst_excess, excess);
        }
      }
    }
  }

  // One-step CE-PGD on a linear model against the closed-form sign gradient.
  const Tensor w = oracle::random_matrix(5, 3, gen);
  const Tensor b = oracle::random_matrix(1, 3, gen);
  const MlpClassifier linear({5, 3}, 0, {w}, {Tensor({3}, std::vector<double>(b.values().begin(), b.values().end()))});
  const Tensor x = oracle::random_matrix(64, 5, gen, 0, 1);
  const auto labels = oracle::random_labels(64, 3, gen);
  const AttackConfig one_step{0.05, 0.05, 1, AttackMode::UntargetedCe, false, 0};
  const Tensor adv = pgd_attack(linear, x, labels, one_step);
  const Tensor p = softmax(linear.predict(x).logits);
  std::size_t fgsm_mismatch = 0;
  for (std::size_t i = 0; i < 64; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double g = 0.0;
      for (std::size_t k = 0; k < 3; ++k) g += (p(i, k) - (static_cast<int>(k) == labels[i] ? 1.0 : 0.0)) * w(j, k);
      if (adv(i, j) != oracle::signed_step(x(i, j), g, 0.05, 0.05)) ++fgsm_mismatch;
    }
  }
  return {violations == 0 && fgsm_mismatch == 0,
          "10000 invocations, " + std::to_string(violations) + " constraint violations (max excess " +
              fmt(worst_excess, 3) + "); one-step oracle mismatches " + std::to_string(fgsm_mismatch) + "/320"};
}

// ---------------------------------------------------------------------------
// 8, 9, 11. desk-scale experiment

struct RunOutcome {
  std::string method;
  std::uint64_t seed = 0;
  fs::path dir;
  WorstAvg robust;
  WorstAvg clean;
  std::vector<double> final_w;
};

struct Experiment {
  bool ran = false;
  std::string error;
  double seconds = 0.0;
  std::vector<RunOutcome> runs;
};

const std::vector<std::string> kMethods = {"trades", "trix"};
const std::vector<std::uint64_t> kSeeds = {0, 1, 2};

fs::path run_dir(const fs::path& root, const std::string& method, std::uint64_t seed) {
  return root / (method + "-s" + std::to_string(seed));
}

Experiment run_experiment(const fs::path& root) {
  Experiment ex;
  const auto start = Clock::now();
  try {
    for (const auto& method : kMethods) {
      for (std::uint64_t seed : kSeeds) {
        const json user = {{"seed", seed}, {"train", {{"method", method}}}};
        const auto art = execute_run(resolve_config(user), run_dir(root, method, seed));
        RunOutcome r{method, seed, art.dir, worst_avg(ClassAccuracyVector{art.robust_acc}),
                     worst_avg(ClassAccuracyVector{art.clean_acc}), art.result.final_weights.w};
        std::cout << "  " << method << " seed " << seed << ": robust avg " << fmt(r.robust.avg) << " worst "
                  << fmt(r.robust.worst) << ", clean avg " << fmt(r.clean.avg) << " worst " << fmt(r.clean.worst)
                  << ", robust per class [";
        for (std::size_t c = 0; c < art.robust_acc.size(); ++c) {
          std::cout << (c ? " " : "") << fmt(art.robust_acc[c].value_or(NAN), 3);
        }
        std::cout << "]\n" << std::flush;
        ex.runs.push_back(std::move(r));
      }
    }
    ex.ran = true;
  } catch (const std::exception& e) {
    ex.error = e.what();
  }
  ex.seconds = seconds_since(start);
  return ex;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Verdict fairness_experiment(const Experiment& ex) {
  if (!ex.ran) return {false, "pipeline error: " + ex.error};
  std::map<std::string, std::vector<double>> worst, avg;
  for (const auto& r : ex.runs) {
    worst[r.method].push_back(r.robust.worst);
    avg[r.method].push_back(r.robust.avg);
  }
  const double worst_gain = 100.0 * (median(worst["trix"]) - median(worst["trades"]));
  const double avg_gap = 100.0 * (median(avg["trix"]) - median(avg["trades"]));
  const bool pass = worst_gain >= 2.0 && std::abs(avg_gap) <= 3.0 && ex.seconds <= 900.0;
  return {pass, "median worst robust TRADES " + fmt(median(worst["trades"])) + " TRIX " + fmt(median(worst["trix"])) +
                    " (gain " + fmt(worst_gain, 3) + " pts, need >= 2); median avg robust TRADES " +
                    fmt(median(avg["trades"])) + " TRIX " + fmt(median(avg["trix"])) + " (gap " + fmt(avg_gap, 3) +
                    " pts, need |gap| <= 3); " + fmt(ex.seconds, 4) + " s with " + std::to_string(worker_count()) +
                    " worker(s)"};
}

Verdict policy_behaviour(const Experiment& ex) {
  if (!ex.ran) return {false, "pipeline error: " + ex.error};
  const Dataset train_set = resolve_config(json::object()).data.load_train();
  bool pass = true;
  std::string detail;
  for (const auto& r : ex.runs) {
    if (r.method != "trix") continue;
    const ClassWeights w{r.final_w, 1.0};
    std::vector<std::size_t> order(w.size());
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    const std::set<std::size_t> top{order[0], order[1]};
    const bool weak_top = top == std::set<std::size_t>{2, 3};
    // Decisions per class on the full training set.
    const auto policy = attack_policy(w, train_set.labels);
    std::vector<bool> class_targeted(w.size(), false);
    for (std::size_t i = 0; i < policy.size(); ++i) class_targeted[train_set.labels[i]] = policy[i];
    const bool weak_untargeted = !class_targeted[2] && !class_targeted[3];
    const bool strong_targeted = class_targeted[0] || class_targeted[1];
    pass = pass && weak_top && weak_untargeted && strong_targeted;
    detail += "seed " + std::to_string(r.seed) + " w [";
    for (std::size_t c = 0; c < w.size(); ++c) detail += (c ? " " : "") + fmt(w[c], 3);
    detail += "] targeted [";
    for (std::size_t c = 0; c < w.size(); ++c) detail += (c ? " " : "") + std::to_string(class_targeted[c] ? 1 : 0);
    detail += "]; ";
  }
  return {pass, detail};
}

Verdict determinism(const Experiment& ex, const fs::path& root) {
  if (!ex.ran) return {false, "pipeline error: " + ex.error};
  const fs::path second = root / "rerun";
  fs::create_directories(second);
  std::ofstream(second / "config.json") << "{}\n";
  const std::size_t threads = std::max<std::size_t>(3, worker_count() + 2);
  std::size_t identical = 0, total = 0;
  std::string failures;
  for (const auto& method : kMethods) {
    for (std::uint64_t seed : kSeeds) {
      const fs::path dir = run_dir(second, method, seed);
      const std::string cmd = "TRIXLAB_THREADS=" + std::to_string(threads) + " '" + TRIXLAB_CLI_PATH +
                              "' train --config '" + (second / "config.json").string() + "' --seed " +
                              std::to_string(seed) + " --method " + method + " --out '" + dir.string() +
                              "' > /dev/null";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        failures += method + "-s" + std::to_string(seed) + " exited abnormally; ";
        continue;
      }
      for (const char* file : {"metrics.jsonl", "report.csv"}) {
        ++total;
        if (read_file(run_dir(root, method, seed) / file) == read_file(dir / file)) {
          ++identical;
        } else {
          failures += method + "-s" + std::to_string(seed) + "/" + file + " differs; ";
        }
      }
    }
  }
  return {failures.empty() && total == 12,
          std::to_string(identical) + "/12 files byte-identical between " + std::to_string(worker_count()) +
              " worker(s) in-process and TRIXLAB_THREADS=" + std::to_string(threads) + " via the CLI" +
              (failures.empty() ? "" : "; " + failures)};
}

// ---------------------------------------------------------------------------
// 10. theorem checker

Verdict theorem_checker() {
  std::mt19937_64 gen(1010);
  std::uniform_real_distribution<double> u(0.05, 5.0);
  int exact = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const double r = u(gen), delta = u(gen);
    const std::vector<double> h{0.0, delta};
    const auto res = ovo_ova_min_weights(h, r);
    if (res.ovo(0, 1) == 2.0 * r / delta && res.ovo(1, 0) == 2.0 * r / delta) ++exact;
  }
  bool flags = true;
  for (std::size_t k = 3; k <= 10; ++k) {
    const auto res = ovo_ova_min_weights(k, 1.0, 1.0);
    for (std::size_t c = 0; c < k; ++c) {
      const bool extremal = c == 0 || c == k - 1;
      flags = flags && res.ova[c].feasible == extremal;
    }
  }
  return {exact == 20 && flags, std::to_string(exact) + "/20 OvO weights exactly 2R/delta; K=3..10 interior classes " +
                                    (flags ? "all infeasible, extremal feasible" : "misflagged")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  fs::path keep;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--keep" && i + 1 < argc) {
      keep = argv[++i];
    } else {
      try {
        selected.insert(std::stoi(arg));
      } catch (const std::exception&) {
        std::cerr << "usage: acceptance [--keep DIR] [criterion numbers...]\n";
        return 2;
      }
    }
  }
  auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };

  TempDir scratch;
  const fs::path root = keep.empty() ? scratch.path() : keep;
  fs::create_directories(root);

  std::vector<std::pair<int, std::string>> names = {
      {1, "gradient fidelity"},   {2, "weight formula oracle"}, {3, "rho_clean reproduction"},
      {4, "disparity reproduction"}, {5, "ASR and drop consistency"}, {6, "degeneracy equivalence"},
      {7, "attack containment"},  {8, "desk-scale fairness experiment"}, {9, "policy behaviour"},
      {10, "theorem checker"},    {11, "determinism"}};

  Experiment ex;
  if (wanted(8) || wanted(9) || wanted(11)) {
    std::cout << "running the desk-scale experiment (2 methods x 3 seeds)\n" << std::flush;
    ex = run_experiment(root);
  }

  int failed = 0;
  for (const auto& [n, name] : names) {
    if (!wanted(n)) continue;
    Verdict v;
    try {
      switch (n) {
        case 1: v = gradient_fidelity(); break;
        case 2: v = weight_oracle(); break;
        case 3: v = rho_clean(); break;
        case 4: v = disparity_bars(); break;
        case 5: v = asr_and_drops(); break;
        case 6: v = degeneracy(); break;
        case 7: v = containment(); break;
        case 8: v = fairness_experiment(ex); break;
        case 9: v = policy_behaviour(ex); break;
        case 10: v = theorem_checker(); break;
        case 11: v = determinism(ex, root); break;
      }
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << n << " (" << name << "): " << v.detail << "\n"
              << std::flush;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criterion/criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
