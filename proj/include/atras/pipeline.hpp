#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atras/datasets.hpp"
#include "atras/error.hpp"
#include "atras/fgsm.hpp"
#include "atras/hash.hpp"
#include "atras/matops.hpp"
#include "atras/mlp.hpp"
#include "atras/rng.hpp"

namespace atras {

enum class OptimizerKind { sgd, sgd_momentum, adam };

inline OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "sgd_momentum" || s == "momentum") return OptimizerKind::sgd_momentum;
  if (s == "adam") return OptimizerKind::adam;
  throw Error(ErrorKind::InvalidConfig, "unknown optimizer '" + std::string(s) + "'");
}

constexpr std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::sgd_momentum: return "sgd_momentum";
    case OptimizerKind::adam: return "adam";
  }
  return "sgd";
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  OptimizerConfig optimizer;
  InitScheme init = InitScheme::he_uniform;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorKind::InvalidConfig, "batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw Error(ErrorKind::InvalidConfig, "learning_rate must be > 0");
    }
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Adam, batch 64. MNIST: lr 1e-3, 20 epochs. CIFAR-10: lr 1e-4, 40 epochs.
inline TrainConfig default_train_config(DatasetName name) {
  TrainConfig cfg;
  cfg.optimizer.kind = OptimizerKind::adam;
  cfg.learning_rate = name == DatasetName::mnist ? 1e-3 : 1e-4;
  cfg.epochs = name == DatasetName::mnist ? 20 : 40;
  return cfg;
}

/// Stream identifiers for seeds derived from TrainConfig::seed.
enum SeedStream : std::uint64_t {
  kBaselineInit = 1,
  kBaselineShuffle = 2,
  kDefenseInit = 3,
  kDefenseShuffle = 4,
};

/// Per-architecture experiment seed. Keyed on the hidden list rather than a
/// grid position so the same candidate gets the same stream in any grid.
inline std::uint64_t experiment_seed(std::uint64_t global_seed, const ArchitectureSpec& arch) {
  return derive_seed(global_seed, {fnv1a(format_hidden(arch.hidden))});
}

struct EpochReport {
  std::string_view phase;
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
};

using ProgressFn = std::function<void(const EpochReport&)>;

namespace detail {

class Optimizer {
 public:
  Optimizer(const ModelParams& params, const TrainConfig& cfg)
      : cfg_(cfg) {
    if (cfg.optimizer.kind != OptimizerKind::sgd) {
      for (const auto& l : params.layers) {
        first_.push_back({Matrix(l.weights.rows(), l.weights.cols()),
                          std::vector<double>(l.bias.size(), 0.0)});
      }
      if (cfg.optimizer.kind == OptimizerKind::adam) second_ = first_;
    }
  }

  void step(ModelParams& params, const std::vector<DenseLayer>& grads) {
    ++t_;
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
      update(params.layers[k].weights.values(), grads[k].weights.values(), k, true);
      update(params.layers[k].bias, grads[k].bias, k, false);
    }
  }

 private:
  void update(std::span<double> w, std::span<const double> g, std::size_t k, bool weights) {
    const double lr = cfg_.learning_rate;
    const auto& o = cfg_.optimizer;
    switch (o.kind) {
      case OptimizerKind::sgd:
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
        return;
      case OptimizerKind::sgd_momentum: {
        std::span<double> v = weights ? first_[k].weights.values() : std::span(first_[k].bias);
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = o.momentum * v[i] + g[i];
          w[i] -= lr * v[i];
        }
        return;
      }
      case OptimizerKind::adam: {
        std::span<double> m = weights ? first_[k].weights.values() : std::span(first_[k].bias);
        std::span<double> s = weights ? second_[k].weights.values() : std::span(second_[k].bias);
        const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
          s[i] = o.beta2 * s[i] + (1.0 - o.beta2) * g[i] * g[i];
          w[i] -= lr * (m[i] / c1) / (std::sqrt(s[i] / c2) + o.adam_epsilon);
        }
        return;
      }
    }
  }

  TrainConfig cfg_;
  std::vector<DenseLayer> first_;
  std::vector<DenseLayer> second_;
  std::uint64_t t_ = 0;
};

inline void gather_rows(const Dataset& data, std::span<const std::size_t> idx, Matrix& x,
                        std::vector<std::uint8_t>& y) {
  const std::size_t d = data.dim();
  x = Matrix(idx.size(), d);
  y.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double* src = data.features.data() + idx[i] * d;
    std::copy(src, src + d, x.data() + i * d);
    y[i] = data.labels[idx[i]];
  }
}

}  // namespace detail

/// Optional per-minibatch augmentation: given the current params and a clean
/// minibatch, returns the rows to append to it.
using BatchAugment = std::function<Dataset(const ModelParams&, const Dataset&)>;

/// Minibatch descent on mean cross-entropy, reshuffling every epoch from
/// `shuffle_seed`. Throws NonFiniteLoss as soon as a batch loss is NaN/Inf.
inline std::vector<double> fit(ModelParams& params, const Dataset& data, const TrainConfig& cfg,
                               std::uint64_t shuffle_seed, std::string_view phase,
                               const ProgressFn& progress = {},
                               const BatchAugment& augment = {}) {
  cfg.validate();
  detail::check_batch(params, data.features);
  if (data.size() == 0) throw Error(ErrorKind::EmptyInput, "training set is empty");
  detail::Optimizer opt(params, cfg);
  Rng rng(shuffle_seed);
  std::vector<std::size_t> order(data.size());
  std::vector<double> epoch_losses;
  Matrix x;
  std::vector<std::uint8_t> y;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      detail::gather_rows(data, std::span(order).subspan(start, n), x, y);
      if (augment) {
        Dataset clean{data.name, std::move(x), std::move(y)};
        const Dataset extra = augment(params, clean);
        x = Matrix(n + extra.size(), data.dim());
        std::copy(clean.features.values().begin(), clean.features.values().end(), x.data());
        std::copy(extra.features.values().begin(), extra.features.values().end(),
                  x.data() + n * data.dim());
        y = std::move(clean.labels);
        y.insert(y.end(), extra.labels.begin(), extra.labels.end());
      }
      auto grads = backward(params, x, y, GradientNeed::params_only);
      if (!std::isfinite(grads.loss)) {
        throw Error(ErrorKind::NonFiniteLoss,
                    std::string(phase) + ": loss " + std::to_string(grads.loss) + " at epoch " +
                        std::to_string(epoch) + ", batch starting at " + std::to_string(start));
      }
      weighted += grads.loss * static_cast<double>(n);
      opt.step(params, grads.param_grads);
    }
    const double mean = weighted / static_cast<double>(data.size());
    if (!std::isfinite(mean)) {
      throw Error(ErrorKind::NonFiniteLoss,
                  std::string(phase) + ": epoch " + std::to_string(epoch) + " mean loss " +
                      std::to_string(mean));
    }
    epoch_losses.push_back(mean);
    if (progress) progress({phase, epoch, mean});
  }
  return epoch_losses;
}

struct TrainResult {
  ModelParams params;
  double train_acc = 0.0;
  double test_acc = 0.0;
  std::vector<double> epoch_losses;
};

inline TrainResult train(const ArchitectureSpec& arch, const Dataset& train_set,
                         const Dataset& test_set, const TrainConfig& cfg,
                         const ProgressFn& progress = {}) {
  cfg.validate();
  TrainResult out{init_params(arch, derive_seed(cfg.seed, {kBaselineInit}), cfg.init), 0, 0, {}};
  out.epoch_losses = fit(out.params, train_set, cfg, derive_seed(cfg.seed, {kBaselineShuffle}),
                         "baseline", progress);
  out.train_acc = evaluate_accuracy(out.params, train_set);
  out.test_acc = evaluate_accuracy(out.params, test_set);
  return out;
}

enum class AdvTrainMode { static_augment, per_batch };
enum class DefenseStart { retrain, finetune };

inline AdvTrainMode parse_adv_mode(std::string_view s) {
  if (s == "static") return AdvTrainMode::static_augment;
  if (s == "per_batch" || s == "per-batch") return AdvTrainMode::per_batch;
  throw Error(ErrorKind::InvalidConfig, "unknown adversarial training mode '" + std::string(s) + "'");
}

constexpr std::string_view to_string(AdvTrainMode m) {
  return m == AdvTrainMode::static_augment ? "static" : "per_batch";
}

struct DefenseConfig {
  AdvTrainMode mode = AdvTrainMode::per_batch;
  DefenseStart start = DefenseStart::retrain;

  friend bool operator==(const DefenseConfig&, const DefenseConfig&) = default;
};

struct AdvTrainResult {
  ModelParams params;
  double adversarial_train_acc = 0.0;  // clean accuracy of the defended model
  double adversarial_test_acc = 0.0;
  std::size_t training_set_size = 0;   // rows in the (augmented) set for static mode
  std::size_t attack_passes = 0;       // fgsm_dataset / per-batch attack invocations
  std::vector<double> epoch_losses;
};

/// Static mode crafts FGSM examples for the whole training set against
/// `baseline` and trains on clean ∪ adversarial. Per-batch mode appends FGSM
/// copies of every minibatch crafted against the current params.
inline AdvTrainResult adversarial_training(const ArchitectureSpec& arch, const Dataset& train_set,
                                           const Dataset& test_set, const TrainConfig& cfg,
                                           const AttackConfig& attack, const DefenseConfig& defense,
                                           const ModelParams* baseline,
                                           const ProgressFn& progress = {}) {
  cfg.validate();
  attack.validate();
  if ((defense.mode == AdvTrainMode::static_augment || defense.start == DefenseStart::finetune) &&
      baseline == nullptr) {
    throw Error(ErrorKind::InvalidConfig, "this defense mode needs a baseline model");
  }
  if (baseline && !(baseline->arch == arch)) {
    throw Error(ErrorKind::InvalidArchitecture, "baseline architecture differs");
  }
  AdvTrainResult out;
  out.params = defense.start == DefenseStart::finetune
                   ? *baseline
                   : init_params(arch, derive_seed(cfg.seed, {kDefenseInit}), cfg.init);
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, {kDefenseShuffle});

  if (defense.mode == AdvTrainMode::static_augment) {
    const Dataset adv = fgsm_dataset(*baseline, train_set, attack);
    ++out.attack_passes;
    Dataset augmented{train_set.name, Matrix(2 * train_set.size(), train_set.dim()),
                      train_set.labels};
    std::copy(train_set.features.values().begin(), train_set.features.values().end(),
              augmented.features.data());
    std::copy(adv.features.values().begin(), adv.features.values().end(),
              augmented.features.data() + train_set.features.size());
    augmented.labels.insert(augmented.labels.end(), adv.labels.begin(), adv.labels.end());
    out.training_set_size = augmented.size();
    out.epoch_losses = fit(out.params, augmented, cfg, shuffle_seed, "defense", progress);
  } else {
    out.training_set_size = train_set.size();
    std::size_t passes = 0;
    auto augment = [&](const ModelParams& current, const Dataset& clean) {
      ++passes;
      return Dataset{clean.name, fgsm_batch(current, clean.features, clean.labels, attack),
                     clean.labels};
    };
    out.epoch_losses = fit(out.params, train_set, cfg, shuffle_seed, "defense", progress, augment);
    out.attack_passes = passes;
  }
  out.adversarial_train_acc = evaluate_accuracy(out.params, train_set);
  out.adversarial_test_acc = evaluate_accuracy(out.params, test_set);
  return out;
}

/// One table row. Field order follows the table header left to right.
struct ExperimentRecord {
  double train_acc = 0.0;
  double test_acc = 0.0;
  double acc_when_attacked_before_adv_training = 0.0;
  double adversarial_train_acc = 0.0;
  double adversarial_test_acc = 0.0;
  double acc_when_attacked_after_adv_training = 0.0;
  ArchitectureSpec arch;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;
  std::optional<std::string> failure;  // "<phase>: <message>" for aborted runs

  double recovery_delta() const {
    return acc_when_attacked_after_adv_training - acc_when_attacked_before_adv_training;
  }
  bool ok() const { return !failure.has_value(); }
};

enum class AttackSplit { test, train };

struct ExperimentConfig {
  TrainConfig train;
  AttackConfig attack;
  DefenseConfig defense;
  AttackSplit attack_split = AttackSplit::test;
};

/// Optional hooks for callers that want the trained models.
struct ExperimentArtifacts {
  std::optional<ModelParams> baseline;
  std::optional<ModelParams> defended;
};

/// baseline training → attack → adversarial training → attack again.
/// A NonFiniteLoss in any phase is recorded on the record instead of thrown.
inline ExperimentRecord run_experiment(const ArchitectureSpec& arch, const Split& data,
                                       const ExperimentConfig& cfg,
                                       const ProgressFn& progress = {},
                                       ExperimentArtifacts* artifacts = nullptr) {
  const auto started = std::chrono::steady_clock::now();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ExperimentRecord rec{nan, nan, nan, nan, nan, nan, arch, cfg.attack.epsilon, cfg.train.seed,
                       0.0, std::nullopt};
  const Dataset& attack_set = cfg.attack_split == AttackSplit::test ? data.test : data.train;
  std::string_view phase = "baseline";
  try {
    auto base = train(arch, data.train, data.test, cfg.train, progress);
    rec.train_acc = base.train_acc;
    rec.test_acc = base.test_acc;
    phase = "attack-before";
    rec.acc_when_attacked_before_adv_training = robust_accuracy(base.params, attack_set, cfg.attack);
    phase = "defense";
    auto defended = adversarial_training(arch, data.train, data.test, cfg.train, cfg.attack,
                                         cfg.defense, &base.params, progress);
    rec.adversarial_train_acc = defended.adversarial_train_acc;
    rec.adversarial_test_acc = defended.adversarial_test_acc;
    phase = "attack-after";
    rec.acc_when_attacked_after_adv_training =
        robust_accuracy(defended.params, attack_set, cfg.attack);
    if (artifacts) {
      artifacts->baseline = std::move(base.params);
      artifacts->defended = std::move(defended.params);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NonFiniteLoss) throw;
    rec.failure = std::string(phase) + ": " + e.what();
  }
  rec.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

}  // namespace atras
