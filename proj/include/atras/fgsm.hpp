#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atras/datasets.hpp"
#include "atras/error.hpp"
#include "atras/matops.hpp"
#include "atras/mlp.hpp"

namespace atras {

/// Untargeted ascends the true-label loss; targeted descends the loss of
/// `target_label`.
struct AttackConfig {
  double epsilon = 0.1;
  std::optional<std::uint8_t> target_label;  // set => targeted
  double clip_lo = 0.0;
  double clip_hi = 1.0;

  bool targeted() const noexcept { return target_label.has_value(); }

  void validate() const {
    if (!(epsilon >= 0.0)) {
      throw Error(ErrorKind::InvalidConfig, "epsilon must be >= 0");
    }
    if (!(clip_lo < clip_hi)) {
      throw Error(ErrorKind::InvalidConfig, "clip_lo must be < clip_hi");
    }
    if (target_label && *target_label > 9) {
      throw Error(ErrorKind::InvalidConfig, "target label must be in 0..9");
    }
  }

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

/// Community-standard budgets at [0,1] pixel scale.
inline double default_epsilon(DatasetName name) {
  return name == DatasetName::mnist ? 0.1 : 8.0 / 255.0;
}

/// One FGSM step:
///   untargeted  x' = clip(x + ε·sign(∇ₓ loss(x, y)))
///   targeted    x' = clip(x − ε·sign(∇ₓ loss(x, t)))
inline Matrix fgsm_batch(const ModelParams& params, const Matrix& batch,
                         std::span<const std::uint8_t> labels, const AttackConfig& cfg) {
  cfg.validate();
  if (labels.size() != batch.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "label count differs from batch rows");
  }
  if (cfg.epsilon == 0.0) {
    detail::check_batch(params, batch);
    return batch;
  }
  std::vector<std::uint8_t> target_labels;
  std::span<const std::uint8_t> loss_labels = labels;
  if (cfg.targeted()) {
    target_labels.assign(batch.rows(), *cfg.target_label);
    loss_labels = target_labels;
  }
  const auto grads = backward(params, batch, loss_labels, GradientNeed::input_only);
  const double step = cfg.targeted() ? -cfg.epsilon : cfg.epsilon;
  Matrix out = batch;
  auto x = out.values();
  auto g = grads.input_grad.values();
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::clamp(x[i] + step * apply(Elementwise::sign, g[i]), cfg.clip_lo, cfg.clip_hi);
  }
  return out;
}

inline constexpr std::size_t kAttackChunk = 500;

/// Attacks a whole dataset in fixed-size chunks against `source`. Rows are
/// perturbed independently; the chunk size only enters through the 1/n scale
/// of the mean loss, so it is fixed to keep results reproducible.
inline Dataset fgsm_dataset(const ModelParams& source, const Dataset& data,
                            const AttackConfig& cfg) {
  cfg.validate();
  detail::check_batch(source, data.features);
  Dataset out{data.name, Matrix(data.size(), data.dim()), data.labels};
  const std::size_t d = data.dim();
  for (std::size_t start = 0; start < data.size(); start += kAttackChunk) {
    const std::size_t n = std::min(kAttackChunk, data.size() - start);
    Matrix chunk(n, d,
                 std::vector<double>(data.features.data() + start * d,
                                     data.features.data() + (start + n) * d));
    const Matrix adv = fgsm_batch(source, chunk,
                                  std::span(data.labels).subspan(start, n), cfg);
    std::copy(adv.values().begin(), adv.values().end(), out.features.data() + start * d);
  }
  return out;
}

/// Accuracy of `target` on FGSM examples crafted against `source`
/// (defaults to the target itself).
inline double robust_accuracy(const ModelParams& target, const Dataset& data,
                              const AttackConfig& cfg,
                              const ModelParams* source = nullptr) {
  const ModelParams& attacker = source ? *source : target;
  if (attacker.arch.input_dim != target.arch.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, "source and target input widths differ");
  }
  return evaluate_accuracy(target, fgsm_dataset(attacker, data, cfg));
}

}  // namespace atras
