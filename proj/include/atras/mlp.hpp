#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atras/datasets.hpp"
#include "atras/error.hpp"
#include "atras/matops.hpp"
#include "atras/rng.hpp"

namespace atras {

enum class Activation : std::uint8_t { relu = 0, tanh = 1 };
enum class InitScheme : std::uint8_t { he_uniform = 0, glorot_uniform = 1 };

constexpr std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw Error(ErrorKind::InvalidConfig, "unknown activation '" + std::string(s) + "'");
}

inline InitScheme parse_init_scheme(std::string_view s) {
  if (s == "he_uniform") return InitScheme::he_uniform;
  if (s == "glorot_uniform") return InitScheme::glorot_uniform;
  throw Error(ErrorKind::InvalidConfig, "unknown init scheme '" + std::string(s) + "'");
}

constexpr std::string_view to_string(InitScheme s) {
  return s == InitScheme::he_uniform ? "he_uniform" : "glorot_uniform";
}

/// One MLP candidate: input → hidden[0] → … → hidden[last] → classes.
/// An empty hidden list is a linear softmax model.
struct ArchitectureSpec {
  std::vector<std::size_t> hidden;
  std::size_t input_dim = kMnistDim;
  std::size_t num_classes = kNumClasses;
  Activation activation = Activation::relu;

  std::size_t depth() const noexcept { return hidden.size(); }

  /// Layer widths including input and output.
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w;
    w.reserve(hidden.size() + 2);
    w.push_back(input_dim);
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(num_classes);
    return w;
  }

  void validate() const {
    if (input_dim == 0 || num_classes == 0) {
      throw Error(ErrorKind::InvalidArchitecture, "input and output widths must be positive");
    }
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      if (hidden[i] == 0) {
        throw Error(ErrorKind::InvalidArchitecture,
                    "hidden layer " + std::to_string(i) + " has width 0");
      }
    }
  }

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// "[64, 512]": the table serialization of a hidden list.
inline std::string format_hidden(std::span<const std::size_t> hidden) {
  std::string out = "[";
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(hidden[i]);
  }
  return out + "]";
}

/// Accepts "[64, 512]", "64,512", "[]" and similar.
inline std::vector<std::size_t> parse_hidden(std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '[' || text[i] == ']' ||
                               text[i] == ',' || text[i] == '{' || text[i] == '}'))
      ++i;
  };
  skip();
  while (i < text.size()) {
    if (text[i] < '0' || text[i] > '9') {
      throw Error(ErrorKind::InvalidArchitecture,
                  "bad hidden-layer list '" + std::string(text) + "'");
    }
    std::size_t v = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') v = v * 10 + (text[i++] - '0');
    out.push_back(v);
    skip();
  }
  return out;
}

struct DenseLayer {
  Matrix weights;             // fan_in x fan_out
  std::vector<double> bias;   // fan_out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ModelParams {
  ArchitectureSpec arch;
  std::uint64_t init_seed = 0;
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers) {
      if (!atras::all_finite(l.weights)) return false;
      for (double b : l.bias)
        if (!std::isfinite(b)) return false;
    }
    return true;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Weights uniform in ±bound (He: √(6/fan_in), Glorot: √(6/(fan_in+fan_out))),
/// biases zero. Layers are filled in order from one seeded stream.
inline ModelParams init_params(const ArchitectureSpec& arch, std::uint64_t seed,
                               InitScheme scheme = InitScheme::he_uniform) {
  arch.validate();
  ModelParams params{arch, seed, {}};
  const auto widths = arch.widths();
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const std::size_t fan_in = widths[k];
    const std::size_t fan_out = widths[k + 1];
    const double bound = scheme == InitScheme::he_uniform
                             ? std::sqrt(6.0 / static_cast<double>(fan_in))
                             : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
    for (double& w : layer.weights.values()) w = rng.uniform(-bound, bound);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

/// pre[k] is the affine output of layer k; inputs[k] is what layer k consumed
/// (inputs[0] is the batch, inputs[k+1] = activation(pre[k]) for hidden k).
struct ForwardTrace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
};

struct ForwardResult {
  Matrix logits;
  ForwardTrace trace;
};

namespace detail {

inline void check_batch(const ModelParams& params, const Matrix& batch) {
  if (batch.cols() != params.arch.input_dim) {
    throw Error(ErrorKind::DimensionMismatch,
                "batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                    std::to_string(params.arch.input_dim));
  }
}

inline Elementwise activation_fn(Activation a) {
  return a == Activation::relu ? Elementwise::relu : Elementwise::tanh;
}

inline Elementwise activation_grad(Activation a) {
  return a == Activation::relu ? Elementwise::relu_mask : Elementwise::tanh_derivative;
}

}  // namespace detail

inline ForwardResult forward(const ModelParams& params, const Matrix& batch) {
  detail::check_batch(params, batch);
  ForwardResult out;
  out.trace.inputs.push_back(batch);
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& layer = params.layers[k];
    Matrix z = matmul(out.trace.inputs.back(), layer.weights);
    add_row_vector(z, layer.bias);
    if (k + 1 < params.layers.size()) {
      out.trace.inputs.push_back(elementwise(z, detail::activation_fn(params.arch.activation)));
      out.trace.pre.push_back(std::move(z));
    } else {
      out.trace.pre.push_back(z);
      out.logits = std::move(z);
    }
  }
  return out;
}

/// Logits only, without keeping the trace.
inline Matrix predict_logits(const ModelParams& params, const Matrix& batch) {
  detail::check_batch(params, batch);
  Matrix h = batch;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    Matrix z = matmul(h, params.layers[k].weights);
    add_row_vector(z, params.layers[k].bias);
    if (k + 1 < params.layers.size()) {
      for (double& v : z.values()) v = apply(detail::activation_fn(params.arch.activation), v);
    }
    h = std::move(z);
  }
  return h;
}

enum class GradientNeed { params_and_input, params_only, input_only };

struct Gradients {
  double loss = 0.0;
  std::vector<DenseLayer> param_grads;  // empty when not requested
  Matrix input_grad;                    // empty when not requested
};

/// Gradients of the mean cross-entropy over the batch.
inline Gradients backward(const ModelParams& params, const Matrix& batch,
                          std::span<const std::uint8_t> labels,
                          GradientNeed need = GradientNeed::params_and_input) {
  const auto fwd = forward(params, batch);
  auto sce = softmax_cross_entropy(fwd.logits, labels);
  Gradients out;
  out.loss = sce.loss;
  const bool want_params = need != GradientNeed::input_only;
  const bool want_input = need != GradientNeed::params_only;
  if (want_params) out.param_grads.resize(params.layers.size());

  Matrix delta = std::move(sce.dlogits);  // dL/d(pre[k]) walking backwards
  for (std::size_t k = params.layers.size(); k-- > 0;) {
    const auto& layer = params.layers[k];
    if (want_params) {
      out.param_grads[k].weights = matmul_tn(fwd.trace.inputs[k], delta);
      out.param_grads[k].bias = column_sums(delta);
    }
    if (k == 0) {
      if (want_input) out.input_grad = matmul_nt(delta, layer.weights);
      break;
    }
    Matrix upstream = matmul_nt(delta, layer.weights);
    multiply_inplace(upstream, elementwise(fwd.trace.pre[k - 1],
                                           detail::activation_grad(params.arch.activation)));
    delta = std::move(upstream);
  }
  return out;
}

/// Lowest index wins ties.
inline std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c)
    if (row[c] > row[best]) best = c;
  return best;
}

inline constexpr std::size_t kEvalChunk = 1000;

/// Number of rows whose argmax prediction equals the label.
inline std::size_t count_correct(const ModelParams& params, const Matrix& features,
                                 std::span<const std::uint8_t> labels) {
  detail::check_batch(params, features);
  if (labels.size() != features.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "label count differs from row count");
  }
  std::size_t correct = 0;
  for (std::size_t start = 0; start < features.rows(); start += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, features.rows() - start);
    Matrix chunk(n, features.cols(),
                 std::vector<double>(features.data() + start * features.cols(),
                                     features.data() + (start + n) * features.cols()));
    const Matrix logits = predict_logits(params, chunk);
    for (std::size_t r = 0; r < n; ++r)
      if (argmax(logits.row(r)) == labels[start + r]) ++correct;
  }
  return correct;
}

inline double evaluate_accuracy(const ModelParams& params, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  return static_cast<double>(count_correct(params, data.features, data.labels)) /
         static_cast<double>(data.size());
}

}  // namespace atras
