#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "atras/error.hpp"

namespace atras {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw Error(ErrorKind::DimensionMismatch,
                  "matrix payload has " + std::to_string(values_.size()) +
                      " values, expected " + std::to_string(rows_ * cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    values_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) {
        throw Error(ErrorKind::DimensionMismatch, "ragged matrix literal");
      }
      values_.insert(values_.end(), row.begin(), row.end());
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::DimensionMismatch,
                "matmul " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " by " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* dst = out.data() + i * n;
    const double* arow = a.data() + i * a.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = arow[k];
      // Sparse inputs (blank pixels, dead relu units) are common.
      if (s == 0.0) continue;
      const double* brow = b.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += s * brow[j];
    }
  }
  return out;
}

/// aᵀ·b without materialising the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "matmul_tn row counts differ");
  }
  Matrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* arow = a.data() + k * a.cols();
    const double* brow = b.data() + k * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = arow[i];
      if (s == 0.0) continue;
      double* dst = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += s * brow[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  return out;
}

/// a·bᵀ.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "matmul_nt column counts differ");
  }
  return matmul(a, transpose(b));
}

/// Adds `bias` to every row in place.
inline void add_row_vector(Matrix& m, std::span<const double> bias) {
  if (bias.size() != m.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "bias length differs from column count");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
}

/// Column sums, i.e. onesᵀ·m.
inline std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
  }
  return out;
}

enum class Elementwise { relu, relu_mask, sign, tanh, tanh_derivative };

inline double apply(Elementwise fn, double v) {
  switch (fn) {
    case Elementwise::relu: return v > 0.0 ? v : 0.0;
    case Elementwise::relu_mask: return v > 0.0 ? 1.0 : 0.0;
    case Elementwise::sign: return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    case Elementwise::tanh: return std::tanh(v);
    case Elementwise::tanh_derivative: {
      const double t = std::tanh(v);
      return 1.0 - t * t;
    }
  }
  return v;
}

inline Matrix elementwise(const Matrix& m, Elementwise fn) {
  Matrix out = m;
  for (double& v : out.values()) v = apply(fn, v);
  return out;
}

/// Hadamard product in place: a ∘= b.
inline void multiply_inplace(Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "hadamard product shape mismatch");
  }
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] *= bv[i];
}

struct SoftmaxCrossEntropy {
  double loss = 0.0;  // mean over rows
  Matrix probs;
  Matrix dlogits;     // d(mean loss)/d(logits)
};

inline SoftmaxCrossEntropy softmax_cross_entropy(const Matrix& logits,
                                                 std::span<const std::uint8_t> labels) {
  if (labels.size() != logits.rows()) {
    throw Error(ErrorKind::DimensionMismatch,
                std::to_string(labels.size()) + " labels for " +
                    std::to_string(logits.rows()) + " logit rows");
  }
  SoftmaxCrossEntropy out{0.0, Matrix(logits.rows(), logits.cols()),
                          Matrix(logits.rows(), logits.cols())};
  const double inv_rows = logits.rows() ? 1.0 / static_cast<double>(logits.rows()) : 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const std::size_t label = labels[r];
    if (label >= logits.cols()) {
      throw Error(ErrorKind::LabelOutOfRange,
                  "label " + std::to_string(label) + " at row " + std::to_string(r) +
                      " with " + std::to_string(logits.cols()) + " classes");
    }
    auto in = logits.row(r);
    auto p = out.probs.row(r);
    const double peak = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      p[c] = std::exp(in[c] - peak);
      z += p[c];
    }
    for (double& v : p) v /= z;
    // log-sum-exp form keeps the loss finite when p[label] underflows.
    total += std::log(z) - (in[label] - peak);
    auto d = out.dlogits.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) {
      d[c] = (p[c] - (c == label ? 1.0 : 0.0)) * inv_rows;
    }
  }
  out.loss = total * inv_rows;
  return out;
}

inline Matrix clip(const Matrix& m, double lo, double hi) {
  if (!(lo <= hi)) {
    throw Error(ErrorKind::InvalidBounds,
                "clip bounds [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  Matrix out = m;
  for (double& v : out.values()) v = std::clamp(v, lo, hi);
  return out;
}

inline bool all_finite(const Matrix& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace atras
