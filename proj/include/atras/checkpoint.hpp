#pragma once

// Checkpoint container, format version 1. All integers and floats are
// little-endian; floats are IEEE-754 binary64.
//
//   offset  size  field
//   0       4     magic "ATRS"
//   4       1     format version (1)
//   5       1     payload kind (1 = model, 2 = example batch)
//   6       ...   payload
//   end-8   8     u64 FNV-1a of every preceding byte
//
// Model payload:
//   u8  activation (0 relu, 1 tanh)
//   u64 init seed
//   u32 input_dim, u32 num_classes, u32 hidden count, u32 width × hidden count
//   per layer, input side first: f64 weights[fan_in × fan_out] (row-major),
//                                f64 bias[fan_out]
//
// Example-batch payload:
//   u8  dataset (0 mnist, 1 cifar10)
//   u32 rows, u32 cols, f64 features[rows × cols] (row-major), u8 labels[rows]

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "atras/datasets.hpp"
#include "atras/error.hpp"
#include "atras/hash.hpp"
#include "atras/mlp.hpp"
#include "atras/sweep.hpp"

namespace atras {

inline constexpr std::uint8_t kCheckpointVersion = 1;

enum class PayloadKind : std::uint8_t { model = 1, batch = 2 };

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64s(std::span<const double> values) {
    for (double v : values) u64(std::bit_cast<std::uint64_t>(v));
  }
  void raw(std::string_view s) { bytes_.append(s); }
  std::string finish() {
    u64(fnv1a(bytes_));
    return std::move(bytes_);
  }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(bytes_[pos_++])} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(bytes_[pos_++])} << (8 * i);
    return v;
  }
  void f64s(std::span<double> out) {
    need(out.size() * 8);
    for (double& v : out) v = std::bit_cast<double>(u64());
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::FormatError, "checkpoint truncated at byte " + std::to_string(pos_));
    }
  }
  std::size_t position() const { return pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline ByteWriter begin_container(PayloadKind kind) {
  ByteWriter w;
  w.raw("ATRS");
  w.u8(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  return w;
}

/// Validates framing and returns a reader positioned at the payload.
inline ByteReader open_container(std::string_view bytes, PayloadKind expected) {
  if (bytes.size() < 14 || bytes.substr(0, 4) != "ATRS") {
    throw Error(ErrorKind::FormatError, "not a checkpoint container");
  }
  const auto body = bytes.substr(0, bytes.size() - 8);
  ByteReader tail(bytes.substr(bytes.size() - 8));
  if (tail.u64() != fnv1a(body)) {
    throw Error(ErrorKind::FormatError, "checkpoint checksum mismatch");
  }
  ByteReader r(body);
  r.u32();  // magic
  if (const auto version = r.u8(); version != kCheckpointVersion) {
    throw Error(ErrorKind::FormatError, "unsupported checkpoint version " + std::to_string(version));
  }
  if (const auto kind = r.u8(); kind != static_cast<std::uint8_t>(expected)) {
    throw Error(ErrorKind::FormatError, "unexpected payload kind " + std::to_string(kind));
  }
  return r;
}

}  // namespace detail

inline std::string serialize_model(const ModelParams& params) {
  auto w = detail::begin_container(PayloadKind::model);
  w.u8(static_cast<std::uint8_t>(params.arch.activation));
  w.u64(params.init_seed);
  w.u32(static_cast<std::uint32_t>(params.arch.input_dim));
  w.u32(static_cast<std::uint32_t>(params.arch.num_classes));
  w.u32(static_cast<std::uint32_t>(params.arch.hidden.size()));
  for (std::size_t h : params.arch.hidden) w.u32(static_cast<std::uint32_t>(h));
  for (const auto& layer : params.layers) {
    w.f64s(layer.weights.values());
    w.f64s(layer.bias);
  }
  return w.finish();
}

inline ModelParams deserialize_model(std::string_view bytes) {
  auto r = detail::open_container(bytes, PayloadKind::model);
  ModelParams p;
  const auto act = r.u8();
  if (act > 1) throw Error(ErrorKind::FormatError, "unknown activation code " + std::to_string(act));
  p.arch.activation = static_cast<Activation>(act);
  p.init_seed = r.u64();
  p.arch.input_dim = r.u32();
  p.arch.num_classes = r.u32();
  const std::uint32_t depth = r.u32();
  r.need(std::size_t{depth} * 4);
  for (std::uint32_t i = 0; i < depth; ++i) p.arch.hidden.push_back(r.u32());
  try {
    p.arch.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::FormatError, std::string("checkpoint architecture: ") + e.what());
  }
  const auto widths = p.arch.widths();
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    r.need((widths[k] + 1) * widths[k + 1] * 8);
    DenseLayer layer{Matrix(widths[k], widths[k + 1]), std::vector<double>(widths[k + 1])};
    r.f64s(layer.weights.values());
    r.f64s(layer.bias);
    p.layers.push_back(std::move(layer));
  }
  if (r.position() != bytes.size() - 8) {
    throw Error(ErrorKind::FormatError, "trailing bytes after model payload");
  }
  return p;
}

inline std::string serialize_batch(const Dataset& batch) {
  auto w = detail::begin_container(PayloadKind::batch);
  w.u8(batch.name == DatasetName::mnist ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(batch.features.rows()));
  w.u32(static_cast<std::uint32_t>(batch.features.cols()));
  w.f64s(batch.features.values());
  for (auto label : batch.labels) w.u8(label);
  return w.finish();
}

inline Dataset deserialize_batch(std::string_view bytes) {
  auto r = detail::open_container(bytes, PayloadKind::batch);
  Dataset d;
  d.name = r.u8() == 0 ? DatasetName::mnist : DatasetName::cifar10;
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  r.need(rows * cols * 8 + rows);
  d.features = Matrix(rows, cols);
  r.f64s(d.features.values());
  d.labels.resize(rows);
  for (auto& label : d.labels) label = r.u8();
  if (r.position() != bytes.size() - 8) {
    throw Error(ErrorKind::FormatError, "trailing bytes after batch payload");
  }
  return d;
}

inline void save_model(const std::filesystem::path& path, const ModelParams& params) {
  write_text_file(path, serialize_model(params));
}

inline ModelParams load_model(const std::filesystem::path& path) {
  return deserialize_model(read_text_file(path));
}

inline void save_batch(const std::filesystem::path& path, const Dataset& batch) {
  write_text_file(path, serialize_batch(batch));
}

inline Dataset load_batch(const std::filesystem::path& path) {
  return deserialize_batch(read_text_file(path));
}

}  // namespace atras
