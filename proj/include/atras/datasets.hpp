#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atras/error.hpp"
#include "atras/hash.hpp"
#include "atras/matops.hpp"
#include "atras/rng.hpp"

namespace atras {

enum class DatasetName { mnist, cifar10 };

constexpr std::string_view to_string(DatasetName name) {
  return name == DatasetName::mnist ? "mnist" : "cifar10";
}

inline DatasetName parse_dataset_name(std::string_view s) {
  if (s == "mnist") return DatasetName::mnist;
  if (s == "cifar10" || s == "cifar-10") return DatasetName::cifar10;
  throw Error(ErrorKind::InvalidConfig, "unknown dataset '" + std::string(s) + "'");
}

constexpr std::size_t kMnistDim = 784;
constexpr std::size_t kCifarDim = 3072;
constexpr std::size_t kCifarRecord = 1 + kCifarDim;
constexpr std::size_t kNumClasses = 10;

constexpr std::size_t input_dim(DatasetName name) {
  return name == DatasetName::mnist ? kMnistDim : kCifarDim;
}

/// Flattened images in [0,1] (one row per example) with labels 0..9.
struct Dataset {
  DatasetName name = DatasetName::mnist;
  Matrix features;
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Content fingerprint over features and labels.
inline std::uint64_t fingerprint(const Dataset& d) {
  Fnv1a h;
  h.update(d.features.values());
  h.update(d.labels.data(), d.labels.size());
  return h.digest();
}

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::IoError, "read failed for " + path.string());
  return bytes;
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

inline void require_size(const std::filesystem::path& path, std::size_t expected,
                         std::size_t actual) {
  if (actual != expected) {
    throw Error(ErrorKind::FormatError,
                path.string() + ": expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(actual));
  }
}

}  // namespace detail

/// Reads an IDX image/label file pair (big-endian header, magic 2051/2049).
inline Dataset load_mnist(const std::filesystem::path& images_path,
                          const std::filesystem::path& labels_path) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);
  if (img.size() < 16) detail::require_size(images_path, 16, img.size());
  if (lab.size() < 8) detail::require_size(labels_path, 8, lab.size());
  if (const auto magic = detail::read_be32(img, 0); magic != 2051) {
    throw Error(ErrorKind::FormatError, images_path.string() + ": bad image magic " +
                                            std::to_string(magic) + " (want 2051)");
  }
  if (const auto magic = detail::read_be32(lab, 0); magic != 2049) {
    throw Error(ErrorKind::FormatError, labels_path.string() + ": bad label magic " +
                                            std::to_string(magic) + " (want 2049)");
  }
  const std::size_t count = detail::read_be32(img, 4);
  const std::size_t rows = detail::read_be32(img, 8);
  const std::size_t cols = detail::read_be32(img, 12);
  const std::size_t label_count = detail::read_be32(lab, 4);
  if (rows * cols != kMnistDim) {
    throw Error(ErrorKind::FormatError, images_path.string() + ": image shape " +
                                            std::to_string(rows) + "x" + std::to_string(cols));
  }
  detail::require_size(images_path, 16 + count * kMnistDim, img.size());
  detail::require_size(labels_path, 8 + label_count, lab.size());
  if (count != label_count) {
    throw Error(ErrorKind::FormatError, "image count " + std::to_string(count) +
                                            " differs from label count " +
                                            std::to_string(label_count));
  }

  Dataset out{DatasetName::mnist, Matrix(count, kMnistDim), std::vector<std::uint8_t>(count)};
  auto values = out.features.values();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = img[16 + i] / 255.0;
  for (std::size_t i = 0; i < count; ++i) {
    if (lab[8 + i] > 9) {
      throw Error(ErrorKind::FormatError, labels_path.string() + ": label " +
                                              std::to_string(lab[8 + i]) + " at index " +
                                              std::to_string(i));
    }
    out.labels[i] = lab[8 + i];
  }
  return out;
}

/// Concatenates CIFAR-10 binary batches (3073-byte records, label first).
/// Pixels stay in the stored channel-planar order.
inline Dataset load_cifar10(const std::vector<std::filesystem::path>& batch_paths) {
  std::vector<std::vector<unsigned char>> files;
  std::size_t total = 0;
  for (const auto& path : batch_paths) {
    auto bytes = detail::read_file(path);
    if (bytes.size() % kCifarRecord != 0) {
      throw Error(ErrorKind::FormatError,
                  path.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of " + std::to_string(kCifarRecord));
    }
    total += bytes.size() / kCifarRecord;
    files.push_back(std::move(bytes));
  }
  Dataset out{DatasetName::cifar10, Matrix(total, kCifarDim), std::vector<std::uint8_t>(total)};
  std::size_t row = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto& bytes = files[f];
    for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord, ++row) {
      if (bytes[off] > 9) {
        throw Error(ErrorKind::FormatError,
                    batch_paths[f].string() + ": label byte " + std::to_string(bytes[off]) +
                        " in record " + std::to_string(off / kCifarRecord));
      }
      out.labels[row] = bytes[off];
      auto dst = out.features.row(row);
      for (std::size_t i = 0; i < kCifarDim; ++i) dst[i] = bytes[off + 1 + i] / 255.0;
    }
  }
  return out;
}

enum class Partition { train, test };

/// Looks for the standard file names directly under `root` and in the
/// conventional sub-directories (`mnist/`, `cifar-10-batches-bin/`).
inline Dataset load_partition(DatasetName name, const std::filesystem::path& root,
                              Partition partition) {
  namespace fs = std::filesystem;
  auto locate = [&](std::initializer_list<const char*> subdirs, const std::string& file) {
    for (const char* sub : subdirs) {
      fs::path candidate = root / sub / file;
      if (fs::exists(candidate)) return candidate;
    }
    throw Error(ErrorKind::IoError, "cannot find " + file + " under " + root.string());
  };
  if (name == DatasetName::mnist) {
    const std::string prefix = partition == Partition::train ? "train" : "t10k";
    return load_mnist(locate({"", "mnist"}, prefix + "-images-idx3-ubyte"),
                      locate({"", "mnist"}, prefix + "-labels-idx1-ubyte"));
  }
  std::vector<fs::path> batches;
  if (partition == Partition::train) {
    for (int i = 1; i <= 5; ++i) {
      batches.push_back(
          locate({"", "cifar-10-batches-bin", "cifar10"}, "data_batch_" + std::to_string(i) + ".bin"));
    }
  } else {
    batches.push_back(locate({"", "cifar-10-batches-bin", "cifar10"}, "test_batch.bin"));
  }
  return load_cifar10(batches);
}

/// Explicit path, then $ATRAS_DATA_DIR, then ./data.
inline std::filesystem::path resolve_data_root(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("ATRAS_DATA_DIR"); env && *env) return env;
  return "data";
}

/// Canonical download locations; fetching is left to the user.
inline std::vector<std::string> canonical_sources(DatasetName name) {
  if (name == DatasetName::mnist) {
    return {
        "https://ossci-datasets.s3.amazonaws.com/mnist/train-images-idx3-ubyte.gz",
        "https://ossci-datasets.s3.amazonaws.com/mnist/train-labels-idx1-ubyte.gz",
        "https://ossci-datasets.s3.amazonaws.com/mnist/t10k-images-idx3-ubyte.gz",
        "https://ossci-datasets.s3.amazonaws.com/mnist/t10k-labels-idx1-ubyte.gz",
    };
  }
  return {"https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"};
}

struct SplitSpec {
  std::size_t train_count = 5000;
  std::size_t test_count = 5000;
  std::uint64_t seed = 42;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

inline Dataset select_rows(const Dataset& source, std::span<const std::size_t> indices) {
  Dataset out{source.name, Matrix(indices.size(), source.dim()),
              std::vector<std::uint8_t>(indices.size())};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = source.features.row(indices[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels[i] = source.labels[indices[i]];
  }
  return out;
}

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_indices;  // rows of the source
  std::vector<std::size_t> test_indices;
};

/// Seeded shuffle of 0..n-1; the first `train_count` go to train, the next
/// `test_count` to test.
inline Split subset_split(const Dataset& source, const SplitSpec& spec) {
  if (spec.train_count == 0 || spec.test_count == 0) {
    throw Error(ErrorKind::InvalidConfig, "split counts must be positive");
  }
  if (spec.train_count + spec.test_count > source.size()) {
    throw Error(ErrorKind::InsufficientData,
                "requested " + std::to_string(spec.train_count) + "+" +
                    std::to_string(spec.test_count) + " examples from a source of " +
                    std::to_string(source.size()));
  }
  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(std::span(order));
  Split out;
  out.train_indices.assign(order.begin(), order.begin() + spec.train_count);
  out.test_indices.assign(order.begin() + spec.train_count,
                          order.begin() + spec.train_count + spec.test_count);
  out.train = select_rows(source, out.train_indices);
  out.test = select_rows(source, out.test_indices);
  return out;
}

/// Train rows drawn from `train_source`, test rows from a separate partition
/// (e.g. the official test files). Each side uses its own derived stream.
inline Split split_across_partitions(const Dataset& train_source, const Dataset& test_source,
                                     const SplitSpec& spec) {
  if (spec.train_count == 0 || spec.test_count == 0) {
    throw Error(ErrorKind::InvalidConfig, "split counts must be positive");
  }
  if (spec.train_count > train_source.size() || spec.test_count > test_source.size()) {
    throw Error(ErrorKind::InsufficientData, "partition too small for requested split");
  }
  auto draw = [](std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span(order));
    order.resize(k);
    return order;
  };
  Split out;
  out.train_indices = draw(train_source.size(), spec.train_count, derive_seed(spec.seed, {1}));
  out.test_indices = draw(test_source.size(), spec.test_count, derive_seed(spec.seed, {2}));
  out.train = select_rows(train_source, out.train_indices);
  out.test = select_rows(test_source, out.test_indices);
  return out;
}

}  // namespace atras
