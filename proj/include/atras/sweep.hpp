#pragma once

#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

#include "atras/datasets.hpp"
#include "atras/error.hpp"
#include "atras/mlp.hpp"
#include "atras/pipeline.hpp"

namespace atras {

/// The 40 hidden-layer lists of the published sweep, in table order.
inline std::vector<std::vector<std::size_t>> default_grid() {
  return {
      {8, 16, 32, 64, 128, 256, 512, 1024},
      {16, 32, 64, 128, 256, 512, 1024},
      {24, 48, 96, 192, 384, 768},
      {32, 64, 128, 256, 512, 1024},
      {40, 80, 160, 320, 640},
      {48, 96, 192, 384, 768},
      {56, 112, 224, 448, 896},
      {64, 128, 256, 512, 1024},
      {8, 32, 128, 512},
      {16, 64, 256, 1024},
      {24, 96, 384},
      {32, 128, 512},
      {40, 160, 640},
      {48, 192, 768},
      {56, 224, 896},
      {64, 256, 1024},
      {8, 64, 512},
      {16, 128, 1024},
      {24, 192},
      {32, 256},
      {40, 320},
      {48, 384},
      {56, 448},
      {64, 512},
      {8, 128},
      {16, 256},
      {24, 384},
      {32, 512},
      {40, 640},
      {48, 768},
      {56, 896},
      {64, 1024},
      {8, 256},
      {16, 512},
      {24, 768},
      {32, 1024},
      {40},
      {48},
      {56},
      {64},
  };
}

// ---------------------------------------------------------------------------
// Recovery aggregation

inline constexpr std::size_t kDepthGroups = 4;

/// Group 0..3 for hidden-list lengths 1, 2, 3 and ≥4. Linear models (no
/// hidden layer) belong to no group.
inline std::optional<std::size_t> depth_group(std::size_t depth) {
  if (depth == 0) return std::nullopt;
  return std::min(depth, kDepthGroups) - 1;
}

inline std::string_view depth_group_label(std::size_t group) {
  static constexpr std::array<std::string_view, kDepthGroups> labels{
      "depth 1", "depth 2", "depth 3", "depth >=4"};
  return labels.at(group);
}

struct RecoveryGroup {
  std::vector<std::size_t> members;  // indices into the record sequence
  std::optional<double> mean;        // unset for an empty group
};

struct RecoveryStats {
  std::array<RecoveryGroup, kDepthGroups> groups;
  std::vector<std::size_t> excluded;  // failed runs and linear models
};

/// Mean of (attacked_after − attacked_before) per depth group.
inline RecoveryStats aggregate_recovery(const std::vector<ExperimentRecord>& records) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "no records to aggregate");
  RecoveryStats stats;
  std::array<double, kDepthGroups> sums{};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto group = depth_group(r.arch.depth());
    const double delta = r.recovery_delta();
    if (!r.ok() || !group || !std::isfinite(delta)) {
      stats.excluded.push_back(i);
      continue;
    }
    stats.groups[*group].members.push_back(i);
    sums[*group] += delta;
  }
  for (std::size_t g = 0; g < kDepthGroups; ++g) {
    if (!stats.groups[g].members.empty()) {
      stats.groups[g].mean = sums[g] / static_cast<double>(stats.groups[g].members.size());
    }
  }
  return stats;
}

/// Published per-group recovery claims the computed means are checked against.
struct ReferenceClaim {
  std::size_t group;
  double value;  // accuracy points, signed
};

inline std::vector<ReferenceClaim> reference_claims(DatasetName name) {
  if (name == DatasetName::mnist) {
    return {{0, +0.0458}, {1, -0.025}, {2, +0.0406}, {3, +0.0099}};
  }
  return {{0, +0.352}, {1, -0.445}, {2, +0.3130}, {3, +0.0728}};
}

inline constexpr double kClaimTolerance = 0.002;

struct ClaimCheck {
  std::size_t group;
  double claimed;
  std::optional<double> computed;
  bool discrepancy;
  bool sign_mismatch;
};

inline std::vector<ClaimCheck> check_claims(const RecoveryStats& stats, DatasetName name) {
  std::vector<ClaimCheck> out;
  for (const auto& claim : reference_claims(name)) {
    const auto& computed = stats.groups[claim.group].mean;
    ClaimCheck c{claim.group, claim.value, computed, true, false};
    if (computed) {
      c.discrepancy = std::abs(*computed - claim.value) > kClaimTolerance;
      c.sign_mismatch = (*computed > 0) != (claim.value > 0);
    }
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV / markdown

inline constexpr std::string_view kCsvHeader =
    "train_acc,test_acc,acc_when_attacked_before_adv_training,adversarial_train_acc,"
    "adversarial_test_acc,acc_when_attacked_after_adv_training,hidden_layers";

/// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::string format_signed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.*f", digits, v);
  return buf;
}

inline std::string emit_csv(const std::vector<ExperimentRecord>& records) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    for (double v : {r.train_acc, r.test_acc, r.acc_when_attacked_before_adv_training,
                     r.adversarial_train_acc, r.adversarial_test_acc,
                     r.acc_when_attacked_after_adv_training}) {
      out += format_number(v);
      out += ',';
    }
    out += '"' + format_hidden(r.arch.hidden) + "\"\n";
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      fields.emplace_back();
    } else if (ch != '\r') {
      fields.back() += ch;
    }
  }
  return fields;
}

inline double parse_number(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && *first == ' ') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw Error(ErrorKind::FormatError,
                "line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace detail

/// Parses records CSV text (header required). Input width is not stored in
/// the CSV; it is taken from `input_dim`.
inline std::vector<ExperimentRecord> parse_csv(std::string_view text,
                                               std::size_t input_dim = kMnistDim) {
  std::vector<ExperimentRecord> out;
  std::size_t line_no = 0;
  bool seen_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != kCsvHeader) {
        throw Error(ErrorKind::FormatError, "unexpected CSV header '" + std::string(line) + "'");
      }
      seen_header = true;
      continue;
    }
    const auto f = detail::split_csv_line(line);
    if (f.size() != 7) {
      throw Error(ErrorKind::FormatError, "line " + std::to_string(line_no) + ": expected 7 fields, got " +
                                              std::to_string(f.size()));
    }
    ExperimentRecord r;
    r.train_acc = detail::parse_number(f[0], line_no);
    r.test_acc = detail::parse_number(f[1], line_no);
    r.acc_when_attacked_before_adv_training = detail::parse_number(f[2], line_no);
    r.adversarial_train_acc = detail::parse_number(f[3], line_no);
    r.adversarial_test_acc = detail::parse_number(f[4], line_no);
    r.acc_when_attacked_after_adv_training = detail::parse_number(f[5], line_no);
    r.arch.hidden = parse_hidden(f[6]);
    r.arch.input_dim = input_dim;
    if (std::isnan(r.train_acc)) r.failure = "recorded as failed";
    out.push_back(std::move(r));
  }
  if (!seen_header) throw Error(ErrorKind::FormatError, "missing CSV header");
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

/// Summary block: per-group means plus a line per reference claim that the
/// computed value contradicts.
inline std::string emit_summary(const std::vector<ExperimentRecord>& records,
                                const RecoveryStats& stats,
                                std::optional<DatasetName> reference = std::nullopt) {
  std::ostringstream out;
  out << "Recovery (attacked_after - attacked_before), mean per depth group:\n";
  for (std::size_t g = 0; g < kDepthGroups; ++g) {
    const auto& grp = stats.groups[g];
    out << "  " << depth_group_label(g) << ": ";
    if (grp.mean) {
      out << format_signed(*grp.mean) << " over " << grp.members.size() << " architectures\n";
    } else {
      out << "n/a (no architectures)\n";
    }
  }
  if (!stats.excluded.empty()) {
    out << "  excluded: " << stats.excluded.size() << " record(s) without a usable delta:";
    for (std::size_t i : stats.excluded) out << ' ' << format_hidden(records[i].arch.hidden);
    out << '\n';
  }
  if (reference) {
    out << "Reference claims (" << to_string(*reference) << ", tolerance "
        << format_number(kClaimTolerance) << "):\n";
    for (const auto& c : check_claims(stats, *reference)) {
      out << "  " << depth_group_label(c.group) << ": claimed " << format_signed(c.claimed)
          << ", computed " << (c.computed ? format_signed(*c.computed) : std::string("n/a"));
      if (!c.discrepancy) {
        out << " [match]\n";
      } else {
        out << " [DISCREPANCY" << (c.sign_mismatch ? ": sign differs" : "") << "]\n";
      }
    }
  }
  return out.str();
}

inline std::string emit_markdown(const std::vector<ExperimentRecord>& records,
                                 const RecoveryStats& stats,
                                 std::optional<DatasetName> reference = std::nullopt) {
  std::ostringstream out;
  out << "| train_acc | test_acc | acc_when_attacked_before_adv_training | adversarial_train_acc "
         "| adversarial_test_acc | acc_when_attacked_after_adv_training | hidden_layers "
         "| recovery_delta |\n";
  out << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : records) {
    out << "| " << format_number(r.train_acc) << " | " << format_number(r.test_acc) << " | "
        << format_number(r.acc_when_attacked_before_adv_training) << " | "
        << format_number(r.adversarial_train_acc) << " | "
        << format_number(r.adversarial_test_acc) << " | "
        << format_number(r.acc_when_attacked_after_adv_training) << " | "
        << format_hidden(r.arch.hidden) << " | "
        << (std::isfinite(r.recovery_delta()) ? format_signed(r.recovery_delta()) : "n/a")
        << " |\n";
  }
  out << "\n```\n" << emit_summary(records, stats, reference) << "```\n";
  return out.str();
}

enum class ReportFormat { csv, markdown };

inline std::string emit_report(const std::vector<ExperimentRecord>& records,
                               const RecoveryStats& stats, ReportFormat format,
                               std::optional<DatasetName> reference = std::nullopt) {
  return format == ReportFormat::csv ? emit_csv(records)
                                     : emit_markdown(records, stats, reference);
}

// ---------------------------------------------------------------------------
// Sweep execution

struct SweepConfig {
  DatasetName dataset = DatasetName::mnist;
  std::vector<ArchitectureSpec> grid;
  ExperimentConfig experiment;  // experiment.train.seed is ignored
  std::uint64_t global_seed = 0;
  std::optional<std::filesystem::path> output_path;
  std::size_t parallelism = 1;

  void validate() const {
    if (grid.empty()) throw Error(ErrorKind::InvalidConfig, "sweep grid is empty");
    std::set<std::vector<std::size_t>> seen;
    for (const auto& a : grid) {
      if (!seen.insert(a.hidden).second) {
        throw Error(ErrorKind::InvalidConfig, "duplicate architecture " + format_hidden(a.hidden));
      }
    }
  }
};

/// Progress for one finished candidate; called under a lock.
using SweepProgressFn = std::function<void(std::size_t index, const ExperimentRecord&)>;

/// Runs every grid entry; records come back in grid order no matter how the
/// work is scheduled. A failed candidate is recorded and the sweep continues.
inline std::vector<ExperimentRecord> run_sweep(const SweepConfig& cfg, const Split& data,
                                               const SweepProgressFn& on_done = {},
                                               const ProgressFn& on_epoch = {}) {
  cfg.validate();
  std::vector<ExperimentRecord> records(cfg.grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex lock;
  std::exception_ptr fatal;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.grid.size()) return;
      ExperimentConfig exp = cfg.experiment;
      exp.train.seed = experiment_seed(cfg.global_seed, cfg.grid[i]);
      try {
        ProgressFn epoch_cb;
        if (on_epoch) {
          epoch_cb = [&](const EpochReport& r) {
            std::lock_guard g(lock);
            on_epoch(r);
          };
        }
        records[i] = run_experiment(cfg.grid[i], data, exp, epoch_cb);
      } catch (...) {
        std::lock_guard g(lock);
        if (!fatal) fatal = std::current_exception();
        next = cfg.grid.size();
        return;
      }
      if (on_done) {
        std::lock_guard g(lock);
        on_done(i, records[i]);
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.parallelism, cfg.grid.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  if (cfg.output_path) write_text_file(*cfg.output_path, emit_csv(records));
  return records;
}

}  // namespace atras
