#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "atras/datasets.hpp"
#include "atras/error.hpp"
#include "atras/fgsm.hpp"
#include "atras/mlp.hpp"
#include "atras/sweep.hpp"

namespace atras {

/// Accuracy of `target` on FGSM examples crafted with `source`'s gradients.
inline double cross_attack_accuracy(const ModelParams& source, const ModelParams& target,
                                    const Dataset& data, const AttackConfig& cfg) {
  return robust_accuracy(target, data, cfg, &source);
}

/// cells[i][j]: accuracy of model j on examples crafted against model i.
struct TransferMatrix {
  std::vector<ArchitectureSpec> models;
  std::vector<double> clean_acc;
  std::vector<std::vector<double>> cells;
  double epsilon = 0.0;
  std::size_t attack_generations = 0;

  std::size_t size() const noexcept { return models.size(); }
};

inline TransferMatrix build_transfer_matrix(const std::vector<ModelParams>& models,
                                            const Dataset& data, const AttackConfig& cfg) {
  if (models.empty()) throw Error(ErrorKind::EmptyInput, "no models for transfer matrix");
  cfg.validate();
  for (const auto& m : models) {
    if (m.arch.input_dim != data.dim()) {
      throw Error(ErrorKind::DimensionMismatch,
                  "model " + format_hidden(m.arch.hidden) + " expects " +
                      std::to_string(m.arch.input_dim) + " inputs, data has " +
                      std::to_string(data.dim()));
    }
  }
  const std::size_t n = models.size();
  TransferMatrix out;
  out.epsilon = cfg.epsilon;
  out.cells.assign(n, std::vector<double>(n, 0.0));
  for (const auto& m : models) {
    out.models.push_back(m.arch);
    out.clean_acc.push_back(evaluate_accuracy(m, data));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Dataset adversarial = fgsm_dataset(models[i], data, cfg);
    ++out.attack_generations;
    for (std::size_t j = 0; j < n; ++j) out.cells[i][j] = evaluate_accuracy(models[j], adversarial);
  }
  return out;
}

/// Rows are sources, columns targets; a final row carries clean accuracy.
inline std::string emit_transfer_csv(const TransferMatrix& m) {
  std::string out = "source";
  for (const auto& a : m.models) out += ",\"" + format_hidden(a.hidden) + '"';
  out += '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += '"' + format_hidden(m.models[i].hidden) + '"';
    for (double v : m.cells[i]) out += ',' + format_number(v);
    out += '\n';
  }
  out += "clean";
  for (double v : m.clean_acc) out += ',' + format_number(v);
  out += '\n';
  return out;
}

/// Mean off-diagonal degradation (clean − cell) of the rows sourced by the
/// smallest and largest model (by parameter count order given by `params`).
struct TransferVerdict {
  std::size_t small_source = 0;
  std::size_t large_source = 0;
  double small_degradation = 0.0;
  double large_degradation = 0.0;
  std::string text;
};

inline TransferVerdict transfer_verdict(const TransferMatrix& m,
                                        const std::vector<std::size_t>& parameter_counts) {
  TransferVerdict v;
  if (m.size() < 2) {
    v.text = "verdict: n/a (needs at least two models)";
    return v;
  }
  for (std::size_t i = 1; i < m.size(); ++i) {
    if (parameter_counts[i] < parameter_counts[v.small_source]) v.small_source = i;
    if (parameter_counts[i] > parameter_counts[v.large_source]) v.large_source = i;
  }
  auto row_degradation = [&](std::size_t i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j)
      if (j != i) sum += m.clean_acc[j] - m.cells[i][j];
    return sum / static_cast<double>(m.size() - 1);
  };
  v.small_degradation = row_degradation(v.small_source);
  v.large_degradation = row_degradation(v.large_source);
  std::ostringstream out;
  out << "verdict: examples from the smallest model " << format_hidden(m.models[v.small_source].hidden)
      << " cost other models " << format_signed(v.small_degradation)
      << " accuracy on average; from the largest " << format_hidden(m.models[v.large_source].hidden)
      << " " << format_signed(v.large_degradation) << " ("
      << (v.small_degradation >= v.large_degradation ? "small-source attacks transfer at least as well"
                                                     : "large-source attacks transfer better")
      << ")";
  v.text = out.str();
  return v;
}

/// Markdown table with target accuracy and success rate (clean − cell) per cell.
inline std::string emit_transfer_markdown(const TransferMatrix& m, const std::string& verdict) {
  std::ostringstream out;
  out << "Transfer matrix at epsilon " << format_number(m.epsilon)
      << " (target accuracy; drop from clean accuracy in parentheses)\n\n";
  out << "| source \\ target |";
  for (const auto& a : m.models) out << ' ' << format_hidden(a.hidden) << " |";
  out << "\n|---|";
  for (std::size_t j = 0; j < m.size(); ++j) out << "---|";
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << "| " << format_hidden(m.models[i].hidden) << " |";
    for (std::size_t j = 0; j < m.size(); ++j) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " %.4f (%+.4f) |", m.cells[i][j],
                    m.clean_acc[j] - m.cells[i][j]);
      out << buf;
    }
    out << '\n';
  }
  out << "| clean |";
  for (double v : m.clean_acc) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " %.4f |", v);
    out << buf;
  }
  out << "\n\n" << verdict << '\n';
  return out.str();
}

}  // namespace atras
