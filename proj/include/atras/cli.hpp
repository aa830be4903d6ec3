#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "atras/checkpoint.hpp"
#include "atras/datasets.hpp"
#include "atras/error.hpp"
#include "atras/fgsm.hpp"
#include "atras/mlp.hpp"
#include "atras/pipeline.hpp"
#include "atras/run_config.hpp"
#include "atras/sweep.hpp"
#include "atras/transfer.hpp"

#ifndef ATRAS_VERSION
#define ATRAS_VERSION "0.0.0"
#endif

namespace atras {

namespace detail {

/// Flag overrides; unset flags leave file/default values alone.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::string> dataset;
  std::optional<std::string> data_dir;
  std::optional<std::string> test_source;
  std::optional<std::size_t> train_count;
  std::optional<std::size_t> test_count;
  std::optional<std::uint64_t> split_seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  std::optional<std::string> optimizer;
  std::optional<std::string> init;
  std::optional<std::string> activation;
  std::optional<double> epsilon;
  std::optional<int> target;
  std::optional<std::string> attack_split;
  std::optional<std::string> adv_mode;
  std::optional<std::string> defense_start;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> grid_index;
  std::vector<std::string> grid_lists;
  bool dump_config = false;
};

inline void add_common_options(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config_path, "JSON config file; flags override its values");
  app.add_option("--dataset", o.dataset, "mnist | cifar10");
  app.add_option("--data-dir", o.data_dir, "dataset root (default $ATRAS_DATA_DIR, then ./data)");
  app.add_option("--test-source", o.test_source, "split (slice of train files) | official");
  app.add_option("--train-count", o.train_count, "training examples");
  app.add_option("--test-count", o.test_count, "test examples");
  app.add_option("--split-seed", o.split_seed, "seed of the subset draw");
  app.add_option("--epochs", o.epochs);
  app.add_option("--batch-size", o.batch_size);
  app.add_option("--lr", o.learning_rate, "learning rate");
  app.add_option("--optimizer", o.optimizer, "sgd | sgd_momentum | adam");
  app.add_option("--init", o.init, "he_uniform | glorot_uniform");
  app.add_option("--activation", o.activation, "relu | tanh");
  app.add_option("--epsilon", o.epsilon, "FGSM budget in [0,1] pixel units");
  app.add_option("--target", o.target, "targeted FGSM toward this label");
  app.add_option("--attack-split", o.attack_split, "test | train");
  app.add_option("--adv-mode", o.adv_mode, "static | per_batch");
  app.add_option("--defense-start", o.defense_start, "retrain | finetune");
  app.add_option("--seed", o.seed, "global seed");
  app.add_flag("--dump-config", o.dump_config, "print the resolved config as JSON and exit");
}

inline RunConfig resolve_config(const Overrides& o) {
  Json file = Json::object();
  if (o.config_path) {
    try {
      file = Json::parse(read_text_file(*o.config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::InvalidConfig, *o.config_path + ": " + e.what());
    }
  }
  DatasetName name = DatasetName::mnist;
  if (o.dataset) {
    name = parse_dataset_name(*o.dataset);
  } else if (auto from_file = dataset_in(file)) {
    name = *from_file;
  }
  RunConfig c = RunConfig::defaults(name);
  apply_json(c, file);
  c.dataset = name;

  Json flags = Json::object();
  auto sub = [&](const char* key) -> Json& { return flags[key]; };
  if (o.data_dir) flags["data_dir"] = *o.data_dir;
  if (o.test_source) flags["test_source"] = *o.test_source;
  if (o.train_count) sub("split")["train"] = *o.train_count;
  if (o.test_count) sub("split")["test"] = *o.test_count;
  if (o.split_seed) sub("split")["seed"] = *o.split_seed;
  if (o.epochs) sub("train")["epochs"] = *o.epochs;
  if (o.batch_size) sub("train")["batch_size"] = *o.batch_size;
  if (o.learning_rate) sub("train")["learning_rate"] = *o.learning_rate;
  if (o.optimizer) sub("train")["optimizer"] = *o.optimizer;
  if (o.init) sub("train")["init"] = *o.init;
  if (o.activation) sub("train")["activation"] = *o.activation;
  if (o.epsilon) sub("attack")["epsilon"] = *o.epsilon;
  if (o.target) sub("attack")["target"] = *o.target;
  if (o.attack_split) sub("attack")["split"] = *o.attack_split;
  if (o.adv_mode) sub("defense")["mode"] = *o.adv_mode;
  if (o.defense_start) sub("defense")["start"] = *o.defense_start;
  if (o.seed) flags["seed"] = *o.seed;
  if (o.parallelism) flags["parallelism"] = *o.parallelism;
  if (o.grid_index) flags["grid"] = *o.grid_index;
  if (!o.grid_lists.empty()) {
    Json lists = Json::array();
    for (const auto& s : o.grid_lists) lists.push_back(parse_hidden(s));
    flags["grid"] = lists;
  }
  apply_json(c, flags);
  return c;
}

inline void banner(std::ostream& err, std::string_view command, const RunConfig& c) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(c)));
  err << "atras " << ATRAS_VERSION << " | " << command << " | seed " << c.seed << " | config "
      << hash << '\n';
}

inline ProgressFn epoch_logger(std::ostream& err) {
  return [&err](const EpochReport& r) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "  [%.*s] epoch %zu loss %.6f\n",
                  static_cast<int>(r.phase.size()), r.phase.data(), r.epoch, r.mean_loss);
    err << buf;
  };
}

inline std::string accuracy_json(std::initializer_list<std::pair<const char*, double>> fields,
                                 const ArchitectureSpec& arch) {
  Json j;
  for (const auto& [k, v] : fields) j[k] = v;
  j["hidden_layers"] = format_hidden(arch.hidden);
  return j.dump();
}

inline std::optional<DatasetName> reference_for(const std::string& choice,
                                                const std::string& csv_path) {
  if (choice == "none") return std::nullopt;
  if (choice == "mnist" || choice == "cifar10") return parse_dataset_name(choice);
  if (choice != "auto") throw Error(ErrorKind::InvalidConfig, "--reference must be auto, mnist, cifar10 or none");
  const auto name = std::filesystem::path(csv_path).filename().string();
  if (name.find("cifar") != std::string::npos) return DatasetName::cifar10;
  if (name.find("mnist") != std::string::npos) return DatasetName::mnist;
  return std::nullopt;
}

}  // namespace detail

/// Entry point for the `atras` tool. Exit codes: 0 success, 1 runtime or data
/// error, 2 usage error.
inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Architecture sweep for FGSM robustness and adversarial training", "atras"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ATRAS_VERSION);

  detail::Overrides o;
  std::string arch_text;
  std::string save_path;
  std::string model_path;
  std::string source_path;
  std::string baseline_path;
  std::string dump_adv_path;
  std::string out_path;
  std::string markdown_path;
  std::string checkpoint_dir;
  std::string csv_path;
  std::string reference = "auto";
  std::vector<std::string> model_paths;

  auto* train_cmd = app.add_subcommand("train", "train one architecture and print clean accuracies");
  auto* attack_cmd = app.add_subcommand("attack", "robust accuracy of a checkpoint under FGSM");
  auto* advtrain_cmd = app.add_subcommand("advtrain", "adversarial training of one architecture");
  auto* experiment_cmd = app.add_subcommand("experiment", "one full table row (four phases)");
  auto* sweep_cmd = app.add_subcommand("sweep", "run the architecture grid and write a records CSV");
  auto* transfer_cmd = app.add_subcommand("transfer", "cross-model transfer matrix from checkpoints");
  auto* aggregate_cmd = app.add_subcommand("aggregate", "depth-group recovery means of a records CSV");
  auto* report_cmd = app.add_subcommand("report", "records CSV to a markdown report");
  auto* sources_cmd = app.add_subcommand("sources", "print canonical dataset download URLs");

  for (auto* cmd : {train_cmd, attack_cmd, advtrain_cmd, experiment_cmd, sweep_cmd, transfer_cmd}) {
    detail::add_common_options(*cmd, o);
  }
  train_cmd->add_option("--arch", arch_text, "hidden layers, e.g. \"[64, 512]\"")->required();
  train_cmd->add_option("--save", save_path, "write the trained model checkpoint");

  attack_cmd->add_option("--model", model_path, "target checkpoint")->required();
  attack_cmd->add_option("--source", source_path, "craft examples against this checkpoint instead");
  attack_cmd->add_option("--dump-adv", dump_adv_path, "write the adversarial test set");

  advtrain_cmd->add_option("--arch", arch_text, "hidden layers")->required();
  advtrain_cmd->add_option("--baseline", baseline_path, "baseline checkpoint (static / finetune)");
  advtrain_cmd->add_option("--save", save_path, "write the defended checkpoint");

  experiment_cmd->add_option("--arch", arch_text, "hidden layers")->required();
  experiment_cmd->add_option("--out", out_path, "write the record CSV here instead of stdout");
  experiment_cmd->add_option("--checkpoint-dir", checkpoint_dir, "save baseline/defended models");

  sweep_cmd->add_option("--grid-index", o.grid_index, "inclusive index range into the grid, e.g. 0..2");
  sweep_cmd->add_option("--arch", o.grid_lists, "explicit hidden lists (repeatable)")
      ->allow_extra_args(false);
  sweep_cmd->add_option("--parallel", o.parallelism, "experiments run concurrently");
  sweep_cmd->add_option("--out", out_path, "records CSV")->required();
  sweep_cmd->add_option("--markdown", markdown_path, "also write a markdown report");

  transfer_cmd->add_option("--model", model_paths, "checkpoints (repeatable)")
      ->required()
      ->allow_extra_args(false);
  transfer_cmd->add_option("--out", out_path, "matrix CSV");
  transfer_cmd->add_option("--markdown", markdown_path, "markdown table");

  aggregate_cmd->add_option("csv", csv_path, "records CSV")->required();
  aggregate_cmd->add_option("--reference", reference, "auto | mnist | cifar10 | none");
  report_cmd->add_option("csv", csv_path, "records CSV")->required();
  report_cmd->add_option("--reference", reference, "auto | mnist | cifar10 | none");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto parsed = app.get_subcommands();
    out << (parsed.empty() ? app.help() : parsed.front()->help());
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << ATRAS_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (sources_cmd->parsed()) {
      for (auto name : {DatasetName::mnist, DatasetName::cifar10}) {
        for (const auto& url : canonical_sources(name)) out << to_string(name) << ' ' << url << '\n';
      }
      return 0;
    }
    if (aggregate_cmd->parsed() || report_cmd->parsed()) {
      const auto records = parse_csv(read_text_file(csv_path));
      const auto stats = aggregate_recovery(records);
      const auto ref = detail::reference_for(reference, csv_path);
      out << (aggregate_cmd->parsed() ? emit_summary(records, stats, ref)
                                      : emit_markdown(records, stats, ref));
      return 0;
    }

    const RunConfig cfg = detail::resolve_config(o);
    if (o.dump_config) {
      out << to_json(cfg).dump(2) << '\n';
      return 0;
    }
    // Validate everything that does not need data before loading it.
    std::optional<ArchitectureSpec> arch;
    if (!arch_text.empty()) arch = cfg.architecture(parse_hidden(arch_text));
    std::vector<ArchitectureSpec> grid;
    if (sweep_cmd->parsed()) grid = resolve_grid(cfg.grid, cfg.dataset, cfg.activation);
    const std::string command = app.get_subcommands().front()->get_name();
    detail::banner(err, command, cfg);
    const auto progress = detail::epoch_logger(err);
    const Split data = load_split(cfg);
    err << "  data: " << to_string(cfg.dataset) << " train " << data.train.size() << " test "
        << data.test.size() << '\n';

    if (train_cmd->parsed()) {
      TrainConfig tc = cfg.train;
      tc.seed = experiment_seed(cfg.seed, *arch);
      const auto result = train(*arch, data.train, data.test, tc, progress);
      if (!save_path.empty()) save_model(save_path, result.params);
      out << detail::accuracy_json({{"train_acc", result.train_acc}, {"test_acc", result.test_acc}}, *arch)
          << '\n';
      return 0;
    }
    if (attack_cmd->parsed()) {
      const auto target = load_model(model_path);
      std::optional<ModelParams> source;
      if (!source_path.empty()) source = load_model(source_path);
      const ModelParams& attacker = source ? *source : target;
      const Dataset& attack_set = cfg.attack_split == AttackSplit::test ? data.test : data.train;
      const Dataset adv = fgsm_dataset(attacker, attack_set, cfg.attack);
      if (!dump_adv_path.empty()) save_batch(dump_adv_path, adv);
      out << detail::accuracy_json({{"clean_acc", evaluate_accuracy(target, attack_set)},
                                    {"robust_acc", evaluate_accuracy(target, adv)},
                                    {"epsilon", cfg.attack.epsilon}},
                                   target.arch)
          << '\n';
      return 0;
    }
    if (advtrain_cmd->parsed()) {
      TrainConfig tc = cfg.train;
      tc.seed = experiment_seed(cfg.seed, *arch);
      std::optional<ModelParams> baseline;
      if (!baseline_path.empty()) baseline = load_model(baseline_path);
      const auto result = adversarial_training(*arch, data.train, data.test, tc, cfg.attack,
                                               cfg.defense, baseline ? &*baseline : nullptr,
                                               progress);
      if (!save_path.empty()) save_model(save_path, result.params);
      const Dataset& attack_set = cfg.attack_split == AttackSplit::test ? data.test : data.train;
      out << detail::accuracy_json(
                 {{"adversarial_train_acc", result.adversarial_train_acc},
                  {"adversarial_test_acc", result.adversarial_test_acc},
                  {"acc_when_attacked", robust_accuracy(result.params, attack_set, cfg.attack)}},
                 *arch)
          << '\n';
      return 0;
    }
    if (experiment_cmd->parsed()) {
      ExperimentConfig ec = cfg.experiment();
      ec.train.seed = experiment_seed(cfg.seed, *arch);
      ExperimentArtifacts artifacts;
      const auto rec = run_experiment(*arch, data, ec, progress, &artifacts);
      if (rec.failure) err << "  failed: " << *rec.failure << '\n';
      if (!checkpoint_dir.empty()) {
        std::filesystem::create_directories(checkpoint_dir);
        const std::string stem = std::to_string(experiment_seed(cfg.seed, *arch));
        if (artifacts.baseline) save_model(std::filesystem::path(checkpoint_dir) / (stem + "_baseline.atrs"), *artifacts.baseline);
        if (artifacts.defended) save_model(std::filesystem::path(checkpoint_dir) / (stem + "_defended.atrs"), *artifacts.defended);
      }
      const std::string csv = emit_csv({rec});
      if (out_path.empty()) {
        out << csv;
      } else {
        write_text_file(out_path, csv);
      }
      err << "  wall time " << rec.wall_time_seconds << " s\n";
      return 0;
    }
    if (sweep_cmd->parsed()) {
      SweepConfig sc;
      sc.dataset = cfg.dataset;
      sc.grid = std::move(grid);
      sc.experiment = cfg.experiment();
      sc.global_seed = cfg.seed;
      sc.output_path = out_path;
      sc.parallelism = cfg.parallelism;
      const auto records = run_sweep(
          sc, data,
          [&](std::size_t i, const ExperimentRecord& r) {
            err << "  done " << i << ' ' << format_hidden(r.arch.hidden)
                << (r.failure ? " FAILED " + *r.failure : "") << '\n';
          },
          sc.parallelism == 1 ? progress : ProgressFn{});
      if (!markdown_path.empty()) {
        write_text_file(markdown_path,
                        emit_markdown(records, aggregate_recovery(records), cfg.dataset));
      }
      return 0;
    }
    if (transfer_cmd->parsed()) {
      std::vector<ModelParams> models;
      std::vector<std::size_t> counts;
      for (const auto& p : model_paths) {
        models.push_back(load_model(p));
        counts.push_back(models.back().parameter_count());
      }
      const Dataset& attack_set = cfg.attack_split == AttackSplit::test ? data.test : data.train;
      const auto matrix = build_transfer_matrix(models, attack_set, cfg.attack);
      const auto verdict = transfer_verdict(matrix, counts);
      if (!out_path.empty()) write_text_file(out_path, emit_transfer_csv(matrix));
      const auto md = emit_transfer_markdown(matrix, verdict.text);
      if (!markdown_path.empty()) write_text_file(markdown_path, md);
      out << md;
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    const bool usage = e.kind() == ErrorKind::InvalidConfig ||
                       e.kind() == ErrorKind::InvalidArchitecture;
    return usage ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace atras
