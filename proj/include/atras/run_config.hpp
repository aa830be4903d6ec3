#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "atras/datasets.hpp"
#include "atras/error.hpp"
#include "atras/fgsm.hpp"
#include "atras/hash.hpp"
#include "atras/mlp.hpp"
#include "atras/pipeline.hpp"
#include "atras/sweep.hpp"

namespace atras {

using Json = nlohmann::ordered_json;

enum class TestSource { split, official };

/// Grid selection: the whole default grid, an inclusive index range into it,
/// or explicit hidden lists.
struct GridSelection {
  enum class Kind { full, range, explicit_list } kind = Kind::full;
  std::size_t first = 0;
  std::size_t last = 0;
  std::vector<std::vector<std::size_t>> lists;

  friend bool operator==(const GridSelection&, const GridSelection&) = default;
};

inline GridSelection parse_grid_range(std::string_view text) {
  const auto dots = text.find("..");
  GridSelection g;
  g.kind = GridSelection::Kind::range;
  try {
    if (dots == std::string_view::npos) {
      g.first = g.last = std::stoul(std::string(text));
    } else {
      g.first = std::stoul(std::string(text.substr(0, dots)));
      g.last = std::stoul(std::string(text.substr(dots + 2)));
    }
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidConfig, "bad grid range '" + std::string(text) + "'");
  }
  if (g.first > g.last) throw Error(ErrorKind::InvalidConfig, "grid range is reversed");
  return g;
}

inline std::vector<ArchitectureSpec> resolve_grid(const GridSelection& sel, DatasetName dataset,
                                                  Activation activation) {
  std::vector<std::vector<std::size_t>> lists;
  const auto full = default_grid();
  switch (sel.kind) {
    case GridSelection::Kind::full: lists = full; break;
    case GridSelection::Kind::range:
      if (sel.last >= full.size()) {
        throw Error(ErrorKind::InvalidConfig,
                    "grid index " + std::to_string(sel.last) + " out of range (grid has " +
                        std::to_string(full.size()) + " entries)");
      }
      lists.assign(full.begin() + static_cast<std::ptrdiff_t>(sel.first),
                   full.begin() + static_cast<std::ptrdiff_t>(sel.last) + 1);
      break;
    case GridSelection::Kind::explicit_list: lists = sel.lists; break;
  }
  std::vector<ArchitectureSpec> out;
  for (auto& h : lists) {
    ArchitectureSpec a{std::move(h), input_dim(dataset), kNumClasses, activation};
    a.validate();
    out.push_back(std::move(a));
  }
  return out;
}

/// Fully resolved settings for one CLI invocation.
struct RunConfig {
  DatasetName dataset = DatasetName::mnist;
  std::string data_dir;  // empty => $ATRAS_DATA_DIR, then ./data
  TestSource test_source = TestSource::official;
  SplitSpec split;
  TrainConfig train;
  Activation activation = Activation::relu;
  AttackConfig attack;
  AttackSplit attack_split = AttackSplit::test;
  DefenseConfig defense;
  GridSelection grid;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;

  static RunConfig defaults(DatasetName name) {
    RunConfig c;
    c.dataset = name;
    c.train = default_train_config(name);
    c.attack.epsilon = default_epsilon(name);
    return c;
  }

  ExperimentConfig experiment() const {
    ExperimentConfig e{train, attack, defense, attack_split};
    return e;
  }

  ArchitectureSpec architecture(std::vector<std::size_t> hidden) const {
    ArchitectureSpec a{std::move(hidden), input_dim(dataset), kNumClasses, activation};
    a.validate();
    return a;
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

inline Json to_json(const RunConfig& c) {
  Json grid;
  switch (c.grid.kind) {
    case GridSelection::Kind::full: grid = "full"; break;
    case GridSelection::Kind::range:
      grid = std::to_string(c.grid.first) + ".." + std::to_string(c.grid.last);
      break;
    case GridSelection::Kind::explicit_list: grid = c.grid.lists; break;
  }
  Json j;
  j["dataset"] = std::string(to_string(c.dataset));
  j["data_dir"] = c.data_dir;
  j["test_source"] = c.test_source == TestSource::split ? "split" : "official";
  j["split"] = {{"train", c.split.train_count}, {"test", c.split.test_count}, {"seed", c.split.seed}};
  j["train"] = {
      {"epochs", c.train.epochs},
      {"batch_size", c.train.batch_size},
      {"learning_rate", c.train.learning_rate},
      {"optimizer", std::string(to_string(c.train.optimizer.kind))},
      {"momentum", c.train.optimizer.momentum},
      {"beta1", c.train.optimizer.beta1},
      {"beta2", c.train.optimizer.beta2},
      {"adam_epsilon", c.train.optimizer.adam_epsilon},
      {"init", std::string(to_string(c.train.init))},
      {"activation", std::string(to_string(c.activation))},
  };
  j["attack"] = {
      {"epsilon", c.attack.epsilon},
      {"target", c.attack.target_label ? Json(int{*c.attack.target_label}) : Json(nullptr)},
      {"clip_lo", c.attack.clip_lo},
      {"clip_hi", c.attack.clip_hi},
      {"split", c.attack_split == AttackSplit::test ? "test" : "train"},
  };
  j["defense"] = {{"mode", std::string(to_string(c.defense.mode))},
                  {"start", c.defense.start == DefenseStart::retrain ? "retrain" : "finetune"}};
  j["grid"] = grid;
  j["seed"] = c.seed;
  j["parallelism"] = c.parallelism;
  return j;
}

namespace detail {

inline void reject_unknown(const Json& obj, std::string_view where,
                           std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) {
    throw Error(ErrorKind::InvalidConfig, std::string(where) + " must be an object");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) {
      throw Error(ErrorKind::InvalidConfig,
                  "unknown config key '" + std::string(where) + it.key() + "'");
    }
  }
}

template <typename T>
void take(const Json& obj, const char* key, T& dst) {
  if (auto it = obj.find(key); it != obj.end()) {
    try {
      dst = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, std::string("config key '") + key + "': " + e.what());
    }
  }
}

}  // namespace detail

/// Dataset named by a config document, if any; needed before defaults apply.
inline std::optional<DatasetName> dataset_in(const Json& j) {
  if (j.is_object() && j.contains("dataset")) {
    return parse_dataset_name(j["dataset"].get<std::string>());
  }
  return std::nullopt;
}

/// Overlays a config document onto `c`. Unknown keys are rejected.
inline void apply_json(RunConfig& c, const Json& j) {
  using detail::take;
  detail::reject_unknown(j, "", {"dataset", "data_dir", "test_source", "split", "train", "attack",
                                 "defense", "grid", "seed", "parallelism"});
  if (j.contains("dataset")) c.dataset = parse_dataset_name(j["dataset"].get<std::string>());
  take(j, "data_dir", c.data_dir);
  if (j.contains("test_source")) {
    const auto s = j["test_source"].get<std::string>();
    if (s != "split" && s != "official") {
      throw Error(ErrorKind::InvalidConfig, "test_source must be 'split' or 'official'");
    }
    c.test_source = s == "split" ? TestSource::split : TestSource::official;
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    detail::reject_unknown(s, "split.", {"train", "test", "seed"});
    take(s, "train", c.split.train_count);
    take(s, "test", c.split.test_count);
    take(s, "seed", c.split.seed);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    detail::reject_unknown(t, "train.", {"epochs", "batch_size", "learning_rate", "optimizer",
                                         "momentum", "beta1", "beta2", "adam_epsilon", "init",
                                         "activation"});
    take(t, "epochs", c.train.epochs);
    take(t, "batch_size", c.train.batch_size);
    take(t, "learning_rate", c.train.learning_rate);
    if (t.contains("optimizer")) c.train.optimizer.kind = parse_optimizer(t["optimizer"].get<std::string>());
    take(t, "momentum", c.train.optimizer.momentum);
    take(t, "beta1", c.train.optimizer.beta1);
    take(t, "beta2", c.train.optimizer.beta2);
    take(t, "adam_epsilon", c.train.optimizer.adam_epsilon);
    if (t.contains("init")) c.train.init = parse_init_scheme(t["init"].get<std::string>());
    if (t.contains("activation")) c.activation = parse_activation(t["activation"].get<std::string>());
  }
  if (j.contains("attack")) {
    const auto& a = j["attack"];
    detail::reject_unknown(a, "attack.", {"epsilon", "target", "clip_lo", "clip_hi", "split"});
    take(a, "epsilon", c.attack.epsilon);
    if (a.contains("target")) {
      if (a["target"].is_null()) {
        c.attack.target_label.reset();
      } else {
        c.attack.target_label = static_cast<std::uint8_t>(a["target"].get<int>());
      }
    }
    take(a, "clip_lo", c.attack.clip_lo);
    take(a, "clip_hi", c.attack.clip_hi);
    if (a.contains("split")) {
      const auto s = a["split"].get<std::string>();
      if (s != "test" && s != "train") throw Error(ErrorKind::InvalidConfig, "attack.split must be test or train");
      c.attack_split = s == "test" ? AttackSplit::test : AttackSplit::train;
    }
  }
  if (j.contains("defense")) {
    const auto& d = j["defense"];
    detail::reject_unknown(d, "defense.", {"mode", "start"});
    if (d.contains("mode")) c.defense.mode = parse_adv_mode(d["mode"].get<std::string>());
    if (d.contains("start")) {
      const auto s = d["start"].get<std::string>();
      if (s != "retrain" && s != "finetune") throw Error(ErrorKind::InvalidConfig, "defense.start must be retrain or finetune");
      c.defense.start = s == "retrain" ? DefenseStart::retrain : DefenseStart::finetune;
    }
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (g.is_string()) {
      const auto s = g.get<std::string>();
      c.grid = s == "full" ? GridSelection{} : parse_grid_range(s);
    } else if (g.is_array()) {
      c.grid = GridSelection{GridSelection::Kind::explicit_list, 0, 0,
                             g.get<std::vector<std::vector<std::size_t>>>()};
    } else {
      throw Error(ErrorKind::InvalidConfig, "grid must be \"full\", \"a..b\" or a list of lists");
    }
  }
  take(j, "seed", c.seed);
  take(j, "parallelism", c.parallelism);
  c.train.validate();
  c.attack.validate();
}

inline std::uint64_t config_hash(const RunConfig& c) { return fnv1a(to_json(c).dump()); }

/// Train/test rows per the config.
inline Split load_split(const RunConfig& c) {
  const auto root = resolve_data_root(c.data_dir.empty() ? std::nullopt
                                                         : std::optional<std::string>(c.data_dir));
  const Dataset train_source = load_partition(c.dataset, root, Partition::train);
  if (c.test_source == TestSource::split) return subset_split(train_source, c.split);
  return split_across_partitions(train_source, load_partition(c.dataset, root, Partition::test),
                                 c.split);
}

}  // namespace atras
