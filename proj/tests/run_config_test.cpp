#include <gtest/gtest.h>

#include "atras/run_config.hpp"

using namespace atras;

namespace {

ErrorKind apply_error(const char* text) {
  auto c = RunConfig::defaults(DatasetName::mnist);
  try {
    apply_json(c, Json::parse(text));
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "accepted " << text;
  return ErrorKind::EmptyInput;
}

}  // namespace

TEST(RunConfig, DefaultsFollowDataset) {
  const auto m = RunConfig::defaults(DatasetName::mnist);
  const auto c = RunConfig::defaults(DatasetName::cifar10);
  EXPECT_EQ(m.attack.epsilon, 0.1);
  EXPECT_EQ(c.attack.epsilon, 8.0 / 255.0);
  EXPECT_EQ(m.split.train_count, 5000u);
  EXPECT_EQ(m.split.test_count, 5000u);
  EXPECT_EQ(m.test_source, TestSource::official);
  EXPECT_EQ(m.defense.mode, AdvTrainMode::per_batch);
  EXPECT_EQ(m.train.optimizer.kind, OptimizerKind::adam);
  EXPECT_EQ(c.train.epochs, 40u);
  EXPECT_EQ(m.train, default_train_config(DatasetName::mnist));
  EXPECT_EQ(c.train, default_train_config(DatasetName::cifar10));
  EXPECT_EQ(m.architecture({64, 512}).input_dim, 784u);
  EXPECT_EQ(c.architecture({64, 512}).input_dim, 3072u);
}

TEST(RunConfig, DumpRoundTrip) {
  auto c = RunConfig::defaults(DatasetName::cifar10);
  c.train.epochs = 3;
  c.train.optimizer.kind = OptimizerKind::sgd_momentum;
  c.attack.target_label = 4;
  c.attack_split = AttackSplit::train;
  c.defense.start = DefenseStart::finetune;
  c.grid = parse_grid_range("3..5");
  c.seed = 77;
  c.test_source = TestSource::split;
  const auto text = to_json(c).dump(2);
  const auto j = Json::parse(text);
  auto back = RunConfig::defaults(*dataset_in(j));
  apply_json(back, j);
  EXPECT_EQ(back, c);
  EXPECT_EQ(config_hash(back), config_hash(c));

  c.grid = GridSelection{GridSelection::Kind::explicit_list, 0, 0, {{4, 4}, {9}}};
  back = RunConfig::defaults(DatasetName::cifar10);
  apply_json(back, Json::parse(to_json(c).dump()));
  EXPECT_EQ(back, c);
}

TEST(RunConfig, UnknownKeysRejected) {
  EXPECT_EQ(apply_error(R"({"epochs": 3})"), ErrorKind::InvalidConfig);
  EXPECT_EQ(apply_error(R"({"train": {"epoch": 3}})"), ErrorKind::InvalidConfig);
  EXPECT_EQ(apply_error(R"({"attack": {"eps": 0.1}})"), ErrorKind::InvalidConfig);
}

TEST(RunConfig, InvalidValuesRejected) {
  EXPECT_EQ(apply_error(R"({"train": {"epochs": 0}})"), ErrorKind::InvalidConfig);
  EXPECT_EQ(apply_error(R"({"train": {"epochs": "many"}})"), ErrorKind::InvalidConfig);
  EXPECT_EQ(apply_error(R"({"attack": {"epsilon": -1}})"), ErrorKind::InvalidConfig);
  EXPECT_EQ(apply_error(R"({"defense": {"mode": "pgd"}})"), ErrorKind::InvalidConfig);
  EXPECT_EQ(apply_error(R"({"grid": 3})"), ErrorKind::InvalidConfig);
  EXPECT_EQ(apply_error(R"({"test_source": "other"})"), ErrorKind::InvalidConfig);
}

TEST(RunConfig, ConfigHashTracksContent) {
  auto a = RunConfig::defaults(DatasetName::mnist);
  auto b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(GridSelection, RangesAreInclusive) {
  const auto g = parse_grid_range("0..2");
  const auto archs = resolve_grid(g, DatasetName::mnist, Activation::relu);
  ASSERT_EQ(archs.size(), 3u);
  EXPECT_EQ(archs[0].hidden, default_grid()[0]);
  EXPECT_EQ(archs[2].hidden, default_grid()[2]);
  EXPECT_EQ(resolve_grid(parse_grid_range("39"), DatasetName::cifar10, Activation::relu)[0].input_dim,
            3072u);
  EXPECT_EQ(resolve_grid(GridSelection{}, DatasetName::mnist, Activation::relu).size(), 40u);
}

TEST(GridSelection, BadRangesRejected) {
  EXPECT_THROW(parse_grid_range("2..1"), Error);
  EXPECT_THROW(parse_grid_range("a..b"), Error);
  EXPECT_THROW(resolve_grid(parse_grid_range("38..40"), DatasetName::mnist, Activation::relu), Error);
  EXPECT_THROW(resolve_grid(GridSelection{GridSelection::Kind::explicit_list, 0, 0, {{0}}},
                            DatasetName::mnist, Activation::relu),
               Error);
}
