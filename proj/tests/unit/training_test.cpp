#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "mgmn/training.hpp"

namespace mgmn {
namespace {

namespace fs = std::filesystem;

ModelConfig small_model(Task task, int input_dim) {
  ModelConfig c;
  c.input_dim = input_dim;
  c.gcn_dim = 8;
  c.perspectives = 8;
  c.gcn_layers = 2;
  c.task = task;
  c.ngmn_aggregator = Aggregator::bilstm;
  c.sgnn_aggregator = Aggregator::fcmax;
  return c;
}

Dataset small_ged(std::uint64_t seed = 1) {
  GedDatasetOptions o;
  o.graphs = 15;
  o.min_nodes = 4;
  o.max_nodes = 6;
  o.seed = seed;
  return gen_ged_dataset(o);
}

Dataset small_clone() {
  CloneDatasetOptions o;
  o.groups = 20;
  o.variants = 2;
  o.min_nodes = 5;
  o.max_nodes = 8;
  return gen_clone_dataset(o);
}

TrainConfig regression_config() {
  TrainConfig t;
  t.task = Task::regression;
  t.iterations = 6;
  t.batch_size = 4;
  t.val_every = 2;
  t.seed = 5;
  return t;
}

Graph tiny(const std::string& id, const std::string& group) {
  Graph g;
  g.id = id;
  g.group = group;
  g.features = Eigen::MatrixXd::Ones(2, 1);
  g.edges = {{0, 1, 1.0}};
  return g;
}

TEST(ClassificationPairs, TwoGroupsOfTwo) {
  Dataset ds;
  ds.graphs = {tiny("a1", "a"), tiny("a2", "a"), tiny("b1", "b"), tiny("b2", "b")};
  ds.reindex();
  const auto groups = function_groups(ds, {"a1", "a2", "b1", "b2"});
  ASSERT_EQ(groups.size(), 2u);
  Rng rng(3);
  const auto pairs = sample_classification_pairs(groups, rng);
  ASSERT_EQ(pairs.size(), 8u);
  int pos = 0;
  for (const auto& p : pairs) {
    const bool same = ds.graph(p.g1).group == ds.graph(p.g2).group;
    EXPECT_NE(p.g1, p.g2);
    if (p.target == 1.0) {
      EXPECT_TRUE(same);
      ++pos;
    } else {
      EXPECT_EQ(p.target, -1.0);
      EXPECT_FALSE(same);
    }
  }
  EXPECT_EQ(pos, 4);
}

TEST(ClassificationPairs, SameSeedSamePairs) {
  const Dataset ds = small_clone();
  const auto groups = function_groups(ds, ds.split.train);
  Rng a(9);
  Rng b(9);
  const auto pa = sample_classification_pairs(groups, a);
  const auto pb = sample_classification_pairs(groups, b);
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].g1, pb[i].g1);
    EXPECT_EQ(pa[i].g2, pb[i].g2);
  }
}

TEST(Trainer, ZeroLearningRateLeavesParametersUnchanged) {
  const Dataset ds = small_ged();
  Model model(small_model(Task::regression, ds.feature_dim()), 1);
  std::vector<Matrix> before;
  for (const auto& [name, t] : model.params().entries()) before.push_back(t.value());
  TrainConfig cfg = regression_config();
  cfg.learning_rate = 0.0;
  Trainer trainer(model, ds, cfg);
  trainer.run();
  std::size_t i = 0;
  for (const auto& [name, t] : model.params().entries()) EXPECT_EQ(t.value(), before[i++]) << name;
}

TEST(Trainer, NonZeroLearningRateMovesParameters) {
  const Dataset ds = small_ged();
  Model model(small_model(Task::regression, ds.feature_dim()), 1);
  const Matrix before = model.params().at("gcn.0.weight").value();
  Trainer trainer(model, ds, regression_config());
  trainer.run();
  EXPECT_NE(model.params().at("gcn.0.weight").value(), before);
}

TEST(Trainer, ValidationPairsNeverTouchTestGraphs) {
  const Dataset ds = small_ged();
  Model model(small_model(Task::regression, ds.feature_dim()), 1);
  Trainer trainer(model, ds, regression_config());
  const std::set<std::string> test(ds.split.test.begin(), ds.split.test.end());
  const std::set<std::string> val(ds.split.val.begin(), ds.split.val.end());
  ASSERT_FALSE(trainer.validation_pairs().empty());
  for (const auto& p : trainer.validation_pairs()) {
    EXPECT_FALSE(test.count(p.g1) || test.count(p.g2));
    EXPECT_TRUE(val.count(p.g1));
  }
}

TEST(Trainer, TestGraphInBatchIsAContractError) {
  const Dataset ds = small_ged();
  Model model(small_model(Task::regression, ds.feature_dim()), 1);
  Trainer trainer(model, ds, regression_config());
  const std::vector<LabeledPair> batch = {{ds.split.train[0], ds.split.test[0], 0.5}};
  EXPECT_THROW(trainer.train_batch(batch), ContractError);
}

TEST(Trainer, NonFiniteLossAbortsWithContext) {
  const Dataset ds = small_ged();
  Model model(small_model(Task::regression, ds.feature_dim()), 1);
  model.params().at("head.0.weight").mutable_value()(0, 0) = std::numeric_limits<double>::quiet_NaN();
  Trainer trainer(model, ds, regression_config());
  try {
    trainer.run();
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos) << e.what();
  }
}

TEST(Trainer, BestValidationLossIsMonotone) {
  const Dataset ds = small_ged();
  Model model(small_model(Task::regression, ds.feature_dim()), 1);
  TrainConfig cfg = regression_config();
  cfg.iterations = 20;
  cfg.val_every = 2;
  Trainer trainer(model, ds, cfg);
  const TrainReport report = trainer.run();
  ASSERT_EQ(report.log.size(), 10u);
  for (std::size_t i = 1; i < report.log.size(); ++i) {
    EXPECT_LE(report.log[i].best_val_loss, report.log[i - 1].best_val_loss);
  }
  EXPECT_EQ(report.best_val_loss, report.log.back().best_val_loss);
}

TEST(Trainer, ClassificationRunsOneEpochPerStep) {
  const Dataset ds = small_clone();
  Model model(small_model(Task::classification, ds.feature_dim()), 2);
  TrainConfig cfg;
  cfg.task = Task::classification;
  cfg.epochs = 2;
  cfg.seed = 4;
  Trainer trainer(model, ds, cfg);
  const TrainReport report = trainer.run();
  EXPECT_EQ(report.steps, 2);
  ASSERT_EQ(report.log.size(), 2u);
  EXPECT_GE(report.log.back().metric, 0.0);
  EXPECT_LE(report.log.back().metric, 1.0);
}

TEST(Trainer, WithoutValidationPairsBestCheckpointFollowsLatestStep) {
  CloneDatasetOptions o;
  o.groups = 10;
  o.variants = 2;
  o.max_nodes = 8;
  const Dataset ds = gen_clone_dataset(o);
  const fs::path dir = fs::temp_directory_path() / "mgmn_training_test_noval";
  fs::remove_all(dir);
  Model model(small_model(Task::classification, ds.feature_dim()), 2);
  TrainConfig cfg;
  cfg.task = Task::classification;
  cfg.epochs = 1;
  cfg.checkpoint_dir = dir;
  Trainer trainer(model, ds, cfg);
  ASSERT_TRUE(trainer.validation_pairs().empty());
  trainer.run();
  EXPECT_TRUE(fs::exists(dir / "best.ckpt"));
}

TEST(Trainer, TaskMismatchIsRejected) {
  const Dataset ds = small_ged();
  Model model(small_model(Task::classification, ds.feature_dim()), 1);
  EXPECT_THROW(Trainer(model, ds, regression_config()), ConfigError);
}

std::vector<double> losses(const TrainReport& r) {
  std::vector<double> out;
  for (const auto& rec : r.log) {
    out.push_back(rec.train_loss);
    out.push_back(rec.val_loss);
  }
  return out;
}

TEST(Trainer, SameSeedGivesIdenticalLogs) {
  const Dataset ds = small_ged();
  auto once = [&] {
    Model model(small_model(Task::regression, ds.feature_dim()), 1);
    Trainer trainer(model, ds, regression_config());
    return losses(trainer.run());
  };
  EXPECT_EQ(once(), once());
}

TEST(Trainer, ResumedRunMatchesUninterruptedRun) {
  const Dataset ds = small_ged();
  const fs::path state = fs::temp_directory_path() / "mgmn_training_test_state.ckpt";
  TrainConfig cfg = regression_config();
  cfg.iterations = 8;

  Model full_model(small_model(Task::regression, ds.feature_dim()), 1);
  Trainer full(full_model, ds, cfg);
  const TrainReport full_report = full.run();

  Model first_model(small_model(Task::regression, ds.feature_dim()), 1);
  Trainer first(first_model, ds, cfg);
  first.run(3);
  first.save_state(state);

  Model second_model(small_model(Task::regression, ds.feature_dim()), 77);
  Trainer second(second_model, ds, cfg);
  second.load_state(state);
  EXPECT_EQ(second.step(), 3);
  const TrainReport resumed = second.run();

  EXPECT_EQ(losses(resumed), losses(full_report));
  for (const auto& [name, t] : full_model.params().entries()) {
    EXPECT_EQ(second_model.params().at(name).value(), t.value()) << name;
  }
}

TEST(TrainConfig, JsonRoundTrip) {
  TrainConfig c = regression_config();
  c.learning_rate = 0.01;
  c.clip_norm = 2.5;
  const TrainConfig back = train_config_from_json(to_json(c));
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(back.iterations, c.iterations);
  EXPECT_EQ(back.batch_size, c.batch_size);
  EXPECT_EQ(back.clip_norm, c.clip_norm);
  EXPECT_EQ(back.seed, c.seed);
}

TEST(TrainConfig, DefaultLearningRatesPerTask) {
  TrainConfig c;
  c.task = Task::classification;
  EXPECT_EQ(c.resolved_learning_rate(), 0.5e-3);
  c.task = Task::regression;
  EXPECT_EQ(c.resolved_learning_rate(), 5e-3);
}

TEST(TrainConfig, InvalidValuesAreRejected) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace mgmn
