#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "chatgnn/autodiff.hpp"
#include "chatgnn/data_io.hpp"
#include "chatgnn/trainer.hpp"
#include "oracles.hpp"

using namespace chatgnn;

namespace {

// 20 nodes, two classes, mostly same-class edges and class-correlated features.
Dataset tiny_two_class(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.name = "tiny";
  spec.num_nodes = 20;
  spec.num_classes = 2;
  spec.num_features = 8;
  spec.homophily = 0.8;
  spec.average_degree = 3.0;
  spec.words_per_node = 4;
  spec.num_splits = 2;
  spec.seed = seed;
  return make_synthetic_dataset(spec);
}

ModelConfig tiny_model(const Dataset& d) {
  ModelConfig cfg;
  cfg.in_features = d.features.cols();
  cfg.classes = d.num_classes;
  cfg.hidden = 16;
  cfg.layers = 2;
  cfg.seed = 1;
  return cfg;
}

std::vector<NodeId> all_nodes(std::size_t n) {
  std::vector<NodeId> v(n);
  for (NodeId i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  Tensor w = Tensor::from_rows({{1.0, -2.0, 0.5}});
  const std::vector<double> g{0.3, -4.0, 1e-3};
  for (std::size_t i = 0; i < 3; ++i) w.grad()[i] = g[i];
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.0;
  std::vector<Tensor> params{w};
  AdamState state = AdamState::for_parameters(params);
  adam_step(params, state, cfg);
  EXPECT_EQ(state.step, 1u);
  EXPECT_NEAR(w(0, 0), 1.0 - 0.01 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(w(0, 1), -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(w(0, 2), 0.5 - 0.01, 1e-7);
}

TEST(Adam, ZeroGradientWithoutDecayLeavesParameters) {
  Tensor w = Tensor::from_rows({{1.0, -2.0}});
  w.grad();
  std::vector<Tensor> params{w};
  AdamState state = AdamState::for_parameters(params);
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  for (int i = 0; i < 5; ++i) adam_step(params, state, cfg);
  EXPECT_EQ(w(0, 0), 1.0);
  EXPECT_EQ(w(0, 1), -2.0);
}

TEST(Adam, WeightDecayPullsTowardZero) {
  Tensor w = Tensor::from_rows({{1.0, -2.0}});
  w.grad();
  std::vector<Tensor> params{w};
  AdamState state = AdamState::for_parameters(params);
  TrainConfig cfg;
  cfg.weight_decay = 0.1;
  adam_step(params, state, cfg);
  EXPECT_LT(w(0, 0), 1.0);
  EXPECT_GT(w(0, 0), 0.0);
  EXPECT_GT(w(0, 1), -2.0);
  EXPECT_LT(w(0, 1), 0.0);
}

TEST(Adam, SmallLearningRateGivesProportionalChange) {
  Rng rng(3);
  for (double lr : {1e-6, 1e-8}) {
    Tensor w = oracle::random_tensor(3, 3, rng);
    const Tensor before = w.clone();
    for (double& g : w.grad()) g = rng.uniform(-1, 1);
    std::vector<Tensor> params{w};
    AdamState state = AdamState::for_parameters(params);
    TrainConfig cfg;
    cfg.lr = lr;
    cfg.weight_decay = 0.0;
    adam_step(params, state, cfg);
    for (std::size_t i = 0; i < w.size(); ++i)
      EXPECT_LE(std::abs(w.data()[i] - before.data()[i]), 1.0001 * lr);
  }
}

TEST(Metrics, AucAgainstPairCounting) {
  const std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  const auto mask = all_nodes(4);
  EXPECT_DOUBLE_EQ(roc_auc(scores, labels, mask), 0.75);
  EXPECT_DOUBLE_EQ(oracle::brute_force_auc(scores, labels), 0.75);

  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng.below(30);
    std::vector<double> s(n);
    std::vector<std::size_t> l(n);
    // Coarse scores force ties.
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(5));
      l[i] = i < 2 ? i : rng.below(2);
    }
    EXPECT_NEAR(roc_auc(s, l, all_nodes(n)), oracle::brute_force_auc(s, l), 1e-12);
  }
}

TEST(Metrics, AucEdgeCases) {
  const std::vector<std::size_t> labels{0, 1, 0, 1};
  const auto mask = all_nodes(4);
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.9, 0.2, 0.8}, labels, mask), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, labels, mask), 0.5);
  const std::vector<NodeId> negatives{0, 2};
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.9, 0.2, 0.8}, labels, negatives),
               std::invalid_argument);
  EXPECT_THROW(compute_metric(Tensor(4, 3), labels, mask, Metric::roc_auc), std::invalid_argument);
}

TEST(Metrics, AccuracyBreaksTiesTowardLowestClass) {
  const Tensor logits = Tensor::from_rows({{1, 1}, {0, 2}, {3, 0}});
  const std::vector<std::size_t> labels{0, 1, 1};
  EXPECT_DOUBLE_EQ(accuracy(logits, labels, all_nodes(3)), 2.0 / 3.0);
}

TEST(Train, OverfitsTinyGraph) {
  const Dataset d = tiny_two_class(3);
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0.0;
  cfg.max_epochs = 500;
  cfg.patience = 500;
  cfg.warmup = 0;
  const auto nodes = all_nodes(d.num_nodes());
  Dataset all = d;
  all.splits = {Split{nodes, {nodes.front()}, {nodes.back()}}};
  // train() accepts overlapping parts; every node is a training node here.
  const TrainResult r = train(init_model(tiny_model(d)), all, 0, cfg);
  double best_train = 0.0;
  for (const auto& m : r.history) best_train = std::max(best_train, m.train_accuracy);
  EXPECT_EQ(best_train, 1.0);
}

TEST(Train, DeterministicHistory) {
  const Dataset d = tiny_two_class(4);
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.warmup = 10;
  cfg.patience = 20;
  const TrainResult a = train(init_model(tiny_model(d)), d, 1, cfg);
  const TrainResult b = train(init_model(tiny_model(d)), d, 1, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_accuracy, b.history[i].val_accuracy);
    EXPECT_EQ(a.history[i].test_metric, b.history[i].test_metric);
  }
}

TEST(Train, ZeroPatienceStopsAtFirstStallAfterWarmup) {
  const Dataset d = tiny_two_class(5);
  TrainConfig cfg;
  cfg.max_epochs = 400;
  cfg.warmup = 5;
  cfg.patience = 0;
  const TrainResult r = train(init_model(tiny_model(d)), d, 0, cfg);
  ASSERT_FALSE(r.history.empty());
  const std::size_t last = r.history.back().epoch;
  EXPECT_GE(r.history.size(), cfg.warmup + 1);
  EXPECT_LT(r.history.size(), cfg.max_epochs);
  // No epoch after warmup before the last one stalled.
  double best = -1.0;
  for (const auto& m : r.history) {
    const bool improved = m.val_accuracy > best;
    if (improved) best = m.val_accuracy;
    if (m.epoch > cfg.warmup && m.epoch < last) EXPECT_TRUE(improved) << "epoch " << m.epoch;
  }
}

TEST(Train, BestModelReproducesBestValidation) {
  const Dataset d = tiny_two_class(6);
  TrainConfig cfg;
  cfg.max_epochs = 80;
  cfg.warmup = 20;
  cfg.patience = 30;
  const TrainResult r = train(init_model(tiny_model(d)), d, 0, cfg);
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& m : r.history)
    if (m.val_accuracy > best) {
      best = m.val_accuracy;
      best_epoch = m.epoch;
    }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(r.best_val, best);
  NoGradGuard guard;
  EXPECT_EQ(evaluate(r.best_model, d, d.splits[0].val, Metric::accuracy), best);
  EXPECT_EQ(evaluate(r.best_model, d, d.splits[0].test, Metric::accuracy), r.best_test);
}

TEST(Train, EmptyTrainMaskOrBadSplitThrows) {
  Dataset d = tiny_two_class(7);
  TrainConfig cfg;
  cfg.max_epochs = 5;
  EXPECT_THROW(train(init_model(tiny_model(d)), d, 9, cfg), std::invalid_argument);
  d.splits[0].train.clear();
  EXPECT_THROW(train(init_model(tiny_model(d)), d, 0, cfg), std::invalid_argument);
}

TEST(Train, InvalidConfigRejected) {
  TrainConfig cfg;
  cfg.lr = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.patience = cfg.max_epochs + 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
