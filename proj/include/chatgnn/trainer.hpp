#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "chatgnn/data_io.hpp"
#include "chatgnn/model.hpp"

namespace chatgnn {

enum class Metric { accuracy, roc_auc };

std::string_view to_string(Metric metric);
Metric metric_from_string(std::string_view name);

struct TrainConfig {
  double lr = 3e-3;
  double weight_decay = 1e-4;
  std::size_t max_epochs = 5000;
  std::size_t patience = 500;
  std::size_t warmup = 200;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Metric reported on the test part; validation always early-stops on
  /// `stop_metric`.
  Metric test_metric = Metric::accuracy;
  Metric stop_metric = Metric::accuracy;

  void validate() const;
};

/// Adam moments, one buffer per parameter tensor.
struct AdamState {
  std::vector<std::vector<Real>> first_moment;
  std::vector<std::vector<Real>> second_moment;
  std::size_t step = 0;

  static AdamState for_parameters(std::span<const Tensor> params);
};

/// One Adam update from the parameters' current gradients. Weight decay is
/// the coupled L2 form: g <- g + wd * theta before the moment updates.
void adam_step(std::span<Tensor> params, AdamState& state, const TrainConfig& cfg);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;  // value of TrainConfig::stop_metric
  double test_metric = 0.0;
};

struct TrainResult {
  ChatGnnModel best_model;
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  /// Test metric of the best-validation parameters.
  double best_test = 0.0;
};

/// Full-batch training on one split.
///
/// Metrics recorded for epoch t describe the parameters *before* that
/// epoch's update, so the returned best model is exactly the one that
/// produced the best validation score (earliest epoch on ties). After
/// `warmup` epochs the run stops once `patience` consecutive epochs bring
/// no validation improvement.
TrainResult train(const ChatGnnModel& initial, const Dataset& data, std::size_t split_index,
                  const TrainConfig& cfg);

/// Fraction of `mask` rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Tensor& logits, std::span<const std::size_t> labels,
                std::span<const NodeId> mask);

/// Mann-Whitney AUC with average ranks for tied scores.
/// Throws std::invalid_argument unless both classes occur in `mask`.
double roc_auc(std::span<const double> scores, std::span<const std::size_t> labels,
               std::span<const NodeId> mask);

/// Metric of `logits` on `mask`. roc_auc needs exactly two classes and uses
/// the class-1 logit as score.
double compute_metric(const Tensor& logits, std::span<const std::size_t> labels,
                      std::span<const NodeId> mask, Metric metric);

double evaluate(const ChatGnnModel& model, const Dataset& data, std::span<const NodeId> mask,
                Metric metric);

}  // namespace chatgnn
