#include "chatgnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "chatgnn/autodiff.hpp"
#include "chatgnn/errors.hpp"

namespace chatgnn {

std::string_view to_string(Metric metric) {
  return metric == Metric::accuracy ? "accuracy" : "roc_auc";
}

Metric metric_from_string(std::string_view name) {
  if (name == "accuracy" || name == "acc") return Metric::accuracy;
  if (name == "roc_auc" || name == "auc") return Metric::roc_auc;
  throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be > 0");
  if (weight_decay < 0.0) throw std::invalid_argument("train config: weight_decay must be >= 0");
  if (max_epochs == 0) throw std::invalid_argument("train config: max_epochs must be >= 1");
  if (patience > max_epochs) {
    throw std::invalid_argument("train config: patience exceeds max_epochs");
  }
}

AdamState AdamState::for_parameters(std::span<const Tensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.size(), 0.0);
    s.second_moment.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<Tensor> params, AdamState& state, const TrainConfig& cfg) {
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state tracks " +
                         std::to_string(state.first_moment.size()) + " tensors, got " +
                         std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].data();
    auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double g = grad[j] + cfg.weight_decay * theta[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      theta[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

double accuracy(const Tensor& logits, std::span<const std::size_t> labels,
                std::span<const NodeId> mask) {
  if (mask.empty()) return 0.0;
  std::size_t correct = 0;
  for (NodeId v : mask) {
    auto row = logits.row(v);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[v]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

double roc_auc(std::span<const double> scores, std::span<const std::size_t> labels,
               std::span<const NodeId> mask) {
  std::vector<std::pair<double, std::size_t>> items;
  items.reserve(mask.size());
  std::size_t positives = 0;
  for (NodeId v : mask) {
    if (labels[v] > 1) throw std::invalid_argument("roc_auc: labels must be binary");
    items.emplace_back(scores[v], labels[v]);
    positives += labels[v];
  }
  const std::size_t negatives = items.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("roc_auc: mask must contain both classes");
  }
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  // Sum of (average) ranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].first == items[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (items[k].second == 1) rank_sum += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(positives), q = static_cast<double>(negatives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double compute_metric(const Tensor& logits, std::span<const std::size_t> labels,
                      std::span<const NodeId> mask, Metric metric) {
  if (metric == Metric::accuracy) return accuracy(logits, labels, mask);
  if (logits.cols() != 2) {
    throw std::invalid_argument("roc_auc requires exactly two classes, got " +
                                std::to_string(logits.cols()));
  }
  std::vector<double> scores(logits.rows());
  for (std::size_t v = 0; v < logits.rows(); ++v) scores[v] = logits(v, 1);
  return roc_auc(scores, labels, mask);
}

double evaluate(const ChatGnnModel& model, const Dataset& data, std::span<const NodeId> mask,
                Metric metric) {
  NoGradGuard no_grad;
  const Tensor logits = model_forward(model, data.features, PropagationGraph::from(data.graph));
  return compute_metric(logits, data.labels, mask, metric);
}

TrainResult train(const ChatGnnModel& initial, const Dataset& data, std::size_t split_index,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (split_index >= data.splits.size()) {
    throw std::invalid_argument("train: split " + std::to_string(split_index) + " of " +
                                std::to_string(data.splits.size()));
  }
  const Split& split = data.splits[split_index];
  if (split.train.empty()) throw std::invalid_argument("train: empty train mask");

  ChatGnnModel model = initial.clone();
  std::vector<Tensor> params = model.parameters();
  for (auto& p : params) p.set_requires_grad(true);
  AdamState adam = AdamState::for_parameters(params);
  const PropagationGraph graph = PropagationGraph::from(data.graph);
  auto& tape = active_tape();

  TrainResult result;
  result.best_val = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    tape.clear();
    for (auto& p : params) p.zero_grad();
    const Tensor logits = model_forward(model, data.features, graph);
    const Tensor loss = softmax_cross_entropy(logits, data.labels, split.train);

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss.item();
    m.train_accuracy = accuracy(logits, data.labels, split.train);
    m.val_accuracy = split.val.empty()
                         ? m.train_accuracy
                         : compute_metric(logits, data.labels, split.val, cfg.stop_metric);
    m.test_metric =
        split.test.empty() ? 0.0 : compute_metric(logits, data.labels, split.test, cfg.test_metric);
    result.history.push_back(m);

    bool stop = false;
    if (m.val_accuracy > result.best_val) {
      result.best_val = m.val_accuracy;
      result.best_epoch = epoch;
      result.best_test = m.test_metric;
      result.best_model = model.clone();
    } else if (epoch > cfg.warmup && epoch - result.best_epoch >= cfg.patience) {
      stop = true;
    }
    if (stop) break;

    tape.backward(loss);
    adam_step(params, adam, cfg);
  }
  tape.clear();
  return result;
}

}  // namespace chatgnn
