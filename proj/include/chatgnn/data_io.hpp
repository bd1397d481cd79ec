#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "chatgnn/graph.hpp"
#include "chatgnn/tensor.hpp"

namespace chatgnn {

struct Split {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;

  friend bool operator==(const Split&, const Split&) = default;
};

/// Node-classification dataset: one graph, dense features, labels and
/// train/validation/test splits.
struct Dataset {
  std::string name;
  Graph graph;
  Tensor features;  // N x F
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  std::vector<Split> splits;

  std::size_t num_nodes() const noexcept { return graph.num_nodes(); }
  /// Throws ValidationError naming the offending field.
  void validate() const;
};

bool datasets_equal(const Dataset& a, const Dataset& b);

inline constexpr std::string_view kDatasetFormat = "chatgnn-dataset";
inline constexpr int kDatasetVersion = 1;

/// Parses the JSON dataset document (see docs/formats.md). Throws FormatError
/// with line/column context for malformed text and ValidationError for
/// semantic violations.
Dataset parse_dataset(std::string_view text);
Dataset load_dataset(const std::filesystem::path& path);
std::string dataset_to_string(const Dataset& d);
void save_dataset(const Dataset& d, const std::filesystem::path& path);

/// Divides every row by its L1 norm; all-zero rows are left untouched.
Tensor row_normalize(const Tensor& features);

struct SplitFractions {
  double train = 0.48;
  double val = 0.32;
  double test = 0.20;
};

/// `count` random splits. Part sizes are floor(n * fraction) for train and
/// validation; test takes floor(n * test) (or the remainder when fractions
/// sum to one). Throws std::invalid_argument if any part would be empty.
std::vector<Split> random_splits(std::size_t n, SplitFractions fractions, std::size_t count,
                                 std::uint64_t seed);

// ---- result files --------------------------------------------------------

struct EpochMetrics;

/// Header `epoch,train_loss,train_acc,val_acc,test_metric`, preceded by
/// `# `-prefixed comment lines for each entry in `comments`.
void write_metrics_csv(const std::vector<EpochMetrics>& history,
                       const std::filesystem::path& path,
                       const std::vector<std::string>& comments = {});

/// "mean ± sd" in percent, one decimal, sample standard deviation (0.0 for
/// a single value). Throws std::invalid_argument on empty input.
std::string format_mean_std(const std::vector<double>& fractions);

/// Writes one line per split and a final mean ± sd line.
void write_summary(const std::vector<double>& per_split, const std::filesystem::path& path,
                   const std::string& metric_name,
                   const std::vector<std::string>& comments = {});

// ---- synthetic graphs ----------------------------------------------------

/// Parameters of a labelled random graph with controllable edge homophily and
/// bag-of-words style features.
struct SyntheticSpec {
  std::string name = "synthetic";
  std::size_t num_nodes = 183;
  std::size_t num_classes = 5;
  std::size_t num_features = 300;
  /// Probability that a generated edge joins two nodes of the same class.
  double homophily = 0.1;
  double average_degree = 3.4;
  /// Active words per node and the share drawn from the node's class vocabulary.
  std::size_t words_per_node = 20;
  double feature_signal = 0.35;
  std::size_t num_splits = 10;
  std::uint64_t seed = 0;
};

/// Features are row-normalised counts; splits follow 48/32/20.
Dataset make_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace chatgnn
