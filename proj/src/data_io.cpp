#include "chatgnn/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chatgnn/errors.hpp"
#include "chatgnn/rng.hpp"
#include "chatgnn/trainer.hpp"

namespace chatgnn {
namespace {

using nlohmann::json;

std::string line_context(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void check_part(const std::vector<NodeId>& part, std::size_t n, const std::string& field) {
  std::set<NodeId> seen;
  for (NodeId v : part) {
    if (v >= n) throw ValidationError(field, "node " + std::to_string(v) + " out of range");
    if (!seen.insert(v).second) throw ValidationError(field, "duplicate node " + std::to_string(v));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::ofstream open_for_writing(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

void Dataset::validate() const {
  const std::size_t n = graph.num_nodes();
  if (features.rows() != n) {
    throw ValidationError("features", std::to_string(features.rows()) + " rows for " +
                                          std::to_string(n) + " nodes");
  }
  if (labels.size() != n) {
    throw ValidationError("labels", std::to_string(labels.size()) + " labels for " +
                                        std::to_string(n) + " nodes");
  }
  if (num_classes == 0) throw ValidationError("num_classes", "must be >= 1");
  for (std::size_t v = 0; v < n; ++v) {
    if (labels[v] >= num_classes) {
      throw ValidationError("labels", "label " + std::to_string(labels[v]) + " of node " +
                                          std::to_string(v) + " outside [0, " +
                                          std::to_string(num_classes) + ")");
    }
  }
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const std::string prefix = "splits[" + std::to_string(s) + "].";
    check_part(splits[s].train, n, prefix + "train");
    check_part(splits[s].val, n, prefix + "val");
    check_part(splits[s].test, n, prefix + "test");
    std::vector<int> owner(n, -1);
    const std::array<const std::vector<NodeId>*, 3> parts{&splits[s].train, &splits[s].val,
                                                          &splits[s].test};
    const std::array<const char*, 3> names{"train", "val", "test"};
    for (int p = 0; p < 3; ++p)
      for (NodeId v : *parts[p]) {
        if (owner[v] >= 0) {
          throw ValidationError(prefix + names[p], "node " + std::to_string(v) +
                                                       " also appears in " + names[owner[v]]);
        }
        owner[v] = p;
      }
  }
}

bool datasets_equal(const Dataset& a, const Dataset& b) {
  return a.name == b.name && a.graph == b.graph && a.features.values_equal(b.features) &&
         a.labels == b.labels && a.num_classes == b.num_classes && a.splits == b.splits;
}

Dataset parse_dataset(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError("dataset: malformed document at " + line_context(text, e.byte) + ": " +
                      e.what());
  }

  Dataset d;
  bool normalize = false;
  std::size_t n = 0;
  EdgeList edges;
  bool directed = false;
  try {
    if (doc.at("format").get<std::string>() != kDatasetFormat) {
      throw FormatError("dataset: 'format' is not " + std::string(kDatasetFormat));
    }
    const int version = doc.at("version").get<int>();
    if (version != kDatasetVersion) {
      throw FormatError("dataset: unsupported version " + std::to_string(version));
    }
    d.name = doc.value("name", std::string("unnamed"));
    n = doc.at("num_nodes").get<std::size_t>();
    d.num_classes = doc.at("num_classes").get<std::size_t>();
    directed = doc.value("directed", false);
    normalize = doc.value("normalize_features", false);
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw FormatError("dataset: each edge must be a pair");
      edges.emplace_back(e[0].get<NodeId>(), e[1].get<NodeId>());
    }
    const auto& rows = doc.at("features");
    const std::size_t f = rows.empty() ? 0 : rows[0].size();
    std::vector<Real> values;
    values.reserve(rows.size() * f);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != f) {
        throw FormatError("dataset: feature row " + std::to_string(r) + " has " +
                          std::to_string(rows[r].size()) + " entries, expected " +
                          std::to_string(f));
      }
      for (const auto& x : rows[r]) values.push_back(x.get<Real>());
    }
    d.features = Tensor(rows.size(), f, std::move(values));
    d.labels = doc.at("labels").get<std::vector<std::size_t>>();
    for (const auto& s : doc.at("splits")) {
      d.splits.push_back(Split{s.at("train").get<std::vector<NodeId>>(),
                               s.at("val").get<std::vector<NodeId>>(),
                               s.at("test").get<std::vector<NodeId>>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  }

  try {
    d.graph = build_graph(n, edges, directed);
  } catch (const IndexError& e) {
    throw ValidationError("edges", e.what());
  }
  d.validate();
  if (normalize) d.features = row_normalize(d.features);
  return d;
}

Dataset load_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

std::string dataset_to_string(const Dataset& d) {
  json features = json::array();
  for (std::size_t r = 0; r < d.features.rows(); ++r) {
    auto row = d.features.row(r);
    features.push_back(std::vector<Real>(row.begin(), row.end()));
  }
  json edges = json::array();
  for (const auto& [u, v] : d.graph.arcs()) {
    if (d.graph.directed() || u < v) edges.push_back({u, v});
  }
  json splits = json::array();
  for (const auto& s : d.splits) splits.push_back({{"train", s.train}, {"val", s.val}, {"test", s.test}});
  json doc{{"format", kDatasetFormat},
           {"version", kDatasetVersion},
           {"name", d.name},
           {"num_nodes", d.num_nodes()},
           {"num_classes", d.num_classes},
           {"directed", d.graph.directed()},
           {"normalize_features", false},
           {"edges", std::move(edges)},
           {"features", std::move(features)},
           {"labels", d.labels},
           {"splits", std::move(splits)}};
  return doc.dump();
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  auto out = open_for_writing(path);
  out << dataset_to_string(d) << '\n';
}

Tensor row_normalize(const Tensor& features) {
  Tensor out = features.clone();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    Real l1 = 0.0;
    for (Real x : row) l1 += std::abs(x);
    if (l1 == 0.0) continue;
    for (Real& x : row) x /= l1;
  }
  return out;
}

std::vector<Split> random_splits(std::size_t n, SplitFractions fractions, std::size_t count,
                                 std::uint64_t seed) {
  const double total = fractions.train + fractions.val + fractions.test;
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 || total > 1.0 + 1e-9) {
    throw std::invalid_argument("random_splits: fractions must be non-negative and sum to <= 1");
  }
  auto part = [n](double f) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9));
  };
  const std::size_t n_train = part(fractions.train);
  const std::size_t n_val = part(fractions.val);
  const std::size_t n_test =
      std::abs(total - 1.0) < 1e-9 ? n - n_train - n_val : part(fractions.test);
  if (n_train == 0 || n_val == 0 || n_test == 0) {
    throw std::invalid_argument("random_splits: " + std::to_string(n) +
                                " nodes are too few for non-empty train/val/test parts");
  }
  Rng rng(seed);
  std::vector<Split> out;
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    rng.shuffle(std::span<NodeId>(order));
    Split split;
    split.train.assign(order.begin(), order.begin() + n_train);
    split.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    split.test.assign(order.begin() + n_train + n_val, order.begin() + n_train + n_val + n_test);
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    out.push_back(std::move(split));
  }
  return out;
}

void write_metrics_csv(const std::vector<EpochMetrics>& history,
                       const std::filesystem::path& path,
                       const std::vector<std::string>& comments) {
  if (history.empty()) throw std::invalid_argument("write_metrics_csv: empty history");
  auto out = open_for_writing(path);
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "epoch,train_loss,train_acc,val_acc,test_metric\n";
  out << std::setprecision(10);
  for (const auto& m : history) {
    out << m.epoch << ',' << m.train_loss << ',' << m.train_accuracy << ',' << m.val_accuracy
        << ',' << m.test_metric << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string format_mean_std(const std::vector<double>& fractions) {
  if (fractions.empty()) throw std::invalid_argument("format_mean_std: no values");
  const double n = static_cast<double>(fractions.size());
  const double mean = std::accumulate(fractions.begin(), fractions.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : fractions) ss += (x - mean) * (x - mean);
  const double sd = fractions.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * mean << " ± " << 100.0 * sd;
  return s.str();
}

void write_summary(const std::vector<double>& per_split, const std::filesystem::path& path,
                   const std::string& metric_name, const std::vector<std::string>& comments) {
  const std::string line = format_mean_std(per_split);
  auto out = open_for_writing(path);
  for (const auto& c : comments) out << "# " << c << '\n';
  out << std::setprecision(10);
  for (std::size_t s = 0; s < per_split.size(); ++s)
    out << "split " << s << ' ' << metric_name << ' ' << per_split[s] << '\n';
  out << metric_name << ' ' << line << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.num_nodes < 2 || spec.num_classes < 2 || spec.num_features < spec.num_classes) {
    throw std::invalid_argument("make_synthetic_dataset: need >= 2 nodes, >= 2 classes and at "
                                "least one feature per class");
  }
  Rng rng(spec.seed);
  const std::size_t n = spec.num_nodes, k = spec.num_classes, f = spec.num_features;

  std::vector<std::size_t> labels(n);
  for (std::size_t v = 0; v < n; ++v) labels[v] = v % k;
  rng.shuffle(std::span<std::size_t>(labels));
  std::vector<std::vector<NodeId>> members(k);
  for (NodeId v = 0; v < n; ++v) members[labels[v]].push_back(v);

  // Class c owns the contiguous vocabulary slice [c*f/k, (c+1)*f/k).
  Tensor features(n, f);
  for (NodeId v = 0; v < n; ++v) {
    const std::size_t lo = labels[v] * f / k, hi = (labels[v] + 1) * f / k;
    for (std::size_t w = 0; w < spec.words_per_node; ++w) {
      const std::size_t word =
          rng.uniform() < spec.feature_signal ? lo + rng.below(hi - lo) : rng.below(f);
      features(v, word) += 1.0;
    }
  }

  const auto target = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * spec.average_degree / 2.0));
  std::set<std::pair<NodeId, NodeId>> edges;
  std::size_t attempts = 0;
  while (edges.size() < target && attempts++ < 100 * target + 1000) {
    const NodeId u = rng.below(n);
    std::size_t cls = labels[u];
    if (rng.uniform() >= spec.homophily) cls = (labels[u] + 1 + rng.below(k - 1)) % k;
    const auto& pool = members[cls];
    if (pool.empty()) continue;
    const NodeId v = pool[rng.below(pool.size())];
    if (u == v) continue;
    edges.emplace(std::min(u, v), std::max(u, v));
  }

  Dataset d;
  d.name = spec.name;
  const EdgeList edge_list(edges.begin(), edges.end());
  d.graph = build_graph(n, edge_list, false);
  d.features = row_normalize(features);
  d.labels = std::move(labels);
  d.num_classes = k;
  d.splits = random_splits(n, SplitFractions{}, spec.num_splits, spec.seed ^ 0x5eedULL);
  d.validate();
  return d;
}

}  // namespace chatgnn
