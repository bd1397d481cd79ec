#include "chatgnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "chatgnn/autodiff.hpp"
#include "chatgnn/errors.hpp"
#include "chatgnn/layers.hpp"
#include "chatgnn/rng.hpp"

namespace chatgnn {
namespace {

double squared_distance(std::span<const Real> a, std::span<const Real> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

BaselineTag baseline_tag_of(LayerKind kind) {
  switch (kind) {
    case LayerKind::gcn: return BaselineTag::gcn;
    case LayerKind::scalar_attention: return BaselineTag::scalar_attention;
    case LayerKind::freq_gate: return BaselineTag::freq_gate;
    case LayerKind::chat: break;
  }
  throw std::invalid_argument("energy experiment: unknown model kind");
}

}  // namespace

double local_variation(const Tensor& x, const Graph& g, NodeId v) {
  if (v >= g.num_nodes()) throw IndexError("local_variation: node out of range");
  if (x.rows() != g.num_nodes()) throw DimensionError("local_variation: feature rows mismatch");
  double total = 0.0;
  for (NodeId w : g.neighbors(v)) total += squared_distance(x.row(v), x.row(w));
  return total;
}

double dirichlet_energy(const Tensor& x, const Graph& g) {
  if (x.rows() != g.num_nodes()) throw DimensionError("dirichlet_energy: feature rows mismatch");
  if (g.num_nodes() == 0) return 0.0;
  double total = 0.0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) total += local_variation(x, g, v);
  return total / static_cast<double>(g.num_nodes());
}

EnergyTrace energy_decay_experiment(LayerKind kind, std::size_t layers, std::size_t rows,
                                    std::size_t cols, std::uint64_t seed) {
  if (layers > kMaxEnergyLayers) {
    throw std::invalid_argument("energy experiment: at most " + std::to_string(kMaxEnergyLayers) +
                                " layers");
  }
  constexpr std::size_t kWidth = 2;
  NoGradGuard no_grad;
  const Graph g = grid_graph(rows, cols);
  const EdgeArrays e = edge_arrays(g);
  Rng rng(seed);

  Tensor h(g.num_nodes(), kWidth);
  for (Real& x : h.data()) x = rng.uniform();

  EnergyTrace trace;
  trace.model_kind = kind;
  trace.per_layer_energy.reserve(layers + 1);
  trace.per_layer_energy.push_back(dirichlet_energy(h, g));
  for (std::size_t k = 0; k < layers; ++k) {
    if (kind == LayerKind::chat) {
      const auto p = ChatLayerParams::init(kWidth, false, false, rng);
      h = chat_combine(h, chat_aggregate(h, e, channel_beta(h, e, p)), p);
    } else {
      const auto p = BaselineParams::init(baseline_tag_of(kind), kWidth, false, false, rng);
      h = baseline_plain_forward(p, h, e);
    }
    trace.per_layer_energy.push_back(dirichlet_energy(h, g));
  }
  return trace;
}

void write_energy_csv(const EnergyTrace& trace, const std::filesystem::path& path,
                      const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "layer,energy\n" << std::setprecision(17);
  for (std::size_t k = 0; k < trace.per_layer_energy.size(); ++k)
    out << k << ',' << trace.per_layer_energy[k] << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Prop1Report prop1_check(const Tensor& h, const Tensor& m, const Graph& g, double slack) {
  if (!h.same_shape(m) || h.rows() != g.num_nodes()) {
    throw DimensionError("prop1_check: h " + h.shape_string() + ", m " + m.shape_string() +
                         " on " + std::to_string(g.num_nodes()) + " nodes");
  }
  Prop1Report report;
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    for (NodeId w : g.neighbors(v))
      report.c = std::max(report.c, std::sqrt(squared_distance(h.row(v), h.row(w))));

  Tensor updated = h.clone();
  for (std::size_t i = 0; i < updated.size(); ++i) updated.data()[i] += m.data()[i];

  report.worst_excess = -std::numeric_limits<double>::infinity();
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const double change = local_variation(updated, g, v) - local_variation(h, g, v);
    double bound = 0.0;
    for (NodeId w : g.neighbors(v)) {
      const double delta = std::sqrt(squared_distance(m.row(w), m.row(v)));
      bound += delta * delta + 2.0 * report.c * delta;
    }
    const double excess = change - bound;
    report.worst_excess = std::max(report.worst_excess, excess);
    if (excess > slack) ++report.violations;
    ++report.nodes_checked;
  }
  if (report.nodes_checked == 0) report.worst_excess = 0.0;
  return report;
}

CollapseFrequencies collapse_monte_carlo(std::size_t neighborhood_size, std::size_t width,
                                         std::size_t trials,
                                         const std::vector<double>& score_support,
                                         std::uint64_t seed) {
  if (score_support.empty()) throw std::invalid_argument("collapse_monte_carlo: empty support");
  if (width == 0 || trials == 0) {
    throw std::invalid_argument("collapse_monte_carlo: width and trials must be >= 1");
  }
  Rng rng(seed);
  const std::size_t s = score_support.size();
  const double feature_norm = std::sqrt(static_cast<double>(width));  // ||1_D||
  std::size_t scalar_hits = 0, channel_hits = 0;
  std::vector<double> beta_diff(width);
  for (std::size_t t = 0; t < trials; ++t) {
    double scalar_bound = 0.0, channel_bound = 0.0;
    for (std::size_t k = 0; k < neighborhood_size; ++k) {
      const double alpha_v = score_support[rng.below(s)];
      const double alpha_w = score_support[rng.below(s)];
      scalar_bound += std::abs(alpha_v - alpha_w) * feature_norm;
      beta_diff[0] = alpha_v - alpha_w;
      for (std::size_t d = 1; d < width; ++d)
        beta_diff[d] = score_support[rng.below(s)] - score_support[rng.below(s)];
      double sq = 0.0;
      for (double x : beta_diff) sq += x * x;  // unit features
      channel_bound += std::sqrt(sq);
    }
    if (scalar_bound > 0.0) ++scalar_hits;
    if (channel_bound > 0.0) ++channel_hits;
  }
  CollapseFrequencies out;
  out.trials = trials;
  out.scalar = static_cast<double>(scalar_hits) / static_cast<double>(trials);
  out.channel = static_cast<double>(channel_hits) / static_cast<double>(trials);
  return out;
}

double non_collapse_probability(std::size_t support_size, std::size_t neighborhood_size,
                                std::size_t channels) {
  return 1.0 - std::pow(static_cast<double>(support_size),
                        -static_cast<double>(neighborhood_size * channels));
}

double cosine_similarity(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_similarity: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<CosineDump> attention_cosine(const ChatGnnModel& model, const Dataset& data,
                                         const std::vector<NodeId>& node_ids,
                                         std::size_t first_layer, std::size_t last_layer,
                                         std::vector<NodeId>* skipped) {
  if (model.config.layer_kind != LayerKind::chat || model.config.directed_mode) {
    throw std::invalid_argument("attention_cosine: needs an undirected channel-attentive model");
  }
  last_layer = std::min(last_layer, model.config.layers);
  NoGradGuard no_grad;
  const PropagationGraph graph = PropagationGraph::from(data.graph);
  ForwardTrace trace;
  model_forward(model, data.features, graph, &trace);
  const auto row_ptr = data.graph.row_ptr();

  std::vector<CosineDump> out;
  for (NodeId i : node_ids) {
    if (i >= data.num_nodes()) throw IndexError("attention_cosine: node out of range");
    const std::size_t deg = data.graph.degree(i);
    if (deg < 2) {
      if (skipped != nullptr) skipped->push_back(i);
      continue;
    }
    CosineDump dump;
    dump.node = i;
    auto nbrs = data.graph.neighbors(i);
    dump.neighbors.assign(nbrs.begin(), nbrs.end());
    // Arcs i -> j occupy CSR positions row_ptr[i] .. row_ptr[i+1).
    for (std::size_t layer = first_layer; layer < last_layer; ++layer) {
      const Tensor& beta = trace.betas[layer];
      CosineMatrix mat;
      mat.layer = layer;
      mat.values.assign(deg, std::vector<double>(deg, 0.0));
      for (std::size_t a = 0; a < deg; ++a) {
        auto ba = beta.row(row_ptr[i] + a);
        if (std::all_of(ba.begin(), ba.end(), [](Real x) { return x == 0.0; }))
          mat.has_zero_vector = true;
        for (std::size_t b = 0; b < deg; ++b)
          mat.values[a][b] = cosine_similarity(ba, beta.row(row_ptr[i] + b));
      }
      dump.layers.push_back(std::move(mat));
    }
    out.push_back(std::move(dump));
  }
  return out;
}

std::string cosine_dump_to_string(const std::vector<CosineDump>& dumps,
                                  const std::vector<std::string>& comments) {
  using nlohmann::json;
  json nodes = json::array();
  for (const auto& d : dumps) {
    json layers = json::array();
    for (const auto& m : d.layers)
      layers.push_back({{"layer", m.layer}, {"has_zero_vector", m.has_zero_vector},
                        {"matrix", m.values}});
    nodes.push_back({{"node", d.node}, {"neighbors", d.neighbors}, {"layers", std::move(layers)}});
  }
  json doc{{"format", "chatgnn-cosine-dump"}, {"version", 1}, {"comments", comments},
           {"nodes", std::move(nodes)}};
  return doc.dump(1);
}

}  // namespace chatgnn
