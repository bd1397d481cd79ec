#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chatgnn/data_io.hpp"
#include "chatgnn/graph.hpp"
#include "chatgnn/model.hpp"
#include "chatgnn/tensor.hpp"

namespace chatgnn {

/// Sum over neighbours w of ||x_v - x_w||^2.
double local_variation(const Tensor& x, const Graph& g, NodeId v);

/// Mean local variation over all nodes.
double dirichlet_energy(const Tensor& x, const Graph& g);

struct EnergyTrace {
  LayerKind model_kind = LayerKind::chat;
  /// Entry 0 is the input energy; entry k the energy after k layers.
  std::vector<double> per_layer_energy;
};

inline constexpr std::size_t kMaxEnergyLayers = 10000;

/// Random-weight depth experiment on a rows x cols lattice.
///
/// Two U(0,1) features per node; every layer draws fresh Glorot weights and
/// there is no input projection, initial residual or layer norm. A chat layer
/// is the bare combine h + m; comparison layers are relu(message).
EnergyTrace energy_decay_experiment(LayerKind kind, std::size_t layers, std::size_t rows,
                                    std::size_t cols, std::uint64_t seed);

void write_energy_csv(const EnergyTrace& trace, const std::filesystem::path& path,
                      const std::vector<std::string>& comments = {});

struct Prop1Report {
  std::size_t nodes_checked = 0;
  std::size_t violations = 0;
  /// Largest (change - bound); negative when the bound holds with room.
  double worst_excess = 0.0;
  /// Largest |h_w - h_v| over adjacent pairs.
  double c = 0.0;
};

inline constexpr double kProp1Slack = 1e-9;

/// Checks, for every node v, that the change in local variation caused by
/// the update h -> h + m is at most sum_w delta^2 + 2 c delta with
/// delta = ||m_w - m_v||.
Prop1Report prop1_check(const Tensor& h, const Tensor& m, const Graph& g,
                        double slack = kProp1Slack);

struct CollapseFrequencies {
  double scalar = 0.0;   // fraction of trials with a non-zero scalar-attention bound
  double channel = 0.0;  // same for the channel-wise bound
  std::size_t trials = 0;
};

/// Monte-Carlo estimate of how often the message-difference bound of two
/// nodes sharing a neighbourhood is non-zero, for scalar versus channel-wise
/// attention, with scores drawn uniformly from `score_support` and unit
/// features. Channel 0 of every channel-wise score reuses the scalar draw, so
/// D = 1 reproduces the scalar frequencies exactly.
CollapseFrequencies collapse_monte_carlo(std::size_t neighborhood_size, std::size_t width,
                                         std::size_t trials,
                                         const std::vector<double>& score_support,
                                         std::uint64_t seed);

/// Closed-form non-collapse probability when scores are uniform over `support_size`
/// distinct values: 1 - support_size^-(neighbors * channels).
double non_collapse_probability(std::size_t support_size, std::size_t neighborhood_size,
                                std::size_t channels);

struct CosineMatrix {
  std::size_t layer = 0;
  /// Row i, column j: cosine between the weights of the messages node sends
  /// to neighbours i and j. Zero vectors give 0 (also on the diagonal).
  std::vector<std::vector<double>> values;
  bool has_zero_vector = false;
};

struct CosineDump {
  NodeId node = 0;
  std::vector<NodeId> neighbors;
  std::vector<CosineMatrix> layers;
};

/// Throws DimensionError when the lengths differ.
double cosine_similarity(std::span<const Real> a, std::span<const Real> b);

/// Cosine matrices of the channel weights on arcs leaving each selected node,
/// for layers [first_layer, last_layer). Nodes with fewer than two neighbours
/// are skipped and reported through `skipped`.
std::vector<CosineDump> attention_cosine(const ChatGnnModel& model, const Dataset& data,
                                         const std::vector<NodeId>& node_ids,
                                         std::size_t first_layer, std::size_t last_layer,
                                         std::vector<NodeId>* skipped = nullptr);

std::string cosine_dump_to_string(const std::vector<CosineDump>& dumps,
                                  const std::vector<std::string>& comments = {});

}  // namespace chatgnn
