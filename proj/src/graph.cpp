#include "chatgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "chatgnn/errors.hpp"

namespace chatgnn {

bool Graph::has_arc(NodeId u, NodeId v) const noexcept {
  if (u >= num_nodes()) return false;
  auto row = neighbors(u);
  return std::binary_search(row.begin(), row.end(), v);
}

EdgeList Graph::arcs() const {
  EdgeList out;
  out.reserve(num_arcs());
  for (NodeId u = 0; u < num_nodes(); ++u)
    for (NodeId v : neighbors(u)) out.emplace_back(u, v);
  return out;
}

Graph build_graph(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges,
                  bool directed) {
  EdgeList arcs;
  arcs.reserve(directed ? edges.size() : 2 * edges.size());
  for (const auto& [u, v] : edges) {
    if (u >= n || v >= n) {
      throw IndexError("build_graph: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                       ") has an endpoint outside [0, " + std::to_string(n) + ")");
    }
    if (u == v) continue;
    arcs.emplace_back(u, v);
    if (!directed) arcs.emplace_back(v, u);
  }
  std::sort(arcs.begin(), arcs.end());
  arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());

  Graph g;
  g.directed_ = directed;
  g.degrees_.assign(n, 0);
  g.in_degrees_.assign(n, 0);
  g.row_ptr_.assign(n + 1, 0);
  g.col_idx_.reserve(arcs.size());
  for (const auto& [u, v] : arcs) {
    ++g.degrees_[u];
    ++g.in_degrees_[v];
    g.col_idx_.push_back(v);
  }
  for (std::size_t v = 0; v < n; ++v) g.row_ptr_[v + 1] = g.row_ptr_[v] + g.degrees_[v];
  return g;
}

Graph grid_graph(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("grid_graph: rows and cols must be >= 1");
  EdgeList edges;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const NodeId id = r * cols + c;
      if (c + 1 < cols) edges.emplace_back(id, id + 1);
      if (r + 1 < rows) edges.emplace_back(id, id + cols);
    }
  return build_graph(rows * cols, edges, false);
}

Graph reverse(const Graph& g) {
  if (!g.directed()) throw std::invalid_argument("reverse: graph is undirected");
  EdgeList flipped;
  flipped.reserve(g.num_arcs());
  for (const auto& [u, v] : g.arcs()) flipped.emplace_back(v, u);
  return build_graph(g.num_nodes(), flipped, true);
}

Graph permute(const Graph& g, std::span<const NodeId> perm) {
  if (perm.size() != g.num_nodes()) throw DimensionError("permute: permutation size mismatch");
  EdgeList mapped;
  mapped.reserve(g.num_arcs());
  for (const auto& [u, v] : g.arcs()) mapped.emplace_back(perm[u], perm[v]);
  return build_graph(g.num_nodes(), mapped, g.directed());
}

EdgeArrays edge_arrays(const Graph& g) {
  EdgeArrays e;
  e.num_nodes = g.num_nodes();
  const std::size_t m = g.num_arcs();
  e.src.reserve(m);
  e.dst.reserve(m);
  e.norm.reserve(m);
  const auto out_deg = g.degrees();
  const auto in_deg = g.in_degrees();
  for (NodeId u = 0; u < g.num_nodes(); ++u)
    for (NodeId v : g.neighbors(u)) {
      e.src.push_back(u);
      e.dst.push_back(v);
      e.norm.push_back(1.0 / std::sqrt(static_cast<Real>(out_deg[u]) *
                                       static_cast<Real>(in_deg[v])));
    }
  e.norm_column = Tensor(m, 1, e.norm);
  return e;
}

}  // namespace chatgnn
