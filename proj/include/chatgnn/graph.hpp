#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "chatgnn/tensor.hpp"

namespace chatgnn {

using NodeId = std::size_t;
using EdgeList = std::vector<std::pair<NodeId, NodeId>>;

/// Immutable CSR adjacency over directed arcs.
///
/// Row u lists the heads of arcs u -> v, sorted and without duplicates.
/// An undirected edge is stored as the two arcs u -> v and v -> u, and no
/// node is adjacent to itself.
class Graph {
 public:
  Graph() = default;

  std::size_t num_nodes() const noexcept { return degrees_.size(); }
  std::size_t num_arcs() const noexcept { return col_idx_.size(); }
  /// Undirected edge count (arcs / 2) for undirected graphs, arc count otherwise.
  std::size_t num_edges() const noexcept { return directed_ ? num_arcs() : num_arcs() / 2; }
  bool directed() const noexcept { return directed_; }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const NodeId> col_idx() const noexcept { return col_idx_; }
  /// Out-degree; equals the neighbour count for undirected graphs.
  std::span<const std::size_t> degrees() const noexcept { return degrees_; }
  std::span<const std::size_t> in_degrees() const noexcept { return in_degrees_; }
  std::size_t degree(NodeId v) const noexcept { return degrees_[v]; }
  std::span<const NodeId> neighbors(NodeId v) const noexcept {
    return std::span<const NodeId>(col_idx_).subspan(row_ptr_[v], degrees_[v]);
  }
  bool has_arc(NodeId u, NodeId v) const noexcept;

  /// Stored arcs in CSR order.
  EdgeList arcs() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  friend Graph build_graph(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges,
                           bool directed);

  std::vector<std::size_t> row_ptr_{0};
  std::vector<NodeId> col_idx_;
  std::vector<std::size_t> degrees_;
  std::vector<std::size_t> in_degrees_;
  bool directed_ = false;
};

/// Drops self-loops, collapses duplicates and, unless `directed`, adds the
/// reverse of every edge. Throws IndexError for endpoints >= n.
Graph build_graph(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges, bool directed);

/// 4-neighbour lattice; node id = r * cols + c.
Graph grid_graph(std::size_t rows, std::size_t cols);

/// Flips every arc of a directed graph. Throws std::invalid_argument on undirected input.
Graph reverse(const Graph& g);

/// Relabels node v as perm[v].
Graph permute(const Graph& g, std::span<const NodeId> perm);

/// Per-arc endpoint arrays for message passing along u -> v: src = u, dst = v.
///
/// norm[e] = 1 / sqrt(out_degree(src) * in_degree(dst)); for undirected graphs
/// both are the ordinary degree. Both factors are at least one for any stored
/// arc, so isolated nodes never produce a division by zero.
struct EdgeArrays {
  std::size_t num_nodes = 0;
  std::vector<NodeId> src;
  std::vector<NodeId> dst;
  std::vector<Real> norm;
  /// `norm` as an E x 1 constant tensor, for use with mul_rows.
  Tensor norm_column;

  std::size_t num_arcs() const noexcept { return src.size(); }
};

EdgeArrays edge_arrays(const Graph& g);

}  // namespace chatgnn
