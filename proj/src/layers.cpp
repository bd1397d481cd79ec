#include "chatgnn/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "chatgnn/autodiff.hpp"
#include "chatgnn/errors.hpp"

namespace chatgnn {
namespace {

void check_square(const Tensor& t, std::size_t d, const char* name) {
  if (t.rows() != d || t.cols() != d) {
    throw DimensionError(std::string(name) + " must be " + std::to_string(d) + "x" +
                         std::to_string(d) + ", got " + t.shape_string());
  }
}

void check_node_input(const Tensor& h, const EdgeArrays& e, std::size_t width, const char* op) {
  if (h.rows() != e.num_nodes || h.cols() != width) {
    throw DimensionError(std::string(op) + ": node features " + h.shape_string() +
                         " do not match " + std::to_string(e.num_nodes) + " nodes of width " +
                         std::to_string(width));
  }
}

Tensor project(const Tensor& x, const std::optional<Tensor>& map) {
  return map ? linear(x, *map) : x;
}

/// LayerNorm(phi_self(h) + sum phi_neigh_i(m_i) + h0), shared by every layer kind.
Tensor wrap(const Tensor& h, const Tensor& h0, const Tensor& combined,
            const std::optional<Tensor>& ln_gamma, const std::optional<Tensor>& ln_beta) {
  if (!h0.same_shape(h)) {
    throw DimensionError("initial representation " + h0.shape_string() +
                         " does not match layer input " + h.shape_string());
  }
  Tensor x = add(combined, h0);
  return ln_gamma ? layer_norm(x, *ln_gamma, *ln_beta) : x;
}

Tensor optional_ones(std::size_t d) { return Tensor(1, d, 1.0); }

}  // namespace

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (Real& x : t.data()) x = rng.uniform(-bound, bound);
  return t;
}

ChatLayerParams ChatLayerParams::init(std::size_t width, bool projection, bool layer_norm,
                                      Rng& rng) {
  ChatLayerParams p;
  p.w1 = glorot_uniform(width, width, rng);
  p.w2 = glorot_uniform(width, width, rng);
  if (projection) {
    p.proj_self = glorot_uniform(width, width, rng);
    p.proj_neigh = glorot_uniform(width, width, rng);
  }
  if (layer_norm) {
    p.ln_gamma = optional_ones(width);
    p.ln_beta = Tensor(1, width);
  }
  for (auto& t : p.parameters()) t.set_requires_grad(true);
  return p;
}

std::vector<Tensor> ChatLayerParams::parameters() const {
  std::vector<Tensor> out{w1, w2};
  if (proj_self) out.push_back(*proj_self);
  if (proj_neigh) out.push_back(*proj_neigh);
  if (ln_gamma) out.push_back(*ln_gamma);
  if (ln_beta) out.push_back(*ln_beta);
  return out;
}

void ChatLayerParams::validate() const {
  const std::size_t d = w1.rows();
  check_square(w1, d, "W1");
  check_square(w2, d, "W2");
  if (proj_self.has_value() != proj_neigh.has_value()) {
    throw std::invalid_argument("projections must be both identity or both linear");
  }
  if (proj_self) {
    check_square(*proj_self, d, "proj_self");
    check_square(*proj_neigh, d, "proj_neigh");
  }
  if (ln_gamma.has_value() != ln_beta.has_value()) {
    throw std::invalid_argument("layer-norm gamma and beta must be present together");
  }
  if (ln_gamma && (ln_gamma->rows() != 1 || ln_gamma->cols() != d || ln_beta->rows() != 1 ||
                   ln_beta->cols() != d)) {
    throw DimensionError("layer-norm affine must be 1x" + std::to_string(d));
  }
}

Tensor channel_beta(const Tensor& h, const EdgeArrays& e, const ChatLayerParams& p) {
  check_node_input(h, e, p.width(), "channel_beta");
  // W h is computed once per node, then gathered per arc.
  const Tensor self_part = gather_rows(linear(h, p.w1), e.dst);
  const Tensor neigh_part = gather_rows(linear(h, p.w2), e.src);
  return tanh(add(self_part, neigh_part));
}

Tensor chat_aggregate(const Tensor& h, const EdgeArrays& e, const Tensor& beta) {
  if (h.rows() != e.num_nodes) {
    throw DimensionError("chat_aggregate: features " + h.shape_string() + " for " +
                         std::to_string(e.num_nodes) + " nodes");
  }
  if (beta.rows() != e.num_arcs() || beta.cols() != h.cols()) {
    throw DimensionError("chat_aggregate: beta " + beta.shape_string() + " for " +
                         std::to_string(e.num_arcs()) + " arcs of width " +
                         std::to_string(h.cols()));
  }
  const Tensor messages = mul_rows(hadamard(beta, gather_rows(h, e.src)), e.norm_column);
  return scatter_add_rows(messages, e.dst, e.num_nodes);
}

Tensor chat_combine(const Tensor& h, const Tensor& m, const ChatLayerParams& p) {
  if (!h.same_shape(m)) {
    throw DimensionError("chat_combine: " + h.shape_string() + " vs " + m.shape_string());
  }
  return add(project(h, p.proj_self), project(m, p.proj_neigh));
}

Tensor chat_layer_forward(const Tensor& h, const Tensor& h0, const EdgeArrays& e,
                          const ChatLayerParams& p, Tensor* beta_out) {
  const Tensor beta = channel_beta(h, e, p);
  if (beta_out != nullptr) *beta_out = beta;
  const Tensor m = chat_aggregate(h, e, beta);
  return wrap(h, h0, chat_combine(h, m, p), p.ln_gamma, p.ln_beta);
}

Tensor dir_chat_forward(const Tensor& h, const Tensor& h0, const EdgeArrays& forward_edges,
                        const EdgeArrays& reverse_edges, const ChatLayerParams& p_out,
                        const ChatLayerParams& p_in) {
  if (p_out.use_projection() != p_in.use_projection()) {
    throw std::invalid_argument("dir_chat_forward: both directions must share the projection mode");
  }
  const Tensor m_fwd = chat_aggregate(h, forward_edges, channel_beta(h, forward_edges, p_out));
  const Tensor m_rev = chat_aggregate(h, reverse_edges, channel_beta(h, reverse_edges, p_in));
  const Tensor combined = add(chat_combine(h, m_fwd, p_out), project(m_rev, p_in.proj_neigh));
  return wrap(h, h0, combined, p_out.ln_gamma, p_out.ln_beta);
}

Tensor dir_chat_forward(const Tensor& h, const Tensor& h0, const Graph& g,
                        const ChatLayerParams& p_out, const ChatLayerParams& p_in) {
  if (!g.directed()) throw std::invalid_argument("dir_chat_forward: graph is undirected");
  return dir_chat_forward(h, h0, edge_arrays(g), edge_arrays(reverse(g)), p_out, p_in);
}

std::string_view to_string(BaselineTag tag) {
  switch (tag) {
    case BaselineTag::gcn: return "gcn";
    case BaselineTag::scalar_attention: return "scalar_attention";
    case BaselineTag::freq_gate: return "freq_gate";
  }
  return "unknown";
}

BaselineTag baseline_tag_from_string(std::string_view name) {
  if (name == "gcn") return BaselineTag::gcn;
  if (name == "scalar_attention" || name == "gat") return BaselineTag::scalar_attention;
  if (name == "freq_gate" || name == "fagcn") return BaselineTag::freq_gate;
  throw std::invalid_argument("unknown baseline layer '" + std::string(name) + "'");
}

BaselineParams BaselineParams::init(BaselineTag tag, std::size_t width, bool projection,
                                    bool layer_norm, Rng& rng) {
  BaselineParams p;
  p.tag = tag;
  switch (tag) {
    case BaselineTag::gcn:
      p.weight = glorot_uniform(width, width, rng);
      break;
    case BaselineTag::scalar_attention: {
      p.weight = glorot_uniform(width, width, rng);
      // One attention vector of length 2D, stored as its two halves.
      const Tensor a = glorot_uniform(1, 2 * width, rng);
      p.att_dst = Tensor(1, width, std::vector<Real>(a.data().begin(), a.data().begin() + width));
      p.att_src = Tensor(1, width, std::vector<Real>(a.data().begin() + width, a.data().end()));
      break;
    }
    case BaselineTag::freq_gate: {
      const Tensor g = glorot_uniform(1, 2 * width, rng);
      p.gate_dst = Tensor(1, width, std::vector<Real>(g.data().begin(), g.data().begin() + width));
      p.gate_src = Tensor(1, width, std::vector<Real>(g.data().begin() + width, g.data().end()));
      break;
    }
  }
  if (projection) {
    p.proj_self = glorot_uniform(width, width, rng);
    p.proj_neigh = glorot_uniform(width, width, rng);
  }
  if (layer_norm) {
    p.ln_gamma = optional_ones(width);
    p.ln_beta = Tensor(1, width);
  }
  for (auto& t : p.parameters()) t.set_requires_grad(true);
  return p;
}

std::size_t BaselineParams::width() const noexcept {
  return tag == BaselineTag::freq_gate ? gate_dst.cols() : weight.rows();
}

std::vector<Tensor> BaselineParams::parameters() const {
  std::vector<Tensor> out;
  switch (tag) {
    case BaselineTag::gcn: out = {weight}; break;
    case BaselineTag::scalar_attention: out = {weight, att_dst, att_src}; break;
    case BaselineTag::freq_gate: out = {gate_dst, gate_src}; break;
  }
  if (proj_self) out.push_back(*proj_self);
  if (proj_neigh) out.push_back(*proj_neigh);
  if (ln_gamma) out.push_back(*ln_gamma);
  if (ln_beta) out.push_back(*ln_beta);
  return out;
}

Tensor baseline_message(const BaselineParams& p, const Tensor& h, const EdgeArrays& e,
                        Tensor* arc_coefficients) {
  check_node_input(h, e, p.width(), "baseline_message");
  switch (p.tag) {
    case BaselineTag::gcn: {
      if (arc_coefficients != nullptr) *arc_coefficients = e.norm_column;
      const Tensor agg =
          scatter_add_rows(mul_rows(gather_rows(h, e.src), e.norm_column), e.dst, e.num_nodes);
      return linear(agg, p.weight);
    }
    case BaselineTag::scalar_attention: {
      const Tensor z = linear(h, p.weight);
      const Tensor score = add(gather_rows(linear(z, p.att_dst), e.dst),
                               gather_rows(linear(z, p.att_src), e.src));
      const Tensor alpha =
          segment_softmax(leaky_relu(score, kAttentionNegativeSlope), e.dst, e.num_nodes);
      if (arc_coefficients != nullptr) *arc_coefficients = alpha;
      return scatter_add_rows(mul_rows(gather_rows(z, e.src), alpha), e.dst, e.num_nodes);
    }
    case BaselineTag::freq_gate: {
      const Tensor gate = tanh(add(gather_rows(linear(h, p.gate_dst), e.dst),
                                   gather_rows(linear(h, p.gate_src), e.src)));
      const Tensor coef = hadamard(gate, e.norm_column);
      if (arc_coefficients != nullptr) *arc_coefficients = coef;
      return scatter_add_rows(mul_rows(gather_rows(h, e.src), coef), e.dst, e.num_nodes);
    }
  }
  throw std::invalid_argument("baseline_message: unknown layer tag");
}

Tensor baseline_forward(const BaselineParams& p, const Tensor& h, const Tensor& h0,
                        const EdgeArrays& e) {
  const Tensor m = baseline_message(p, h, e);
  const Tensor combined = add(project(h, p.proj_self), project(m, p.proj_neigh));
  return wrap(h, h0, combined, p.ln_gamma, p.ln_beta);
}

Tensor baseline_plain_forward(const BaselineParams& p, const Tensor& h, const EdgeArrays& e) {
  return relu(baseline_message(p, h, e));
}

}  // namespace chatgnn
