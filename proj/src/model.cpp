#include "chatgnn/model.hpp"

#include <stdexcept>
#include <string>

#include "chatgnn/autodiff.hpp"
#include "chatgnn/errors.hpp"

namespace chatgnn {
namespace {

template <class Fn>
void visit_layer(const std::string& prefix, const ChatLayerParams& p, Fn&& fn) {
  fn(prefix + "w1", p.w1);
  fn(prefix + "w2", p.w2);
  if (p.proj_self) fn(prefix + "proj_self", *p.proj_self);
  if (p.proj_neigh) fn(prefix + "proj_neigh", *p.proj_neigh);
  if (p.ln_gamma) fn(prefix + "ln_gamma", *p.ln_gamma);
  if (p.ln_beta) fn(prefix + "ln_beta", *p.ln_beta);
}

template <class Fn>
void visit_layer(const std::string& prefix, const BaselineParams& p, Fn&& fn) {
  switch (p.tag) {
    case BaselineTag::gcn:
      fn(prefix + "weight", p.weight);
      break;
    case BaselineTag::scalar_attention:
      fn(prefix + "weight", p.weight);
      fn(prefix + "att_dst", p.att_dst);
      fn(prefix + "att_src", p.att_src);
      break;
    case BaselineTag::freq_gate:
      fn(prefix + "gate_dst", p.gate_dst);
      fn(prefix + "gate_src", p.gate_src);
      break;
  }
  if (p.proj_self) fn(prefix + "proj_self", *p.proj_self);
  if (p.proj_neigh) fn(prefix + "proj_neigh", *p.proj_neigh);
  if (p.ln_gamma) fn(prefix + "ln_gamma", *p.ln_gamma);
  if (p.ln_beta) fn(prefix + "ln_beta", *p.ln_beta);
}

/// Calls fn(name, tensor) for every parameter in canonical order.
template <class Fn>
void visit_parameters(const ChatGnnModel& m, Fn&& fn) {
  fn("w_in", m.w_in);
  fn("b_in", m.b_in);
  for (std::size_t k = 0; k < m.layers.size(); ++k)
    visit_layer("layers." + std::to_string(k) + ".", m.layers[k], fn);
  for (std::size_t k = 0; k < m.reverse_layers.size(); ++k)
    visit_layer("reverse_layers." + std::to_string(k) + ".", m.reverse_layers[k], fn);
  for (std::size_t k = 0; k < m.baseline_layers.size(); ++k)
    visit_layer("baseline_layers." + std::to_string(k) + ".", m.baseline_layers[k], fn);
  fn("w_out", m.w_out);
  fn("b_out", m.b_out);
}

BaselineTag to_baseline_tag(LayerKind kind) {
  switch (kind) {
    case LayerKind::gcn: return BaselineTag::gcn;
    case LayerKind::scalar_attention: return BaselineTag::scalar_attention;
    case LayerKind::freq_gate: return BaselineTag::freq_gate;
    case LayerKind::chat: break;
  }
  throw std::invalid_argument("chat layers have no baseline tag");
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::chat: return "chat";
    case LayerKind::gcn: return "gcn";
    case LayerKind::scalar_attention: return "scalar_attention";
    case LayerKind::freq_gate: return "freq_gate";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  if (name == "chat") return LayerKind::chat;
  if (name == "gcn") return LayerKind::gcn;
  if (name == "scalar_attention" || name == "gat") return LayerKind::scalar_attention;
  if (name == "freq_gate" || name == "fagcn") return LayerKind::freq_gate;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(BaselineWrap wrap) { return wrap == BaselineWrap::chat ? "chat" : "plain"; }

BaselineWrap baseline_wrap_from_string(std::string_view name) {
  if (name == "chat") return BaselineWrap::chat;
  if (name == "plain") return BaselineWrap::plain;
  throw std::invalid_argument("unknown baseline wrap '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (in_features == 0 || hidden == 0 || classes == 0 || layers == 0) {
    throw std::invalid_argument("model config: in_features, hidden, classes and layers must be >= 1");
  }
  if (directed_mode && layer_kind != LayerKind::chat) {
    throw std::invalid_argument("model config: directed mode is only available for chat layers");
  }
}

std::vector<NamedTensor> ChatGnnModel::named_parameters() const {
  std::vector<NamedTensor> out;
  visit_parameters(*this, [&](std::string name, const Tensor& t) {
    out.push_back(NamedTensor{std::move(name), t});
  });
  return out;
}

std::vector<Tensor> ChatGnnModel::parameters() const {
  std::vector<Tensor> out;
  visit_parameters(*this, [&](const std::string&, const Tensor& t) { out.push_back(t); });
  return out;
}

std::size_t ChatGnnModel::parameter_count() const {
  std::size_t total = 0;
  visit_parameters(*this, [&](const std::string&, const Tensor& t) { total += t.size(); });
  return total;
}

ChatGnnModel ChatGnnModel::clone() const {
  ChatGnnModel copy = *this;
  auto fresh = [](const Tensor& t) {
    Tensor c = t.clone();
    c.set_requires_grad(t.requires_grad());
    return c;
  };
  auto clone_opt = [&](std::optional<Tensor>& t) {
    if (t) t = fresh(*t);
  };
  copy.w_in = fresh(w_in);
  copy.b_in = fresh(b_in);
  copy.w_out = fresh(w_out);
  copy.b_out = fresh(b_out);
  for (auto* list : {&copy.layers, &copy.reverse_layers}) {
    for (auto& p : *list) {
      p.w1 = fresh(p.w1);
      p.w2 = fresh(p.w2);
      clone_opt(p.proj_self);
      clone_opt(p.proj_neigh);
      clone_opt(p.ln_gamma);
      clone_opt(p.ln_beta);
    }
  }
  for (auto& p : copy.baseline_layers) {
    p.weight = fresh(p.weight);
    p.att_dst = fresh(p.att_dst);
    p.att_src = fresh(p.att_src);
    p.gate_dst = fresh(p.gate_dst);
    p.gate_src = fresh(p.gate_src);
    clone_opt(p.proj_self);
    clone_opt(p.proj_neigh);
    clone_opt(p.ln_gamma);
    clone_opt(p.ln_beta);
  }
  return copy;
}

ChatGnnModel init_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ChatGnnModel m;
  m.config = cfg;
  const std::size_t d = cfg.hidden;
  m.w_in = glorot_uniform(d, cfg.in_features, rng);
  m.b_in = Tensor(1, d);
  for (std::size_t k = 0; k < cfg.layers; ++k) {
    if (cfg.layer_kind == LayerKind::chat) {
      m.layers.push_back(ChatLayerParams::init(d, cfg.use_projection, cfg.use_layer_norm, rng));
      if (cfg.directed_mode) {
        // The reverse direction contributes W1, W2 and its neighbour projection;
        // layer norm is owned by the forward-direction parameters.
        m.reverse_layers.push_back(ChatLayerParams::init(d, cfg.use_projection, false, rng));
      }
    } else {
      const bool wrapped = cfg.baseline_wrap == BaselineWrap::chat;
      m.baseline_layers.push_back(BaselineParams::init(to_baseline_tag(cfg.layer_kind), d,
                                                       wrapped && cfg.use_projection,
                                                       wrapped && cfg.use_layer_norm, rng));
    }
  }
  m.w_out = glorot_uniform(cfg.classes, d, rng);
  m.b_out = Tensor(1, cfg.classes);
  for (auto& t : m.parameters()) t.set_requires_grad(true);
  return m;
}

ChatGnnModel init_model(const ModelConfig& cfg) {
  Rng rng(cfg.seed);
  return init_model(cfg, rng);
}

PropagationGraph PropagationGraph::from(const Graph& g) {
  PropagationGraph out;
  out.edges = edge_arrays(g);
  if (g.directed()) out.reverse_edges = edge_arrays(reverse(g));
  return out;
}

Tensor model_forward(const ChatGnnModel& m, const Tensor& x, const PropagationGraph& g,
                     ForwardTrace* trace) {
  const ModelConfig& cfg = m.config;
  if (x.cols() != cfg.in_features) {
    throw DimensionError("model_forward: features " + x.shape_string() + " but model expects " +
                         std::to_string(cfg.in_features) + " input columns");
  }
  if (x.rows() != g.edges.num_nodes) {
    throw DimensionError("model_forward: " + std::to_string(x.rows()) + " feature rows for a " +
                         std::to_string(g.edges.num_nodes) + "-node graph");
  }
  if (cfg.directed_mode && !g.reverse_edges) {
    throw std::invalid_argument("model_forward: directed model needs a directed graph");
  }

  const Tensor h0 = relu(linear(x, m.w_in, m.b_in));
  Tensor h = h0;
  if (trace != nullptr) trace->hidden.push_back(h0);
  for (std::size_t k = 0; k < cfg.layers; ++k) {
    if (cfg.layer_kind == LayerKind::chat) {
      if (cfg.directed_mode) {
        h = dir_chat_forward(h, h0, g.edges, *g.reverse_edges, m.layers[k], m.reverse_layers[k]);
      } else {
        Tensor beta;
        h = chat_layer_forward(h, h0, g.edges, m.layers[k], &beta);
        if (trace != nullptr) trace->betas.push_back(beta);
      }
    } else if (cfg.baseline_wrap == BaselineWrap::chat) {
      h = baseline_forward(m.baseline_layers[k], h, h0, g.edges);
    } else {
      h = baseline_plain_forward(m.baseline_layers[k], h, g.edges);
    }
    if (trace != nullptr) trace->hidden.push_back(h);
  }
  return linear(h, m.w_out, m.b_out);
}

Tensor model_forward(const ChatGnnModel& m, const Tensor& x, const EdgeArrays& e) {
  PropagationGraph g;
  g.edges = e;
  return model_forward(m, x, g);
}

}  // namespace chatgnn
