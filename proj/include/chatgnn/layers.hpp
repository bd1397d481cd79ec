#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "chatgnn/graph.hpp"
#include "chatgnn/rng.hpp"
#include "chatgnn/tensor.hpp"

namespace chatgnn {

/// rows x cols matrix with entries U(-b, b), b = sqrt(6 / (rows + cols)).
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

/// Weights of one channel-attentive message-passing layer.
///
/// The projections are either both absent (identity combine) or both D x D;
/// the layer-norm affine pair is likewise all-or-nothing. No biases.
struct ChatLayerParams {
  Tensor w1;  // applied to the receiving node
  Tensor w2;  // applied to the sending neighbour
  std::optional<Tensor> proj_self;
  std::optional<Tensor> proj_neigh;
  std::optional<Tensor> ln_gamma;
  std::optional<Tensor> ln_beta;

  static ChatLayerParams init(std::size_t width, bool projection, bool layer_norm, Rng& rng);

  std::size_t width() const noexcept { return w1.rows(); }
  bool use_projection() const noexcept { return proj_self.has_value(); }
  bool use_layer_norm() const noexcept { return ln_gamma.has_value(); }
  std::vector<Tensor> parameters() const;
  /// Throws DimensionError / std::invalid_argument on inconsistent fields.
  void validate() const;
};

/// Per-arc channel weights tanh(W1 h_dst + W2 h_src), one E x D row per arc.
Tensor channel_beta(const Tensor& h, const EdgeArrays& e, const ChatLayerParams& p);

/// m_v = sum over arcs w -> v of norm * beta (.) h_w. Nodes without incoming
/// arcs get zero rows.
Tensor chat_aggregate(const Tensor& h, const EdgeArrays& e, const Tensor& beta);

/// phi_self(h) + phi_neigh(m); identity maps when the layer has no projections.
Tensor chat_combine(const Tensor& h, const Tensor& m, const ChatLayerParams& p);

/// Full layer: combine, add the initial representation h0, then layer norm
/// when enabled. When `beta_out` is non-null the arc weights are stored there.
Tensor chat_layer_forward(const Tensor& h, const Tensor& h0, const EdgeArrays& e,
                          const ChatLayerParams& p, Tensor* beta_out = nullptr);

/// Two-direction variant. `forward_edges` carries messages along the stored
/// arcs with `p_out`; `reverse_edges` (from reverse(g)) with `p_in`. The
/// reverse message gets its own projection, p_in.proj_neigh.
Tensor dir_chat_forward(const Tensor& h, const Tensor& h0, const EdgeArrays& forward_edges,
                        const EdgeArrays& reverse_edges, const ChatLayerParams& p_out,
                        const ChatLayerParams& p_in);

/// Same, building both edge sets from a directed graph.
/// Throws std::invalid_argument when `g` is undirected.
Tensor dir_chat_forward(const Tensor& h, const Tensor& h0, const Graph& g,
                        const ChatLayerParams& p_out, const ChatLayerParams& p_in);

// ---- comparison layers ------------------------------------------------------

enum class BaselineTag { gcn, scalar_attention, freq_gate };

std::string_view to_string(BaselineTag tag);
BaselineTag baseline_tag_from_string(std::string_view name);

/// Simplified single-head stand-ins used to isolate the effect of the
/// channel-wise weights. The combine/normalisation fields mirror
/// ChatLayerParams so either layer can sit inside the same wrapper.
struct BaselineParams {
  BaselineTag tag = BaselineTag::gcn;
  Tensor weight;     // gcn, scalar_attention: D x D
  Tensor att_dst;    // scalar_attention: 1 x D, scores the receiving node
  Tensor att_src;    // scalar_attention: 1 x D, scores the neighbour
  Tensor gate_dst;   // freq_gate: 1 x D
  Tensor gate_src;   // freq_gate: 1 x D
  std::optional<Tensor> proj_self;
  std::optional<Tensor> proj_neigh;
  std::optional<Tensor> ln_gamma;
  std::optional<Tensor> ln_beta;

  static BaselineParams init(BaselineTag tag, std::size_t width, bool projection,
                             bool layer_norm, Rng& rng);

  std::size_t width() const noexcept;
  std::vector<Tensor> parameters() const;
};

inline constexpr Real kAttentionNegativeSlope = 0.2;

/// Aggregated neighbourhood message of a comparison layer:
///   gcn              W * sum norm * h_w
///   scalar_attention sum alpha_vw * W h_w, alpha softmax-normalised per receiver
///   freq_gate        sum tanh(g . [h_v, h_w]) * norm * h_w
/// When `arc_coefficients` is non-null the per-arc scalar (norm, alpha or
/// gate) is written there as an E x 1 tensor.
Tensor baseline_message(const BaselineParams& p, const Tensor& h, const EdgeArrays& e,
                        Tensor* arc_coefficients = nullptr);

/// baseline_message inside the same combine / initial-residual / layer-norm
/// wrapper as chat_layer_forward.
Tensor baseline_forward(const BaselineParams& p, const Tensor& h, const Tensor& h0,
                        const EdgeArrays& e);

/// Conventional stacked form: relu(baseline_message).
Tensor baseline_plain_forward(const BaselineParams& p, const Tensor& h, const EdgeArrays& e);

}  // namespace chatgnn
