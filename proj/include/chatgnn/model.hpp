#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chatgnn/graph.hpp"
#include "chatgnn/layers.hpp"
#include "chatgnn/rng.hpp"
#include "chatgnn/tensor.hpp"

namespace chatgnn {

/// Message-passing layer used by every hidden layer of a model.
enum class LayerKind { chat, gcn, scalar_attention, freq_gate };

/// How comparison layers are stacked. `chat` reuses the channel-attentive
/// wrapper (combine, initial residual, optional layer norm); `plain` is the
/// conventional relu(message) stack.
enum class BaselineWrap { chat, plain };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);
std::string_view to_string(BaselineWrap wrap);
BaselineWrap baseline_wrap_from_string(std::string_view name);

struct ModelConfig {
  std::size_t in_features = 0;
  std::size_t hidden = 64;
  std::size_t classes = 0;
  std::size_t layers = 4;
  bool use_layer_norm = true;
  bool use_projection = false;
  bool directed_mode = false;
  LayerKind layer_kind = LayerKind::chat;
  BaselineWrap baseline_wrap = BaselineWrap::chat;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Input projection, hidden message-passing layers and output layer.
struct ChatGnnModel {
  ModelConfig config;
  Tensor w_in;  // D x F
  Tensor b_in;  // 1 x D
  std::vector<ChatLayerParams> layers;
  std::vector<ChatLayerParams> reverse_layers;  // directed mode only
  std::vector<BaselineParams> baseline_layers;  // layer_kind != chat
  Tensor w_out;  // K x D
  Tensor b_out;  // 1 x K

  /// Every trainable tensor with a stable dotted name, in a fixed order.
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
  /// Deep copy; the copy's parameters are fresh tensors.
  ChatGnnModel clone() const;
};

/// Glorot-uniform weights, zero biases, layer norm at identity. Deterministic
/// in the generator state.
ChatGnnModel init_model(const ModelConfig& cfg, Rng& rng);
/// Same, seeded from cfg.seed.
ChatGnnModel init_model(const ModelConfig& cfg);

/// Edge arrays prepared once per graph. `reverse_edges` is set for directed graphs.
struct PropagationGraph {
  EdgeArrays edges;
  std::optional<EdgeArrays> reverse_edges;

  static PropagationGraph from(const Graph& g);
};

/// Per-layer intermediates, captured on request.
struct ForwardTrace {
  std::vector<Tensor> hidden;  // h^0 .. h^L
  std::vector<Tensor> betas;   // E x D channel weights per chat layer
};

/// Logits z = W_out h^L + b_out (no softmax).
Tensor model_forward(const ChatGnnModel& m, const Tensor& x, const PropagationGraph& g,
                     ForwardTrace* trace = nullptr);
Tensor model_forward(const ChatGnnModel& m, const Tensor& x, const EdgeArrays& e);

// ---- checkpoints ---------------------------------------------------------

inline constexpr std::string_view kCheckpointFormat = "chatgnn-checkpoint";
inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_string(const ChatGnnModel& m);
/// Throws FormatError on malformed, truncated, or mismatched documents.
ChatGnnModel checkpoint_from_string(std::string_view text);

void save_checkpoint(const ChatGnnModel& m, const std::filesystem::path& path);
ChatGnnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace chatgnn
