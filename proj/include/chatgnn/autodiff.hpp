#pragma once

// Define-by-run reverse-mode differentiation over dense 2-D tensors.
//
// Every op below computes its result eagerly. When at least one input
// requires a gradient (and recording is enabled), the op appends a node to
// the thread's active tape; backward() replays those nodes in exact reverse
// recording order. Callers clear the tape before each forward pass.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "chatgnn/tensor.hpp"

namespace chatgnn {

class Tape {
 public:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
  };

  void record(std::vector<Tensor> inputs, Tensor output, std::function<void()> backward);
  void clear() noexcept { nodes_.clear(); }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  /// Seeds d(loss) = 1 and propagates through every recorded node in reverse.
  /// Gradients of tape outputs are reset first, so repeated calls accumulate
  /// only into leaf tensors.
  void backward(const Tensor& loss);

 private:
  std::vector<Node> nodes_;
};

/// The calling thread's tape.
Tape& active_tape();

/// Disables recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_recording_enabled() noexcept;

/// While alive, records on the current thread the smallest |input| seen by
/// relu / leaky_relu and the smallest row variance seen by layer_norm.
/// Finite-difference checks use it to reject points near non-smooth regions.
class SmoothnessProbe {
 public:
  SmoothnessProbe();
  ~SmoothnessProbe();
  SmoothnessProbe(const SmoothnessProbe&) = delete;
  SmoothnessProbe& operator=(const SmoothnessProbe&) = delete;

  double min_kink_distance() const noexcept { return min_kink_distance_; }
  double min_layer_norm_variance() const noexcept { return min_layer_norm_variance_; }
  void note_kink_distance(double d) noexcept;
  void note_layer_norm_variance(double v) noexcept;

 private:
  SmoothnessProbe* previous_;
  double min_kink_distance_ = std::numeric_limits<double>::infinity();
  double min_layer_norm_variance_ = std::numeric_limits<double>::infinity();
};

/// backward() on the active tape. Throws std::invalid_argument unless loss is 1x1.
void backward(const Tensor& loss);

// ---- linear algebra ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// x * W^T, optionally plus a 1xout bias row.
Tensor linear(const Tensor& x, const Tensor& weight);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor transpose(const Tensor& a);

// ---- element-wise --------------------------------------------------------

/// Same-shape add, or n x d plus a 1 x d bias row.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real c);
/// Multiplies row i of `a` (n x d) by `s(i, 0)` where `s` is n x 1.
Tensor mul_rows(const Tensor& a, const Tensor& s);
/// Sum of all entries, as a 1x1 tensor.
Tensor sum(const Tensor& a);

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, Real negative_slope);

inline constexpr Real kLayerNormEps = 1e-5;

/// Per-row normalisation with biased variance, then gamma * x_hat + beta.
Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                  Real eps = kLayerNormEps);

// ---- sparse row movement -------------------------------------------------

/// out.row(i) = a.row(idx[i]). Backward scatter-adds.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> idx);
/// out.row(j) = sum of src.row(i) over idx[i] == j; out has n rows.
Tensor scatter_add_rows(const Tensor& src, std::span<const std::size_t> idx, std::size_t n);
/// Softmax of the e x 1 `scores` within each group of equal `segment[i]`.
Tensor segment_softmax(const Tensor& scores, std::span<const std::size_t> segment,
                       std::size_t num_segments);

// ---- loss ----------------------------------------------------------------

/// Mean over `mask` rows of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels,
                             std::span<const std::size_t> mask);

}  // namespace chatgnn
