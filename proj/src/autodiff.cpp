#include "chatgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include "chatgnn/errors.hpp"

namespace chatgnn {
namespace {

thread_local Tape tls_tape;
thread_local bool tls_recording = true;
thread_local SmoothnessProbe* tls_probe = nullptr;

void probe_kinks(const Tensor& a) {
  if (tls_probe == nullptr) return;
  for (Real x : a.data()) tls_probe->note_kink_distance(std::abs(x));
}

template <class Fn>
void record_if_needed(std::vector<Tensor> inputs, Tensor& out, Fn&& fn) {
  if (!tls_recording) return;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return;
  out.set_requires_grad(true);
  tls_tape.record(std::move(inputs), out, std::forward<Fn>(fn));
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                       b.shape_string());
}

void check_indices(const char* op, std::span<const std::size_t> idx, std::size_t n) {
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n) {
      throw IndexError(std::string(op) + ": index " + std::to_string(idx[i]) + " at position " +
                       std::to_string(i) + " out of range [0, " + std::to_string(n) + ")");
    }
  }
}

template <class Fwd, class Deriv>
Tensor unary_elementwise(const Tensor& a, Fwd fwd, Deriv deriv) {
  Tensor out(a.rows(), a.cols());
  auto x = a.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  record_if_needed({a}, out, [a, out, deriv]() mutable {
    if (!a.requires_grad()) return;
    auto x = a.data();
    auto y = out.data();
    auto gy = out.grad();
    auto gx = a.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * deriv(x[i], y[i]);
  });
  return out;
}

}  // namespace

void Tape::record(std::vector<Tensor> inputs, Tensor output, std::function<void()> backward) {
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("backward: loss must be 1x1, got " + loss.shape_string());
  }
  for (auto& node : nodes_) node.output.zero_grad();
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

Tape& active_tape() { return tls_tape; }

NoGradGuard::NoGradGuard() : previous_(tls_recording) { tls_recording = false; }
NoGradGuard::~NoGradGuard() { tls_recording = previous_; }

SmoothnessProbe::SmoothnessProbe() : previous_(tls_probe) { tls_probe = this; }
SmoothnessProbe::~SmoothnessProbe() { tls_probe = previous_; }

void SmoothnessProbe::note_kink_distance(double d) noexcept {
  min_kink_distance_ = std::min(min_kink_distance_, d);
}

void SmoothnessProbe::note_layer_norm_variance(double v) noexcept {
  min_layer_norm_variance_ = std::min(min_layer_norm_variance_, v);
}

bool grad_recording_enabled() noexcept { return tls_recording; }

void backward(const Tensor& loss) { tls_tape.backward(loss); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out(m, n);
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) C[i * n + j] += aip * B[p * n + j];
    }
  }
  record_if_needed({a, b}, out, [a, b, out, m, k, n]() mutable {
    auto A = a.data();
    auto B = b.data();
    auto dC = out.grad();
    if (a.requires_grad()) {
      auto dA = a.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          Real acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += dC[i * n + j] * B[p * n + j];
          dA[i * k + p] += acc;
        }
    }
    if (b.requires_grad()) {
      auto dB = b.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const Real aip = A[i * k + p];
          for (std::size_t j = 0; j < n; ++j) dB[p * n + j] += aip * dC[i * n + j];
        }
    }
  });
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight) {
  if (x.cols() != weight.cols()) shape_mismatch("linear", x, weight);
  const std::size_t n = x.rows(), in = x.cols(), outw = weight.rows();
  Tensor out(n, outw);
  auto X = x.data();
  auto W = weight.data();
  auto Y = out.data();
  // Column indices of the non-zero entries of each row of x, so sparse
  // bag-of-words inputs skip their zeros. Sums keep ascending-k order.
  std::vector<std::size_t> nz_ptr(n + 1, 0), nz_col;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < in; ++k)
      if (X[i * in + k] != 0.0) nz_col.push_back(k);
    nz_ptr[i + 1] = nz_col.size();
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < outw; ++o) {
      Real acc = 0.0;
      for (std::size_t q = nz_ptr[i]; q < nz_ptr[i + 1]; ++q)
        acc += X[i * in + nz_col[q]] * W[o * in + nz_col[q]];
      Y[i * outw + o] = acc;
    }
  record_if_needed({x, weight}, out, [x, weight, out, n, in, outw, nz_ptr = std::move(nz_ptr),
                                      nz_col = std::move(nz_col)]() mutable {
    auto X = x.data();
    auto W = weight.data();
    auto dY = out.grad();
    if (x.requires_grad()) {
      auto dX = x.grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < outw; ++o) {
          const Real g = dY[i * outw + o];
          if (g == 0.0) continue;
          for (std::size_t k = 0; k < in; ++k) dX[i * in + k] += g * W[o * in + k];
        }
    }
    if (weight.requires_grad()) {
      auto dW = weight.grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < outw; ++o) {
          const Real g = dY[i * outw + o];
          if (g == 0.0) continue;
          for (std::size_t q = nz_ptr[i]; q < nz_ptr[i + 1]; ++q)
            dW[o * in + nz_col[q]] += g * X[i * in + nz_col[q]];
        }
    }
  });
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add(linear(x, weight), bias);
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = a(i, j);
  record_if_needed({a}, out, [a, out, r, c]() mutable {
    if (!a.requires_grad()) return;
    auto ga = a.grad();
    auto go = out.grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[j * r + i];
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool bias_row = b.rows() == 1 && b.cols() == a.cols() && a.rows() != 1;
  if (!a.same_shape(b) && !bias_row) shape_mismatch("add", a, b);
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out(r, c);
  auto A = a.data();
  auto B = b.data();
  auto Y = out.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      Y[i * c + j] = A[i * c + j] + (bias_row ? B[j] : B[i * c + j]);
  record_if_needed({a, b}, out, [a, b, out, r, c, bias_row]() mutable {
    auto dY = out.grad();
    if (a.requires_grad()) {
      auto dA = a.grad();
      for (std::size_t i = 0; i < dY.size(); ++i) dA[i] += dY[i];
    }
    if (b.requires_grad()) {
      auto dB = b.grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dB[bias_row ? j : i * c + j] += dY[i * c + j];
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_mismatch("sub", a, b);
  Tensor out(a.rows(), a.cols());
  auto A = a.data();
  auto B = b.data();
  auto Y = out.data();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = A[i] - B[i];
  record_if_needed({a, b}, out, [a, b, out]() mutable {
    auto dY = out.grad();
    if (a.requires_grad()) {
      auto dA = a.grad();
      for (std::size_t i = 0; i < dY.size(); ++i) dA[i] += dY[i];
    }
    if (b.requires_grad()) {
      auto dB = b.grad();
      for (std::size_t i = 0; i < dY.size(); ++i) dB[i] -= dY[i];
    }
  });
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_mismatch("hadamard", a, b);
  Tensor out(a.rows(), a.cols());
  auto A = a.data();
  auto B = b.data();
  auto Y = out.data();
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = A[i] * B[i];
  record_if_needed({a, b}, out, [a, b, out]() mutable {
    auto A = a.data();
    auto B = b.data();
    auto dY = out.grad();
    if (a.requires_grad()) {
      auto dA = a.grad();
      for (std::size_t i = 0; i < dY.size(); ++i) dA[i] += dY[i] * B[i];
    }
    if (b.requires_grad()) {
      auto dB = b.grad();
      for (std::size_t i = 0; i < dY.size(); ++i) dB[i] += dY[i] * A[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& a, Real c) {
  return unary_elementwise(
      a, [c](Real x) { return c * x; }, [c](Real, Real) { return c; });
}

Tensor mul_rows(const Tensor& a, const Tensor& s) {
  if (s.rows() != a.rows() || s.cols() != 1) shape_mismatch("mul_rows", a, s);
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    const Real f = s(i, 0);
    for (std::size_t j = 0; j < c; ++j) out(i, j) = a(i, j) * f;
  }
  record_if_needed({a, s}, out, [a, s, out, r, c]() mutable {
    auto A = a.data();
    auto S = s.data();
    auto dY = out.grad();
    if (a.requires_grad()) {
      auto dA = a.grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dA[i * c + j] += dY[i * c + j] * S[i];
    }
    if (s.requires_grad()) {
      auto dS = s.grad();
      for (std::size_t i = 0; i < r; ++i) {
        Real acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += dY[i * c + j] * A[i * c + j];
        dS[i] += acc;
      }
    }
  });
  return out;
}

Tensor sum(const Tensor& a) {
  Real total = 0.0;
  for (Real x : a.data()) total += x;
  Tensor out = Tensor::scalar(total);
  record_if_needed({a}, out, [a, out]() mutable {
    if (!a.requires_grad()) return;
    const Real g = out.grad()[0];
    for (Real& x : a.grad()) x += g;
  });
  return out;
}

Tensor tanh(const Tensor& a) {
  return unary_elementwise(
      a, [](Real x) { return std::tanh(x); }, [](Real, Real y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  probe_kinks(a);
  return unary_elementwise(
      a, [](Real x) { return x > 0.0 ? x : 0.0; },
      [](Real x, Real) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, Real negative_slope) {
  probe_kinks(a);
  return unary_elementwise(
      a, [negative_slope](Real x) { return x > 0.0 ? x : negative_slope * x; },
      [negative_slope](Real x, Real) { return x > 0.0 ? 1.0 : negative_slope; });
}

Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, Real eps) {
  const std::size_t n = a.rows(), d = a.cols();
  if (gamma.rows() != 1 || gamma.cols() != d) shape_mismatch("layer_norm(gamma)", a, gamma);
  if (beta.rows() != 1 || beta.cols() != d) shape_mismatch("layer_norm(beta)", a, beta);
  if (d == 0) throw DimensionError("layer_norm: zero-width input");
  Tensor out(n, d);
  auto x_hat = std::make_shared<std::vector<Real>>(n * d);
  auto inv_std = std::make_shared<std::vector<Real>>(n);
  auto G = gamma.data();
  auto B = beta.data();
  for (std::size_t i = 0; i < n; ++i) {
    auto x = a.row(i);
    Real mean = 0.0;
    for (Real v : x) mean += v;
    mean /= static_cast<Real>(d);
    Real var = 0.0;
    for (Real v : x) var += (v - mean) * (v - mean);
    var /= static_cast<Real>(d);
    if (tls_probe != nullptr) tls_probe->note_layer_norm_variance(var);
    const Real inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const Real xh = (x[j] - mean) * inv;
      (*x_hat)[i * d + j] = xh;
      out(i, j) = G[j] * xh + B[j];
    }
  }
  record_if_needed({a, gamma, beta}, out, [a, gamma, beta, out, x_hat, inv_std, n, d]() mutable {
    auto dY = out.grad();
    auto G = gamma.data();
    const auto& XH = *x_hat;
    if (gamma.requires_grad()) {
      auto dG = gamma.grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) dG[j] += dY[i * d + j] * XH[i * d + j];
    }
    if (beta.requires_grad()) {
      auto dB = beta.grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) dB[j] += dY[i * d + j];
    }
    if (a.requires_grad()) {
      auto dA = a.grad();
      const Real inv_d = 1.0 / static_cast<Real>(d);
      for (std::size_t i = 0; i < n; ++i) {
        Real sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const Real g = dY[i * d + j] * G[j];
          sum_g += g;
          sum_gx += g * XH[i * d + j];
        }
        const Real inv = (*inv_std)[i];
        for (std::size_t j = 0; j < d; ++j) {
          const Real g = dY[i * d + j] * G[j];
          dA[i * d + j] += inv * (g - inv_d * sum_g - XH[i * d + j] * inv_d * sum_gx);
        }
      }
    }
  });
  return out;
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> idx) {
  check_indices("gather_rows", idx, a.rows());
  const std::size_t d = a.cols();
  Tensor out(idx.size(), d);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = a.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  record_if_needed({a}, out,
                   [a, out, index = std::vector<std::size_t>(idx.begin(), idx.end()), d]() mutable {
                     if (!a.requires_grad()) return;
                     auto dA = a.grad();
                     auto dY = out.grad();
                     for (std::size_t i = 0; i < index.size(); ++i)
                       for (std::size_t j = 0; j < d; ++j) dA[index[i] * d + j] += dY[i * d + j];
                   });
  return out;
}

Tensor scatter_add_rows(const Tensor& src, std::span<const std::size_t> idx, std::size_t n) {
  if (src.rows() != idx.size()) {
    throw DimensionError("scatter_add_rows: " + std::to_string(idx.size()) +
                         " indices for source " + src.shape_string());
  }
  check_indices("scatter_add_rows", idx, n);
  const std::size_t d = src.cols();
  Tensor out(n, d);
  auto S = src.data();
  auto Y = out.data();
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) Y[idx[i] * d + j] += S[i * d + j];
  record_if_needed(
      {src}, out, [src, out, index = std::vector<std::size_t>(idx.begin(), idx.end()), d]() mutable {
        if (!src.requires_grad()) return;
        auto dS = src.grad();
        auto dY = out.grad();
        for (std::size_t i = 0; i < index.size(); ++i)
          for (std::size_t j = 0; j < d; ++j) dS[i * d + j] += dY[index[i] * d + j];
      });
  return out;
}

Tensor segment_softmax(const Tensor& scores, std::span<const std::size_t> segment,
                       std::size_t num_segments) {
  if (scores.cols() != 1 || scores.rows() != segment.size()) {
    throw DimensionError("segment_softmax: scores " + scores.shape_string() + " with " +
                         std::to_string(segment.size()) + " segment ids");
  }
  check_indices("segment_softmax", segment, num_segments);
  const std::size_t e = segment.size();
  std::vector<Real> seg_max(num_segments, -std::numeric_limits<Real>::infinity());
  std::vector<Real> seg_sum(num_segments, 0.0);
  auto S = scores.data();
  for (std::size_t i = 0; i < e; ++i) seg_max[segment[i]] = std::max(seg_max[segment[i]], S[i]);
  Tensor out(e, 1);
  auto Y = out.data();
  for (std::size_t i = 0; i < e; ++i) {
    Y[i] = std::exp(S[i] - seg_max[segment[i]]);
    seg_sum[segment[i]] += Y[i];
  }
  for (std::size_t i = 0; i < e; ++i) Y[i] /= seg_sum[segment[i]];
  record_if_needed({scores}, out,
                   [scores, out, seg = std::vector<std::size_t>(segment.begin(), segment.end()),
                    num_segments]() mutable {
                     if (!scores.requires_grad()) return;
                     auto Y = out.data();
                     auto dY = out.grad();
                     auto dS = scores.grad();
                     std::vector<Real> dot(num_segments, 0.0);
                     for (std::size_t i = 0; i < seg.size(); ++i) dot[seg[i]] += Y[i] * dY[i];
                     for (std::size_t i = 0; i < seg.size(); ++i)
                       dS[i] += Y[i] * (dY[i] - dot[seg[i]]);
                   });
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels,
                             std::span<const std::size_t> mask) {
  if (mask.empty()) throw std::invalid_argument("softmax_cross_entropy: empty mask");
  if (labels.size() != logits.rows()) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + logits.shape_string());
  }
  check_indices("softmax_cross_entropy(mask)", mask, logits.rows());
  const std::size_t k = logits.cols();
  for (std::size_t r : mask) {
    if (labels[r] >= k) {
      throw IndexError("softmax_cross_entropy: label " + std::to_string(labels[r]) +
                       " of node " + std::to_string(r) + " out of range for " +
                       std::to_string(k) + " classes");
    }
  }
  // Softmax probabilities of masked rows, kept for the backward pass.
  auto probs = std::make_shared<std::vector<Real>>(mask.size() * k);
  Real total = 0.0;
  for (std::size_t m = 0; m < mask.size(); ++m) {
    auto z = logits.row(mask[m]);
    const Real zmax = *std::max_element(z.begin(), z.end());
    Real denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const Real e = std::exp(z[c] - zmax);
      (*probs)[m * k + c] = e;
      denom += e;
    }
    for (std::size_t c = 0; c < k; ++c) (*probs)[m * k + c] /= denom;
    total += -(z[labels[mask[m]]] - zmax - std::log(denom));
  }
  const Real inv_count = 1.0 / static_cast<Real>(mask.size());
  Tensor out = Tensor::scalar(total * inv_count);
  record_if_needed({logits}, out,
                   [logits, out, probs, k, inv_count,
                    rows = std::vector<std::size_t>(mask.begin(), mask.end()),
                    targets = std::vector<std::size_t>(labels.begin(), labels.end())]() mutable {
                     if (!logits.requires_grad()) return;
                     const Real g = out.grad()[0] * inv_count;
                     auto dZ = logits.grad();
                     for (std::size_t m = 0; m < rows.size(); ++m) {
                       const std::size_t r = rows[m];
                       for (std::size_t c = 0; c < k; ++c) {
                         const Real onehot = c == targets[r] ? 1.0 : 0.0;
                         dZ[r * k + c] += g * ((*probs)[m * k + c] - onehot);
                       }
                     }
                   });
  return out;
}

}  // namespace chatgnn
