#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "chatgnn/tensor.hpp"

namespace chatgnn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;   // flat index over all probed entries
  std::size_t entries_checked = 0;
  bool finite = true;
  bool passed = false;
};

inline constexpr double kFiniteDifferenceStep = 1e-5;

/// Compares the tape gradient of a scalar-valued `f` against central
/// differences, perturbing every entry of every tensor in `params`.
///
/// The error per entry is |analytic - numeric| / max(1, |analytic|, |numeric|),
/// i.e. relative for large gradients and absolute near zero. `f` must rebuild
/// its graph on each call; the active tape is cleared around the check.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           double tol, double step = kFiniteDifferenceStep);

/// Single-input convenience form: `f` receives `at` (with requires_grad set).
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor at, double tol,
                           double step = kFiniteDifferenceStep);

inline constexpr double kGradCheckTolerance = 1e-4;
/// Tighter bound for element-wise operations.
inline constexpr double kElementwiseGradCheckTolerance = 1e-5;

/// Outcome of one operation over many random instances.
struct GradCheckCaseResult {
  std::string name;
  double tolerance = 0.0;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double worst_error = 0.0;
  /// Draws rejected for lying within reach of a relu kink or a near-constant
  /// layer-norm row.
  std::size_t redraws = 0;

  bool passed() const noexcept { return failures == 0; }
};

/// Checks every differentiable operation, every layer and the end-to-end
/// model on `instances` random inputs each (random graphs with at most 8
/// nodes). Deterministic in `seed`.
std::vector<GradCheckCaseResult> run_gradcheck_suite(std::size_t instances, std::uint64_t seed);

}  // namespace chatgnn
