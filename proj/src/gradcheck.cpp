#include "chatgnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "chatgnn/autodiff.hpp"

namespace chatgnn {

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           double tol, double step) {
  GradCheckReport report;
  auto& tape = active_tape();
  tape.clear();
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }

  std::vector<std::vector<Real>> analytic;
  {
    Tensor y = f();
    if (!std::isfinite(y.item())) {
      report.finite = false;
      tape.clear();
      return report;
    }
    tape.backward(y);
    tape.clear();
    for (auto& p : params) {
      auto g = p.grad();
      analytic.emplace_back(g.begin(), g.end());
      p.zero_grad();
    }
  }

  NoGradGuard no_grad;
  std::size_t flat = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto values = params[t].data();
    for (std::size_t i = 0; i < values.size(); ++i, ++flat) {
      const Real saved = values[i];
      values[i] = saved + step;
      const Real up = f().item();
      values[i] = saved - step;
      const Real down = f().item();
      values[i] = saved;
      const Real numeric = (up - down) / (2.0 * step);
      const Real a = analytic[t][i];
      if (!std::isfinite(numeric) || !std::isfinite(a)) {
        report.finite = false;
        continue;
      }
      const Real err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_index = flat;
      }
      ++report.entries_checked;
    }
  }
  report.passed = report.finite && report.max_rel_error <= tol;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor at, double tol,
                           double step) {
  return grad_check([&f, at]() { return f(at); }, {at}, tol, step);
}

}  // namespace chatgnn
