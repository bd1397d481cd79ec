#include "chatgnn/tensor.hpp"

#include <algorithm>

#include "chatgnn/errors.hpp"

namespace chatgnn {

Tensor::Tensor() : impl_(std::make_shared<Storage>()) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, Real fill)
    : impl_(std::make_shared<Storage>()) {
  impl_->rows = rows;
  impl_->cols = cols;
  impl_->data.assign(rows * cols, fill);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<Real> values)
    : impl_(std::make_shared<Storage>()) {
  if (values.size() != rows * cols) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  impl_->rows = rows;
  impl_->cols = cols;
  impl_->data = std::move(values);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<Real>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<Real> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged row list");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(values));
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows()) + "x" + std::to_string(cols()) + "]";
}

Real Tensor::item() const {
  if (rows() != 1 || cols() != 1) {
    throw DimensionError("item() requires a 1x1 tensor, got " + shape_string());
  }
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

std::span<Real> Tensor::grad() {
  if (impl_->grad.size() != impl_->data.size()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

std::span<Real> Tensor::grad() const {
  if (impl_->grad.size() != impl_->data.size()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const { return Tensor(rows(), cols(), impl_->data); }

bool Tensor::values_equal(const Tensor& other) const noexcept {
  return same_shape(other) && impl_->data == other.impl_->data;
}

}  // namespace chatgnn
