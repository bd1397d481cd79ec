#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace chatgnn {

using Real = double;

/// Dense row-major matrix with an optional gradient buffer.
///
/// A Tensor is a cheap handle: copies share the same storage, the way a
/// parameter held by a model and the same parameter referenced from the
/// tape must be the same object. Use clone() for an independent copy.
class Tensor {
 public:
  Tensor();
  Tensor(std::size_t rows, std::size_t cols, Real fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<Real> values);

  static Tensor from_rows(std::initializer_list<std::initializer_list<Real>> rows);
  static Tensor scalar(Real value) { return Tensor(1, 1, value); }

  std::size_t rows() const noexcept { return impl_->rows; }
  std::size_t cols() const noexcept { return impl_->cols; }
  std::size_t size() const noexcept { return impl_->data.size(); }
  std::string shape_string() const;
  bool same_shape(const Tensor& other) const noexcept {
    return rows() == other.rows() && cols() == other.cols();
  }

  std::span<Real> data() noexcept { return impl_->data; }
  std::span<const Real> data() const noexcept { return impl_->data; }
  std::span<Real> row(std::size_t r) noexcept { return data().subspan(r * cols(), cols()); }
  std::span<const Real> row(std::size_t r) const noexcept {
    return data().subspan(r * cols(), cols());
  }

  Real& operator()(std::size_t r, std::size_t c) noexcept { return impl_->data[r * cols() + c]; }
  Real operator()(std::size_t r, std::size_t c) const noexcept {
    return impl_->data[r * cols() + c];
  }

  /// Value of a 1x1 tensor; throws DimensionError otherwise.
  Real item() const;

  bool requires_grad() const noexcept { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag = true);

  bool has_grad() const noexcept { return !impl_->grad.empty(); }
  /// Gradient buffer; allocated (zero-filled) on first access.
  std::span<Real> grad();
  /// Handles share storage, so a const handle still exposes a writable
  /// gradient buffer.
  std::span<Real> grad() const;
  void zero_grad();

  /// Deep copy of the values; the copy carries no gradient and is not tracked.
  Tensor clone() const;

  bool shares_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }
  bool values_equal(const Tensor& other) const noexcept;

 private:
  struct Storage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Real> data;
    std::vector<Real> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> impl_;
};

}  // namespace chatgnn
