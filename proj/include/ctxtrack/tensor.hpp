// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctxtrack {

// The whole library is compiled once per scalar type. The f64 build exists for
// gradient checking against finite differences.
#if defined(CTXTRACK_F64)
using Scalar = double;
#else
using Scalar = float;
#endif

using Shape = std::vector<std::int64_t>;

class ShapeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
    Shape shape;
    std::vector<Scalar> data;
    std::vector<Scalar> grad;  // empty until a gradient reaches this tensor
    bool requires_grad = false;
    bool is_leaf = true;
};

/// Dense row-major tensor handle. Copies share storage; use clone() for a deep copy.
class Tensor {
  public:
    Tensor();
    explicit Tensor(Shape shape, Scalar fill = Scalar(0));
    Tensor(Shape shape, std::vector<Scalar> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor ones(Shape shape) { return Tensor(std::move(shape), Scalar(1)); }
    static Tensor scalar(Scalar v) { return Tensor(Shape{}, std::vector<Scalar>{v}); }
    static Tensor from(Shape shape, std::initializer_list<double> values);

    const Shape& shape() const { return impl_->shape; }
    std::int64_t dim(int i) const;
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }
    bool empty() const { return impl_->data.empty(); }

    std::span<Scalar> data() & { return impl_->data; }
    std::span<const Scalar> data() const& { return impl_->data; }
    /// Copies out of a temporary, so `t.grad().data()` stays valid in a range-for.
    std::vector<Scalar> data() const&& { return impl_->data; }
    Scalar* ptr() { return impl_->data.data(); }
    const Scalar* ptr() const { return impl_->data.data(); }
    Scalar item() const;
    Scalar at(std::int64_t i) const { return impl_->data[static_cast<std::size_t>(i)]; }
    Scalar at(std::int64_t r, std::int64_t c) const;

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool on = true);
    bool has_grad() const { return !impl_->grad.empty(); }
    /// Gradient as a fresh tensor (zeros when none accumulated).
    Tensor grad() const;
    std::span<const Scalar> grad_data() const { return impl_->grad; }
    void zero_grad() { impl_->grad.clear(); }

    Tensor clone() const;
    /// Same values, cut from any recorded graph.
    Tensor detach() const;
    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  private:
    std::shared_ptr<TensorImpl> impl_;
};

bool all_finite(std::span<const Scalar> values);

}  // namespace ctxtrack
