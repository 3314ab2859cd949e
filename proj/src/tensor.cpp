// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/tensor.hpp"

#include <cmath>
#include <sstream>

namespace ctxtrack {

std::int64_t numel_of(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) { impl_->shape = {0}; }

Tensor::Tensor(Shape shape, Scalar fill) : impl_(std::make_shared<TensorImpl>()) {
    const auto n = numel_of(shape);
    impl_->shape = std::move(shape);
    impl_->data.assign(static_cast<std::size_t>(n), fill);
}

Tensor::Tensor(Shape shape, std::vector<Scalar> data) : impl_(std::make_shared<TensorImpl>()) {
    if (numel_of(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> values) {
    std::vector<Scalar> data;
    data.reserve(values.size());
    for (double v : values) data.push_back(static_cast<Scalar>(v));
    return Tensor(std::move(shape), std::move(data));
}

std::int64_t Tensor::dim(int i) const {
    const int r = rank();
    if (i < 0) i += r;
    if (i < 0 || i >= r) throw ShapeError("dim index out of range for shape " + shape_str(shape()));
    return impl_->shape[static_cast<std::size_t>(i)];
}

Scalar Tensor::item() const {
    if (impl_->data.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

Scalar Tensor::at(std::int64_t r, std::int64_t c) const {
    return impl_->data[static_cast<std::size_t>(r * impl_->shape.back() + c)];
}

Tensor& Tensor::set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
}

Tensor Tensor::grad() const {
    if (impl_->grad.empty()) return Tensor(impl_->shape);
    return Tensor(impl_->shape, impl_->grad);
}

Tensor Tensor::clone() const {
    Tensor t(impl_->shape, impl_->data);
    t.impl_->requires_grad = impl_->requires_grad;
    return t;
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data); }

bool all_finite(std::span<const Scalar> values) {
    for (Scalar v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace ctxtrack
