// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/autograd.hpp"

#include <cassert>

namespace ctxtrack {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) throw ShapeError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    visited_ = 0;
    auto& root = *loss.impl();
    if (!root.requires_grad) return;
    auto& seed = detail::grad_buffer(root);
    seed[0] += Scalar(1);

    // Nodes were appended in execution order, which is a topological order.
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output->grad.empty()) continue;
        it->backward();
        ++visited_;
        if (!it->output->is_leaf) {
            it->output->grad.clear();
            it->output->grad.shrink_to_fit();
        }
    }
    // The loss itself is a recorded output; release its seed as well.
    if (!root.is_leaf) root.grad.clear();
}

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (g_active_tape == nullptr) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

Tensor make_output(Shape shape, bool records) {
    Tensor out(std::move(shape));
    if (records) {
        out.impl()->requires_grad = true;
        out.impl()->is_leaf = false;
    }
    return out;
}

std::vector<Scalar>& grad_buffer(TensorImpl& impl) {
    if (impl.grad.empty()) impl.grad.assign(impl.data.size(), Scalar(0));
    return impl.grad;
}

void check_finite([[maybe_unused]] const char* op, [[maybe_unused]] const Tensor& t) {
#if defined(CTXTRACK_CHECK_NUMERICS)
    if (!all_finite(t.data())) throw NumericError(std::string("non-finite value produced by ") + op);
#endif
}

}  // namespace detail

}  // namespace ctxtrack
