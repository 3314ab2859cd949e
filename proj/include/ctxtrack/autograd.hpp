// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ctxtrack/tensor.hpp"

namespace ctxtrack {

/// Records differentiable ops in execution order (tape style). A fresh tape is
/// used for every forward pass; the tape is never replayed.
class Tape {
  public:
    struct Node {
        const char* op = "";
        std::vector<std::shared_ptr<TensorImpl>> inputs;
        std::shared_ptr<TensorImpl> output;
        std::function<void()> backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(Node node) { nodes_.push_back(std::move(node)); }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }

    /// Reverse sweep from a scalar loss. Leaves with requires_grad end up
    /// holding dLoss/dLeaf (accumulated onto any existing grad); intermediate
    /// gradients are released afterwards.
    void backward(const Tensor& loss);

    /// Number of nodes whose backward ran in the last sweep.
    std::size_t last_visit_count() const { return visited_; }

    void clear() { nodes_.clear(); }

  private:
    std::vector<Node> nodes_;
    std::size_t visited_ = 0;
};

/// The tape new ops record onto for the current thread, or nullptr.
Tape* active_tape();

/// Makes `tape` the active tape for this thread for the scope's lifetime.
class TapeScope {
  public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* previous_;
};

/// Suspends recording for the scope's lifetime.
class NoGradScope {
  public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

  private:
    Tape* previous_;
};

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs);
Tensor make_output(Shape shape, bool records);
std::vector<Scalar>& grad_buffer(TensorImpl& impl);
void check_finite(const char* op, const Tensor& t);

}  // namespace detail

}  // namespace ctxtrack
