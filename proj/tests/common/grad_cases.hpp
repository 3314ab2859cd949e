// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

// Finite-difference gradient cases shared by the unit and acceptance suites.
// Each case builds an input and a scalar function of it from a seed; the
// function weights its output with fixed random coefficients so that no
// gradient is trivially constant.

#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "ctxtrack/autograd.hpp"
#include "ctxtrack/encoder.hpp"
#include "ctxtrack/gradcheck.hpp"
#include "ctxtrack/head.hpp"
#include "ctxtrack/loss.hpp"
#include "ctxtrack/ops.hpp"
#include "ctxtrack/tcm.hpp"

namespace ctxtrack::testing {

using ScalarFn = std::function<Tensor(const Tensor&)>;

struct GradCase {
    std::string name;
    /// Draws the input and returns the function to differentiate.
    std::function<std::pair<Tensor, ScalarFn>(Rng&)> make;
};

inline void PrintTo(const GradCase& c, std::ostream* os) { *os << c.name; }

inline Tensor normal(Shape s, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(s));
    for (auto& v : t.data()) v = static_cast<Scalar>(scale * rng.normal());
    return t;
}

inline Tensor uniform(Shape s, Rng& rng, double lo, double hi) {
    Tensor t(std::move(s));
    for (auto& v : t.data()) v = static_cast<Scalar>(rng.uniform(lo, hi));
    return t;
}

/// Values kept at least `gap` away from every point in `kinks`.
inline Tensor away_from(Shape s, Rng& rng, std::vector<double> kinks, double gap = 0.05) {
    Tensor t(std::move(s));
    for (auto& v : t.data()) {
        double x = 0;
        bool ok = false;
        while (!ok) {
            x = rng.normal();
            ok = true;
            for (double k : kinks) ok = ok && std::abs(x - k) > gap;
        }
        v = static_cast<Scalar>(x);
    }
    return t;
}

inline Tensor weighted_sum(const Tensor& y, const Tensor& w) { return ops::sum(ops::mul(y, w)); }

/// Weighted sum of a unary op's output.
inline GradCase unary_case(std::string name, Shape shape, std::function<Tensor(Shape, Rng&)> draw,
                           std::function<Tensor(const Tensor&)> op) {
    return {name, [=](Rng& rng) {
                Tensor x = draw(shape, rng);
                const Tensor w = normal(shape, rng);
                return std::pair<Tensor, ScalarFn>{x, [=](const Tensor& in) { return weighted_sum(op(in), w); }};
            }};
}

inline std::vector<GradCase> primitive_cases() {
    std::vector<GradCase> c;
    auto gauss = [](Shape s, Rng& r) { return normal(std::move(s), r); };
    auto positive = [](Shape s, Rng& r) { return uniform(std::move(s), r, 0.5, 2.0); };

    c.push_back({"matmul.lhs", [](Rng& r) {
                     const Tensor b = normal({4, 3}, r), w = normal({2, 3}, r);
                     return std::pair<Tensor, ScalarFn>{normal({2, 4}, r), [=](const Tensor& a) {
                                                            return weighted_sum(ops::matmul(a, b), w);
                                                        }};
                 }});
    c.push_back({"matmul.rhs", [](Rng& r) {
                     const Tensor a = normal({2, 4}, r), w = normal({2, 3}, r);
                     return std::pair<Tensor, ScalarFn>{normal({4, 3}, r), [=](const Tensor& b) {
                                                            return weighted_sum(ops::matmul(a, b), w);
                                                        }};
                 }});
    c.push_back({"matmul_nt.lhs", [](Rng& r) {
                     const Tensor b = normal({5, 4}, r), w = normal({3, 5}, r);
                     return std::pair<Tensor, ScalarFn>{normal({3, 4}, r), [=](const Tensor& a) {
                                                            return weighted_sum(ops::matmul_nt(a, b), w);
                                                        }};
                 }});
    c.push_back({"matmul_nt.rhs", [](Rng& r) {
                     const Tensor a = normal({3, 4}, r), w = normal({3, 5}, r);
                     return std::pair<Tensor, ScalarFn>{normal({5, 4}, r), [=](const Tensor& b) {
                                                            return weighted_sum(ops::matmul_nt(a, b), w);
                                                        }};
                 }});
    c.push_back({"transpose", [](Rng& r) {
                     const Tensor w = normal({4, 3}, r);
                     return std::pair<Tensor, ScalarFn>{normal({3, 4}, r), [=](const Tensor& x) {
                                                            return weighted_sum(ops::transpose(x), w);
                                                        }};
                 }});
    c.push_back({"reshape", [](Rng& r) {
                     const Tensor w = normal({6, 2}, r);
                     return std::pair<Tensor, ScalarFn>{normal({3, 4}, r), [=](const Tensor& x) {
                                                            return weighted_sum(ops::reshape(x, {6, 2}), w);
                                                        }};
                 }});
    c.push_back({"concat_rows", [](Rng& r) {
                     const Tensor other = normal({2, 3}, r), w = normal({5, 3}, r);
                     return std::pair<Tensor, ScalarFn>{normal({3, 3}, r), [=](const Tensor& x) {
                                                            const std::vector<Tensor> p{other, x, ops::mul(x, x)};
                                                            return weighted_sum(
                                                                ops::slice_rows(ops::concat_rows(p), 0, 5), w);
                                                        }};
                 }});
    c.push_back({"concat_cols", [](Rng& r) {
                     const Tensor other = normal({3, 2}, r), w = normal({3, 6}, r);
                     return std::pair<Tensor, ScalarFn>{normal({3, 2}, r), [=](const Tensor& x) {
                                                            const std::vector<Tensor> p{x, other, ops::exp(x)};
                                                            return weighted_sum(ops::concat_cols(p), w);
                                                        }};
                 }});
    c.push_back({"slice_rows", [](Rng& r) {
                     const Tensor w = normal({2, 3}, r);
                     return std::pair<Tensor, ScalarFn>{normal({5, 3}, r), [=](const Tensor& x) {
                                                            return weighted_sum(ops::slice_rows(x, 1, 3), w);
                                                        }};
                 }});
    c.push_back({"slice_cols", [](Rng& r) {
                     const Tensor w = normal({4, 2}, r);
                     return std::pair<Tensor, ScalarFn>{normal({4, 5}, r), [=](const Tensor& x) {
                                                            return weighted_sum(ops::slice_cols(x, 2, 4), w);
                                                        }};
                 }});
    c.push_back({"gather_rows", [](Rng& r) {
                     const Tensor w = normal({4, 3}, r);
                     return std::pair<Tensor, ScalarFn>{normal({5, 3}, r), [=](const Tensor& x) {
                                                            const std::int64_t idx[] = {4, 0, 4, 2};
                                                            return weighted_sum(ops::gather_rows(x, idx), w);
                                                        }};
                 }});
    for (const char* op : {"add", "sub", "mul", "div"}) {
        const std::string name = op;
        auto apply = [name](const Tensor& a, const Tensor& b) {
            if (name == "add") return ops::add(a, b);
            if (name == "sub") return ops::sub(a, b);
            if (name == "mul") return ops::mul(a, b);
            return ops::div(a, b);
        };
        c.push_back({name + ".lhs", [apply](Rng& r) {
                         const Tensor b = uniform({3, 4}, r, 0.5, 2.0), w = normal({3, 4}, r);
                         return std::pair<Tensor, ScalarFn>{normal({3, 4}, r), [=](const Tensor& a) {
                                                                return weighted_sum(apply(a, b), w);
                                                            }};
                     }});
        c.push_back({name + ".rhs_broadcast", [apply](Rng& r) {
                         const Tensor a = normal({3, 4}, r), w = normal({3, 4}, r);
                         return std::pair<Tensor, ScalarFn>{uniform({4}, r, 0.5, 2.0), [=](const Tensor& b) {
                                                                return weighted_sum(apply(a, b), w);
                                                            }};
                     }});
    }
    c.push_back(unary_case("add_scalar", {5}, gauss, [](const Tensor& x) { return ops::add_scalar(x, 1.5); }));
    c.push_back(unary_case("mul_scalar", {5}, gauss, [](const Tensor& x) { return ops::mul_scalar(x, -2.5); }));
    c.push_back(unary_case("rsub_scalar", {5}, gauss, [](const Tensor& x) { return ops::rsub_scalar(x, 1.0); }));
    c.push_back(unary_case("exp", {6}, gauss, [](const Tensor& x) { return ops::exp(x); }));
    c.push_back(unary_case("log", {6}, positive, [](const Tensor& x) { return ops::log(x); }));
    c.push_back(unary_case("sqrt", {6}, positive, [](const Tensor& x) { return ops::sqrt(x); }));
    c.push_back(unary_case(
        "abs", {6}, [](Shape s, Rng& r) { return away_from(std::move(s), r, {0.0}); },
        [](const Tensor& x) { return ops::abs(x); }));
    c.push_back(unary_case(
        "relu", {6}, [](Shape s, Rng& r) { return away_from(std::move(s), r, {0.0}); },
        [](const Tensor& x) { return ops::relu(x); }));
    c.push_back(unary_case(
        "clamp", {8}, [](Shape s, Rng& r) { return away_from(std::move(s), r, {-0.5, 0.7}); },
        [](const Tensor& x) { return ops::clamp(x, -0.5, 0.7); }));
    c.push_back(unary_case("gelu", {6}, gauss, [](const Tensor& x) { return ops::gelu(x); }));
    c.push_back(unary_case("sigmoid", {6}, gauss, [](const Tensor& x) { return ops::sigmoid(x); }));
    for (const char* op : {"maximum", "minimum"}) {
        const bool is_max = std::string(op) == "maximum";
        c.push_back({op, [is_max](Rng& r) {
                         // Keep every pair at least 0.05 apart.
                         Tensor other = normal({6}, r);
                         const Tensor w = normal({6}, r);
                         Tensor x = normal({6}, r);
                         for (int i = 0; i < 6; ++i) {
                             if (std::abs(x.at(i) - other.at(i)) < 0.05) x.data()[i] = other.at(i) + 0.1;
                         }
                         return std::pair<Tensor, ScalarFn>{x, [=](const Tensor& in) {
                                                                return weighted_sum(is_max ? ops::maximum(in, other)
                                                                                           : ops::minimum(in, other),
                                                                                    w);
                                                            }};
                     }});
    }
    c.push_back({"sum", [](Rng& r) {
                     return std::pair<Tensor, ScalarFn>{normal({7}, r), [](const Tensor& x) {
                                                            return ops::sum(ops::mul(x, x));
                                                        }};
                 }});
    c.push_back({"mean", [](Rng& r) {
                     return std::pair<Tensor, ScalarFn>{normal({7}, r), [](const Tensor& x) {
                                                            return ops::mean(ops::exp(x));
                                                        }};
                 }});
    c.push_back(unary_case("softmax_rows", {3, 5}, gauss, [](const Tensor& x) { return ops::softmax_rows(x); }));
    c.push_back({"layer_norm.x", [](Rng& r) {
                     const Tensor g = normal({6}, r), b = normal({6}, r), w = normal({3, 6}, r);
                     return std::pair<Tensor, ScalarFn>{normal({3, 6}, r), [=](const Tensor& x) {
                                                            return weighted_sum(ops::layer_norm(x, g, b), w);
                                                        }};
                 }});
    c.push_back({"layer_norm.gamma", [](Rng& r) {
                     const Tensor x = normal({3, 6}, r), b = normal({6}, r), w = normal({3, 6}, r);
                     return std::pair<Tensor, ScalarFn>{normal({6}, r), [=](const Tensor& g) {
                                                            return weighted_sum(ops::layer_norm(x, g, b), w);
                                                        }};
                 }});
    c.push_back({"layer_norm.beta", [](Rng& r) {
                     const Tensor x = normal({3, 6}, r), g = normal({6}, r), w = normal({3, 6}, r);
                     return std::pair<Tensor, ScalarFn>{normal({6}, r), [=](const Tensor& b) {
                                                            return weighted_sum(ops::layer_norm(x, g, b), w);
                                                        }};
                 }});
    c.push_back({"batch_norm.train.x", [](Rng& r) {
                     const Tensor g = normal({2}, r), b = normal({2}, r), w = normal({2, 3, 3}, r);
                     return std::pair<Tensor, ScalarFn>{normal({2, 3, 3}, r), [=](const Tensor& x) {
                                                            ops::BatchNormStats st{Tensor::zeros({2}),
                                                                                   Tensor::ones({2})};
                                                            return weighted_sum(ops::batch_norm(x, g, b, st, true), w);
                                                        }};
                 }});
    c.push_back({"batch_norm.train.gamma", [](Rng& r) {
                     const Tensor x = normal({2, 3, 3}, r), b = normal({2}, r), w = normal({2, 3, 3}, r);
                     return std::pair<Tensor, ScalarFn>{normal({2}, r), [=](const Tensor& g) {
                                                            ops::BatchNormStats st{Tensor::zeros({2}),
                                                                                   Tensor::ones({2})};
                                                            return weighted_sum(ops::batch_norm(x, g, b, st, true), w);
                                                        }};
                 }});
    c.push_back({"batch_norm.eval.x", [](Rng& r) {
                     const Tensor g = normal({2}, r), b = normal({2}, r), w = normal({2, 3, 3}, r);
                     const Tensor mean = normal({2}, r), var = uniform({2}, r, 0.5, 2.0);
                     return std::pair<Tensor, ScalarFn>{normal({2, 3, 3}, r), [=](const Tensor& x) {
                                                            ops::BatchNormStats st{mean, var};
                                                            return weighted_sum(ops::batch_norm(x, g, b, st, false), w);
                                                        }};
                 }});
    c.push_back({"conv2d3x3.x", [](Rng& r) {
                     const Tensor k = normal({3, 2, 3, 3}, r), b = normal({3}, r), w = normal({3, 4, 5}, r);
                     return std::pair<Tensor, ScalarFn>{normal({2, 4, 5}, r), [=](const Tensor& x) {
                                                            return weighted_sum(ops::conv2d(x, k, b), w);
                                                        }};
                 }});
    c.push_back({"conv2d3x3.weight", [](Rng& r) {
                     const Tensor x = normal({2, 4, 5}, r), b = normal({3}, r), w = normal({3, 4, 5}, r);
                     return std::pair<Tensor, ScalarFn>{normal({3, 2, 3, 3}, r), [=](const Tensor& k) {
                                                            return weighted_sum(ops::conv2d(x, k, b), w);
                                                        }};
                 }});
    c.push_back({"conv2d3x3.bias", [](Rng& r) {
                     const Tensor x = normal({2, 4, 5}, r), k = normal({3, 2, 3, 3}, r), w = normal({3, 4, 5}, r);
                     return std::pair<Tensor, ScalarFn>{normal({3}, r), [=](const Tensor& b) {
                                                            return weighted_sum(ops::conv2d(x, k, b), w);
                                                        }};
                 }});
    c.push_back({"conv2d1x1.x", [](Rng& r) {
                     const Tensor k = normal({2, 3, 1, 1}, r), b = normal({2}, r), w = normal({2, 3, 3}, r);
                     return std::pair<Tensor, ScalarFn>{normal({3, 3, 3}, r), [=](const Tensor& x) {
                                                            return weighted_sum(ops::conv2d(x, k, b), w);
                                                        }};
                 }});
    return c;
}

/// Composite cases: box losses, token integration, an attention layer.
inline std::vector<GradCase> composite_cases() {
    std::vector<GradCase> c;
    c.push_back({"giou_loss", [](Rng& r) {
                     const BBox gt{r.uniform(0.1, 0.4), r.uniform(0.1, 0.4), r.uniform(0.2, 0.4), r.uniform(0.2, 0.4)};
                     Tensor p = Tensor::from({4}, {r.uniform(0.05, 0.5), r.uniform(0.05, 0.5), r.uniform(0.15, 0.45),
                                                   r.uniform(0.15, 0.45)});
                     return std::pair<Tensor, ScalarFn>{p, [gt](const Tensor& x) { return giou_loss(x, gt); }};
                 }});
    c.push_back({"focal_loss", [](Rng& r) {
                     const BBox gt{r.uniform(0.1, 0.5), r.uniform(0.1, 0.5), r.uniform(0.2, 0.4), r.uniform(0.2, 0.4)};
                     const auto target = gaussian_target(gt, 4, 4);
                     return std::pair<Tensor, ScalarFn>{uniform({4, 4}, r, 0.05, 0.95), [target](const Tensor& p) {
                                                            return focal_loss(p, target);
                                                        }};
                 }});
    c.push_back({"total_loss", [](Rng& r) {
                     const int rows = 4, cols = 4;
                     const BBox gt{r.uniform(0.1, 0.4), r.uniform(0.1, 0.4), r.uniform(0.25, 0.45),
                                   r.uniform(0.25, 0.45)};
                     const LossWeights weights;
                     // Rows of the input: class logits, offset x/y logits, size w/h logits.
                     return std::pair<Tensor, ScalarFn>{
                         normal({5, rows * cols}, r, 0.7), [=](const Tensor& x) {
                             HeadOutput h;
                             h.rows = rows;
                             h.cols = cols;
                             h.cls = ops::reshape(ops::sigmoid(ops::slice_rows(x, 0, 1)), {rows, cols});
                             h.offset = ops::reshape(ops::sigmoid(ops::slice_rows(x, 1, 3)), {2, rows, cols});
                             h.size = ops::reshape(ops::sigmoid(ops::slice_rows(x, 3, 5)), {2, rows, cols});
                             return total_loss(h, gt, weights).total;
                         }};
                 }});
    c.push_back({"integrate.search", [](Rng& r) {
                     ClassEmbeddings e{normal({4}, r), normal({4}, r)};
                     const Tensor cls = uniform({3}, r, 0, 1), w = normal({3, 4}, r);
                     return std::pair<Tensor, ScalarFn>{normal({3, 4}, r), [=](const Tensor& s) {
                                                            return weighted_sum(integrate(s, cls, e), w);
                                                        }};
                 }});
    c.push_back({"integrate.scores", [](Rng& r) {
                     ClassEmbeddings e{normal({4}, r), normal({4}, r)};
                     const Tensor s = normal({3, 4}, r), w = normal({3, 4}, r);
                     return std::pair<Tensor, ScalarFn>{uniform({3}, r, 0.05, 0.95), [=](const Tensor& cls) {
                                                            return weighted_sum(integrate(s, cls, e), w);
                                                        }};
                 }});
    for (const bool wrt_reference : {false, true}) {
        c.push_back({wrt_reference ? "unidirectional_layer.reference" : "unidirectional_layer.search", [=](Rng& r) {
                         EncoderConfig cfg;
                         cfg.dim = 8;
                         cfg.heads = 2;
                         cfg.layers = 1;
                         cfg.mlp_ratio = 2;
                         auto enc = std::make_shared<Encoder>(cfg, r);
                         const Tensor other = normal({wrt_reference ? 3 : 2, 8}, r);
                         const Tensor w = normal({3, 8}, r);
                         Tensor x = normal({wrt_reference ? 2 : 3, 8}, r);
                         return std::pair<Tensor, ScalarFn>{x, [=](const Tensor& in) {
                                                                const Tensor& s = wrt_reference ? other : in;
                                                                const Tensor& ref = wrt_reference ? in : other;
                                                                return weighted_sum(
                                                                    enc->unidirectional_layer(0, s, ref).search, w);
                                                            }};
                     }});
    }
    // Head parameters through the full loss; the input is a live parameter handle.
    for (const char* param : {"head.cls.block0.conv.weight", "head.offset.block0.bn.weight", "head.size.out.weight"}) {
        c.push_back({std::string("total_loss.") + param, [param](Rng& r) {
                         auto head = std::make_shared<Head>(HeadConfig{4, 3, 2}, r);
                         const Tensor tokens = normal({16, 4}, r);
                         const BBox gt{r.uniform(0.1, 0.4), r.uniform(0.1, 0.4), r.uniform(0.25, 0.45),
                                       r.uniform(0.25, 0.45)};
                         Tensor x;
                         for (const auto& [name, t] : head->named_parameters())
                             if (name == param) x = t;
                         return std::pair<Tensor, ScalarFn>{x, [=](const Tensor&) {
                                                                return total_loss(head->predict(tokens, 4, 4, true), gt)
                                                                    .total;
                                                            }};
                     }});
    }
    return c;
}

/// Relative error between autodiff and central differences (h = 1e-5).
inline double gradient_error(const GradCase& gc, std::uint64_t seed) {
    Rng rng(seed);
    auto [x, f] = gc.make(rng);
    x.set_requires_grad();
    Tape tape;
    {
        TapeScope scope(tape);
        tape.backward(f(x));
    }
    const Tensor analytic = x.grad();
    x.zero_grad();
    NoGradScope no_grad;
    const Tensor numeric = finite_difference_gradient([&](const Tensor& in) { return static_cast<double>(f(in).item()); }, x);
    return relative_error(analytic, numeric);
}

}  // namespace ctxtrack::testing
