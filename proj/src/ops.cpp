// Copyright 2026 The ctxtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxtrack/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ctxtrack/autograd.hpp"

namespace ctxtrack::ops {

namespace {

using detail::grad_buffer;
using Impl = TensorImpl;

thread_local MacTally g_tally;

// C[M,N] (+)= A[M,K] * B[K,N]
void gemm_nn(std::int64_t M, std::int64_t N, std::int64_t K, const Scalar* __restrict A, const Scalar* __restrict B,
             Scalar* __restrict C, bool accumulate) {
    if (!accumulate) std::fill(C, C + M * N, Scalar(0));
    for (std::int64_t i = 0; i < M; ++i) {
        Scalar* __restrict crow = C + i * N;
        const Scalar* arow = A + i * K;
        for (std::int64_t k = 0; k < K; ++k) {
            const Scalar a = arow[k];
            const Scalar* __restrict brow = B + k * N;
            for (std::int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

// C[M,N] (+)= A[K,M]^T * B[K,N]
void gemm_tn(std::int64_t M, std::int64_t N, std::int64_t K, const Scalar* __restrict A, const Scalar* __restrict B,
             Scalar* __restrict C, bool accumulate) {
    if (!accumulate) std::fill(C, C + M * N, Scalar(0));
    for (std::int64_t k = 0; k < K; ++k) {
        const Scalar* __restrict brow = B + k * N;
        const Scalar* arow = A + k * M;
        for (std::int64_t i = 0; i < M; ++i) {
            const Scalar a = arow[i];
            Scalar* __restrict crow = C + i * N;
            for (std::int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

void transpose_into(std::int64_t rows, std::int64_t cols, const Scalar* src, Scalar* dst) {
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

// C[M,N] (+)= A[M,K] * B[N,K]^T
void gemm_nt(std::int64_t M, std::int64_t N, std::int64_t K, const Scalar* A, const Scalar* B, Scalar* C,
             bool accumulate) {
    std::vector<Scalar> bt(static_cast<std::size_t>(N * K));
    transpose_into(N, K, B, bt.data());
    gemm_nn(M, N, K, A, bt.data(), C, accumulate);
}

void require_rank(const Tensor& t, int rank, const char* op) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(t.shape()));
    }
}

template <class Backward>
void record(const char* op, const Tensor& out, std::initializer_list<const Tensor*> inputs, Backward&& fn) {
    Tape::Node node;
    node.op = op;
    for (const Tensor* t : inputs) node.inputs.push_back(t->impl());
    node.output = out.impl();
    node.backward = std::forward<Backward>(fn);
    active_tape()->record(std::move(node));
}

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

enum class Binary { Add, Sub, Mul, Div, Max, Min };

Tensor binary(const Tensor& a_in, const Tensor& b_in, Binary kind, const char* name) {
    const Tensor* a = &a_in;
    const Tensor* b = &b_in;
    const bool commutes = kind == Binary::Add || kind == Binary::Mul;
    if (!is_suffix(b->shape(), a->shape())) {
        if (commutes && is_suffix(a->shape(), b->shape())) {
            std::swap(a, b);
        } else {
            throw ShapeError(std::string(name) + ": incompatible shapes " + shape_str(a->shape()) + " and " +
                             shape_str(b->shape()));
        }
    }
    if ((kind == Binary::Max || kind == Binary::Min) && a->shape() != b->shape()) {
        throw ShapeError(std::string(name) + ": shapes must match");
    }
    const bool rec = detail::should_record({a, b});
    Tensor out = detail::make_output(a->shape(), rec);
    const std::int64_t n = a->numel();
    const std::int64_t m = b->numel();
    if (m == 0) return out;
    const Scalar* pa = a->ptr();
    const Scalar* pb = b->ptr();
    Scalar* po = out.ptr();
    for (std::int64_t i = 0; i < n; ++i) {
        const Scalar x = pa[i];
        const Scalar y = pb[i % m];
        switch (kind) {
            case Binary::Add: po[i] = x + y; break;
            case Binary::Sub: po[i] = x - y; break;
            case Binary::Mul: po[i] = x * y; break;
            case Binary::Div: po[i] = x / y; break;
            case Binary::Max: po[i] = x >= y ? x : y; break;
            case Binary::Min: po[i] = x <= y ? x : y; break;
        }
    }
    detail::check_finite(name, out);
    if (rec) {
        Impl* A = a->impl().get();
        Impl* B = b->impl().get();
        Impl* O = out.impl().get();
        record(name, out, {a, b}, [A, B, O, kind, n, m] {
            const Scalar* g = O->grad.data();
            Scalar* ga = A->requires_grad ? grad_buffer(*A).data() : nullptr;
            Scalar* gb = B->requires_grad ? grad_buffer(*B).data() : nullptr;
            for (std::int64_t i = 0; i < n; ++i) {
                const std::int64_t j = i % m;
                const Scalar x = A->data[i];
                const Scalar y = B->data[j];
                switch (kind) {
                    case Binary::Add:
                        if (ga) ga[i] += g[i];
                        if (gb) gb[j] += g[i];
                        break;
                    case Binary::Sub:
                        if (ga) ga[i] += g[i];
                        if (gb) gb[j] -= g[i];
                        break;
                    case Binary::Mul:
                        if (ga) ga[i] += g[i] * y;
                        if (gb) gb[j] += g[i] * x;
                        break;
                    case Binary::Div:
                        if (ga) ga[i] += g[i] / y;
                        if (gb) gb[j] -= g[i] * x / (y * y);
                        break;
                    case Binary::Max:
                        if (x >= y) {
                            if (ga) ga[i] += g[i];
                        } else if (gb) {
                            gb[j] += g[i];
                        }
                        break;
                    case Binary::Min:
                        if (x <= y) {
                            if (ga) ga[i] += g[i];
                        } else if (gb) {
                            gb[j] += g[i];
                        }
                        break;
                }
            }
        });
    }
    return out;
}

// Elementwise unary op; `deriv` maps (x, y) to dy/dx.
template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
    const bool rec = detail::should_record({&a});
    Tensor out = detail::make_output(a.shape(), rec);
    const std::int64_t n = a.numel();
    const Scalar* pa = a.ptr();
    Scalar* po = out.ptr();
    for (std::int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i]);
    detail::check_finite(name, out);
    if (rec) {
        Impl* A = a.impl().get();
        Impl* O = out.impl().get();
        record(name, out, {&a}, [A, O, n, deriv] {
            auto& ga = grad_buffer(*A);
            for (std::int64_t i = 0; i < n; ++i) ga[i] += O->grad[i] * deriv(A->data[i], O->data[i]);
        });
    }
    return out;
}

}  // namespace

MacTally& mac_tally() { return g_tally; }

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const auto M = a.dim(0), K = a.dim(1), N = b.dim(1);
    if (b.dim(0) != K) throw ShapeError("matmul: inner dims differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const bool rec = detail::should_record({&a, &b});
    Tensor out = detail::make_output({M, N}, rec);
    gemm_nn(M, N, K, a.ptr(), b.ptr(), out.ptr(), false);
    g_tally.matmul += M * N * K;
    detail::check_finite("matmul", out);
    if (rec) {
        Impl* A = a.impl().get();
        Impl* B = b.impl().get();
        Impl* O = out.impl().get();
        record("matmul", out, {&a, &b}, [A, B, O, M, N, K] {
            if (A->requires_grad) gemm_nt(M, K, N, O->grad.data(), B->data.data(), grad_buffer(*A).data(), true);
            if (B->requires_grad) gemm_tn(K, N, M, A->data.data(), O->grad.data(), grad_buffer(*B).data(), true);
        });
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul_nt");
    require_rank(b, 2, "matmul_nt");
    const auto M = a.dim(0), K = a.dim(1), N = b.dim(0);
    if (b.dim(1) != K) {
        throw ShapeError("matmul_nt: inner dims differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
    }
    const bool rec = detail::should_record({&a, &b});
    Tensor out = detail::make_output({M, N}, rec);
    gemm_nt(M, N, K, a.ptr(), b.ptr(), out.ptr(), false);
    g_tally.matmul_nt += M * N * K;
    detail::check_finite("matmul_nt", out);
    if (rec) {
        Impl* A = a.impl().get();
        Impl* B = b.impl().get();
        Impl* O = out.impl().get();
        record("matmul_nt", out, {&a, &b}, [A, B, O, M, N, K] {
            if (A->requires_grad) gemm_nn(M, K, N, O->grad.data(), B->data.data(), grad_buffer(*A).data(), true);
            if (B->requires_grad) gemm_tn(N, K, M, O->grad.data(), A->data.data(), grad_buffer(*B).data(), true);
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    const auto R = a.dim(0), C = a.dim(1);
    const bool rec = detail::should_record({&a});
    Tensor out = detail::make_output({C, R}, rec);
    transpose_into(R, C, a.ptr(), out.ptr());
    if (rec) {
        Impl* A = a.impl().get();
        Impl* O = out.impl().get();
        record("transpose", out, {&a}, [A, O, R, C] {
            auto& ga = grad_buffer(*A);
            for (std::int64_t r = 0; r < R; ++r)
                for (std::int64_t c = 0; c < C; ++c) ga[r * C + c] += O->grad[c * R + r];
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel_of(shape) != a.numel()) {
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape) + " changes element count");
    }
    const bool rec = detail::should_record({&a});
    Tensor out = detail::make_output(std::move(shape), rec);
    std::copy(a.data().begin(), a.data().end(), out.data().begin());
    if (rec) {
        Impl* A = a.impl().get();
        Impl* O = out.impl().get();
        record("reshape", out, {&a}, [A, O] {
            auto& ga = grad_buffer(*A);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += O->grad[i];
        });
    }
    return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
    std::int64_t rows = 0;
    bool rec = false;
    for (const auto& p : parts) {
        if (p.rank() < 1 || Shape(p.shape().begin() + 1, p.shape().end()) != tail) {
            throw ShapeError("concat_rows: trailing shapes differ: " + shape_str(p.shape()));
        }
        rows += p.dim(0);
        rec = rec || detail::should_record({&p});
    }
    Shape shape = parts[0].shape();
    shape[0] = rows;
    Tensor out = detail::make_output(shape, rec);
    std::int64_t offset = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.data().begin() + offset);
        offset += p.numel();
    }
    if (rec) {
        Tape::Node node;
        node.op = "concat_rows";
        std::vector<Impl*> ins;
        for (const auto& p : parts) {
            node.inputs.push_back(p.impl());
            ins.push_back(p.impl().get());
        }
        node.output = out.impl();
        Impl* O = out.impl().get();
        node.backward = [ins, O] {
            std::size_t off = 0;
            for (Impl* in : ins) {
                const std::size_t n = in->data.size();
                if (in->requires_grad && n > 0) {
                    auto& g = grad_buffer(*in);
                    for (std::size_t i = 0; i < n; ++i) g[i] += O->grad[off + i];
                }
                off += n;
            }
        };
        active_tape()->record(std::move(node));
    }
    return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::int64_t rows = parts[0].dim(0);
    std::int64_t cols = 0;
    bool rec = false;
    for (const auto& p : parts) {
        require_rank(p, 2, "concat_cols");
        if (p.dim(0) != rows) throw ShapeError("concat_cols: row counts differ");
        cols += p.dim(1);
        rec = rec || detail::should_record({&p});
    }
    Tensor out = detail::make_output({rows, cols}, rec);
    std::int64_t c0 = 0;
    for (const auto& p : parts) {
        const auto pc = p.dim(1);
        for (std::int64_t r = 0; r < rows; ++r)
            std::copy_n(p.ptr() + r * pc, pc, out.ptr() + r * cols + c0);
        c0 += pc;
    }
    if (rec) {
        Tape::Node node;
        node.op = "concat_cols";
        std::vector<Impl*> ins;
        for (const auto& p : parts) {
            node.inputs.push_back(p.impl());
            ins.push_back(p.impl().get());
        }
        node.output = out.impl();
        Impl* O = out.impl().get();
        node.backward = [ins, O, rows, cols] {
            std::int64_t c = 0;
            for (Impl* in : ins) {
                const std::int64_t pc = in->shape[1];
                if (in->requires_grad) {
                    auto& g = grad_buffer(*in);
                    for (std::int64_t r = 0; r < rows; ++r)
                        for (std::int64_t j = 0; j < pc; ++j) g[r * pc + j] += O->grad[r * cols + c + j];
                }
                c += pc;
            }
        };
        active_tape()->record(std::move(node));
    }
    return out;
}

Tensor slice_rows(const Tensor& x, std::int64_t begin, std::int64_t end) {
    if (x.rank() < 1 || begin < 0 || end < begin || end > x.dim(0)) {
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                         shape_str(x.shape()));
    }
    const std::int64_t row = x.dim(0) == 0 ? 0 : x.numel() / x.dim(0);
    Shape shape = x.shape();
    shape[0] = end - begin;
    const bool rec = detail::should_record({&x});
    Tensor out = detail::make_output(shape, rec);
    std::copy_n(x.ptr() + begin * row, (end - begin) * row, out.ptr());
    if (rec) {
        Impl* X = x.impl().get();
        Impl* O = out.impl().get();
        record("slice_rows", out, {&x}, [X, O, begin, row] {
            auto& g = grad_buffer(*X);
            for (std::size_t i = 0; i < O->grad.size(); ++i) g[begin * row + i] += O->grad[i];
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& x, std::int64_t begin, std::int64_t end) {
    require_rank(x, 2, "slice_cols");
    const auto R = x.dim(0), C = x.dim(1);
    if (begin < 0 || end < begin || end > C) throw ShapeError("slice_cols: invalid range for " + shape_str(x.shape()));
    const auto w = end - begin;
    const bool rec = detail::should_record({&x});
    Tensor out = detail::make_output({R, w}, rec);
    for (std::int64_t r = 0; r < R; ++r) std::copy_n(x.ptr() + r * C + begin, w, out.ptr() + r * w);
    if (rec) {
        Impl* X = x.impl().get();
        Impl* O = out.impl().get();
        record("slice_cols", out, {&x}, [X, O, R, C, begin, w] {
            auto& g = grad_buffer(*X);
            for (std::int64_t r = 0; r < R; ++r)
                for (std::int64_t j = 0; j < w; ++j) g[r * C + begin + j] += O->grad[r * w + j];
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> rows) {
    if (x.rank() < 1) throw ShapeError("gather_rows: scalar input");
    const std::int64_t n = x.dim(0);
    const std::int64_t row = n == 0 ? 0 : x.numel() / n;
    for (auto r : rows) {
        if (r < 0 || r >= n) throw ShapeError("gather_rows: index " + std::to_string(r) + " out of range");
    }
    Shape shape = x.shape();
    shape[0] = static_cast<std::int64_t>(rows.size());
    const bool rec = detail::should_record({&x});
    Tensor out = detail::make_output(shape, rec);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(x.ptr() + rows[i] * row, row, out.ptr() + static_cast<std::int64_t>(i) * row);
    if (rec) {
        Impl* X = x.impl().get();
        Impl* O = out.impl().get();
        std::vector<std::int64_t> idx(rows.begin(), rows.end());
        record("gather_rows", out, {&x}, [X, O, idx = std::move(idx), row] {
            auto& g = grad_buffer(*X);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::int64_t j = 0; j < row; ++j)
                    g[idx[i] * row + j] += O->grad[static_cast<std::int64_t>(i) * row + j];
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Div, "div"); }
Tensor maximum(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Max, "maximum"); }
Tensor minimum(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Min, "minimum"); }

Tensor add_scalar(const Tensor& a, Scalar s) {
    return unary(a, "add_scalar", [s](Scalar x) { return x + s; }, [](Scalar, Scalar) { return Scalar(1); });
}

Tensor mul_scalar(const Tensor& a, Scalar s) {
    return unary(a, "mul_scalar", [s](Scalar x) { return x * s; }, [s](Scalar, Scalar) { return s; });
}

Tensor rsub_scalar(const Tensor& a, Scalar s) {
    return unary(a, "rsub_scalar", [s](Scalar x) { return s - x; }, [](Scalar, Scalar) { return Scalar(-1); });
}

Tensor exp(const Tensor& a) {
    return unary(a, "exp", [](Scalar x) { return std::exp(x); }, [](Scalar, Scalar y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(a, "log", [](Scalar x) { return std::log(x); }, [](Scalar x, Scalar) { return Scalar(1) / x; });
}

Tensor sqrt(const Tensor& a) {
    return unary(a, "sqrt", [](Scalar x) { return std::sqrt(x); },
                 [](Scalar, Scalar y) { return Scalar(0.5) / y; });
}

Tensor abs(const Tensor& a) {
    return unary(a, "abs", [](Scalar x) { return std::abs(x); },
                 [](Scalar x, Scalar) { return x > 0 ? Scalar(1) : (x < 0 ? Scalar(-1) : Scalar(0)); });
}

Tensor clamp(const Tensor& a, Scalar lo, Scalar hi) {
    return unary(a, "clamp", [lo, hi](Scalar x) { return std::clamp(x, lo, hi); },
                 [lo, hi](Scalar x, Scalar) { return (x >= lo && x <= hi) ? Scalar(1) : Scalar(0); });
}

Tensor relu(const Tensor& a) {
    return unary(a, "relu", [](Scalar x) { return x > 0 ? x : Scalar(0); },
                 [](Scalar x, Scalar) { return x > 0 ? Scalar(1) : Scalar(0); });
}

Tensor gelu(const Tensor& a) {
    constexpr Scalar inv_sqrt2 = Scalar(1) / std::numbers::sqrt2_v<Scalar>;
    constexpr Scalar inv_sqrt2pi = std::numbers::inv_sqrtpi_v<Scalar> * inv_sqrt2;
    return unary(
        a, "gelu", [](Scalar x) { return Scalar(0.5) * x * (Scalar(1) + std::erf(x * inv_sqrt2)); },
        [](Scalar x, Scalar) {
            return Scalar(0.5) * (Scalar(1) + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(Scalar(-0.5) * x * x);
        });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        a, "sigmoid",
        [](Scalar x) {
            if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
            const Scalar e = std::exp(x);
            return e / (Scalar(1) + e);
        },
        [](Scalar, Scalar y) { return y * (Scalar(1) - y); });
}

Tensor sum(const Tensor& a) {
    const bool rec = detail::should_record({&a});
    Tensor out = detail::make_output({}, rec);
    Scalar s = 0;
    for (Scalar v : a.data()) s += v;
    out.ptr()[0] = s;
    detail::check_finite("sum", out);
    if (rec) {
        Impl* A = a.impl().get();
        Impl* O = out.impl().get();
        record("sum", out, {&a}, [A, O] {
            auto& g = grad_buffer(*A);
            for (auto& v : g) v += O->grad[0];
        });
    }
    return out;
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw ShapeError("mean of empty tensor");
    return mul_scalar(sum(a), Scalar(1) / static_cast<Scalar>(a.numel()));
}

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() < 1 || x.dim(-1) < 1) throw ShapeError("softmax_rows: empty last dim in " + shape_str(x.shape()));
    const std::int64_t n = x.dim(-1);
    const std::int64_t rows = x.numel() / n;
    const bool rec = detail::should_record({&x});
    Tensor out = detail::make_output(x.shape(), rec);
    for (std::int64_t r = 0; r < rows; ++r) {
        const Scalar* in = x.ptr() + r * n;
        Scalar* o = out.ptr() + r * n;
        const Scalar mx = *std::max_element(in, in + n);
        Scalar s = 0;
        for (std::int64_t j = 0; j < n; ++j) {
            o[j] = std::exp(in[j] - mx);
            s += o[j];
        }
        const Scalar inv = Scalar(1) / s;
        for (std::int64_t j = 0; j < n; ++j) o[j] *= inv;
    }
    detail::check_finite("softmax_rows", out);
    if (rec) {
        Impl* X = x.impl().get();
        Impl* O = out.impl().get();
        record("softmax_rows", out, {&x}, [X, O, n, rows] {
            auto& g = grad_buffer(*X);
            for (std::int64_t r = 0; r < rows; ++r) {
                const Scalar* y = O->data.data() + r * n;
                const Scalar* gy = O->grad.data() + r * n;
                Scalar dot = 0;
                for (std::int64_t j = 0; j < n; ++j) dot += gy[j] * y[j];
                for (std::int64_t j = 0; j < n; ++j) g[r * n + j] += y[j] * (gy[j] - dot);
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps) {
    if (x.rank() < 1) throw ShapeError("layer_norm: scalar input");
    const std::int64_t n = x.dim(-1);
    if (gamma.numel() != n || beta.numel() != n) throw ShapeError("layer_norm: affine params do not match last dim");
    const std::int64_t rows = n == 0 ? 0 : x.numel() / n;
    const bool rec = detail::should_record({&x, &gamma, &beta});
    Tensor out = detail::make_output(x.shape(), rec);
    std::vector<Scalar> xhat(static_cast<std::size_t>(x.numel()));
    std::vector<Scalar> rstd(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const Scalar* in = x.ptr() + r * n;
        Scalar mu = 0;
        for (std::int64_t j = 0; j < n; ++j) mu += in[j];
        mu /= static_cast<Scalar>(n);
        Scalar var = 0;
        for (std::int64_t j = 0; j < n; ++j) var += (in[j] - mu) * (in[j] - mu);
        var /= static_cast<Scalar>(n);
        const Scalar rs = Scalar(1) / std::sqrt(var + eps);
        rstd[r] = rs;
        for (std::int64_t j = 0; j < n; ++j) {
            const Scalar h = (in[j] - mu) * rs;
            xhat[r * n + j] = h;
            out.ptr()[r * n + j] = h * gamma.ptr()[j] + beta.ptr()[j];
        }
    }
    detail::check_finite("layer_norm", out);
    if (rec) {
        Impl* X = x.impl().get();
        Impl* G = gamma.impl().get();
        Impl* B = beta.impl().get();
        Impl* O = out.impl().get();
        record("layer_norm", out, {&x, &gamma, &beta},
               [X, G, B, O, n, rows, xhat = std::move(xhat), rstd = std::move(rstd)] {
                   const Scalar* gy = O->grad.data();
                   Scalar* gg = G->requires_grad ? grad_buffer(*G).data() : nullptr;
                   Scalar* gb = B->requires_grad ? grad_buffer(*B).data() : nullptr;
                   Scalar* gx = X->requires_grad ? grad_buffer(*X).data() : nullptr;
                   std::vector<Scalar> dxhat(static_cast<std::size_t>(n));
                   for (std::int64_t r = 0; r < rows; ++r) {
                       Scalar s1 = 0, s2 = 0;
                       for (std::int64_t j = 0; j < n; ++j) {
                           const Scalar g = gy[r * n + j];
                           const Scalar h = xhat[r * n + j];
                           if (gg) gg[j] += g * h;
                           if (gb) gb[j] += g;
                           dxhat[j] = g * G->data[j];
                           s1 += dxhat[j];
                           s2 += dxhat[j] * h;
                       }
                       if (!gx) continue;
                       const Scalar k = rstd[r] / static_cast<Scalar>(n);
                       for (std::int64_t j = 0; j < n; ++j) {
                           gx[r * n + j] += k * (static_cast<Scalar>(n) * dxhat[j] - s1 - xhat[r * n + j] * s2);
                       }
                   }
               });
    }
    return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, bool training,
                  Scalar momentum, Scalar eps) {
    require_rank(x, 3, "batch_norm");
    const std::int64_t C = x.dim(0);
    const std::int64_t hw = x.dim(1) * x.dim(2);
    if (gamma.numel() != C || beta.numel() != C || stats.running_mean.numel() != C || stats.running_var.numel() != C) {
        throw ShapeError("batch_norm: parameter sizes do not match channel count");
    }
    if (training && hw < 2) throw ShapeError("batch_norm: training mode needs more than one value per channel");
    const bool rec = detail::should_record({&x, &gamma, &beta});
    Tensor out = detail::make_output(x.shape(), rec);
    std::vector<Scalar> xhat(static_cast<std::size_t>(x.numel()));
    std::vector<Scalar> rstd(static_cast<std::size_t>(C));
    for (std::int64_t c = 0; c < C; ++c) {
        const Scalar* in = x.ptr() + c * hw;
        Scalar mu, var;
        if (training) {
            mu = 0;
            for (std::int64_t i = 0; i < hw; ++i) mu += in[i];
            mu /= static_cast<Scalar>(hw);
            var = 0;
            for (std::int64_t i = 0; i < hw; ++i) var += (in[i] - mu) * (in[i] - mu);
            var /= static_cast<Scalar>(hw);
            const Scalar unbiased = var * static_cast<Scalar>(hw) / static_cast<Scalar>(hw - 1);
            auto& rm = stats.running_mean.ptr()[c];
            auto& rv = stats.running_var.ptr()[c];
            rm = (Scalar(1) - momentum) * rm + momentum * mu;
            rv = (Scalar(1) - momentum) * rv + momentum * unbiased;
        } else {
            mu = stats.running_mean.ptr()[c];
            var = stats.running_var.ptr()[c];
        }
        const Scalar rs = Scalar(1) / std::sqrt(var + eps);
        rstd[c] = rs;
        for (std::int64_t i = 0; i < hw; ++i) {
            const Scalar h = (in[i] - mu) * rs;
            xhat[c * hw + i] = h;
            out.ptr()[c * hw + i] = gamma.ptr()[c] * h + beta.ptr()[c];
        }
    }
    detail::check_finite("batch_norm", out);
    if (rec) {
        Impl* X = x.impl().get();
        Impl* G = gamma.impl().get();
        Impl* B = beta.impl().get();
        Impl* O = out.impl().get();
        record("batch_norm", out, {&x, &gamma, &beta},
               [X, G, B, O, C, hw, training, xhat = std::move(xhat), rstd = std::move(rstd)] {
                   const Scalar* gy = O->grad.data();
                   Scalar* gg = G->requires_grad ? grad_buffer(*G).data() : nullptr;
                   Scalar* gb = B->requires_grad ? grad_buffer(*B).data() : nullptr;
                   Scalar* gx = X->requires_grad ? grad_buffer(*X).data() : nullptr;
                   for (std::int64_t c = 0; c < C; ++c) {
                       Scalar s1 = 0, s2 = 0;
                       for (std::int64_t i = 0; i < hw; ++i) {
                           s1 += gy[c * hw + i];
                           s2 += gy[c * hw + i] * xhat[c * hw + i];
                       }
                       if (gg) gg[c] += s2;
                       if (gb) gb[c] += s1;
                       if (!gx) continue;
                       const Scalar g = G->data[c];
                       if (training) {
                           const Scalar k = g * rstd[c] / static_cast<Scalar>(hw);
                           for (std::int64_t i = 0; i < hw; ++i) {
                               gx[c * hw + i] +=
                                   k * (static_cast<Scalar>(hw) * gy[c * hw + i] - s1 - xhat[c * hw + i] * s2);
                           }
                       } else {
                           for (std::int64_t i = 0; i < hw; ++i) gx[c * hw + i] += g * rstd[c] * gy[c * hw + i];
                       }
                   }
               });
    }
    return out;
}

namespace {

// cols: (Cin*9, H*W) patches of a same-padded 3x3 window.
void im2col3(const Scalar* x, std::int64_t C, std::int64_t H, std::int64_t W, Scalar* cols) {
    const std::int64_t hw = H * W;
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t ky = 0; ky < 3; ++ky)
            for (std::int64_t kx = 0; kx < 3; ++kx) {
                Scalar* dst = cols + ((c * 3 + ky) * 3 + kx) * hw;
                for (std::int64_t y = 0; y < H; ++y) {
                    const std::int64_t sy = y + ky - 1;
                    for (std::int64_t xx = 0; xx < W; ++xx) {
                        const std::int64_t sx = xx + kx - 1;
                        dst[y * W + xx] = (sy < 0 || sy >= H || sx < 0 || sx >= W) ? Scalar(0) : x[(c * H + sy) * W + sx];
                    }
                }
            }
}

void col2im3(const Scalar* cols, std::int64_t C, std::int64_t H, std::int64_t W, Scalar* gx) {
    const std::int64_t hw = H * W;
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t ky = 0; ky < 3; ++ky)
            for (std::int64_t kx = 0; kx < 3; ++kx) {
                const Scalar* src = cols + ((c * 3 + ky) * 3 + kx) * hw;
                for (std::int64_t y = 0; y < H; ++y) {
                    const std::int64_t sy = y + ky - 1;
                    if (sy < 0 || sy >= H) continue;
                    for (std::int64_t xx = 0; xx < W; ++xx) {
                        const std::int64_t sx = xx + kx - 1;
                        if (sx < 0 || sx >= W) continue;
                        gx[(c * H + sy) * W + sx] += src[y * W + xx];
                    }
                }
            }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(x, 3, "conv2d");
    require_rank(w, 4, "conv2d");
    const std::int64_t Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::int64_t Cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != Cin || w.dim(3) != k || (k != 1 && k != 3)) {
        throw ShapeError("conv2d: weight " + shape_str(w.shape()) + " incompatible with input " + shape_str(x.shape()));
    }
    if (b.numel() != Cout) throw ShapeError("conv2d: bias size mismatch");
    const std::int64_t hw = H * W;
    const std::int64_t K = Cin * k * k;
    std::vector<Scalar> cols;
    const Scalar* colp = x.ptr();
    if (k == 3) {
        cols.resize(static_cast<std::size_t>(K * hw));
        im2col3(x.ptr(), Cin, H, W, cols.data());
        colp = cols.data();
    }
    const bool rec = detail::should_record({&x, &w, &b});
    Tensor out = detail::make_output({Cout, H, W}, rec);
    for (std::int64_t c = 0; c < Cout; ++c) std::fill_n(out.ptr() + c * hw, hw, b.ptr()[c]);
    gemm_nn(Cout, hw, K, w.ptr(), colp, out.ptr(), true);
    g_tally.conv += Cout * hw * K;
    detail::check_finite("conv2d", out);
    if (rec) {
        Impl* X = x.impl().get();
        Impl* Wt = w.impl().get();
        Impl* B = b.impl().get();
        Impl* O = out.impl().get();
        record("conv2d", out, {&x, &w, &b}, [X, Wt, B, O, Cin, H, W, Cout, k, hw, K, cols = std::move(cols)] {
            const Scalar* gy = O->grad.data();
            if (B->requires_grad) {
                auto& gb = grad_buffer(*B);
                for (std::int64_t c = 0; c < Cout; ++c)
                    for (std::int64_t i = 0; i < hw; ++i) gb[c] += gy[c * hw + i];
            }
            const Scalar* colp = k == 3 ? cols.data() : X->data.data();
            if (Wt->requires_grad) gemm_nt(Cout, K, hw, gy, colp, grad_buffer(*Wt).data(), true);
            if (X->requires_grad) {
                if (k == 1) {
                    gemm_tn(Cin, hw, Cout, Wt->data.data(), gy, grad_buffer(*X).data(), true);
                } else {
                    std::vector<Scalar> gcols(static_cast<std::size_t>(K * hw));
                    gemm_tn(K, hw, Cout, Wt->data.data(), gy, gcols.data(), false);
                    col2im3(gcols.data(), Cin, H, W, grad_buffer(*X).data());
                }
            }
        });
    }
    return out;
}

}  // namespace ctxtrack::ops
