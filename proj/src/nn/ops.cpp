// SPDX-License-Identifier: Apache-2.0

#include "epcforge/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace epcforge::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

// C[n x m] += A[n x k] · B[k x m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
    const auto N = static_cast<Eigen::Index>(n), K = static_cast<Eigen::Index>(k), M = static_cast<Eigen::Index>(m);
    MMap(c, N, M).noalias() += CMap(a, N, K) * CMap(b, K, M);
}

// C[n x m] += A[n x k] · B[m x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
    const auto N = static_cast<Eigen::Index>(n), K = static_cast<Eigen::Index>(k), M = static_cast<Eigen::Index>(m);
    MMap(c, N, M).noalias() += CMap(a, N, K) * CMap(b, M, K).transpose();
}

// C[n x m] += A[k x n]^T · B[k x m]
void gemm_tn(const double* a, const double* b, double* c, std::size_t k, std::size_t n,
             std::size_t m) {
    const auto N = static_cast<Eigen::Index>(n), K = static_cast<Eigen::Index>(k), M = static_cast<Eigen::Index>(m);
    MMap(c, N, M).noalias() += CMap(a, K, N).transpose() * CMap(b, K, M);
}

bool any_requires(const Tape& tape, std::initializer_list<Var> vars) {
    for (Var v : vars) {
        if (tape.requires_grad(v)) return true;
    }
    return false;
}

void require_matrix(const char* op, const Tensor& t) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape));
    }
}

void softmax_row(const double* in, double* out, std::size_t n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = std::exp(in[j] - mx);
        sum += out[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= sum;
}

void check_targets(const char* op, std::span<const std::size_t> targets, std::size_t rows,
                   std::size_t vocab) {
    if (targets.size() != rows) {
        throw ShapeError(std::string(op) + ": " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(rows) + " rows");
    }
    for (std::size_t t : targets) {
        if (t >= vocab) {
            throw std::out_of_range(std::string(op) + ": target " + std::to_string(t) +
                                    " outside vocabulary of size " + std::to_string(vocab));
        }
    }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

// Forward state of one attention call, kept for the backward pass.
struct AttentionCache {
    std::size_t m = 0, n = 0, d = 0, heads = 1, dk = 0;
    bool causal = false;
    std::vector<double> q, k, v;  // projected [m|n x d]
    std::vector<double> probs;    // [heads x m x n]
    std::vector<double> concat;   // [m x d]
};

void attention_forward(const Tensor& q_in, const Tensor& kv_in, const Tensor& w_q,
                       const Tensor& w_k, const Tensor& w_v, const Tensor& w_h,
                       std::size_t heads, bool causal, AttentionCache& c, Tensor& out) {
    const std::size_t d = w_q.cols();
    if (heads == 0 || d == 0 || d % heads != 0) {
        throw ConfigError("attention: " + std::to_string(heads) +
                          " heads do not divide width " + std::to_string(d));
    }
    for (const Tensor* w : {&w_q, &w_k, &w_v, &w_h}) {
        if (w->rank() != 2 || w->shape[0] != d || w->shape[1] != d) {
            throw ShapeError("attention projection", w->shape, Shape{d, d});
        }
    }
    if (q_in.cols() != d) throw ShapeError("attention query", q_in.shape, w_q.shape);
    if (kv_in.cols() != d) throw ShapeError("attention key/value", kv_in.shape, w_k.shape);
    const std::size_t m = q_in.rows(), n = kv_in.rows();
    if (m == 0 || n == 0) throw ShapeError("attention", q_in.shape, kv_in.shape);
    if (causal && m > n) throw ShapeError("causal attention", q_in.shape, kv_in.shape);

    c.m = m;
    c.n = n;
    c.d = d;
    c.heads = heads;
    c.dk = d / heads;
    c.causal = causal;
    c.q.assign(m * d, 0.0);
    c.k.assign(n * d, 0.0);
    c.v.assign(n * d, 0.0);
    gemm_nn(q_in.values.data(), w_q.values.data(), c.q.data(), m, d, d);
    gemm_nn(kv_in.values.data(), w_k.values.data(), c.k.data(), n, d, d);
    gemm_nn(kv_in.values.data(), w_v.values.data(), c.v.data(), n, d, d);

    const double inv = 1.0 / std::sqrt(static_cast<double>(c.dk));
    c.probs.assign(heads * m * n, 0.0);
    c.concat.assign(m * d, 0.0);
    std::vector<double> scores(n);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * c.dk;
        for (std::size_t i = 0; i < m; ++i) {
            // with causal masking query i sees keys 0..i (offset when n > m)
            const std::size_t visible = causal ? i + 1 + (n - m) : n;
            const double* qi = c.q.data() + i * d + off;
            for (std::size_t j = 0; j < visible; ++j) {
                const double* kj = c.k.data() + j * d + off;
                double s = 0.0;
                for (std::size_t p = 0; p < c.dk; ++p) s += qi[p] * kj[p];
                scores[j] = s * inv;
            }
            double* pi = c.probs.data() + (h * m + i) * n;
            softmax_row(scores.data(), pi, visible);
            double* oi = c.concat.data() + i * d + off;
            for (std::size_t j = 0; j < visible; ++j) {
                const double a = pi[j];
                const double* vj = c.v.data() + j * d + off;
                for (std::size_t p = 0; p < c.dk; ++p) oi[p] += a * vj[p];
            }
        }
    }
    out = Tensor({m, d});
    gemm_nn(c.concat.data(), w_h.values.data(), out.values.data(), m, d, d);
}

}  // namespace

void AttentionParams::validate() const {
    const std::size_t d = w_q.cols();
    if (heads == 0 || d == 0 || d % heads != 0) {
        throw ConfigError("attention: " + std::to_string(heads) +
                          " heads do not divide width " + std::to_string(d));
    }
    for (const Tensor* w : {&w_q, &w_k, &w_v, &w_h}) {
        if (w->rank() != 2 || w->shape[0] != d || w->shape[1] != d) {
            throw ShapeError("attention projection", w->shape, Shape{d, d});
        }
    }
}

AttentionVars bind(Tape& tape, AttentionParams& p) {
    return AttentionVars{tape.parameter(p.w_q), tape.parameter(p.w_k), tape.parameter(p.w_v),
                         tape.parameter(p.w_h), p.heads};
}

Var matmul(Tape& tape, Var a, Var b) {
    const Tensor& av = tape.value(a);
    const Tensor& bv = tape.value(b);
    require_matrix("matmul", bv);
    if (av.cols() != bv.shape[0]) throw ShapeError("matmul", av.shape, bv.shape);
    const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
    Tensor out({n, m});
    gemm_nn(av.values.data(), bv.values.data(), out.values.data(), n, k, m);
    return tape.emit(std::move(out), any_requires(tape, {a, b}), [a, b, n, k, m](Tape& t, Var self) {
        const auto& g = t.grad(self);
        if (t.requires_grad(a)) gemm_nt(g.data(), t.value(b).values.data(), t.grad(a).data(), n, m, k);
        if (t.requires_grad(b)) gemm_tn(t.value(a).values.data(), g.data(), t.grad(b).data(), n, k, m);
    });
}

Var add(Tape& tape, Var a, Var b) {
    const Tensor& av = tape.value(a);
    const Tensor& bv = tape.value(b);
    if (av.shape != bv.shape) throw ShapeError("add", av.shape, bv.shape);
    Tensor out = av;
    out.grad.clear();
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += bv.values[i];
    return tape.emit(std::move(out), any_requires(tape, {a, b}), [a, b](Tape& t, Var self) {
        const auto& g = t.grad(self);
        for (Var in : {a, b}) {
            if (!t.requires_grad(in)) continue;
            auto& gi = t.grad(in);
            for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
        }
    });
}

Var scale(Tape& tape, Var x, double s) {
    Tensor out = tape.value(x);
    out.grad.clear();
    for (double& v : out.values) v *= s;
    return tape.emit(std::move(out), tape.requires_grad(x), [x, s](Tape& t, Var self) {
        const auto& g = t.grad(self);
        auto& gx = t.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
    });
}

Var add_bias(Tape& tape, Var x, Var bias) {
    const Tensor& xv = tape.value(x);
    const Tensor& bv = tape.value(bias);
    if (bv.size() != xv.cols()) throw ShapeError("add_bias", xv.shape, bv.shape);
    const std::size_t rows = xv.rows(), cols = xv.cols();
    Tensor out = xv;
    out.grad.clear();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out.values[r * cols + c] += bv.values[c];
    }
    return tape.emit(std::move(out), any_requires(tape, {x, bias}),
                     [x, bias, rows, cols](Tape& t, Var self) {
                         const auto& g = t.grad(self);
                         if (t.requires_grad(x)) {
                             auto& gx = t.grad(x);
                             for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                         }
                         if (t.requires_grad(bias)) {
                             auto& gb = t.grad(bias);
                             for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
                             }
                         }
                     });
}

Var linear(Tape& tape, Var x, Var weight, Var bias) {
    return add_bias(tape, matmul(tape, x, weight), bias);
}

Var gelu(Tape& tape, Var x) {
    const Tensor& xv = tape.value(x);
    Tensor out(xv.shape);
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double u = xv.values[i];
        out.values[i] = 0.5 * u * (1.0 + std::tanh(kGeluC * (u + 0.044715 * u * u * u)));
    }
    return tape.emit(std::move(out), tape.requires_grad(x), [x](Tape& t, Var self) {
        const auto& g = t.grad(self);
        const auto& xv = t.value(x).values;
        auto& gx = t.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double u = xv[i];
            const double inner = kGeluC * (u + 0.044715 * u * u * u);
            const double th = std::tanh(inner);
            const double dinner = kGeluC * (1.0 + 3.0 * 0.044715 * u * u);
            gx[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * u * (1.0 - th * th) * dinner);
        }
    });
}

Var layer_norm(Tape& tape, Var x, Var gain, Var shift, double eps) {
    const Tensor& xv = tape.value(x);
    const Tensor& gv = tape.value(gain);
    const Tensor& sv = tape.value(shift);
    const std::size_t rows = xv.rows(), cols = xv.cols();
    if (cols == 0) throw ShapeError("layer_norm: feature dimension must be at least 1");
    if (gv.size() != cols) throw ShapeError("layer_norm gain", xv.shape, gv.shape);
    if (sv.size() != cols) throw ShapeError("layer_norm shift", xv.shape, sv.shape);
    Tensor out(xv.shape);
    std::vector<double> xhat(rows * cols), inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.values.data() + r * cols;
        double mean = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mean += xr[c];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
        var /= static_cast<double>(cols);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < cols; ++c) {
            const double h = (xr[c] - mean) * inv_std[r];
            xhat[r * cols + c] = h;
            out.values[r * cols + c] = h * gv.values[c] + sv.values[c];
        }
    }
    return tape.emit(
        std::move(out), any_requires(tape, {x, gain, shift}),
        [x, gain, shift, rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](
            Tape& t, Var self) {
            const auto& g = t.grad(self);
            const auto& gv = t.value(gain).values;
            if (t.requires_grad(gain)) {
                auto& gg = t.grad(gain);
                for (std::size_t i = 0; i < g.size(); ++i) gg[i % cols] += g[i] * xhat[i];
            }
            if (t.requires_grad(shift)) {
                auto& gs = t.grad(shift);
                for (std::size_t i = 0; i < g.size(); ++i) gs[i % cols] += g[i];
            }
            if (!t.requires_grad(x)) return;
            auto& gx = t.grad(x);
            const double nc = static_cast<double>(cols);
            for (std::size_t r = 0; r < rows; ++r) {
                double sum_dh = 0.0, sum_dh_h = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    const double dh = g[r * cols + c] * gv[c];
                    sum_dh += dh;
                    sum_dh_h += dh * xhat[r * cols + c];
                }
                for (std::size_t c = 0; c < cols; ++c) {
                    const double dh = g[r * cols + c] * gv[c];
                    gx[r * cols + c] +=
                        inv_std[r] * (dh - sum_dh / nc - xhat[r * cols + c] * sum_dh_h / nc);
                }
            }
        });
}

Var softmax(Tape& tape, Var x) {
    const Tensor& xv = tape.value(x);
    const std::size_t rows = xv.rows(), cols = xv.cols();
    if (cols == 0) throw ShapeError("softmax: empty axis");
    Tensor out(xv.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        softmax_row(xv.values.data() + r * cols, out.values.data() + r * cols, cols);
    }
    return tape.emit(std::move(out), tape.requires_grad(x), [x, rows, cols](Tape& t, Var self) {
        const auto& g = t.grad(self);
        const auto& y = t.value(self).values;
        auto& gx = t.grad(x);
        for (std::size_t r = 0; r < rows; ++r) {
            double dotp = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dotp += g[r * cols + c] * y[r * cols + c];
            for (std::size_t c = 0; c < cols; ++c) {
                gx[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dotp);
            }
        }
    });
}

Var embedding(Tape& tape, Var table, std::span<const std::size_t> ids) {
    const Tensor& tv = tape.value(table);
    require_matrix("embedding", tv);
    const std::size_t d = tv.cols();
    Tensor out({ids.size(), d});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= tv.shape[0]) {
            throw std::out_of_range("embedding: id " + std::to_string(ids[i]) +
                                    " outside table of " + std::to_string(tv.shape[0]) + " rows");
        }
        std::copy_n(tv.values.data() + ids[i] * d, d, out.values.data() + i * d);
    }
    std::vector<std::size_t> idv(ids.begin(), ids.end());
    return tape.emit(std::move(out), tape.requires_grad(table),
                     [table, d, idv = std::move(idv)](Tape& t, Var self) {
                         const auto& g = t.grad(self);
                         auto& gt = t.grad(table);
                         for (std::size_t i = 0; i < idv.size(); ++i) {
                             for (std::size_t c = 0; c < d; ++c) gt[idv[i] * d + c] += g[i * d + c];
                         }
                     });
}

Var concat_rows(Tape& tape, std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t d = tape.value(parts[0]).cols();
    std::size_t rows = 0;
    bool req = false;
    for (Var p : parts) {
        const Tensor& pv = tape.value(p);
        if (pv.cols() != d) throw ShapeError("concat_rows", tape.value(parts[0]).shape, pv.shape);
        rows += pv.rows();
        req = req || tape.requires_grad(p);
    }
    Tensor out({rows, d});
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& pv = tape.value(p);
        offsets.push_back(off);
        std::copy(pv.values.begin(), pv.values.end(), out.values.begin() + static_cast<long>(off));
        off += pv.size();
    }
    std::vector<Var> pv(parts.begin(), parts.end());
    return tape.emit(std::move(out), req,
                     [pv = std::move(pv), offsets = std::move(offsets)](Tape& t, Var self) {
                         const auto& g = t.grad(self);
                         for (std::size_t i = 0; i < pv.size(); ++i) {
                             if (!t.requires_grad(pv[i])) continue;
                             auto& gi = t.grad(pv[i]);
                             for (std::size_t k = 0; k < gi.size(); ++k) gi[k] += g[offsets[i] + k];
                         }
                     });
}

Var slice_rows(Tape& tape, Var x, std::size_t begin, std::size_t count) {
    const Tensor& xv = tape.value(x);
    if (begin + count > xv.rows()) {
        throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") of " + shape_string(xv.shape));
    }
    const std::size_t d = xv.cols();
    Tensor out({count, d});
    std::copy_n(xv.values.data() + begin * d, count * d, out.values.data());
    return tape.emit(std::move(out), tape.requires_grad(x), [x, begin, d](Tape& t, Var self) {
        const auto& g = t.grad(self);
        auto& gx = t.grad(x);
        for (std::size_t k = 0; k < g.size(); ++k) gx[begin * d + k] += g[k];
    });
}

Var dot(Tape& tape, Var x, const Tensor& weights) {
    const Tensor& xv = tape.value(x);
    if (xv.size() != weights.size()) throw ShapeError("dot", xv.shape, weights.shape);
    double s = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) s += xv.values[i] * weights.values[i];
    return tape.emit(Tensor({1}, std::vector<double>{s}), tape.requires_grad(x),
                     [x, w = weights.values](Tape& t, Var self) {
                         const double g = t.grad(self)[0];
                         auto& gx = t.grad(x);
                         for (std::size_t i = 0; i < w.size(); ++i) gx[i] += g * w[i];
                     });
}

Var multi_head_attention(Tape& tape, Var q_in, Var kv_in, const AttentionVars& p, bool causal,
                         std::vector<Tensor>* weights_out) {
    AttentionCache cache;
    Tensor out;
    attention_forward(tape.value(q_in), tape.value(kv_in), tape.value(p.w_q), tape.value(p.w_k),
                      tape.value(p.w_v), tape.value(p.w_h), p.heads, causal, cache, out);
    if (weights_out) {
        weights_out->clear();
        for (std::size_t h = 0; h < cache.heads; ++h) {
            const auto first = cache.probs.begin() + static_cast<long>(h * cache.m * cache.n);
            weights_out->emplace_back(
                Shape{cache.m, cache.n},
                std::vector<double>(first, first + static_cast<long>(cache.m * cache.n)));
        }
    }
    const bool req = any_requires(tape, {q_in, kv_in, p.w_q, p.w_k, p.w_v, p.w_h});
    if (!req || !tape.recording()) return tape.emit(std::move(out), false, {});
    return tape.emit(std::move(out), true, [q_in, kv_in, p, c = std::move(cache)](Tape& t, Var self) {
        const auto& g = t.grad(self);
        const std::size_t m = c.m, n = c.n, d = c.d, dk = c.dk;
        // output projection
        if (t.requires_grad(p.w_h)) gemm_tn(c.concat.data(), g.data(), t.grad(p.w_h).data(), m, d, d);
        std::vector<double> dconcat(m * d, 0.0);
        gemm_nt(g.data(), t.value(p.w_h).values.data(), dconcat.data(), m, d, d);

        std::vector<double> dq(m * d, 0.0), dk_(n * d, 0.0), dv(n * d, 0.0);
        std::vector<double> da(n), ds(n);
        const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
        for (std::size_t h = 0; h < c.heads; ++h) {
            const std::size_t off = h * dk;
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t visible = c.causal ? i + 1 + (n - m) : n;
                const double* pi = c.probs.data() + (h * m + i) * n;
                const double* doi = dconcat.data() + i * d + off;
                double rowdot = 0.0;
                for (std::size_t j = 0; j < visible; ++j) {
                    const double* vj = c.v.data() + j * d + off;
                    double s = 0.0;
                    for (std::size_t q = 0; q < dk; ++q) s += doi[q] * vj[q];
                    da[j] = s;
                    rowdot += s * pi[j];
                    double* dvj = dv.data() + j * d + off;
                    for (std::size_t q = 0; q < dk; ++q) dvj[q] += pi[j] * doi[q];
                }
                const double* qi = c.q.data() + i * d + off;
                double* dqi = dq.data() + i * d + off;
                for (std::size_t j = 0; j < visible; ++j) {
                    const double dsj = pi[j] * (da[j] - rowdot) * inv;
                    if (dsj == 0.0) continue;
                    const double* kj = c.k.data() + j * d + off;
                    double* dkj = dk_.data() + j * d + off;
                    for (std::size_t q = 0; q < dk; ++q) {
                        dqi[q] += dsj * kj[q];
                        dkj[q] += dsj * qi[q];
                    }
                }
            }
        }
        const auto& qv = t.value(q_in).values;
        const auto& kvv = t.value(kv_in).values;
        if (t.requires_grad(p.w_q)) gemm_tn(qv.data(), dq.data(), t.grad(p.w_q).data(), m, d, d);
        if (t.requires_grad(p.w_k)) gemm_tn(kvv.data(), dk_.data(), t.grad(p.w_k).data(), n, d, d);
        if (t.requires_grad(p.w_v)) gemm_tn(kvv.data(), dv.data(), t.grad(p.w_v).data(), n, d, d);
        if (t.requires_grad(q_in)) {
            gemm_nt(dq.data(), t.value(p.w_q).values.data(), t.grad(q_in).data(), m, d, d);
        }
        if (t.requires_grad(kv_in)) {
            auto& gkv = t.grad(kv_in);
            gemm_nt(dk_.data(), t.value(p.w_k).values.data(), gkv.data(), n, d, d);
            gemm_nt(dv.data(), t.value(p.w_v).values.data(), gkv.data(), n, d, d);
        }
    });
}

Var cross_entropy(Tape& tape, Var probs, std::span<const std::size_t> targets) {
    const Tensor& pv = tape.value(probs);
    const std::size_t rows = pv.rows(), vocab = pv.cols();
    check_targets("cross_entropy", targets, rows, vocab);
    if (rows == 0) throw ShapeError("cross_entropy: no rows");
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < vocab; ++c) s += pv.values[r * vocab + c];
        if (std::abs(s - 1.0) > 1e-6) {
            throw std::invalid_argument("cross_entropy: row " + std::to_string(r) +
                                        " sums to " + std::to_string(s));
        }
    }
    double loss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) loss -= std::log(pv.values[r * vocab + targets[r]]);
    loss /= static_cast<double>(rows);
    std::vector<std::size_t> tv(targets.begin(), targets.end());
    return tape.emit(Tensor({1}, std::vector<double>{loss}), tape.requires_grad(probs),
                     [probs, vocab, tv = std::move(tv)](Tape& t, Var self) {
                         const double g = t.grad(self)[0] / static_cast<double>(tv.size());
                         const auto& pv = t.value(probs).values;
                         auto& gp = t.grad(probs);
                         for (std::size_t r = 0; r < tv.size(); ++r) {
                             gp[r * vocab + tv[r]] -= g / pv[r * vocab + tv[r]];
                         }
                     });
}

Var cross_entropy_logits(Tape& tape, Var logits, std::span<const std::size_t> targets) {
    const Tensor& lv = tape.value(logits);
    const std::size_t rows = lv.rows(), vocab = lv.cols();
    check_targets("cross_entropy_logits", targets, rows, vocab);
    if (rows == 0) throw ShapeError("cross_entropy_logits: no rows");
    std::vector<double> probs(rows * vocab);
    double loss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        softmax_row(lv.values.data() + r * vocab, probs.data() + r * vocab, vocab);
        const double* lr = lv.values.data() + r * vocab;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < vocab; ++c) mx = std::max(mx, lr[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < vocab; ++c) sum += std::exp(lr[c] - mx);
        loss -= lr[targets[r]] - mx - std::log(sum);
    }
    loss /= static_cast<double>(rows);
    std::vector<std::size_t> tv(targets.begin(), targets.end());
    return tape.emit(Tensor({1}, std::vector<double>{loss}), tape.requires_grad(logits),
                     [logits, vocab, tv = std::move(tv), probs = std::move(probs)](Tape& t, Var self) {
                         const double g = t.grad(self)[0] / static_cast<double>(tv.size());
                         auto& gl = t.grad(logits);
                         for (std::size_t r = 0; r < tv.size(); ++r) {
                             for (std::size_t c = 0; c < vocab; ++c) {
                                 gl[r * vocab + c] += g * probs[r * vocab + c];
                             }
                             gl[r * vocab + tv[r]] -= g;
                         }
                     });
}

// --- plain forms ------------------------------------------------------------

Tensor linear(const Tensor& x, const LinearParams& p) {
    if (p.weight.rank() != 2 || x.cols() != p.weight.shape[0]) {
        throw ShapeError("linear", x.shape, p.weight.shape);
    }
    if (p.bias.size() != p.weight.cols()) throw ShapeError("linear bias", p.weight.shape, p.bias.shape);
    const std::size_t n = x.rows(), k = x.cols(), m = p.weight.cols();
    Tensor out({n, m});
    for (std::size_t r = 0; r < n; ++r) {
        std::copy(p.bias.values.begin(), p.bias.values.end(),
                  out.values.begin() + static_cast<long>(r * m));
    }
    gemm_nn(x.values.data(), p.weight.values.data(), out.values.data(), n, k, m);
    return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) {
        throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_string(x.shape));
    }
    const std::size_t len = x.shape[axis];
    if (len == 0) throw ShapeError("softmax: empty axis");
    std::size_t inner = 1;
    for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.shape[a];
    const std::size_t outer = x.size() / (len * inner);
    Tensor out(x.shape);
    std::vector<double> in(len), res(len);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            for (std::size_t j = 0; j < len; ++j) in[j] = x.values[(o * len + j) * inner + i];
            softmax_row(in.data(), res.data(), len);
            for (std::size_t j = 0; j < len; ++j) out.values[(o * len + j) * inner + i] = res[j];
        }
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift) {
    Tape tape(false);
    const Var xv = tape.constant(x);
    const Var gv = tape.constant(gain);
    const Var sv = tape.constant(shift);
    return tape.value(layer_norm(tape, xv, gv, sv));
}

Tensor multi_head_attention(const Tensor& q_in, const Tensor& kv_in, const AttentionParams& p,
                            bool causal) {
    AttentionCache cache;
    Tensor out;
    attention_forward(q_in, kv_in, p.w_q, p.w_k, p.w_v, p.w_h, p.heads, causal, cache, out);
    return out;
}

std::vector<Tensor> attention_weights(const Tensor& q_in, const Tensor& kv_in,
                                      const AttentionParams& p, bool causal) {
    AttentionCache cache;
    Tensor out;
    attention_forward(q_in, kv_in, p.w_q, p.w_k, p.w_v, p.w_h, p.heads, causal, cache, out);
    std::vector<Tensor> weights;
    for (std::size_t h = 0; h < cache.heads; ++h) {
        const auto first = cache.probs.begin() + static_cast<long>(h * cache.m * cache.n);
        weights.emplace_back(Shape{cache.m, cache.n},
                             std::vector<double>(first, first + static_cast<long>(cache.m * cache.n)));
    }
    return weights;
}

double cross_entropy(const Tensor& probs, std::span<const std::size_t> targets) {
    Tape tape(false);
    const Var pv = tape.constant(probs);
    return tape.value(cross_entropy(tape, pv, targets)).values[0];
}

std::uint64_t attention_flops(std::uint64_t seq_len, std::uint64_t dim) {
    return 2 * seq_len * seq_len * dim;
}

}  // namespace epcforge::nn
