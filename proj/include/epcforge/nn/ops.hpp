// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operators. Every op has a Tape form (records a backward
// closure) and, where it is part of the public model vocabulary, a plain
// Tensor form that evaluates without recording.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "epcforge/nn/tape.hpp"
#include "epcforge/nn/tensor.hpp"

namespace epcforge::nn {

inline constexpr double kLayerNormEps = 1e-5;

/// Affine map y = x·W + b. No activation is ever applied.
struct LinearParams {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]
};

struct AttentionParams {
    Tensor w_q, w_k, w_v;  // [d x d]
    Tensor w_h;            // [d x d] output projection over concatenated heads
    std::size_t heads = 1;

    std::size_t width() const noexcept { return w_q.cols(); }
    /// Throws ConfigError unless heads divides the width.
    void validate() const;
};

/// Vars for an AttentionParams bound on a tape.
struct AttentionVars {
    Var w_q, w_k, w_v, w_h;
    std::size_t heads = 1;
};

AttentionVars bind(Tape& tape, AttentionParams& p);

// --- tape ops -------------------------------------------------------------

Var matmul(Tape& tape, Var a, Var b);
Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var x, double s);
/// x[n x m] + bias[m] broadcast over rows.
Var add_bias(Tape& tape, Var x, Var bias);
Var linear(Tape& tape, Var x, Var weight, Var bias);
Var gelu(Tape& tape, Var x);
Var layer_norm(Tape& tape, Var x, Var gain, Var shift, double eps = kLayerNormEps);
/// Softmax over the last axis.
Var softmax(Tape& tape, Var x);
/// Rows of `table` selected by `ids`.
Var embedding(Tape& tape, Var table, std::span<const std::size_t> ids);
Var concat_rows(Tape& tape, std::span<const Var> parts);
Var slice_rows(Tape& tape, Var x, std::size_t begin, std::size_t count);
/// Scalar Σ x ∘ weights, used to reduce tensors for gradient checks.
Var dot(Tape& tape, Var x, const Tensor& weights);

/// Multi-head scaled dot-product attention. Queries come from `q_in`, keys
/// and values from `kv_in`. With `causal`, query i only sees keys j <= i.
/// When `weights_out` is given it receives one [m x n] matrix per head.
Var multi_head_attention(Tape& tape, Var q_in, Var kv_in, const AttentionVars& p, bool causal,
                         std::vector<Tensor>* weights_out = nullptr);

/// Mean −ln probs[i, targets[i]].
Var cross_entropy(Tape& tape, Var probs, std::span<const std::size_t> targets);
/// Mean −ln softmax(logits)[i, targets[i]], fused for stability.
Var cross_entropy_logits(Tape& tape, Var logits, std::span<const std::size_t> targets);

// --- plain forms ------------------------------------------------------------

Tensor linear(const Tensor& x, const LinearParams& p);
/// Softmax along `axis`, with max subtraction.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift);
Tensor multi_head_attention(const Tensor& q_in, const Tensor& kv_in, const AttentionParams& p,
                            bool causal = false);
/// Per-head attention weight matrices of the op above.
std::vector<Tensor> attention_weights(const Tensor& q_in, const Tensor& kv_in,
                                      const AttentionParams& p, bool causal = false);
double cross_entropy(const Tensor& probs, std::span<const std::size_t> targets);

/// Self-attention work for one sequence: score computation plus weighted
/// average, 2·L²·d.
std::uint64_t attention_flops(std::uint64_t seq_len, std::uint64_t dim);

}  // namespace epcforge::nn
