// SPDX-License-Identifier: Apache-2.0

#include "epcforge/nn/grad_suite.hpp"

#include "epcforge/nn/grad_check.hpp"
#include "epcforge/nn/ops.hpp"
#include "epcforge/util/rng.hpp"

namespace epcforge::nn {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.values) v = scale * rng.normal();
    return t;
}

// Projections at 1/sqrt(d). Unit-variance weights saturate the softmax so some
// gradients sit near 1e-9, below what central differences can resolve.
constexpr double kProjScale = 0.5;

}  // namespace

std::vector<NamedCheck> primitive_grad_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<NamedCheck> out;
    auto run = [&](const char* name, const ScalarOp& op, std::vector<Tensor> inputs) {
        out.push_back({name, grad_check(op, std::move(inputs)).max_rel_error});
    };

    {
        const Tensor proj = random_tensor(rng, {3, 3});
        run("linear", [&](Tape& t, std::span<const Var> v) { return dot(t, linear(t, v[0], v[1], v[2]), proj); },
            {random_tensor(rng, {3, 3}), random_tensor(rng, {3, 3}), random_tensor(rng, {3})});
    }
    {
        const Tensor proj = random_tensor(rng, {2, 4});
        run("matmul", [&](Tape& t, std::span<const Var> v) { return dot(t, matmul(t, v[0], v[1]), proj); },
            {random_tensor(rng, {2, 3}), random_tensor(rng, {3, 4})});
    }
    {
        const std::vector<std::size_t> targets{1, 0, 3};
        run("softmax+cross_entropy",
            [&](Tape& t, std::span<const Var> v) { return cross_entropy(t, softmax(t, v[0]), targets); },
            {random_tensor(rng, {3, 4})});
    }
    {
        const Tensor proj = random_tensor(rng, {3, 4});
        run("multi_head_attention",
            [&](Tape& t, std::span<const Var> v) {
                const AttentionVars p{v[2], v[3], v[4], v[5], 2};
                return dot(t, multi_head_attention(t, v[0], v[1], p, false), proj);
            },
            {random_tensor(rng, {3, 4}), random_tensor(rng, {5, 4}), random_tensor(rng, {4, 4}, kProjScale),
             random_tensor(rng, {4, 4}, kProjScale), random_tensor(rng, {4, 4}, kProjScale),
             random_tensor(rng, {4, 4}, kProjScale)});
    }
    {
        const Tensor proj = random_tensor(rng, {4, 4});
        run("causal_self_attention",
            [&](Tape& t, std::span<const Var> v) {
                const AttentionVars p{v[1], v[2], v[3], v[4], 2};
                return dot(t, multi_head_attention(t, v[0], v[0], p, true), proj);
            },
            {random_tensor(rng, {4, 4}), random_tensor(rng, {4, 4}, kProjScale), random_tensor(rng, {4, 4}, kProjScale),
             random_tensor(rng, {4, 4}, kProjScale), random_tensor(rng, {4, 4}, kProjScale)});
    }
    {
        const Tensor proj = random_tensor(rng, {3, 5});
        run("layer_norm",
            [&](Tape& t, std::span<const Var> v) { return dot(t, layer_norm(t, v[0], v[1], v[2]), proj); },
            {random_tensor(rng, {3, 5}), random_tensor(rng, {5}), random_tensor(rng, {5})});
    }
    {
        const Tensor proj = random_tensor(rng, {3, 4});
        run("gelu", [&](Tape& t, std::span<const Var> v) { return dot(t, gelu(t, v[0]), proj); },
            {random_tensor(rng, {3, 4})});
    }
    {
        const Tensor proj = random_tensor(rng, {2, 3});
        run("add_bias", [&](Tape& t, std::span<const Var> v) { return dot(t, add_bias(t, v[0], v[1]), proj); },
            {random_tensor(rng, {2, 3}), random_tensor(rng, {3})});
    }
    {
        const std::vector<std::size_t> ids{2, 0, 2};
        const std::vector<std::size_t> targets{1, 3, 0, 2};
        run("embedding+concat+slice+cross_entropy_logits",
            [&](Tape& t, std::span<const Var> v) {
                const Var e = embedding(t, v[0], ids);
                const std::vector<Var> parts{e, slice_rows(t, v[1], 1, 1)};
                const Var cat = concat_rows(t, parts);
                return cross_entropy_logits(t, scale(t, add(t, cat, v[2]), 1.5), targets);
            },
            {random_tensor(rng, {3, 4}), random_tensor(rng, {2, 4}), random_tensor(rng, {4, 4})});
    }
    return out;
}

}  // namespace epcforge::nn
