// SPDX-License-Identifier: Apache-2.0

#include "epcforge/model/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace epcforge::model {

void DecodeParams::validate() const {
    if (!greedy && !(temperature > 0.0)) throw std::invalid_argument("temperature must be positive unless greedy");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p must be in (0, 1]");
    if (top_k < 1) throw std::invalid_argument("top_k must be at least 1");
}

namespace {

std::size_t argmax(std::span<const double> xs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (xs[i] > xs[best]) best = i;
    }
    return best;
}

}  // namespace

std::vector<double> filtered_distribution(std::span<const double> probs, const DecodeParams& p) {
    p.validate();
    if (probs.empty()) throw std::invalid_argument("empty distribution");
    std::vector<double> out(probs.size(), 0.0);
    if (p.greedy) {
        out[argmax(probs)] = 1.0;
        return out;
    }

    // (1) temperature on log-probabilities
    std::vector<double> scaled(probs.size());
    double mx = -INFINITY;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        scaled[i] = probs[i] > 0.0 ? std::log(probs[i]) / p.temperature : -INFINITY;
        mx = std::max(mx, scaled[i]);
    }
    double z = 0.0;
    for (double& s : scaled) {
        s = std::isinf(s) ? 0.0 : std::exp(s - mx);
        z += s;
    }
    for (double& s : scaled) s /= z;

    // (2) top-k by probability, lowest id first among equals
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scaled[a] > scaled[b]; });
    const std::size_t k = std::min(p.top_k, order.size());
    order.resize(k);
    double kept = 0.0;
    for (std::size_t id : order) kept += scaled[id];

    // (3) smallest prefix whose renormalised mass reaches top_p
    std::size_t n = 0;
    double cum = 0.0;
    while (n < order.size()) {
        cum += scaled[order[n]] / kept;
        ++n;
        if (cum >= p.top_p) break;
    }
    order.resize(n);

    // (4) renormalise
    double mass = 0.0;
    for (std::size_t id : order) mass += scaled[id];
    for (std::size_t id : order) out[id] = scaled[id] / mass;
    return out;
}

std::size_t sample_token(std::span<const double> probs, const DecodeParams& p, Rng& rng) {
    if (p.greedy) return argmax(probs);
    const std::vector<double> dist = filtered_distribution(probs, p);
    // walk survivors in id order; the draw is deterministic given the rng
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] <= 0.0) continue;
        cum += dist[i];
        last = i;
        if (u < cum) return i;
    }
    return last;
}

Generation generate(ECodeModel& model, const ModelInputs& inputs, const DecodeParams& p, std::uint64_t seed) {
    p.validate();
    const std::size_t cap = model.config().caps.decoder;
    const std::size_t limit = p.max_len == 0 ? cap : std::min(p.max_len, cap);
    const nn::Tensor enc = model.encode_plain(inputs);
    Rng rng(seed);
    Generation g;
    std::vector<data::TokenId> prefix{data::kBos};
    while (g.tokens.size() < limit) {
        const std::vector<double> probs = model.next_token_probs(enc, prefix);
        const auto next = static_cast<data::TokenId>(sample_token(probs, p, rng));
        g.tokens.push_back(next);
        if (next == data::kEos) return g;
        prefix.push_back(next);
    }
    g.truncated = true;
    return g;
}

std::vector<Generation> sample_k_candidates(ECodeModel& model, const ModelInputs& inputs, std::size_t k,
                                            const DecodeParams& p, std::uint64_t seed, std::size_t max_k) {
    if (k == 0) throw std::invalid_argument("k must be at least 1");
    if (k > max_k) {
        throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the candidate limit of " +
                                    std::to_string(max_k));
    }
    std::vector<Generation> out;
    out.reserve(k);
    for (std::size_t j = 0; j < k; ++j) out.push_back(generate(model, inputs, p, derive_seed(seed, j)));
    return out;
}

}  // namespace epcforge::model
