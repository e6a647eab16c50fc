// SPDX-License-Identifier: Apache-2.0
//
// Sampling-based decoding: temperature, then top-k, then nucleus (top-p),
// then renormalise and draw. Ties always resolve to the lowest token id.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "epcforge/model/ecode.hpp"
#include "epcforge/util/rng.hpp"

namespace epcforge::model {

struct DecodeParams {
    double temperature = 0.25;
    std::size_t top_k = 50;
    double top_p = 0.95;
    /// 0 means the decoder cap.
    std::size_t max_len = 0;
    bool greedy = false;

    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
};

/// Default ceiling on candidates per task.
inline constexpr std::size_t kMaxCandidates = 5;

/// Survivor distribution after temperature, top-k and top-p, renormalised
/// (zero outside the survivors). With `greedy` it is one-hot on the argmax.
std::vector<double> filtered_distribution(std::span<const double> probs, const DecodeParams& p);

/// Draws one token id from filtered_distribution(probs, p).
std::size_t sample_token(std::span<const double> probs, const DecodeParams& p, Rng& rng);

struct Generation {
    std::vector<data::TokenId> tokens;  // ends with EOS unless truncated
    bool truncated = false;

    bool operator==(const Generation&) const = default;
};

/// Autoregressive generation until EOS or the length limit. Deterministic
/// given `seed`; greedy decoding ignores it.
Generation generate(ECodeModel& model, const ModelInputs& inputs, const DecodeParams& p, std::uint64_t seed);

/// Candidate j uses seed derive_seed(seed, j). Throws std::invalid_argument
/// when k is 0 or above `max_k`.
std::vector<Generation> sample_k_candidates(ECodeModel& model, const ModelInputs& inputs, std::size_t k,
                                            const DecodeParams& p, std::uint64_t seed,
                                            std::size_t max_k = kMaxCandidates);

}  // namespace epcforge::model
