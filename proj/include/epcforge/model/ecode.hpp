// SPDX-License-Identifier: Apache-2.0
//
// The E-code encoder-decoder: five expert encoders over the NL parts, an
// integration encoder plus affine enlarge layer, a causal encoder over the
// inefficient code, a causal decoder over the efficient-code prefix, one
// cross-attention fusion layer and an output stack.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "epcforge/data/vocab.hpp"
#include "epcforge/model/config.hpp"
#include "epcforge/nn/ops.hpp"

namespace epcforge::model {

struct BlockParams {
    nn::Tensor ln1_gain, ln1_shift;
    nn::AttentionParams attn;
    nn::Tensor ln2_gain, ln2_shift;
    nn::LinearParams ff_in, ff_out;
};

/// Pre-norm blocks followed by a final layer norm. With no blocks the stack
/// is the identity.
struct StackParams {
    std::vector<BlockParams> blocks;
    nn::Tensor final_gain, final_shift;
};

struct ExpertParams {
    nn::Tensor token_embedding;     // [V x d_expert]
    nn::Tensor position_embedding;  // [cap_expert x d_expert]
    StackParams stack;
};

struct ECodeParams {
    std::array<ExpertParams, data::kNumParts> experts;
    nn::Tensor integration_positions;  // [cap_integration x d_expert]
    StackParams integration;
    nn::LinearParams enlarge;          // d_expert -> d_model
    nn::Tensor ic_embedding, ic_positions;
    StackParams code_encoder;
    nn::Tensor ec_embedding, ec_positions;
    StackParams decoder;
    nn::AttentionParams fusion;
    nn::Tensor output_positions;
    StackParams output;
    nn::LinearParams projection;       // d_model -> V

    /// Every tensor with a stable dotted name, in a fixed order.
    std::vector<std::pair<std::string, nn::Tensor*>> named();
    std::vector<std::pair<std::string, const nn::Tensor*>> named() const;
    std::size_t parameter_count() const;

    /// Fresh parameters: weights N(0, init_std), biases and shifts 0, gains 1.
    static ECodeParams init(const ECodeConfig& cfg, std::uint64_t seed);
};

/// Token ids of one task, already within the role caps.
struct ModelInputs {
    std::array<std::vector<data::TokenId>, data::kNumParts> parts;
    std::vector<data::TokenId> ic;
};

/// Tokenizes a sample's NL parts and inefficient code under the config caps.
ModelInputs make_inputs(const data::EpcSample& sample, const data::Vocabulary& vocab, const ECodeConfig& cfg);

/// Training target for a sample: its cheapest efficient program plus EOS.
std::vector<data::TokenId> make_target(const data::EpcSample& sample, const data::Vocabulary& vocab,
                                       const ECodeConfig& cfg);

class ECodeModel {
public:
    ECodeModel(ECodeConfig cfg, ECodeParams params);
    static ECodeModel create(const ECodeConfig& cfg, std::uint64_t seed);

    const ECodeConfig& config() const noexcept { return cfg_; }
    ECodeParams& params() noexcept { return params_; }
    const ECodeParams& params() const noexcept { return params_; }

    // --- tape forms (differentiable) ---------------------------------------

    /// e_X = expert_X(nl_X) for one part.
    nn::Var encode_expert(nn::Tape& tape, std::size_t part, std::span<const data::TokenId> ids);
    /// W_enl · Integration(concat(e_t, e_q, e_i, e_o, e_s)), per position.
    /// Rows past the integration cap are dropped.
    nn::Var integrate_experts(nn::Tape& tape, std::span<const nn::Var> experts);
    nn::Var encode_ic(nn::Tape& tape, std::span<const data::TokenId> ids);
    /// Sequence-axis concatenation, NL rows first.
    nn::Var encoder_output(nn::Tape& tape, nn::Var enc_nl, nn::Var enc_ic);
    /// Full encoder path.
    nn::Var encode(nn::Tape& tape, const ModelInputs& inputs);
    /// Logits [len(prefix) x V] for every prefix position. `prefix` starts
    /// with BOS. Cross-attention weights per head go to `fusion_weights`.
    nn::Var decode_logits(nn::Tape& tape, nn::Var enc, std::span<const data::TokenId> prefix,
                          std::vector<nn::Tensor>* fusion_weights = nullptr);
    /// Teacher-forced mean cross-entropy of `target` (ending in EOS). When
    /// `correct` is given it receives the number of argmax hits.
    nn::Var loss(nn::Tape& tape, const ModelInputs& inputs, std::span<const data::TokenId> target,
                 std::size_t* correct = nullptr);

    // --- inference ---------------------------------------------------------

    /// Enc for `inputs`, computed without recording.
    nn::Tensor encode_plain(const ModelInputs& inputs);
    /// p(next | inputs, prefix). An empty prefix means BOS alone.
    std::vector<double> next_token_probs(const nn::Tensor& enc, std::span<const data::TokenId> prefix);
    std::vector<double> next_token_probs(const ModelInputs& inputs, std::span<const data::TokenId> prefix);
    /// Σ ln p(t_i | inputs, t_<i) in one teacher-forced pass; `tokens` must
    /// end with EOS.
    double sequence_log_prob(const ModelInputs& inputs, std::span<const data::TokenId> tokens);
    /// Teacher-forced argmax accuracy counts: (correct, total).
    std::pair<std::size_t, std::size_t> token_accuracy(const ModelInputs& inputs,
                                                       std::span<const data::TokenId> target);

private:
    struct BoundBlock {
        nn::Var ln1_gain, ln1_shift, ln2_gain, ln2_shift;
        nn::AttentionVars attn;
        nn::Var ff_in_w, ff_in_b, ff_out_w, ff_out_b;
    };

    nn::Var run_stack(nn::Tape& tape, StackParams& stack, nn::Var x, bool causal);
    nn::Var embed(nn::Tape& tape, nn::Tensor& tokens, nn::Tensor& positions,
                  std::span<const data::TokenId> ids, std::size_t cap, const char* role);
    void check_ids(std::span<const data::TokenId> ids) const;

    ECodeConfig cfg_;
    ECodeParams params_;
};

}  // namespace epcforge::model
