// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "epcforge/data/vocab.hpp"
#include "json.hpp"

namespace epcforge::model {

struct ECodeConfig {
    std::size_t vocab_size = 0;
    std::size_t d_expert = 128;  // expert and integration width
    std::size_t d_model = 240;   // code encoder, decoder and output width
    std::size_t expert_layers = 2;
    std::size_t integration_layers = 2;
    std::size_t encoder_layers = 2;
    std::size_t decoder_layers = 2;
    std::size_t output_layers = 2;
    std::size_t self_heads = 4;
    std::size_t cross_heads = 48;
    /// Use cross_heads for the code encoder, decoder and output stacks too.
    bool cross_heads_everywhere = false;
    /// Add the decoder state back onto the cross-attention output.
    bool fusion_residual = false;
    std::size_t ffn_mult = 4;
    double init_std = 0.02;
    data::RoleCaps caps;

    bool operator==(const ECodeConfig&) const = default;

    /// Throws nn::ConfigError naming the first violated constraint.
    void validate() const;

    std::size_t model_heads() const noexcept { return cross_heads_everywhere ? cross_heads : self_heads; }

    /// Desk-scale default: widths 128 / 240, two layers per stack, 48-head fusion.
    static ECodeConfig standard(std::size_t vocab_size);
    /// Smallest useful model for tests: widths 16 / 48, one layer per stack.
    static ECodeConfig tiny(std::size_t vocab_size);
    /// standard() with an 8-head fusion layer.
    static ECodeConfig eight_head(std::size_t vocab_size);
    /// Looks up a preset by name: "standard", "tiny" or "eight-head".
    static ECodeConfig preset(const std::string& name, std::size_t vocab_size);
};

nlohmann::json to_json(const ECodeConfig& cfg);
/// Unknown keys are rejected; missing keys keep `base` values.
ECodeConfig config_from_json(const nlohmann::json& j, ECodeConfig base = {});

}  // namespace epcforge::model
