// SPDX-License-Identifier: Apache-2.0

#include "epcforge/model/config.hpp"

#include "epcforge/nn/tensor.hpp"

namespace epcforge::model {

using nlohmann::json;

void ECodeConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw nn::ConfigError("model config: " + what);
    };
    require(vocab_size > static_cast<std::size_t>(data::kNumReserved), "vocab_size must exceed the reserved ids");
    require(d_expert > 0 && d_model > 0, "widths must be positive");
    require(self_heads > 0 && cross_heads > 0, "head counts must be positive");
    require(d_expert % self_heads == 0, "self_heads must divide d_expert");
    require(d_model % cross_heads == 0,
            "cross_heads (" + std::to_string(cross_heads) + ") must divide d_model (" + std::to_string(d_model) + ")");
    require(d_model % model_heads() == 0, "code-stack heads must divide d_model");
    require(ffn_mult > 0, "ffn_mult must be positive");
    require(init_std > 0, "init_std must be positive");
    require(caps.expert > 1 && caps.integration > 0 && caps.decoder > 1, "caps must be positive");
}

ECodeConfig ECodeConfig::standard(std::size_t vocab_size) {
    ECodeConfig c;
    c.vocab_size = vocab_size;
    return c;
}

ECodeConfig ECodeConfig::tiny(std::size_t vocab_size) {
    ECodeConfig c;
    c.vocab_size = vocab_size;
    c.d_expert = 16;
    c.d_model = 48;
    c.expert_layers = c.integration_layers = c.encoder_layers = c.decoder_layers = c.output_layers = 1;
    c.self_heads = 2;
    c.caps = data::RoleCaps{}.scaled(0.25);
    return c;
}

ECodeConfig ECodeConfig::eight_head(std::size_t vocab_size) {
    ECodeConfig c = standard(vocab_size);
    c.cross_heads = 8;
    return c;
}

ECodeConfig ECodeConfig::preset(const std::string& name, std::size_t vocab_size) {
    if (name == "standard") return standard(vocab_size);
    if (name == "tiny") return tiny(vocab_size);
    if (name == "eight-head") return eight_head(vocab_size);
    throw nn::ConfigError("unknown model preset '" + name + "'");
}

json to_json(const ECodeConfig& c) {
    return json{{"vocab_size", c.vocab_size},
                {"d_expert", c.d_expert},
                {"d_model", c.d_model},
                {"expert_layers", c.expert_layers},
                {"integration_layers", c.integration_layers},
                {"encoder_layers", c.encoder_layers},
                {"decoder_layers", c.decoder_layers},
                {"output_layers", c.output_layers},
                {"self_heads", c.self_heads},
                {"cross_heads", c.cross_heads},
                {"cross_heads_everywhere", c.cross_heads_everywhere},
                {"fusion_residual", c.fusion_residual},
                {"ffn_mult", c.ffn_mult},
                {"init_std", c.init_std},
                {"cap_expert", c.caps.expert},
                {"cap_integration", c.caps.integration},
                {"cap_decoder", c.caps.decoder}};
}

ECodeConfig config_from_json(const json& j, ECodeConfig c) {
    if (!j.is_object()) throw nn::ConfigError("model config must be an object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "vocab_size") c.vocab_size = value.get<std::size_t>();
            else if (key == "d_expert") c.d_expert = value.get<std::size_t>();
            else if (key == "d_model") c.d_model = value.get<std::size_t>();
            else if (key == "expert_layers") c.expert_layers = value.get<std::size_t>();
            else if (key == "integration_layers") c.integration_layers = value.get<std::size_t>();
            else if (key == "encoder_layers") c.encoder_layers = value.get<std::size_t>();
            else if (key == "decoder_layers") c.decoder_layers = value.get<std::size_t>();
            else if (key == "output_layers") c.output_layers = value.get<std::size_t>();
            else if (key == "self_heads") c.self_heads = value.get<std::size_t>();
            else if (key == "cross_heads") c.cross_heads = value.get<std::size_t>();
            else if (key == "cross_heads_everywhere") c.cross_heads_everywhere = value.get<bool>();
            else if (key == "fusion_residual") c.fusion_residual = value.get<bool>();
            else if (key == "ffn_mult") c.ffn_mult = value.get<std::size_t>();
            else if (key == "init_std") c.init_std = value.get<double>();
            else if (key == "cap_expert") c.caps.expert = value.get<std::size_t>();
            else if (key == "cap_integration") c.caps.integration = value.get<std::size_t>();
            else if (key == "cap_decoder") c.caps.decoder = value.get<std::size_t>();
            else throw nn::ConfigError("unknown model config key '" + key + "'");
        } catch (const json::exception& err) {
            throw nn::ConfigError("model config key '" + key + "': " + err.what());
        }
    }
    return c;
}

}  // namespace epcforge::model
