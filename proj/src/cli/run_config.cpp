// SPDX-License-Identifier: Apache-2.0

#include "epcforge/cli/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace epcforge::cli {

using nlohmann::json;

model::ECodeConfig RunConfig::model_config(std::size_t vocab_size) const {
    model::ECodeConfig c = model::ECodeConfig::preset(preset, vocab_size);
    if (model_overrides.contains("vocab_size")) throw std::invalid_argument("model: vocab_size comes from the corpus");
    c = model::config_from_json(model_overrides, c);
    c.validate();
    return c;
}

json to_json(const model::DecodeParams& p) {
    return json{{"temperature", p.temperature}, {"top_k", p.top_k}, {"top_p", p.top_p},
                {"max_len", p.max_len},         {"greedy", p.greedy}};
}

model::DecodeParams decode_params_from_json(const json& j, model::DecodeParams p) {
    if (!j.is_object()) throw std::invalid_argument("decode config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "temperature") p.temperature = value.get<double>();
        else if (key == "top_k") p.top_k = value.get<std::size_t>();
        else if (key == "top_p") p.top_p = value.get<double>();
        else if (key == "max_len") p.max_len = value.get<std::size_t>();
        else if (key == "greedy") p.greedy = value.get<bool>();
        else throw std::invalid_argument("decode config: unknown key '" + key + "'");
    }
    p.validate();
    return p;
}

json to_json(const RunConfig& c) {
    json model = c.model_overrides;
    model["preset"] = c.preset;
    return json{{"seed", c.seed},
                {"corpus", c.corpus},
                {"checkpoint", c.checkpoint},
                {"reports_dir", c.reports_dir},
                {"model", model},
                {"train", train::to_json(c.train)},
                {"decode", to_json(c.decode)},
                {"k", c.k}};
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "corpus") c.corpus = value.get<std::string>();
            else if (key == "checkpoint") c.checkpoint = value.get<std::string>();
            else if (key == "reports_dir") c.reports_dir = value.get<std::string>();
            else if (key == "k") c.k = value.get<std::size_t>();
            else if (key == "train") c.train = train::train_config_from_json(value, c.train);
            else if (key == "decode") c.decode = decode_params_from_json(value, c.decode);
            else if (key == "model") {
                if (!value.is_object()) throw std::invalid_argument("model config must be a JSON object");
                json overrides = value;
                if (overrides.contains("preset")) {
                    c.preset = overrides["preset"].get<std::string>();
                    overrides.erase("preset");
                }
                // surface unknown model keys now rather than at first use
                (void)model::config_from_json(overrides, model::ECodeConfig{});
                c.model_overrides.update(overrides);
            } else {
                throw std::invalid_argument("config: unknown key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    try {
        return run_config_from_json(j, std::move(base));
    } catch (const std::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

bool determinism_forced() {
    const char* v = std::getenv("EPCFORGE_DETERMINISTIC");
    return v && std::string_view(v) == "1";
}

}  // namespace epcforge::cli
