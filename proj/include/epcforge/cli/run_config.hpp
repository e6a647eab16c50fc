// SPDX-License-Identifier: Apache-2.0
//
// Run configuration shared by the command-line tools. Values come from three
// layers, later ones winning: built-in defaults, a JSON config file, then
// command-line flags.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "epcforge/model/config.hpp"
#include "epcforge/model/decode.hpp"
#include "epcforge/train/trainer.hpp"
#include "json.hpp"

namespace epcforge::cli {

struct RunConfig {
    std::uint64_t seed = 0;
    std::string corpus;
    std::string checkpoint;
    std::string reports_dir;
    /// Model preset name; `model_overrides` is applied on top of it.
    std::string preset = "tiny";
    nlohmann::json model_overrides = nlohmann::json::object();
    train::TrainConfig train;
    model::DecodeParams decode;
    std::size_t k = 1;

    /// Preset for `vocab_size` with the overrides applied and validated.
    model::ECodeConfig model_config(std::size_t vocab_size) const;
};

nlohmann::json to_json(const model::DecodeParams& p);
/// Unknown keys are rejected; missing keys keep `base` values.
model::DecodeParams decode_params_from_json(const nlohmann::json& j, model::DecodeParams base = {});

nlohmann::json to_json(const RunConfig& cfg);
/// Unknown keys, at any level, throw std::invalid_argument.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
/// Reads and parses a config file; errors name the file.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// True when EPCFORGE_DETERMINISTIC is set to "1".
bool determinism_forced();

}  // namespace epcforge::cli
