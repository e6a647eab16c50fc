// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container "epcforge-ckpt-v1":
//
//   line 1   epcforge-ckpt-v1
//   line 2   JSON metadata: model config, train config, vocabulary words,
//            training state scalars, loss trace and a tensor directory
//   rest     little-endian float64 payload: each parameter tensor in
//            directory order, then Adam first moments, then second moments
//            (moments only when the optimizer has taken a step)

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "epcforge/data/vocab.hpp"
#include "epcforge/model/ecode.hpp"
#include "epcforge/train/trainer.hpp"

namespace epcforge::train {

inline constexpr const char* kCheckpointHeader = "epcforge-ckpt-v1";

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Checkpoint {
    model::ECodeConfig model_config;
    TrainConfig train_config;
    data::Vocabulary vocab;
    model::ECodeParams params;
    TrainState state;
};

/// Writes atomically (temporary file, then rename).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Validates the header, every tensor name and shape against the stored
/// config, and the payload length. Throws CheckpointError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace epcforge::train
