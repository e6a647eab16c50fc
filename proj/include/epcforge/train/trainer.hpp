// SPDX-License-Identifier: Apache-2.0
//
// Teacher-forced training with AdamW (decoupled weight decay).

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "epcforge/data/sample.hpp"
#include "epcforge/data/vocab.hpp"
#include "epcforge/model/ecode.hpp"
#include "json.hpp"

namespace epcforge::train {

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 15;
    double learning_rate = 3e-4;
    double weight_decay = 0.01;
    /// Fraction of all optimizer steps spent in linear warmup.
    double warmup_fraction = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    /// Global gradient-norm clip; 0 disables clipping.
    double clip_norm = 1.0;
    std::uint64_t seed = 0;
    bool deterministic = true;

    bool operator==(const TrainConfig&) const = default;

    /// Throws std::invalid_argument on non-positive sizes or rates.
    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Unknown keys are rejected; missing keys keep `base` values.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// One teacher-forcing pair.
struct TrainExample {
    model::ModelInputs inputs;
    std::vector<data::TokenId> target;
};

std::vector<TrainExample> make_examples(std::span<const data::EpcSample> samples, const data::Vocabulary& vocab,
                                        const model::ECodeConfig& cfg);

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double mean_loss = 0.0;
    double token_accuracy = 0.0;

    bool operator==(const EpochStats&) const = default;
};

/// First and second moment estimates per parameter tensor, by name.
struct AdamState {
    std::uint64_t step = 0;
    std::map<std::string, std::vector<double>> m, v;

    bool operator==(const AdamState&) const = default;
};

/// Everything needed to continue a run exactly where it stopped.
struct TrainState {
    std::size_t epochs_done = 0;
    AdamState adam;
    std::vector<EpochStats> trace;
};

class TrainError : public std::runtime_error {
public:
    TrainError(std::size_t epoch, std::size_t batch, const std::string& what);
    std::size_t epoch, batch;
};

/// Learning rate at 1-based optimizer step `step` out of `total_steps`.
double scheduled_lr(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps);

/// One AdamW update of every parameter from its accumulated gradient.
/// Weight decay applies to rank-2 tensors only.
void adamw_step(model::ECodeParams& params, AdamState& state, const TrainConfig& cfg, double lr);

using EpochCallback = std::function<void(const model::ECodeModel&, const TrainState&)>;

/// Runs epochs `state.epochs_done + 1 .. cfg.epochs`. Each epoch visits the
/// examples in an order drawn from (seed, epoch), so a resumed run follows
/// the same trajectory as an uninterrupted one. Throws TrainError on a
/// non-finite loss.
void fit(model::ECodeModel& model, std::span<const TrainExample> examples, const TrainConfig& cfg,
         TrainState& state, const EpochCallback& on_epoch = {});

/// Mean loss and token accuracy over `examples` without updating anything.
EpochStats evaluate(model::ECodeModel& model, std::span<const TrainExample> examples);

}  // namespace epcforge::train
