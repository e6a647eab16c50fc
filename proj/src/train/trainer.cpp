// SPDX-License-Identifier: Apache-2.0

#include "epcforge/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "epcforge/util/rng.hpp"

namespace epcforge::train {

using nlohmann::json;

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
    };
    require(batch_size > 0, "batch_size must be positive");
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(weight_decay >= 0.0, "weight_decay must be non-negative");
    require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, "warmup_fraction must be in [0, 1)");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must be in [0, 1)");
    require(adam_eps > 0.0, "adam_eps must be positive");
    require(clip_norm >= 0.0, "clip_norm must be non-negative");
}

json to_json(const TrainConfig& c) {
    return json{{"batch_size", c.batch_size},   {"epochs", c.epochs},       {"learning_rate", c.learning_rate},
                {"weight_decay", c.weight_decay}, {"warmup_fraction", c.warmup_fraction},
                {"beta1", c.beta1},             {"beta2", c.beta2},         {"adam_eps", c.adam_eps},
                {"clip_norm", c.clip_norm},     {"seed", c.seed},           {"deterministic", c.deterministic}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "batch_size") c.batch_size = value.get<std::size_t>();
        else if (key == "epochs") c.epochs = value.get<std::size_t>();
        else if (key == "learning_rate") c.learning_rate = value.get<double>();
        else if (key == "weight_decay") c.weight_decay = value.get<double>();
        else if (key == "warmup_fraction") c.warmup_fraction = value.get<double>();
        else if (key == "beta1") c.beta1 = value.get<double>();
        else if (key == "beta2") c.beta2 = value.get<double>();
        else if (key == "adam_eps") c.adam_eps = value.get<double>();
        else if (key == "clip_norm") c.clip_norm = value.get<double>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "deterministic") c.deterministic = value.get<bool>();
        else throw std::invalid_argument("train config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

std::vector<TrainExample> make_examples(std::span<const data::EpcSample> samples, const data::Vocabulary& vocab,
                                        const model::ECodeConfig& cfg) {
    std::vector<TrainExample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({model::make_inputs(s, vocab, cfg), model::make_target(s, vocab, cfg)});
    return out;
}

TrainError::TrainError(std::size_t epoch_, std::size_t batch_, const std::string& what)
    : std::runtime_error("epoch " + std::to_string(epoch_) + ", batch " + std::to_string(batch_) + ": " + what),
      epoch(epoch_),
      batch(batch_) {}

double scheduled_lr(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps) {
    const auto warmup = static_cast<std::uint64_t>(std::llround(cfg.warmup_fraction * static_cast<double>(total_steps)));
    if (warmup == 0 || step >= warmup) return cfg.learning_rate;
    return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
}

void adamw_step(model::ECodeParams& params, AdamState& state, const TrainConfig& cfg, double lr) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& [name, tensor] : params.named()) {
        tensor->ensure_grad();
        auto& m = state.m[name];
        auto& v = state.v[name];
        m.resize(tensor->size(), 0.0);
        v.resize(tensor->size(), 0.0);
        const double decay = tensor->rank() == 2 ? cfg.weight_decay : 0.0;
        for (std::size_t i = 0; i < tensor->size(); ++i) {
            const double g = tensor->grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            double& w = tensor->values[i];
            w -= lr * decay * w;
            w -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
        }
    }
}

namespace {

void zero_grads(model::ECodeParams& params) {
    for (auto& [name, t] : params.named()) t->zero_grad();
}

void clip_gradients(model::ECodeParams& params, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (auto& [name, t] : params.named()) {
        for (double g : t->grad) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double s = max_norm / norm;
    for (auto& [name, t] : params.named()) {
        for (double& g : t->grad) g *= s;
    }
}

}  // namespace

void fit(model::ECodeModel& model, std::span<const TrainExample> examples, const TrainConfig& cfg,
         TrainState& state, const EpochCallback& on_epoch) {
    cfg.validate();
    if (cfg.epochs > state.epochs_done && examples.empty()) throw std::invalid_argument("fit: no examples");
    const std::size_t batches = (examples.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::uint64_t total_steps = static_cast<std::uint64_t>(batches) * cfg.epochs;

    for (std::size_t epoch = state.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(examples.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(derive_seed(cfg.seed, "shuffle"), epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

        double loss_sum = 0.0;
        std::size_t hits = 0, tokens = 0;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t begin = b * cfg.batch_size;
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            const double weight = 1.0 / static_cast<double>(end - begin);
            zero_grads(model.params());
            for (std::size_t i = begin; i < end; ++i) {
                const TrainExample& ex = examples[order[i]];
                nn::Tape tape;
                std::size_t correct = 0;
                const nn::Var loss = model.loss(tape, ex.inputs, ex.target, &correct);
                const double value = tape.value(loss).values[0];
                if (!std::isfinite(value)) throw TrainError(epoch, b, "non-finite loss on example " + std::to_string(order[i]));
                try {
                    tape.backward(loss, weight);
                } catch (const std::runtime_error& e) {
                    throw TrainError(epoch, b, e.what());
                }
                loss_sum += value;
                hits += correct;
                tokens += ex.target.size();
            }
            clip_gradients(model.params(), cfg.clip_norm);
            adamw_step(model.params(), state.adam, cfg, scheduled_lr(cfg, state.adam.step + 1, total_steps));
        }
        state.epochs_done = epoch;
        state.trace.push_back({epoch, loss_sum / static_cast<double>(examples.size()),
                               tokens ? static_cast<double>(hits) / static_cast<double>(tokens) : 0.0});
        if (on_epoch) on_epoch(model, state);
    }
}

EpochStats evaluate(model::ECodeModel& model, std::span<const TrainExample> examples) {
    EpochStats s;
    std::size_t hits = 0, tokens = 0;
    for (const TrainExample& ex : examples) {
        nn::Tape tape(false);
        std::size_t correct = 0;
        s.mean_loss += tape.value(model.loss(tape, ex.inputs, ex.target, &correct)).values[0];
        hits += correct;
        tokens += ex.target.size();
    }
    if (!examples.empty()) s.mean_loss /= static_cast<double>(examples.size());
    s.token_accuracy = tokens ? static_cast<double>(hits) / static_cast<double>(tokens) : 0.0;
    return s;
}

}  // namespace epcforge::train
