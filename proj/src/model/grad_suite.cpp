// SPDX-License-Identifier: Apache-2.0

#include "epcforge/model/grad_suite.hpp"

#include <algorithm>
#include <cmath>

#include "epcforge/util/rng.hpp"

namespace epcforge::model {

namespace {
constexpr double kMinProbeGradient = 1e-6;
}  // namespace

ECodeConfig grad_check_config() {
    ECodeConfig cfg = ECodeConfig::tiny(16);
    cfg.caps = {8, 40, 12};
    // larger weights than the training init keep gradients well above
    // finite-difference noise
    cfg.init_std = 0.3;
    return cfg;
}

std::vector<nn::NamedCheck> ecode_grad_check(std::uint64_t seed, std::size_t entries_per_tensor) {
    const ECodeConfig cfg = grad_check_config();
    ECodeModel model = ECodeModel::create(cfg, derive_seed(seed, "params"));
    Rng rng(derive_seed(seed, "data"));
    auto random_ids = [&](std::size_t n) {
        std::vector<data::TokenId> ids(n);
        for (auto& id : ids) id = static_cast<data::TokenId>(rng.index(cfg.vocab_size));
        return ids;
    };
    ModelInputs in;
    for (auto& part : in.parts) part = random_ids(1 + rng.index(4));
    in.ic = random_ids(2 + rng.index(5));
    std::vector<data::TokenId> target = random_ids(2 + rng.index(4));
    target.push_back(data::kEos);

    auto loss_value = [&] {
        nn::Tape tape(false);
        return tape.value(model.loss(tape, in, target)).values[0];
    };

    auto named = model.params().named();
    for (auto& [name, t] : named) t->zero_grad();
    {
        nn::Tape tape;
        tape.backward(model.loss(tape, in, target));
    }

    constexpr double eps = 1e-5;
    std::vector<nn::NamedCheck> out;
    for (auto& [name, t] : named) {
        std::vector<std::size_t> probe;
        std::size_t largest = 0;
        for (std::size_t i = 1; i < t->size(); ++i) {
            if (std::fabs(t->grad[i]) > std::fabs(t->grad[largest])) largest = i;
        }
        probe.push_back(largest);
        // Random probes come from entries whose gradient is above the
        // finite-difference noise floor (about 1e-10 here); below it the
        // relative error only measures rounding.
        std::vector<std::size_t> resolvable;
        for (std::size_t i = 0; i < t->size(); ++i) {
            if (std::fabs(t->grad[i]) >= kMinProbeGradient) resolvable.push_back(i);
        }
        for (std::size_t r = 0; r < entries_per_tensor && !resolvable.empty(); ++r) {
            probe.push_back(resolvable[rng.index(resolvable.size())]);
        }

        double worst = 0.0;
        for (std::size_t i : probe) {
            const double saved = t->values[i];
            t->values[i] = saved + eps;
            const double up = loss_value();
            t->values[i] = saved - eps;
            const double down = loss_value();
            t->values[i] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double ga = t->grad[i];
            worst = std::max(worst, std::fabs(ga - fd) / std::max(1e-8, std::fabs(ga) + std::fabs(fd)));
        }
        out.push_back({name, worst});
    }
    return out;
}

}  // namespace epcforge::model
