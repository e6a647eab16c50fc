// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "epcforge/data/corpus.hpp"
#include "epcforge/model/decode.hpp"
#include "epcforge/train/checkpoint.hpp"
#include "epcforge/train/trainer.hpp"
#include "epcforge/util/rng.hpp"

using namespace epcforge;
using namespace epcforge::train;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    std::vector<data::EpcSample> corpus;
    data::Vocabulary vocab;
    model::ECodeConfig cfg;
    std::vector<TrainExample> examples;

    explicit Fixture(std::size_t n, std::uint64_t seed = 3) : corpus(data::generate_corpus(n, seed)) {
        vocab = data::Vocabulary::build(corpus);
        cfg = model::ECodeConfig::tiny(vocab.size());
        examples = make_examples(corpus, vocab, cfg);
    }
};

TrainConfig quick_config(std::size_t epochs) {
    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = epochs;
    tc.learning_rate = 2e-3;
    tc.seed = 5;
    return tc;
}

std::vector<std::vector<double>> snapshot(const model::ECodeParams& p) {
    std::vector<std::vector<double>> out;
    for (const auto& [name, t] : p.named()) out.push_back(t->values);
    return out;
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("epcforge_train_" + name); }

}  // namespace

TEST_CASE("train config: validation and json") {
    TrainConfig tc;
    CHECK(tc.batch_size == 32);
    CHECK(tc.epochs == 15);
    CHECK(tc.beta1 == 0.9);
    CHECK(tc.beta2 == 0.999);
    CHECK(tc.adam_eps == 1e-8);
    CHECK(tc.weight_decay == 0.01);
    CHECK_NOTHROW(tc.validate());
    tc.seed = 99;
    tc.learning_rate = 0.5;
    CHECK(train_config_from_json(to_json(tc)) == tc);
    CHECK_THROWS(train_config_from_json(nlohmann::json{{"batchsize", 3}}));
    TrainConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.learning_rate = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("learning-rate schedule: linear warmup then constant") {
    TrainConfig tc;
    tc.learning_rate = 1.0;
    tc.warmup_fraction = 0.05;
    CHECK(scheduled_lr(tc, 1, 100) == doctest::Approx(0.2));
    CHECK(scheduled_lr(tc, 4, 100) == doctest::Approx(0.8));
    CHECK(scheduled_lr(tc, 5, 100) == 1.0);
    CHECK(scheduled_lr(tc, 90, 100) == 1.0);
    CHECK(scheduled_lr(tc, 1, 5) == 1.0);  // rounds to no warmup
}

TEST_CASE("adamw_step matches an element-wise reference") {
    auto cfg = model::ECodeConfig::tiny(20);
    cfg.caps = {8, 40, 8};
    model::ECodeParams p = model::ECodeParams::init(cfg, 1);
    TrainConfig tc;
    tc.learning_rate = 0.01;
    tc.weight_decay = 0.1;
    AdamState state;
    Rng rng(4);

    auto ref = snapshot(p);
    std::vector<std::vector<double>> m(ref.size()), v(ref.size());
    const auto named = p.named();
    for (int step = 1; step <= 3; ++step) {
        for (std::size_t k = 0; k < named.size(); ++k) {
            named[k].second->grad.resize(named[k].second->size());
            for (double& g : named[k].second->grad) g = rng.normal();
            m[k].resize(ref[k].size(), 0.0);
            v[k].resize(ref[k].size(), 0.0);
            const bool decays = named[k].second->rank() == 2;
            for (std::size_t i = 0; i < ref[k].size(); ++i) {
                const double g = named[k].second->grad[i];
                m[k][i] = 0.9 * m[k][i] + 0.1 * g;
                v[k][i] = 0.999 * v[k][i] + 0.001 * g * g;
                const double mh = m[k][i] / (1 - std::pow(0.9, step));
                const double vh = v[k][i] / (1 - std::pow(0.999, step));
                if (decays) ref[k][i] *= 1 - 0.01 * 0.1;
                ref[k][i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
            }
        }
        adamw_step(p, state, tc, 0.01);
    }
    CHECK(state.step == 3);
    const auto got = snapshot(p);
    for (std::size_t k = 0; k < got.size(); ++k) {
        for (std::size_t i = 0; i < got[k].size(); ++i) CHECK(got[k][i] == doctest::Approx(ref[k][i]).epsilon(1e-12));
    }
    // gains and shifts are never decayed: with a zero gradient they stay put
    model::ECodeParams q = model::ECodeParams::init(cfg, 1);
    for (auto& [name, t] : q.named()) t->zero_grad();
    AdamState s2;
    adamw_step(q, s2, tc, 0.01);
    for (double g : q.experts[0].stack.final_gain.values) CHECK(g == 1.0);
}

TEST_CASE("zero epochs leaves parameters untouched") {
    Fixture f(6);
    model::ECodeModel m = model::ECodeModel::create(f.cfg, 1);
    const auto before = snapshot(m.params());
    TrainState st;
    fit(m, f.examples, quick_config(0), st);
    CHECK(st.trace.empty());
    CHECK(snapshot(m.params()) == before);
}

TEST_CASE("initial loss is close to ln V") {
    Fixture f(20);
    model::ECodeModel m = model::ECodeModel::create(f.cfg, 9);
    const double lnv = std::log(static_cast<double>(f.vocab.size()));
    CHECK(std::fabs(evaluate(m, f.examples).mean_loss - lnv) < 0.1 * lnv);
}

TEST_CASE("training is bit-reproducible and resumable") {
    Fixture f(8);
    const TrainConfig tc = quick_config(3);

    model::ECodeModel a = model::ECodeModel::create(f.cfg, 2);
    TrainState sa;
    fit(a, f.examples, tc, sa);
    model::ECodeModel b = model::ECodeModel::create(f.cfg, 2);
    TrainState sb;
    fit(b, f.examples, tc, sb);
    CHECK(snapshot(a.params()) == snapshot(b.params()));
    CHECK(sa.trace == sb.trace);
    CHECK(sa.adam == sb.adam);
    REQUIRE(sa.trace.size() == 3);

    // stop after one epoch, persist, reload, continue
    const fs::path path = temp_path("resume.ckpt");
    model::ECodeModel c = model::ECodeModel::create(f.cfg, 2);
    TrainState sc;
    TrainConfig first = tc;
    first.epochs = 1;
    fit(c, f.examples, first, sc);
    save_checkpoint(path, {f.cfg, tc, f.vocab, c.params(), sc});
    Checkpoint ck = load_checkpoint(path);
    model::ECodeModel d(ck.model_config, std::move(ck.params));
    fit(d, f.examples, ck.train_config, ck.state);
    CHECK(snapshot(d.params()) == snapshot(a.params()));
    CHECK(ck.state.trace == sa.trace);
    fs::remove(path);
}

TEST_CASE("checkpoint: round trip and validation") {
    Fixture f(4);
    model::ECodeModel m = model::ECodeModel::create(f.cfg, 4);
    TrainState st;
    fit(m, f.examples, quick_config(1), st);
    const fs::path path = temp_path("rt.ckpt");
    save_checkpoint(path, {f.cfg, quick_config(1), f.vocab, m.params(), st});
    CHECK_FALSE(fs::exists(fs::path(path.string() + ".tmp")));
    const Checkpoint ck = load_checkpoint(path);
    CHECK(ck.model_config == f.cfg);
    CHECK(ck.vocab == f.vocab);
    CHECK(ck.state.adam == st.adam);
    CHECK(ck.state.epochs_done == 1);
    CHECK(snapshot(ck.params) == snapshot(m.params()));

    // saving again gives identical bytes
    const fs::path again = temp_path("rt2.ckpt");
    save_checkpoint(again, ck);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(path) == slurp(again));

    const std::string bytes = slurp(path);
    {
        std::ofstream out(again, std::ios::binary);
        out << "epcforge-ckpt-v0" << bytes.substr(bytes.find('\n'));
    }
    CHECK_THROWS_AS(load_checkpoint(again), CheckpointError);
    {
        std::ofstream out(again, std::ios::binary);
        out << bytes.substr(0, bytes.size() - 100);
    }
    CHECK_THROWS_AS(load_checkpoint(again), CheckpointError);
    {
        // metadata claims a wider model than the payload holds
        const std::size_t a = bytes.find('\n') + 1, b = bytes.find('\n', a);
        auto meta = nlohmann::json::parse(bytes.substr(a, b - a));
        meta["model_config"]["d_model"] = 96;
        std::ofstream out(again, std::ios::binary);
        out << bytes.substr(0, a) << meta.dump() << bytes.substr(b);
    }
    CHECK_THROWS_AS(load_checkpoint(again), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(temp_path("missing.ckpt")), CheckpointError);
    fs::remove(path);
    fs::remove(again);
}

TEST_CASE("non-finite loss aborts with the batch id") {
    Fixture f(4);
    model::ECodeModel m = model::ECodeModel::create(f.cfg, 4);
    m.params().projection.bias.values[0] = std::nan("");
    TrainState st;
    try {
        fit(m, f.examples, quick_config(1), st);
        FAIL("expected TrainError");
    } catch (const TrainError& e) {
        CHECK(e.epoch == 1);
        CHECK(e.batch == 0);
    }
}

TEST_CASE("loss trace decreases when smoothed") {
    Fixture f(16);
    model::ECodeModel m = model::ECodeModel::create(f.cfg, 8);
    TrainState st;
    fit(m, f.examples, quick_config(10), st);
    std::vector<double> smooth;
    for (std::size_t i = 2; i < st.trace.size(); ++i) {
        smooth.push_back((st.trace[i].mean_loss + st.trace[i - 1].mean_loss + st.trace[i - 2].mean_loss) / 3.0);
    }
    int violations = 0;
    for (std::size_t i = 1; i < smooth.size(); ++i) violations += smooth[i] > smooth[i - 1];
    CHECK(violations <= 1);
    CHECK(st.trace.back().mean_loss < st.trace.front().mean_loss);
}

TEST_CASE("a five-sample corpus is memorised") {
    Fixture f(5, 21);
    model::ECodeModel m = model::ECodeModel::create(f.cfg, 3);
    TrainConfig tc = quick_config(120);
    tc.batch_size = 5;
    tc.weight_decay = 0.0;
    TrainState st;
    fit(m, f.examples, tc, st);
    CHECK(evaluate(m, f.examples).token_accuracy > 0.99);
    model::DecodeParams greedy;
    greedy.greedy = true;
    for (const TrainExample& ex : f.examples) {
        const model::Generation g = model::generate(m, ex.inputs, greedy, 0);
        CHECK(g.tokens == ex.target);
        const auto three = model::sample_k_candidates(m, ex.inputs, 3, greedy, 11);
        for (const auto& c : three) CHECK(c.tokens == ex.target);
    }
}
