// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "epcforge/model/decode.hpp"
#include "epcforge/model/ecode.hpp"
#include "epcforge/model/grad_suite.hpp"
#include "epcforge/util/rng.hpp"

using namespace epcforge;
using namespace epcforge::model;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

ECodeConfig small_config() {
    ECodeConfig cfg = ECodeConfig::tiny(24);
    cfg.caps = {10, 50, 16};
    cfg.init_std = 0.2;
    return cfg;
}

std::vector<data::TokenId> random_ids(Rng& rng, std::size_t n, std::size_t vocab) {
    std::vector<data::TokenId> ids(n);
    for (auto& id : ids) id = static_cast<data::TokenId>(rng.index(vocab));
    return ids;
}

ModelInputs random_inputs(Rng& rng, const ECodeConfig& cfg) {
    ModelInputs in;
    for (auto& part : in.parts) part = random_ids(rng, 1 + rng.index(cfg.caps.expert), cfg.vocab_size);
    in.ic = random_ids(rng, 1 + rng.index(cfg.caps.decoder), cfg.vocab_size);
    return in;
}

// ---- straight-line reference forward built from plain tensor ops ----------

Tensor ref_gelu(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.values) v = 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
    return y;
}

Tensor ref_add(const Tensor& a, const Tensor& b) {
    REQUIRE(a.shape == b.shape);
    Tensor y = a;
    for (std::size_t i = 0; i < y.size(); ++i) y.values[i] += b.values[i];
    return y;
}

Tensor ref_rows(const Tensor& table, std::span<const data::TokenId> ids) {
    Tensor y({ids.size(), table.cols()});
    for (std::size_t r = 0; r < ids.size(); ++r) {
        for (std::size_t c = 0; c < table.cols(); ++c) y(r, c) = table(static_cast<std::size_t>(ids[r]), c);
    }
    return y;
}

Tensor ref_first_rows(const Tensor& table, std::size_t n) {
    std::vector<data::TokenId> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return ref_rows(table, ids);
}

Tensor ref_concat(const std::vector<Tensor>& parts) {
    std::size_t rows = 0;
    for (const Tensor& p : parts) rows += p.rows();
    Tensor y({rows, parts.front().cols()});
    std::size_t r0 = 0;
    for (const Tensor& p : parts) {
        std::copy(p.values.begin(), p.values.end(), y.values.begin() + static_cast<std::ptrdiff_t>(r0 * y.cols()));
        r0 += p.rows();
    }
    return y;
}

Tensor ref_stack(const StackParams& s, Tensor x, bool causal) {
    if (s.blocks.empty()) return x;
    for (const BlockParams& b : s.blocks) {
        const Tensor h = nn::layer_norm(x, b.ln1_gain, b.ln1_shift);
        x = ref_add(x, nn::multi_head_attention(h, h, b.attn, causal));
        const Tensor h2 = nn::layer_norm(x, b.ln2_gain, b.ln2_shift);
        x = ref_add(x, nn::linear(ref_gelu(nn::linear(h2, b.ff_in)), b.ff_out));
    }
    return nn::layer_norm(x, s.final_gain, s.final_shift);
}

Tensor ref_encode(const ECodeParams& p, const ECodeConfig& cfg, const ModelInputs& in) {
    std::vector<Tensor> experts;
    for (std::size_t e = 0; e < data::kNumParts; ++e) {
        const ExpertParams& ex = p.experts[e];
        const Tensor x =
            ref_add(ref_rows(ex.token_embedding, in.parts[e]), ref_first_rows(ex.position_embedding, in.parts[e].size()));
        experts.push_back(ref_stack(ex.stack, x, false));
    }
    Tensor cat = ref_concat(experts);
    if (cat.rows() > cfg.caps.integration) cat = ref_first_rows(cat, cfg.caps.integration);
    cat = ref_add(cat, ref_first_rows(p.integration_positions, cat.rows()));
    const Tensor enc_nl = nn::linear(ref_stack(p.integration, cat, false), p.enlarge);
    const Tensor ic = ref_add(ref_rows(p.ic_embedding, in.ic), ref_first_rows(p.ic_positions, in.ic.size()));
    const Tensor enc_ic = ref_stack(p.code_encoder, ic, true);
    return ref_concat({enc_nl, enc_ic});
}

std::vector<double> ref_next_probs(const ECodeParams& p, const ECodeConfig& cfg, const Tensor& enc,
                                   std::span<const data::TokenId> prefix) {
    const Tensor x = ref_add(ref_rows(p.ec_embedding, prefix), ref_first_rows(p.ec_positions, prefix.size()));
    const Tensor dec = ref_stack(p.decoder, x, true);
    Tensor fused = nn::multi_head_attention(dec, enc, p.fusion, false);
    if (cfg.fusion_residual) fused = ref_add(fused, dec);
    const Tensor out = ref_stack(p.output, ref_add(fused, ref_first_rows(p.output_positions, prefix.size())), true);
    const Tensor logits = nn::linear(out, p.projection);
    Tensor last({1, logits.cols()});
    for (std::size_t c = 0; c < logits.cols(); ++c) last(0, c) = logits(logits.rows() - 1, c);
    return nn::softmax(last, 1).values;
}

Tensor expert_value(ECodeModel& m, std::size_t part, const std::vector<data::TokenId>& ids) {
    Tape tape(false);
    return tape.value(m.encode_expert(tape, part, ids));
}

}  // namespace

TEST_CASE("config: presets validate and reject bad head counts") {
    CHECK_NOTHROW(ECodeConfig::standard(100).validate());
    CHECK_NOTHROW(ECodeConfig::tiny(100).validate());
    CHECK(ECodeConfig::standard(100).cross_heads == 48);
    CHECK(ECodeConfig::standard(100).d_expert != ECodeConfig::standard(100).d_model);
    CHECK(ECodeConfig::preset("eight-head", 100).cross_heads == 8);
    CHECK_THROWS_AS(ECodeConfig::preset("huge", 100), nn::ConfigError);
    ECodeConfig bad = ECodeConfig::standard(100);
    bad.d_model = 256;  // 48 does not divide 256
    CHECK_THROWS_AS(bad.validate(), nn::ConfigError);
    bad = ECodeConfig::standard(100);
    bad.cross_heads_everywhere = true;
    CHECK_NOTHROW(bad.validate());
}

TEST_CASE("config: json round trip and unknown keys") {
    ECodeConfig cfg = ECodeConfig::tiny(50);
    cfg.fusion_residual = true;
    cfg.caps.decoder = 99;
    CHECK(config_from_json(to_json(cfg)) == cfg);
    CHECK(config_from_json(nlohmann::json{{"d_model", 96}}, cfg).d_model == 96);
    CHECK_THROWS(config_from_json(nlohmann::json{{"d_modle", 96}}, cfg));
}

TEST_CASE("params: stable count, deterministic init, finite values") {
    const ECodeConfig cfg = small_config();
    const ECodeParams a = ECodeParams::init(cfg, 7);
    const ECodeParams b = ECodeParams::init(cfg, 7);
    const ECodeParams c = ECodeParams::init(cfg, 8);
    CHECK(a.parameter_count() == b.parameter_count());
    CHECK(a.parameter_count() > 0);
    const auto na = a.named(), nb = b.named(), nc = c.named();
    REQUIRE(na.size() == nb.size());
    bool any_differs = false;
    for (std::size_t i = 0; i < na.size(); ++i) {
        CHECK(na[i].first == nb[i].first);
        CHECK(na[i].second->values == nb[i].second->values);
        CHECK(na[i].second->all_finite());
        any_differs |= na[i].second->values != nc[i].second->values;
    }
    CHECK(any_differs);
}

TEST_CASE("experts are independent") {
    const ECodeConfig cfg = small_config();
    ECodeModel m = ECodeModel::create(cfg, 3);
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        ModelInputs in = random_inputs(rng, cfg);
        std::array<Tensor, data::kNumParts> before;
        for (std::size_t p = 0; p < data::kNumParts; ++p) before[p] = expert_value(m, p, in.parts[p]);
        const std::size_t changed = rng.index(data::kNumParts);
        in.parts[changed][0] = static_cast<data::TokenId>((in.parts[changed][0] + 1) % cfg.vocab_size);
        for (std::size_t p = 0; p < data::kNumParts; ++p) {
            const Tensor after = expert_value(m, p, in.parts[p]);
            if (p == changed) {
                CHECK(after.values != before[p].values);
            } else {
                CHECK(after.values == before[p].values);
            }
        }
    }
}

TEST_CASE("experts: caps, bad ids and lone markers") {
    const ECodeConfig cfg = small_config();
    ECodeModel m = ECodeModel::create(cfg, 3);
    Tape tape(false);
    const std::vector<data::TokenId> over(cfg.caps.expert + 1, 7);
    CHECK_THROWS_AS(m.encode_expert(tape, 0, over), std::length_error);
    const std::vector<data::TokenId> bad{3, static_cast<data::TokenId>(cfg.vocab_size)};
    CHECK_THROWS_AS(m.encode_expert(tape, 0, bad), std::out_of_range);
    const std::vector<data::TokenId> marker{data::part_marker(data::NlPart::Tags)};
    const Tensor once = expert_value(m, 0, marker);
    CHECK(once.rows() == 1);
    CHECK(once.cols() == cfg.d_expert);
    CHECK(expert_value(m, 0, marker).values == once.values);
    const std::vector<data::TokenId> ic_over(cfg.caps.decoder + 1, 7);
    CHECK_THROWS_AS(m.encode_ic(tape, ic_over), std::length_error);
}

TEST_CASE("integration: output width and width contract") {
    ECodeConfig cfg = small_config();
    ECodeModel m = ECodeModel::create(cfg, 4);
    Rng rng(5);
    const ModelInputs in = random_inputs(rng, cfg);
    Tape tape(false);
    std::vector<Var> experts;
    std::size_t rows = 0;
    for (std::size_t p = 0; p < data::kNumParts; ++p) {
        experts.push_back(m.encode_expert(tape, p, in.parts[p]));
        rows += in.parts[p].size();
    }
    const Tensor& nl = tape.value(m.integrate_experts(tape, experts));
    CHECK(nl.cols() == cfg.d_model);
    CHECK(nl.rows() == std::min(rows, cfg.caps.integration));

    experts[2] = tape.constant(Tensor({2, cfg.d_expert + 1}));
    CHECK_THROWS_AS(m.integrate_experts(tape, experts), nn::ShapeError);
    experts.pop_back();
    CHECK_THROWS(m.integrate_experts(tape, experts));
}

TEST_CASE("integration: identity stack and identity enlarge give the concatenation") {
    ECodeConfig cfg = small_config();
    cfg.d_expert = 16;
    cfg.d_model = 16;
    cfg.cross_heads = 8;
    cfg.integration_layers = 0;
    ECodeModel m = ECodeModel::create(cfg, 9);
    m.params().enlarge.weight = Tensor::identity(16);
    std::fill(m.params().integration_positions.values.begin(), m.params().integration_positions.values.end(), 0.0);

    Rng rng(2);
    const ModelInputs in = random_inputs(rng, cfg);
    Tape tape(false);
    std::vector<Var> experts;
    std::vector<Tensor> values;
    for (std::size_t p = 0; p < data::kNumParts; ++p) {
        experts.push_back(m.encode_expert(tape, p, in.parts[p]));
        values.push_back(tape.value(experts.back()));
    }
    const Tensor& nl = tape.value(m.integrate_experts(tape, experts));
    CHECK(nl.values == ref_concat(values).values);
}

TEST_CASE("encode_ic: deterministic and causal") {
    const ECodeConfig cfg = small_config();
    ECodeModel m = ECodeModel::create(cfg, 6);
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        auto ids = random_ids(rng, 4 + rng.index(8), cfg.vocab_size);
        Tape t1(false), t2(false);
        const Tensor a = t1.value(m.encode_ic(t1, ids));
        CHECK(t2.value(m.encode_ic(t2, ids)).values == a.values);
        const std::size_t i = rng.index(ids.size() - 1);
        for (std::size_t j = i + 1; j < ids.size(); ++j) ids[j] = static_cast<data::TokenId>(rng.index(cfg.vocab_size));
        Tape t3(false);
        const Tensor b = t3.value(m.encode_ic(t3, ids));
        for (std::size_t r = 0; r <= i; ++r) {
            for (std::size_t c = 0; c < a.cols(); ++c) CHECK(b(r, c) == a(r, c));
        }
    }
}

TEST_CASE("encoder_output: concatenation semantics") {
    const ECodeConfig cfg = small_config();
    ECodeModel m = ECodeModel::create(cfg, 1);
    Rng rng(3);
    Tensor a({3, cfg.d_model}), b({5, cfg.d_model});
    for (double& v : a.values) v = rng.normal();
    for (double& v : b.values) v = rng.normal();
    Tape tape(false);
    const Tensor& cat = tape.value(m.encoder_output(tape, tape.constant(a), tape.constant(b)));
    CHECK(cat.rows() == 8);
    CHECK(cat.values == ref_concat({a, b}).values);
    const Tensor& left = tape.value(m.encoder_output(tape, tape.constant(a), tape.constant(Tensor({0, cfg.d_model}))));
    CHECK(left.values == a.values);
    const Tensor& right = tape.value(m.encoder_output(tape, tape.constant(Tensor({0, cfg.d_model})), tape.constant(b)));
    CHECK(right.values == b.values);
    CHECK_THROWS_AS(m.encoder_output(tape, tape.constant(Tensor({2, 3})), tape.constant(b)), nn::ShapeError);
}

TEST_CASE("forward pass matches the reference composition") {
    for (bool residual : {false, true}) {
        ECodeConfig cfg = small_config();
        cfg.fusion_residual = residual;
        cfg.expert_layers = 2;
        cfg.decoder_layers = 2;
        ECodeModel m = ECodeModel::create(cfg, 21);
        Rng rng(residual ? 5 : 4);
        for (int trial = 0; trial < 5; ++trial) {
            const ModelInputs in = random_inputs(rng, cfg);
            const Tensor enc = m.encode_plain(in);
            const Tensor ref = ref_encode(m.params(), cfg, in);
            REQUIRE(enc.shape == ref.shape);
            for (std::size_t i = 0; i < enc.size(); ++i) CHECK(enc.values[i] == doctest::Approx(ref.values[i]).epsilon(1e-12));

            std::vector<data::TokenId> prefix{data::kBos};
            const auto more = random_ids(rng, rng.index(6), cfg.vocab_size);
            prefix.insert(prefix.end(), more.begin(), more.end());
            const auto probs = m.next_token_probs(enc, prefix);
            const auto expect = ref_next_probs(m.params(), cfg, ref, prefix);
            REQUIRE(probs.size() == expect.size());
            for (std::size_t v = 0; v < probs.size(); ++v) CHECK(std::fabs(probs[v] - expect[v]) < 1e-12);
        }
    }
}

TEST_CASE("next_token_probs: distribution and fusion heads") {
    const ECodeConfig cfg = small_config();
    ECodeModel m = ECodeModel::create(cfg, 2);
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const ModelInputs in = random_inputs(rng, cfg);
        const auto prefix = random_ids(rng, rng.index(5), cfg.vocab_size);
        const auto probs = m.next_token_probs(in, prefix);
        CHECK(probs.size() == cfg.vocab_size);
        CHECK(std::fabs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) < 1e-9);
        for (double p : probs) CHECK(p >= 0.0);
    }
    // an empty prefix means BOS alone
    const ModelInputs in = random_inputs(rng, cfg);
    const std::vector<data::TokenId> bos{data::kBos};
    CHECK(m.next_token_probs(in, {}) == m.next_token_probs(in, bos));

    Tape tape(false);
    const Var enc = m.encode(tape, in);
    std::vector<Tensor> weights;
    const std::vector<data::TokenId> prefix{data::kBos, 12, 13};
    m.decode_logits(tape, enc, prefix, &weights);
    REQUIRE(weights.size() == 48);
    for (const Tensor& w : weights) {
        CHECK(w.rows() == prefix.size());
        CHECK(w.cols() == tape.value(enc).rows());
        for (std::size_t r = 0; r < w.rows(); ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < w.cols(); ++c) sum += w(r, c);
            CHECK(std::fabs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("sequence_log_prob agrees with stepwise next_token_probs") {
    const ECodeConfig cfg = small_config();
    ECodeModel m = ECodeModel::create(cfg, 30);
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const ModelInputs in = random_inputs(rng, cfg);
        auto seq = random_ids(rng, rng.index(cfg.caps.decoder - 1), cfg.vocab_size);
        seq.push_back(data::kEos);
        const double batched = m.sequence_log_prob(in, seq);
        const Tensor enc = m.encode_plain(in);
        double stepwise = 0.0;
        std::vector<data::TokenId> prefix{data::kBos};
        for (data::TokenId t : seq) {
            stepwise += std::log(m.next_token_probs(enc, prefix)[static_cast<std::size_t>(t)]);
            prefix.push_back(t);
        }
        CHECK(std::fabs(batched - stepwise) < 1e-6);
        CHECK(std::exp(batched) <= 1.0);
    }
    // one-token sequence is ln p(EOS | inputs, BOS)
    const ModelInputs in = random_inputs(rng, cfg);
    const std::vector<data::TokenId> eos{data::kEos};
    CHECK(m.sequence_log_prob(in, eos) ==
          doctest::Approx(std::log(m.next_token_probs(in, {})[data::kEos])).epsilon(1e-12));
    const std::vector<data::TokenId> no_eos{5, 6};
    CHECK_THROWS(m.sequence_log_prob(in, no_eos));
    const std::vector<data::TokenId> out_of_vocab{static_cast<data::TokenId>(cfg.vocab_size), data::kEos};
    CHECK_THROWS_AS(m.sequence_log_prob(in, out_of_vocab), std::out_of_range);
}

TEST_CASE("loss at initialisation is close to ln V") {
    ECodeConfig cfg = ECodeConfig::tiny(400);
    ECodeModel m = ECodeModel::create(cfg, 5);
    Rng rng(6);
    for (int trial = 0; trial < 5; ++trial) {
        const ModelInputs in = random_inputs(rng, cfg);
        auto target = random_ids(rng, 20, cfg.vocab_size);
        target.push_back(data::kEos);
        Tape tape(false);
        const double loss = tape.value(m.loss(tape, in, target)).values[0];
        CHECK(std::fabs(loss - std::log(400.0)) < 0.1 * std::log(400.0));
    }
}

TEST_CASE("end-to-end gradient check on every parameter tensor") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto checks = ecode_grad_check(seed);
        CHECK(checks.size() == ECodeParams::init(grad_check_config(), 0).named().size());
        for (const auto& c : checks) {
            INFO(c.name << " seed " << seed);
            CHECK(c.max_rel_error < kCompositeTolerance);
        }
    }
}

TEST_CASE("expert split cuts attention work to one fifth") {
    for (std::uint64_t L : {50u, 100u, 500u, 2000u}) {
        for (std::uint64_t d : {8u, 64u}) {
            CHECK(5 * nn::attention_flops(L / 5, d) * 5 == nn::attention_flops(L, d));
        }
    }
}

TEST_CASE("sample_token: filtering pipeline") {
    DecodeParams p;
    p.temperature = 1.0;
    p.top_p = 0.95;
    const std::vector<double> dist{0.9, 0.06, 0.04};
    const auto f = filtered_distribution(dist, p);
    CHECK(f[0] == doctest::Approx(0.9375).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(0.0625).epsilon(1e-12));
    CHECK(f[2] == 0.0);

    // logits [1, 2] at temperature 0.25 is softmax([4, 8])
    DecodeParams cold;
    cold.top_p = 1.0;
    const double z = std::exp(1.0) + std::exp(2.0);
    const std::vector<double> two{std::exp(1.0) / z, std::exp(2.0) / z};
    const auto g = filtered_distribution(two, cold);
    CHECK(g[0] == doctest::Approx(0.0180).epsilon(1e-3));
    CHECK(g[1] == doctest::Approx(0.9820).epsilon(1e-3));
    CHECK(g[0] == doctest::Approx(std::exp(4.0) / (std::exp(4.0) + std::exp(8.0))).epsilon(1e-12));

    // top_k larger than the vocabulary changes nothing
    DecodeParams wide;
    wide.temperature = 1.0;
    wide.top_p = 1.0;
    wide.top_k = 50;
    const auto h = filtered_distribution(dist, wide);
    for (std::size_t i = 0; i < 3; ++i) CHECK(h[i] == doctest::Approx(dist[i]).epsilon(1e-12));

    // ties at the top-k boundary keep the lowest id
    DecodeParams one;
    one.temperature = 1.0;
    one.top_k = 1;
    const std::vector<double> tied{0.2, 0.4, 0.4};
    CHECK(filtered_distribution(tied, one)[1] == 1.0);
    Rng rng(1);
    DecodeParams greedy;
    greedy.greedy = true;
    CHECK(sample_token(tied, greedy, rng) == 1);
}

TEST_CASE("sample_token: parameter validation and empirical frequencies") {
    DecodeParams p;
    p.temperature = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.greedy = true;
    CHECK_NOTHROW(p.validate());
    p = {};
    p.top_p = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.top_k = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    DecodeParams plain;
    plain.temperature = 1.0;
    plain.top_p = 1.0;
    const std::vector<double> dist{0.5, 0.3, 0.2};
    Rng rng(42);
    std::array<int, 3> counts{};
    const int n = 20000;
    for (int i = 0; i < n; ++i) ++counts[sample_token(dist, plain, rng)];
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::fabs(counts[i] / double(n) - dist[i]) < 0.015);
}

TEST_CASE("generate and sample_k_candidates are seed-deterministic") {
    ECodeConfig cfg = small_config();
    ECodeModel m = ECodeModel::create(cfg, 12);
    Rng rng(3);
    const ModelInputs in = random_inputs(rng, cfg);
    DecodeParams p;
    p.temperature = 1.0;
    const Generation a = generate(m, in, p, 77);
    CHECK(generate(m, in, p, 77) == a);
    CHECK(a.tokens.size() <= cfg.caps.decoder);
    CHECK((a.truncated || a.tokens.back() == data::kEos));

    DecodeParams greedy;
    greedy.greedy = true;
    CHECK(generate(m, in, greedy, 1) == generate(m, in, greedy, 2));

    const auto one = sample_k_candidates(m, in, 1, p, 77);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == generate(m, in, p, derive_seed(77, 0)));
    const auto five = sample_k_candidates(m, in, 5, p, 77);
    CHECK(five == sample_k_candidates(m, in, 5, p, 77));
    CHECK_THROWS_AS(sample_k_candidates(m, in, 6, p, 77), std::invalid_argument);
    CHECK(sample_k_candidates(m, in, 6, p, 77, 6).size() == 6);

    DecodeParams short_run = p;
    short_run.max_len = 3;
    const Generation s = generate(m, in, short_run, 5);
    CHECK(s.tokens.size() <= 3);
    if (s.tokens.size() == 3 && s.tokens.back() != data::kEos) CHECK(s.truncated);
}
