// SPDX-License-Identifier: Apache-2.0

#include "epcforge/model/ecode.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "epcforge/util/rng.hpp"

namespace epcforge::model {

using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

constexpr const char* kPartNames[data::kNumParts] = {"tags", "description", "input_format", "output_format",
                                                      "samples"};

template <typename Stack, typename Out>
void name_stack(Stack& s, const std::string& prefix, Out& out) {
    for (std::size_t b = 0; b < s.blocks.size(); ++b) {
        auto& blk = s.blocks[b];
        const std::string p = prefix + ".blocks." + std::to_string(b) + ".";
        out.emplace_back(p + "ln1_gain", &blk.ln1_gain);
        out.emplace_back(p + "ln1_shift", &blk.ln1_shift);
        out.emplace_back(p + "attn.w_q", &blk.attn.w_q);
        out.emplace_back(p + "attn.w_k", &blk.attn.w_k);
        out.emplace_back(p + "attn.w_v", &blk.attn.w_v);
        out.emplace_back(p + "attn.w_h", &blk.attn.w_h);
        out.emplace_back(p + "ln2_gain", &blk.ln2_gain);
        out.emplace_back(p + "ln2_shift", &blk.ln2_shift);
        out.emplace_back(p + "ff_in.weight", &blk.ff_in.weight);
        out.emplace_back(p + "ff_in.bias", &blk.ff_in.bias);
        out.emplace_back(p + "ff_out.weight", &blk.ff_out.weight);
        out.emplace_back(p + "ff_out.bias", &blk.ff_out.bias);
    }
    if (!s.blocks.empty()) {
        out.emplace_back(prefix + ".final_gain", &s.final_gain);
        out.emplace_back(prefix + ".final_shift", &s.final_shift);
    }
}

template <typename Params, typename Out>
void name_all(Params& p, Out& out) {
    for (std::size_t e = 0; e < data::kNumParts; ++e) {
        const std::string prefix = std::string("experts.") + kPartNames[e];
        out.emplace_back(prefix + ".token_embedding", &p.experts[e].token_embedding);
        out.emplace_back(prefix + ".position_embedding", &p.experts[e].position_embedding);
        name_stack(p.experts[e].stack, prefix + ".stack", out);
    }
    out.emplace_back("integration.positions", &p.integration_positions);
    name_stack(p.integration, "integration.stack", out);
    out.emplace_back("enlarge.weight", &p.enlarge.weight);
    out.emplace_back("enlarge.bias", &p.enlarge.bias);
    out.emplace_back("code_encoder.embedding", &p.ic_embedding);
    out.emplace_back("code_encoder.positions", &p.ic_positions);
    name_stack(p.code_encoder, "code_encoder.stack", out);
    out.emplace_back("decoder.embedding", &p.ec_embedding);
    out.emplace_back("decoder.positions", &p.ec_positions);
    name_stack(p.decoder, "decoder.stack", out);
    out.emplace_back("fusion.w_q", &p.fusion.w_q);
    out.emplace_back("fusion.w_k", &p.fusion.w_k);
    out.emplace_back("fusion.w_v", &p.fusion.w_v);
    out.emplace_back("fusion.w_h", &p.fusion.w_h);
    out.emplace_back("output.positions", &p.output_positions);
    name_stack(p.output, "output.stack", out);
    out.emplace_back("projection.weight", &p.projection.weight);
    out.emplace_back("projection.bias", &p.projection.bias);
}

StackParams make_stack(std::size_t layers, std::size_t d, std::size_t heads, std::size_t ffn_mult) {
    StackParams s;
    for (std::size_t l = 0; l < layers; ++l) {
        BlockParams b;
        b.ln1_gain = Tensor({d});
        b.ln1_shift = Tensor({d});
        b.attn.w_q = Tensor({d, d});
        b.attn.w_k = Tensor({d, d});
        b.attn.w_v = Tensor({d, d});
        b.attn.w_h = Tensor({d, d});
        b.attn.heads = heads;
        b.ln2_gain = Tensor({d});
        b.ln2_shift = Tensor({d});
        b.ff_in = {Tensor({d, ffn_mult * d}), Tensor({ffn_mult * d})};
        b.ff_out = {Tensor({ffn_mult * d, d}), Tensor({d})};
        s.blocks.push_back(std::move(b));
    }
    s.final_gain = Tensor({d});
    s.final_shift = Tensor({d});
    return s;
}

bool ends_with(const std::string& s, const char* suffix) {
    const std::string suf(suffix);
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

std::vector<std::size_t> to_index(std::span<const data::TokenId> ids) {
    return {ids.begin(), ids.end()};
}

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> out(n);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
}

// Rows whose argmax (lowest id on ties) equals the target token.
std::size_t argmax_hits(const Tensor& logits, std::span<const data::TokenId> target) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t v = 1; v < logits.cols(); ++v) {
            if (logits(i, v) > logits(i, best)) best = v;
        }
        correct += best == static_cast<std::size_t>(target[i]);
    }
    return correct;
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ECodeParams::named() {
    std::vector<std::pair<std::string, Tensor*>> out;
    name_all(*this, out);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ECodeParams::named() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    name_all(*this, out);
    return out;
}

std::size_t ECodeParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named()) n += t->size();
    return n;
}

ECodeParams ECodeParams::init(const ECodeConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t V = cfg.vocab_size, de = cfg.d_expert, dm = cfg.d_model;
    ECodeParams p;
    for (ExpertParams& e : p.experts) {
        e.token_embedding = Tensor({V, de});
        e.position_embedding = Tensor({cfg.caps.expert, de});
        e.stack = make_stack(cfg.expert_layers, de, cfg.self_heads, cfg.ffn_mult);
    }
    p.integration_positions = Tensor({cfg.caps.integration, de});
    p.integration = make_stack(cfg.integration_layers, de, cfg.self_heads, cfg.ffn_mult);
    p.enlarge = {Tensor({de, dm}), Tensor({dm})};
    p.ic_embedding = Tensor({V, dm});
    p.ic_positions = Tensor({cfg.caps.decoder, dm});
    p.code_encoder = make_stack(cfg.encoder_layers, dm, cfg.model_heads(), cfg.ffn_mult);
    p.ec_embedding = Tensor({V, dm});
    p.ec_positions = Tensor({cfg.caps.decoder, dm});
    p.decoder = make_stack(cfg.decoder_layers, dm, cfg.model_heads(), cfg.ffn_mult);
    p.fusion.w_q = Tensor({dm, dm});
    p.fusion.w_k = Tensor({dm, dm});
    p.fusion.w_v = Tensor({dm, dm});
    p.fusion.w_h = Tensor({dm, dm});
    p.fusion.heads = cfg.cross_heads;
    p.output_positions = Tensor({cfg.caps.decoder, dm});
    p.output = make_stack(cfg.output_layers, dm, cfg.model_heads(), cfg.ffn_mult);
    p.projection = {Tensor({dm, V}), Tensor({V})};

    // Each tensor draws from its own stream so adding a tensor never shifts
    // the values of the others.
    for (auto& [name, t] : p.named()) {
        if (ends_with(name, "gain")) {
            std::fill(t->values.begin(), t->values.end(), 1.0);
        } else if (ends_with(name, "bias") || ends_with(name, "shift")) {
            std::fill(t->values.begin(), t->values.end(), 0.0);
        } else {
            Rng rng(derive_seed(seed, name));
            for (double& v : t->values) v = cfg.init_std * rng.normal();
        }
    }
    return p;
}

ModelInputs make_inputs(const data::EpcSample& sample, const data::Vocabulary& vocab, const ECodeConfig& cfg) {
    ModelInputs in;
    const auto parts = data::tokenize_parts(sample, vocab, cfg.caps.expert);
    for (std::size_t p = 0; p < data::kNumParts; ++p) in.parts[p] = parts[p].ids;
    in.ic = data::tokenize_code(sample.inefficient_code, vocab, cfg.caps.decoder).ids;
    return in;
}

std::vector<data::TokenId> make_target(const data::EpcSample& sample, const data::Vocabulary& vocab,
                                       const ECodeConfig& cfg) {
    // the prefix adds BOS, so the target may use one slot less than the cap
    return data::tokenize_code(sample.efficient_codes.front(), vocab, cfg.caps.decoder - 1).ids;
}

ECodeModel::ECodeModel(ECodeConfig cfg, ECodeParams params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
}

ECodeModel ECodeModel::create(const ECodeConfig& cfg, std::uint64_t seed) {
    return ECodeModel(cfg, ECodeParams::init(cfg, seed));
}

void ECodeModel::check_ids(std::span<const data::TokenId> ids) const {
    for (data::TokenId id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
            throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                                    std::to_string(cfg_.vocab_size));
        }
    }
}

Var ECodeModel::embed(Tape& tape, Tensor& tokens, Tensor& positions, std::span<const data::TokenId> ids,
                      std::size_t cap, const char* role) {
    if (ids.empty()) throw std::invalid_argument(std::string(role) + ": empty sequence");
    if (ids.size() > cap) {
        throw std::length_error(std::string(role) + ": sequence of " + std::to_string(ids.size()) +
                                " tokens exceeds cap " + std::to_string(cap));
    }
    check_ids(ids);
    const auto idx = to_index(ids);
    const auto pos = iota(ids.size());
    return nn::add(tape, nn::embedding(tape, tape.parameter(tokens), idx),
                   nn::embedding(tape, tape.parameter(positions), pos));
}

Var ECodeModel::run_stack(Tape& tape, StackParams& stack, Var x, bool causal) {
    if (stack.blocks.empty()) return x;
    for (BlockParams& b : stack.blocks) {
        const Var h = nn::layer_norm(tape, x, tape.parameter(b.ln1_gain), tape.parameter(b.ln1_shift));
        const nn::AttentionVars attn = nn::bind(tape, b.attn);
        x = nn::add(tape, x, nn::multi_head_attention(tape, h, h, attn, causal));
        const Var h2 = nn::layer_norm(tape, x, tape.parameter(b.ln2_gain), tape.parameter(b.ln2_shift));
        const Var ff = nn::linear(tape, nn::gelu(tape, nn::linear(tape, h2, tape.parameter(b.ff_in.weight),
                                                                  tape.parameter(b.ff_in.bias))),
                                  tape.parameter(b.ff_out.weight), tape.parameter(b.ff_out.bias));
        x = nn::add(tape, x, ff);
    }
    return nn::layer_norm(tape, x, tape.parameter(stack.final_gain), tape.parameter(stack.final_shift));
}

Var ECodeModel::encode_expert(Tape& tape, std::size_t part, std::span<const data::TokenId> ids) {
    ExpertParams& e = params_.experts.at(part);
    const Var x = embed(tape, e.token_embedding, e.position_embedding, ids, cfg_.caps.expert, kPartNames[part]);
    return run_stack(tape, e.stack, x, false);
}

Var ECodeModel::integrate_experts(Tape& tape, std::span<const Var> experts) {
    if (experts.size() != data::kNumParts) throw std::invalid_argument("integrate_experts: need five expert outputs");
    for (Var e : experts) {
        if (tape.value(e).cols() != cfg_.d_expert) {
            throw nn::ShapeError("integrate_experts", tape.value(e).shape, nn::Shape{0, cfg_.d_expert});
        }
    }
    Var x = nn::concat_rows(tape, experts);
    std::size_t rows = tape.value(x).rows();
    if (rows > cfg_.caps.integration) {
        x = nn::slice_rows(tape, x, 0, cfg_.caps.integration);
        rows = cfg_.caps.integration;
    }
    x = nn::add(tape, x, nn::embedding(tape, tape.parameter(params_.integration_positions), iota(rows)));
    x = run_stack(tape, params_.integration, x, false);
    return nn::linear(tape, x, tape.parameter(params_.enlarge.weight), tape.parameter(params_.enlarge.bias));
}

Var ECodeModel::encode_ic(Tape& tape, std::span<const data::TokenId> ids) {
    const Var x = embed(tape, params_.ic_embedding, params_.ic_positions, ids, cfg_.caps.decoder, "inefficient code");
    return run_stack(tape, params_.code_encoder, x, true);
}

Var ECodeModel::encoder_output(Tape& tape, Var enc_nl, Var enc_ic) {
    const Tensor& a = tape.value(enc_nl);
    const Tensor& b = tape.value(enc_ic);
    if (a.cols() != cfg_.d_model || b.cols() != cfg_.d_model) throw nn::ShapeError("encoder_output", a.shape, b.shape);
    if (a.rows() == 0) return enc_ic;
    if (b.rows() == 0) return enc_nl;
    const Var parts[] = {enc_nl, enc_ic};
    return nn::concat_rows(tape, parts);
}

Var ECodeModel::encode(Tape& tape, const ModelInputs& inputs) {
    std::array<Var, data::kNumParts> experts;
    for (std::size_t p = 0; p < data::kNumParts; ++p) experts[p] = encode_expert(tape, p, inputs.parts[p]);
    const Var enc_nl = integrate_experts(tape, experts);
    const Var enc_ic = encode_ic(tape, inputs.ic);
    return encoder_output(tape, enc_nl, enc_ic);
}

Var ECodeModel::decode_logits(Tape& tape, Var enc, std::span<const data::TokenId> prefix,
                              std::vector<Tensor>* fusion_weights) {
    const Var x = embed(tape, params_.ec_embedding, params_.ec_positions, prefix, cfg_.caps.decoder, "decoder prefix");
    const Var dec = run_stack(tape, params_.decoder, x, true);
    Var fused = nn::multi_head_attention(tape, dec, enc, nn::bind(tape, params_.fusion), false, fusion_weights);
    if (cfg_.fusion_residual) fused = nn::add(tape, fused, dec);
    const Var positioned =
        nn::add(tape, fused, nn::embedding(tape, tape.parameter(params_.output_positions), iota(prefix.size())));
    const Var out = run_stack(tape, params_.output, positioned, true);
    return nn::linear(tape, out, tape.parameter(params_.projection.weight), tape.parameter(params_.projection.bias));
}

Var ECodeModel::loss(Tape& tape, const ModelInputs& inputs, std::span<const data::TokenId> target,
                     std::size_t* correct) {
    if (target.empty() || target.back() != data::kEos) throw std::invalid_argument("loss: target must end with EOS");
    check_ids(target);
    std::vector<data::TokenId> prefix{data::kBos};
    prefix.insert(prefix.end(), target.begin(), target.end() - 1);
    const Var enc = encode(tape, inputs);
    const Var logits = decode_logits(tape, enc, prefix);
    if (correct) *correct = argmax_hits(tape.value(logits), target);
    return nn::cross_entropy_logits(tape, logits, to_index(target));
}

Tensor ECodeModel::encode_plain(const ModelInputs& inputs) {
    Tape tape(false);
    return tape.value(encode(tape, inputs));
}

std::vector<double> ECodeModel::next_token_probs(const Tensor& enc, std::span<const data::TokenId> prefix) {
    std::vector<data::TokenId> full;
    if (prefix.empty() || prefix.front() != data::kBos) full.push_back(data::kBos);
    full.insert(full.end(), prefix.begin(), prefix.end());
    Tape tape(false);
    const Var e = tape.constant(enc);
    const Tensor logits = tape.value(decode_logits(tape, e, full));
    const std::size_t V = logits.cols();
    Tensor last({1, V});
    std::copy(logits.values.end() - static_cast<std::ptrdiff_t>(V), logits.values.end(), last.values.begin());
    const Tensor probs = nn::softmax(last, 1);
    return probs.values;
}

std::vector<double> ECodeModel::next_token_probs(const ModelInputs& inputs, std::span<const data::TokenId> prefix) {
    return next_token_probs(encode_plain(inputs), prefix);
}

double ECodeModel::sequence_log_prob(const ModelInputs& inputs, std::span<const data::TokenId> tokens) {
    if (tokens.empty() || tokens.back() != data::kEos) {
        throw std::invalid_argument("sequence_log_prob: tokens must end with EOS");
    }
    check_ids(tokens);
    std::vector<data::TokenId> prefix{data::kBos};
    prefix.insert(prefix.end(), tokens.begin(), tokens.end() - 1);
    Tape tape(false);
    const Var enc = encode(tape, inputs);
    const Tensor logits = tape.value(decode_logits(tape, enc, prefix));
    double total = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        // log-softmax of row i
        double mx = logits(i, 0);
        for (std::size_t v = 1; v < logits.cols(); ++v) mx = std::max(mx, logits(i, v));
        double z = 0.0;
        for (std::size_t v = 0; v < logits.cols(); ++v) z += std::exp(logits(i, v) - mx);
        total += logits(i, static_cast<std::size_t>(tokens[i])) - mx - std::log(z);
    }
    return total;
}

std::pair<std::size_t, std::size_t> ECodeModel::token_accuracy(const ModelInputs& inputs,
                                                               std::span<const data::TokenId> target) {
    if (target.empty()) return {0, 0};
    check_ids(target);
    std::vector<data::TokenId> prefix{data::kBos};
    prefix.insert(prefix.end(), target.begin(), target.end() - 1);
    Tape tape(false);
    const Var enc = encode(tape, inputs);
    return {argmax_hits(tape.value(decode_logits(tape, enc, prefix)), target), target.size()};
}

}  // namespace epcforge::model
