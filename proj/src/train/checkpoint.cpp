// SPDX-License-Identifier: Apache-2.0

#include "epcforge/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace epcforge::train {

using nlohmann::json;

namespace {

void put_doubles(std::ostream& out, const std::vector<double>& xs) {
    std::string buf(xs.size() * 8, '\0');
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(xs[i]);
        for (int b = 0; b < 8; ++b) buf[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<double> get_doubles(std::istream& in, std::size_t n, const std::string& what) {
    std::string buf(n * 8, '\0');
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw CheckpointError("truncated payload in " + what);
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i * 8 + static_cast<std::size_t>(b)])) << (8 * b);
        }
        xs[i] = std::bit_cast<double>(bits);
    }
    return xs;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto named = ckpt.params.named();
    json dir = json::array();
    for (const auto& [name, t] : named) dir.push_back(json{{"name", name}, {"shape", t->shape}});
    const auto& all_words = ckpt.vocab.words();
    const std::vector<std::string> words(all_words.begin() + data::kNumReserved, all_words.end());
    json trace = json::array();
    for (const EpochStats& e : ckpt.state.trace) {
        trace.push_back(json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"token_accuracy", e.token_accuracy}});
    }
    const bool moments = ckpt.state.adam.step > 0;
    const json meta{{"model_config", model::to_json(ckpt.model_config)},
                    {"train_config", to_json(ckpt.train_config)},
                    {"vocab", words},
                    {"epochs_done", ckpt.state.epochs_done},
                    {"adam_step", ckpt.state.adam.step},
                    {"has_moments", moments},
                    {"trace", trace},
                    {"tensors", dir}};

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
        out << kCheckpointHeader << '\n' << meta.dump() << '\n';
        for (const auto& [name, t] : named) put_doubles(out, t->values);
        if (moments) {
            for (const auto* table : {&ckpt.state.adam.m, &ckpt.state.adam.v}) {
                for (const auto& [name, t] : named) {
                    const auto it = table->find(name);
                    put_doubles(out, it == table->end() ? std::vector<double>(t->size(), 0.0) : it->second);
                }
            }
        }
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw CheckpointError("failed while writing " + path.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointHeader) {
        throw CheckpointError(path.string() + ": expected header '" + kCheckpointHeader + "'");
    }
    if (!std::getline(in, line)) throw CheckpointError(path.string() + ": missing metadata");
    Checkpoint ck;
    json meta;
    try {
        meta = json::parse(line);
        ck.model_config = model::config_from_json(meta.at("model_config"));
        ck.train_config = train_config_from_json(meta.at("train_config"));
        ck.vocab = data::Vocabulary::from_words(meta.at("vocab").get<std::vector<std::string>>());
        ck.state.epochs_done = meta.at("epochs_done").get<std::size_t>();
        ck.state.adam.step = meta.at("adam_step").get<std::uint64_t>();
        for (const json& e : meta.at("trace")) {
            ck.state.trace.push_back({e.at("epoch").get<std::size_t>(), e.at("mean_loss").get<double>(),
                                      e.at("token_accuracy").get<double>()});
        }
        ck.model_config.validate();
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(path.string() + ": bad metadata: " + e.what());
    }
    if (ck.vocab.size() != ck.model_config.vocab_size) {
        throw CheckpointError(path.string() + ": vocabulary has " + std::to_string(ck.vocab.size()) +
                              " entries but the config expects " + std::to_string(ck.model_config.vocab_size));
    }

    // Shapes come from the config; the directory must agree entry by entry.
    ck.params = model::ECodeParams::init(ck.model_config, 0);
    auto named = ck.params.named();
    const json& dir = meta.at("tensors");
    if (dir.size() != named.size()) {
        throw CheckpointError(path.string() + ": " + std::to_string(dir.size()) + " tensors stored, config needs " +
                              std::to_string(named.size()));
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto name = dir[i].at("name").get<std::string>();
        const auto shape = dir[i].at("shape").get<nn::Shape>();
        if (name != named[i].first || shape != named[i].second->shape) {
            throw CheckpointError(path.string() + ": tensor " + name + " " + nn::shape_string(shape) +
                                  " does not match config tensor " + named[i].first + " " +
                                  nn::shape_string(named[i].second->shape));
        }
    }
    for (auto& [name, t] : named) t->values = get_doubles(in, t->size(), name);
    if (meta.at("has_moments").get<bool>()) {
        for (auto* table : {&ck.state.adam.m, &ck.state.adam.v}) {
            for (auto& [name, t] : named) (*table)[name] = get_doubles(in, t->size(), name);
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError(path.string() + ": trailing bytes");
    for (auto& [name, t] : named) {
        if (!t->all_finite()) throw CheckpointError(path.string() + ": non-finite values in " + name);
    }
    return ck;
}

}  // namespace epcforge::train
