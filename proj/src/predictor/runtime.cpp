// SPDX-License-Identifier: Apache-2.0

#include "epcforge/predictor/runtime.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "epcforge/minilang/interpreter.hpp"
#include "epcforge/minilang/parser.hpp"
#include "epcforge/minilang/transforms.hpp"
#include "epcforge/util/rng.hpp"
#include "json.hpp"

namespace epcforge::predictor {

using nlohmann::json;
namespace ml = epcforge::minilang;

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::Ori: return "ori";
        case Variant::Uni: return "uni";
        case Variant::LoopRec: return "looprec";
        case Variant::RandDel: return "randdel";
    }
    return "?";
}

Variant parse_variant(std::string_view text) {
    std::string lower(text);
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (Variant v : kAllVariants) {
        if (to_string(v) == lower) return v;
    }
    throw std::invalid_argument("unknown variant '" + std::string(text) + "'");
}

std::vector<std::string> token_texts(std::string_view source) {
    std::vector<std::string> out;
    for (ml::Token& t : ml::lex(source)) out.push_back(std::move(t.text));
    return out;
}

namespace {

// Programs per sample never approach this; it keeps record indices unique.
constexpr std::int64_t kProgramStride = 64;

std::vector<std::string> texts(const std::vector<ml::Token>& tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const ml::Token& t : tokens) out.push_back(t.text);
    return out;
}

}  // namespace

std::vector<RuntimeRecord> build_variant_dataset(std::span<const data::EpcSample> corpus, Variant kind,
                                                 std::uint64_t seed) {
    std::vector<RuntimeRecord> out;
    for (const data::EpcSample& s : corpus) {
        std::vector<const std::string*> programs{&s.inefficient_code};
        for (const auto& ec : s.efficient_codes) programs.push_back(&ec);
        if (static_cast<std::int64_t>(programs.size()) > kProgramStride) {
            throw std::runtime_error("sample has too many programs for the runtime dataset");
        }
        const std::string& input = s.io_examples.at(0).input;
        for (std::size_t j = 0; j < programs.size(); ++j) {
            const ml::Program original = ml::parse_source(*programs[j]);
            const ml::ExecOutcome run = ml::execute(original, input);
            if (run.status != ml::ExecStatus::Ok) {
                throw std::runtime_error("corpus program failed to run (" + std::string(ml::to_string(run.status)) +
                                         "): " + run.message);
            }
            RuntimeRecord r;
            r.variant = kind;
            r.cost = static_cast<double>(run.cost);
            r.submission_index = s.submission_index * kProgramStride + static_cast<std::int64_t>(j);
            switch (kind) {
                case Variant::Ori:
                    r.tokens = token_texts(*programs[j]);
                    break;
                case Variant::Uni:
                    r.tokens = token_texts(ml::to_source(ml::rename_uniform(original)));
                    break;
                case Variant::LoopRec:
                    r.tokens = token_texts(ml::to_source(ml::extract_loops_recursion(ml::rename_uniform(original))));
                    break;
                case Variant::RandDel: {
                    const auto tokens = ml::lex(ml::to_source(ml::rename_uniform(original)));
                    const std::uint64_t rs = derive_seed(derive_seed(seed, "randdel"),
                                                         static_cast<std::uint64_t>(r.submission_index));
                    r.tokens = texts(ml::random_token_delete(tokens, kRandDelRatio, rs));
                    break;
                }
            }
            out.push_back(std::move(r));
        }
    }
    return out;
}

SplitRecords time_split(std::span<const RuntimeRecord> records, double test_fraction) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("test_fraction must be in (0, 1)");
    }
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].submission_index < records[b].submission_index;
    });
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(records.size())));
    if (records.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, records.size() - 1);
    SplitRecords out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i + n_test < order.size() ? out.train : out.test).push_back(records[order[i]]);
    }
    return out;
}

const std::array<std::string_view, kNumFeatures>& feature_names() {
    static const std::array<std::string_view, kNumFeatures> names = {
        "token_count",    "loop_count",   "max_nesting",   "max_loop_depth",  "nested_loop_count", "recursion",
        "log_range_sum",  "map_ops",      "list_ops",      "call_count",      "parse_ok"};
    return names;
}

FeatureVector extract_features(std::span<const std::string> tokens) {
    FeatureVector f{};
    f[0] = static_cast<double>(tokens.size());

    int depth = 0, max_depth = 0, brackets = 0, max_brackets = 0;
    std::vector<int> loop_bodies;  // indent depth of each open loop body
    std::size_t max_loop_depth = 0, loops = 0, nested = 0, map_ops = 0, list_ops = 0, calls = 0;
    double range_sum = 0.0;
    bool recursion = false;
    std::string current_def;
    int def_depth = -1;

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        if (t == ml::kIndent) {
            max_depth = std::max(max_depth, ++depth);
        } else if (t == ml::kDedent) {
            depth = std::max(0, depth - 1);
            while (!loop_bodies.empty() && loop_bodies.back() > depth) loop_bodies.pop_back();
            if (def_depth >= 0 && depth <= def_depth) {
                current_def.clear();
                def_depth = -1;
            }
        } else if (t == "(" || t == "[" || t == "{") {
            max_brackets = std::max(max_brackets, ++brackets);
            if (t == "[") ++list_ops;
            if (t == "{") ++map_ops;
        } else if (t == ")" || t == "]" || t == "}") {
            brackets = std::max(0, brackets - 1);
        } else if (t == "for" || t == "while") {
            ++loops;
            if (!loop_bodies.empty()) ++nested;
            loop_bodies.push_back(depth + 1);
            max_loop_depth = std::max(max_loop_depth, loop_bodies.size());
        } else if (t == "def") {
            if (i + 1 < tokens.size()) {
                current_def = tokens[i + 1];
                def_depth = depth;
                ++i;
            }
        } else if (t == "has") {
            ++map_ops;
        } else if (t == "append" || t == "len") {
            ++list_ops;
        } else if (t == "range") {
            // integer literals inside range(...)
            int level = 0;
            for (std::size_t j = i + 1; j < tokens.size(); ++j) {
                const std::string& u = tokens[j];
                if (u == "(") ++level;
                else if (u == ")" && --level <= 0) break;
                else if (!u.empty() && std::isdigit(static_cast<unsigned char>(u[0]))) {
                    double v = 0.0;
                    const auto [p, ec] = std::from_chars(u.data(), u.data() + u.size(), v);
                    if (ec == std::errc()) range_sum += std::min(v, 1e12);
                }
                if (level <= 0 && u != "(") break;
            }
        } else if (!t.empty() && (std::isalpha(static_cast<unsigned char>(t[0])) || t[0] == '_') &&
                   i + 1 < tokens.size() && tokens[i + 1] == "(" && !ml::is_keyword(t)) {
            ++calls;
            if (!current_def.empty() && t == current_def) recursion = true;
        }
    }

    f[1] = static_cast<double>(loops);
    f[2] = static_cast<double>(std::max(max_depth, max_brackets));
    f[3] = static_cast<double>(max_loop_depth);
    f[4] = static_cast<double>(nested);
    f[5] = recursion ? 1.0 : 0.0;
    f[6] = std::log1p(std::min(range_sum, 1e12));
    f[7] = static_cast<double>(map_ops);
    f[8] = static_cast<double>(list_ops);
    f[9] = static_cast<double>(calls);

    bool parses = true;
    try {
        std::vector<ml::Token> toks;
        toks.reserve(tokens.size());
        for (const std::string& t : tokens) toks.push_back(ml::token_from_text(t));
        ml::parse(toks);
    } catch (...) {
        parses = false;
    }
    f[10] = parses ? 1.0 : 0.0;
    return f;
}

double RidgeModel::linear(std::span<const double> x) const {
    if (x.size() != weights.size()) throw std::invalid_argument("feature arity mismatch");
    double y = intercept;
    for (std::size_t j = 0; j < x.size(); ++j) y += weights[j] * (x[j] - mean[j]) / scale[j];
    return y;
}

std::pair<std::vector<double>, double> RidgeModel::raw_coefficients() const {
    std::vector<double> w(weights.size());
    double b = intercept;
    for (std::size_t j = 0; j < w.size(); ++j) {
        w[j] = weights[j] / scale[j];
        b -= w[j] * mean[j];
    }
    return {w, b};
}

RidgeModel fit_ridge(const std::vector<std::vector<double>>& x, std::span<const double> y, double lambda) {
    if (x.empty() || x.size() != y.size()) throw std::invalid_argument("fit_ridge: need one label per row");
    if (!(lambda >= 0.0)) throw std::invalid_argument("fit_ridge: lambda must be non-negative");
    const std::size_t n = x.size(), d = x.front().size();
    for (const auto& row : x) {
        if (row.size() != d) throw std::invalid_argument("fit_ridge: ragged feature rows");
    }
    RidgeModel m;
    m.lambda = lambda;
    m.mean.assign(d, 0.0);
    m.scale.assign(d, 0.0);
    for (const auto& row : x) {
        for (std::size_t j = 0; j < d; ++j) m.mean[j] += row[j];
    }
    for (double& v : m.mean) v /= static_cast<double>(n);
    for (const auto& row : x) {
        for (std::size_t j = 0; j < d; ++j) m.scale[j] += (row[j] - m.mean[j]) * (row[j] - m.mean[j]);
    }
    for (double& v : m.scale) {
        v = std::sqrt(v / static_cast<double>(n));
        if (v < 1e-12) v = 1.0;  // constant feature: leave unscaled
    }

    // Column 0 is the intercept.
    const auto D = static_cast<Eigen::Index>(d + 1);
    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), D);
    Eigen::VectorXd t(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        z(r, 0) = 1.0;
        for (std::size_t j = 0; j < d; ++j) z(r, static_cast<Eigen::Index>(j + 1)) = (x[i][j] - m.mean[j]) / m.scale[j];
        t(r) = y[i];
    }
    Eigen::MatrixXd a = z.transpose() * z;
    for (Eigen::Index j = 1; j < D; ++j) a(j, j) += lambda;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) {
        throw std::runtime_error("fit_ridge: singular normal equations; use lambda > 0");
    }
    const Eigen::VectorXd w = lu.solve(z.transpose() * t);
    m.intercept = w(0);
    m.weights.resize(d);
    for (std::size_t j = 0; j < d; ++j) m.weights[j] = w(static_cast<Eigen::Index>(j + 1));
    for (std::size_t j = 0; j < d; ++j) {
        m.feature_names.push_back(d == kNumFeatures ? std::string(feature_names()[j]) : "x" + std::to_string(j));
    }
    return m;
}

RidgeModel fit_ridge(std::span<const RuntimeRecord> train, double lambda) {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (const RuntimeRecord& r : train) {
        const FeatureVector f = extract_features(r.tokens);
        x.emplace_back(f.begin(), f.end());
        y.push_back(r.cost);
    }
    return fit_ridge(x, y, lambda);
}

double predict_time(const RidgeModel& model, std::span<const std::string> tokens) {
    const FeatureVector f = extract_features(tokens);
    return std::max(0.0, model.linear(f));
}

double predict_source(const RidgeModel& model, std::string_view source) {
    std::vector<std::string> tokens;
    try {
        tokens = token_texts(source);
    } catch (const ml::ParseError&) {
        // unlexable text: fall back to whitespace-separated words
        std::string word;
        for (char c : source) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!word.empty()) tokens.push_back(std::move(word));
                word.clear();
            } else {
                word += c;
            }
        }
        if (!word.empty()) tokens.push_back(std::move(word));
    }
    return predict_time(model, tokens);
}

PredictorEval evaluate_predictor(const RidgeModel& model, std::span<const RuntimeRecord> test) {
    PredictorEval e;
    std::map<Variant, std::pair<double, std::size_t>> acc;
    for (const RuntimeRecord& r : test) {
        const double err = std::fabs(predict_time(model, r.tokens) - r.cost);
        e.mae += err;
        acc[r.variant].first += err;
        ++acc[r.variant].second;
    }
    e.count = test.size();
    if (e.count) e.mae /= static_cast<double>(e.count);
    for (const auto& [v, p] : acc) e.mae_by_variant[v] = p.first / static_cast<double>(p.second);
    return e;
}

double mean_baseline_mae(std::span<const RuntimeRecord> train, std::span<const RuntimeRecord> test) {
    if (train.empty() || test.empty()) throw std::invalid_argument("mean_baseline_mae: empty split");
    double mean = 0.0;
    for (const RuntimeRecord& r : train) mean += r.cost;
    mean /= static_cast<double>(train.size());
    double mae = 0.0;
    for (const RuntimeRecord& r : test) mae += std::fabs(mean - r.cost);
    return mae / static_cast<double>(test.size());
}

void save_predictor(const std::filesystem::path& path, const RidgeModel& m) {
    const json j{{"feature_names", m.feature_names}, {"mean", m.mean},           {"scale", m.scale},
                 {"weights", m.weights},             {"intercept", m.intercept}, {"lambda", m.lambda}};
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write predictor " + path.string());
        out << kPredictorHeader << '\n' << j.dump() << '\n';
        if (!out) throw std::runtime_error("failed while writing " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

RidgeModel load_predictor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open predictor " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kPredictorHeader) {
        throw std::runtime_error(path.string() + ": expected header '" + kPredictorHeader + "'");
    }
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing body");
    RidgeModel m;
    try {
        const json j = json::parse(line);
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.mean = j.at("mean").get<std::vector<double>>();
        m.scale = j.at("scale").get<std::vector<double>>();
        m.weights = j.at("weights").get<std::vector<double>>();
        m.intercept = j.at("intercept").get<double>();
        m.lambda = j.at("lambda").get<double>();
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    const std::size_t d = m.weights.size();
    if (d != kNumFeatures || m.mean.size() != d || m.scale.size() != d || m.feature_names.size() != d) {
        throw std::runtime_error(path.string() + ": feature arity does not match this build");
    }
    for (std::size_t j = 0; j < d; ++j) {
        if (m.feature_names[j] != feature_names()[j]) {
            throw std::runtime_error(path.string() + ": unexpected feature '" + m.feature_names[j] + "'");
        }
    }
    return m;
}

void save_runtime_dataset(const std::filesystem::path& path, std::span<const RuntimeRecord> records) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write dataset " + path.string());
        out << kRuntimeDatasetHeader << '\n';
        for (const RuntimeRecord& r : records) {
            out << json{{"variant", to_string(r.variant)},
                        {"tokens", r.tokens},
                        {"cost", r.cost},
                        {"submission_index", r.submission_index}}
                       .dump()
                << '\n';
        }
        if (!out) throw std::runtime_error("failed while writing " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<RuntimeRecord> load_runtime_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kRuntimeDatasetHeader) {
        throw std::runtime_error(path.string() + ": expected header '" + kRuntimeDatasetHeader + "'");
    }
    std::vector<RuntimeRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            RuntimeRecord r;
            r.variant = parse_variant(j.at("variant").get<std::string>());
            r.tokens = j.at("tokens").get<std::vector<std::string>>();
            r.cost = j.at("cost").get<double>();
            r.submission_index = j.at("submission_index").get<std::int64_t>();
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace epcforge::predictor
