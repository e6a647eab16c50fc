// SPDX-License-Identifier: Apache-2.0

#include "epcforge/eval/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "epcforge/minilang/interpreter.hpp"
#include "epcforge/minilang/parser.hpp"

namespace epcforge::eval {

namespace ml = epcforge::minilang;

double egr(double t_baseline, double t_enhanced) {
    if (!(t_baseline > 0.0)) throw std::invalid_argument("egr: baseline time must be positive");
    if (!(t_enhanced >= 0.0)) throw std::invalid_argument("egr: enhanced time must be non-negative");
    return (t_baseline - t_enhanced) / t_baseline;
}

std::size_t efficiency_filter(std::span<const double> predictions) {
    if (predictions.empty()) throw std::invalid_argument("efficiency_filter: no candidates");
    std::size_t best = 0;
    for (std::size_t i = 1; i < predictions.size(); ++i) {
        if (predictions[i] < predictions[best]) best = i;
    }
    return best;
}

std::size_t efficiency_filter(std::span<const std::string> candidates, const predictor::RidgeModel& predictor) {
    std::vector<double> p;
    p.reserve(candidates.size());
    for (const std::string& c : candidates) p.push_back(predictor::predict_source(predictor, c));
    return efficiency_filter(p);
}

std::string_view to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::None: return "None";
        case ErrorKind::SyntaxError: return "SyntaxError";
        case ErrorKind::OutputMismatch: return "OutputMismatch";
        case ErrorKind::RuntimeError: return "RuntimeError";
        case ErrorKind::FuelExhausted: return "FuelExhausted";
    }
    return "?";
}

FunctionalResult functional_check(std::string_view source, const data::EpcSample& sample) {
    FunctionalResult r;
    ml::Program program;
    try {
        program = ml::parse_source(source);
    } catch (const ml::ParseError&) {
        r.error = ErrorKind::SyntaxError;
        return r;
    }
    r.compiles = true;
    r.io_pass = true;
    for (std::size_t i = 0; i < sample.io_examples.size(); ++i) {
        const auto& io = sample.io_examples[i];
        const ml::ExecOutcome out = ml::check(program, io.input, io.output);
        if (i == 0 && out.terminated()) r.first_cost = static_cast<double>(out.cost);
        if (out.status == ml::ExecStatus::Ok) continue;
        r.io_pass = false;
        if (r.error == ErrorKind::None) {
            switch (out.status) {
                case ml::ExecStatus::OutputMismatch: r.error = ErrorKind::OutputMismatch; break;
                case ml::ExecStatus::FuelExhausted: r.error = ErrorKind::FuelExhausted; break;
                case ml::ExecStatus::ParseError: r.error = ErrorKind::SyntaxError; break;
                default: r.error = ErrorKind::RuntimeError; break;
            }
        }
    }
    return r;
}

namespace {

using Gram = std::vector<std::string>;

std::map<Gram, std::size_t> ngram_counts(std::span<const std::string> tokens, std::size_t n) {
    std::map<Gram, std::size_t> counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[Gram(tokens.begin() + i, tokens.begin() + i + n)];
    return counts;
}

double bleu_against(std::span<const std::string> gen, std::span<const std::string> ref) {
    constexpr std::size_t kMaxN = 4;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= kMaxN; ++n) {
        const auto g = ngram_counts(gen, n);
        const auto r = ngram_counts(ref, n);
        std::size_t matched = 0, total = 0;
        for (const auto& [gram, c] : g) {
            total += c;
            const auto it = r.find(gram);
            if (it != r.end()) matched += std::min(c, it->second);
        }
        log_sum += std::log((static_cast<double>(matched) + 1.0) / (static_cast<double>(total) + 1.0));
    }
    const double c = static_cast<double>(gen.size()), rl = static_cast<double>(ref.size());
    const double bp = c >= rl ? 1.0 : std::exp(1.0 - rl / c);
    return bp * std::exp(log_sum / static_cast<double>(kMaxN));
}

std::vector<std::string> words_of(std::string_view source) {
    try {
        return predictor::token_texts(source);
    } catch (const ml::ParseError&) {
        std::vector<std::string> out;
        std::istringstream in{std::string(source)};
        std::string w;
        while (in >> w) out.push_back(w);
        return out;
    }
}

std::string fmt(double x) {
    std::ostringstream o;
    o << std::setprecision(10) << x;
    return o.str();
}

}  // namespace

double ngram_similarity(std::span<const std::string> generated, std::span<const std::vector<std::string>> references) {
    if (references.empty()) throw std::invalid_argument("ngram_similarity: no references");
    if (generated.empty()) return 0.0;
    double best = 0.0;
    for (const auto& ref : references) best = std::max(best, bleu_against(generated, ref));
    return best;
}

std::array<double, 6> time_bins(std::span<const double> times) {
    if (times.empty()) throw std::invalid_argument("time_bins: no times");
    const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
    std::array<double, 6> t{};
    for (std::size_t i = 0; i < 6; ++i) t[i] = *lo + static_cast<double>(i) * (*hi - *lo) / 5.0;
    t[5] = *hi;
    return t;
}

std::size_t interval_of(double t, const std::array<double, 6>& points) {
    for (std::size_t i = 4; i > 0; --i) {
        if (t >= points[i] && points[i] > points[0]) return i;
    }
    return 0;
}

std::vector<double> trim_top_percent(std::span<const double> times) {
    std::vector<double> sorted(times.begin(), times.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.resize(sorted.size() - sorted.size() / 100);
    return sorted;
}

BinStats bin_ratios(const std::map<data::Difficulty, std::vector<std::vector<double>>>& groups) {
    BinStats stats;
    for (const auto& [difficulty, problems] : groups) {
        DifficultyBins& b = stats[difficulty];
        for (const auto& times : problems) {
            if (times.empty()) throw std::invalid_argument("bin_ratios: problem without solution times");
            const std::vector<double> kept = trim_top_percent(times);
            const auto points = time_bins(kept);
            std::array<double, 5> counts{};
            for (double t : kept) ++counts[interval_of(t, points)];
            for (std::size_t i = 0; i < 5; ++i) b.ratios[i] += counts[i] / static_cast<double>(kept.size());
            for (std::size_t i = 0; i < 6; ++i) b.points[i] += points[i];
            ++b.problems;
        }
        if (b.problems) {
            for (double& r : b.ratios) r /= static_cast<double>(b.problems);
            for (double& p : b.points) p /= static_cast<double>(b.problems);
        }
    }
    return stats;
}

std::map<data::Difficulty, std::vector<std::vector<double>>> corpus_times(std::span<const data::EpcSample> corpus) {
    std::map<data::Difficulty, std::vector<std::vector<double>>> groups;
    for (const data::EpcSample& s : corpus) {
        std::vector<double> times;
        std::vector<const std::string*> programs{&s.inefficient_code};
        for (const auto& ec : s.efficient_codes) programs.push_back(&ec);
        for (const std::string* p : programs) {
            const ml::ExecOutcome out = ml::run_source(*p, s.io_examples.at(0).input);
            if (out.terminated()) times.push_back(static_cast<double>(out.cost));
        }
        if (!times.empty()) groups[s.difficulty].push_back(std::move(times));
    }
    return groups;
}

std::string bin_stats_csv(const BinStats& stats) {
    std::ostringstream o;
    o << "difficulty,interval,lower,upper,ratio,problems\n";
    for (const auto& [d, b] : stats) {
        for (std::size_t i = 0; i < 5; ++i) {
            o << data::to_string(d) << ',' << i << ',' << fmt(b.points[i]) << ',' << fmt(b.points[i + 1]) << ','
              << fmt(b.ratios[i]) << ',' << b.problems << '\n';
        }
    }
    return o.str();
}

std::string_view to_string(TimingPolicy p) {
    switch (p) {
        case TimingPolicy::Strict: return "strict";
        case TimingPolicy::Measured: return "measured";
        case TimingPolicy::Predicted: return "predicted";
    }
    return "?";
}

TimingPolicy parse_timing_policy(std::string_view text) {
    for (TimingPolicy p : {TimingPolicy::Strict, TimingPolicy::Measured, TimingPolicy::Predicted}) {
        if (to_string(p) == text) return p;
    }
    throw std::invalid_argument("unknown timing policy '" + std::string(text) + "'");
}

EgrReport evaluate_submissions(std::span<const data::EpcSample> samples, std::span<const std::string> programs,
                               TimingPolicy policy, const predictor::RidgeModel* predictor) {
    if (samples.size() != programs.size()) throw std::invalid_argument("evaluate: one program per sample required");
    if (policy == TimingPolicy::Predicted && !predictor) {
        throw std::invalid_argument("evaluate: the predicted policy needs a predictor");
    }
    EgrReport rep;
    std::map<data::Difficulty, std::pair<double, std::size_t>> by_diff;
    double sum_base = 0.0, sum_enh = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const data::EpcSample& s = samples[i];
        SampleEval row;
        row.sample = i;
        row.difficulty = s.difficulty;
        const FunctionalResult fr = functional_check(programs[i], s);
        row.compiles = fr.compiles;
        row.io_pass = fr.io_pass;
        row.error = fr.error;

        std::vector<std::vector<std::string>> refs;
        for (const auto& ec : s.efficient_codes) refs.push_back(words_of(ec));
        row.similarity = ngram_similarity(words_of(programs[i]), refs);

        if (policy == TimingPolicy::Predicted) {
            row.baseline_time = predictor::predict_source(*predictor, s.inefficient_code);
            row.enhanced_time = predictor::predict_source(*predictor, programs[i]);
        } else {
            const ml::ExecOutcome base = ml::run_source(s.inefficient_code, s.io_examples.at(0).input);
            row.baseline_time = static_cast<double>(base.cost);
            if (policy == TimingPolicy::Strict) {
                row.enhanced_time = fr.io_pass ? *fr.first_cost : row.baseline_time;
            } else if (fr.first_cost) {
                row.enhanced_time = *fr.first_cost;
            } else {
                row.enhanced_time =
                    predictor ? predictor::predict_source(*predictor, programs[i]) : row.baseline_time;
            }
        }
        // a zero baseline estimate leaves nothing to gain
        row.egr = row.baseline_time > 0.0 ? egr(row.baseline_time, row.enhanced_time) : 0.0;

        sum_base += row.baseline_time;
        sum_enh += row.enhanced_time;
        rep.mean_egr += row.egr;
        rep.compilation_rate += row.compiles;
        rep.io_pass_rate += row.io_pass;
        rep.mean_similarity += row.similarity;
        ++rep.errors[row.error];
        by_diff[row.difficulty].first += row.egr;
        ++by_diff[row.difficulty].second;
        rep.rows.push_back(row);
    }
    if (!samples.empty()) {
        const double n = static_cast<double>(samples.size());
        rep.mean_egr /= n;
        rep.compilation_rate /= n;
        rep.io_pass_rate /= n;
        rep.mean_similarity /= n;
        rep.pooled_egr = sum_base > 0.0 ? (sum_base - sum_enh) / sum_base : 0.0;
    }
    for (const auto& [d, p] : by_diff) rep.mean_egr_by_difficulty[d] = p.first / static_cast<double>(p.second);
    return rep;
}

std::string egr_report_csv(const EgrReport& rep) {
    std::ostringstream o;
    o << "sample,difficulty,baseline_time,enhanced_time,egr,compiles,io_pass,error,similarity\n";
    for (const SampleEval& r : rep.rows) {
        o << r.sample << ',' << data::to_string(r.difficulty) << ',' << fmt(r.baseline_time) << ','
          << fmt(r.enhanced_time) << ',' << fmt(r.egr) << ',' << r.compiles << ',' << r.io_pass << ','
          << to_string(r.error) << ',' << fmt(r.similarity) << '\n';
    }
    return o.str();
}

std::string egr_summary(const EgrReport& rep) {
    std::ostringstream o;
    o << "samples: " << rep.rows.size() << '\n'
      << "mean_egr: " << fmt(rep.mean_egr) << '\n'
      << "pooled_egr: " << fmt(rep.pooled_egr) << '\n'
      << "compilation_rate: " << fmt(rep.compilation_rate) << '\n'
      << "io_pass_rate: " << fmt(rep.io_pass_rate) << '\n'
      << "mean_similarity: " << fmt(rep.mean_similarity) << '\n';
    for (const auto& [d, v] : rep.mean_egr_by_difficulty) o << "mean_egr_" << data::to_string(d) << ": " << fmt(v) << '\n';
    for (const auto& [k, n] : rep.errors) o << "errors_" << to_string(k) << ": " << n << '\n';
    return o.str();
}

}  // namespace epcforge::eval
