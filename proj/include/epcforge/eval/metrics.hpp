// SPDX-License-Identifier: Apache-2.0
//
// Efficiency gain, functional checks, n-gram similarity, candidate filtering
// and running-time interval statistics.

#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epcforge/data/sample.hpp"
#include "epcforge/predictor/runtime.hpp"

namespace epcforge::eval {

/// (t_baseline − t_enhanced) / t_baseline. Throws std::invalid_argument when
/// t_baseline ≤ 0 or t_enhanced < 0.
double egr(double t_baseline, double t_enhanced);

/// Index of the smallest prediction, lowest index on ties. Throws
/// std::invalid_argument on an empty list.
std::size_t efficiency_filter(std::span<const double> predictions);
/// Predicts every candidate source with `predictor`, then filters.
std::size_t efficiency_filter(std::span<const std::string> candidates, const predictor::RidgeModel& predictor);

enum class ErrorKind { None, SyntaxError, OutputMismatch, RuntimeError, FuelExhausted };

std::string_view to_string(ErrorKind k);

struct FunctionalResult {
    bool compiles = false;
    bool io_pass = false;
    ErrorKind error = ErrorKind::None;
    /// Cost on the first I/O example when that run terminated.
    std::optional<double> first_cost;

    bool operator==(const FunctionalResult&) const = default;
};

/// Parses `source` and runs it on every I/O example of `sample`. The error
/// kind is the first failure in example order.
FunctionalResult functional_check(std::string_view source, const data::EpcSample& sample);

/// Smoothed 4-gram BLEU: modified n-gram precisions with +1 added to both
/// numerator and denominator, geometric mean, brevity penalty; maximum over
/// references. Empty generation scores 0. Throws std::invalid_argument when
/// `references` is empty.
double ngram_similarity(std::span<const std::string> generated,
                        std::span<const std::vector<std::string>> references);

/// T_i = T_min + i·(T_max − T_min)/5 for i = 0..5. Throws
/// std::invalid_argument on an empty list.
std::array<double, 6> time_bins(std::span<const double> times);

/// Interval index 0..4 for `t` under `points`: right-open intervals except
/// the last, which is closed. A degenerate range maps everything to 0.
std::size_t interval_of(double t, const std::array<double, 6>& points);

/// Removes the floor(n/100) largest times.
std::vector<double> trim_top_percent(std::span<const double> times);

struct DifficultyBins {
    std::array<double, 6> points{};  // mean over problems of each T_i
    std::array<double, 5> ratios{};  // mean over problems of count/total
    std::size_t problems = 0;
};

using BinStats = std::map<data::Difficulty, DifficultyBins>;

/// One inner vector of solution times per problem. Problems without times
/// are rejected with std::invalid_argument.
BinStats bin_ratios(const std::map<data::Difficulty, std::vector<std::vector<double>>>& groups);

/// Costs of every program of each sample on its first I/O input, grouped by
/// difficulty.
std::map<data::Difficulty, std::vector<std::vector<double>>> corpus_times(std::span<const data::EpcSample> corpus);

std::string bin_stats_csv(const BinStats& stats);

// ---- EGR reports ------------------------------------------------------------

enum class TimingPolicy {
    /// Candidates failing any I/O test gain nothing: their time is the
    /// baseline's. Correct candidates use interpreter cost.
    Strict,
    /// Interpreter cost whenever the first example terminates, the predictor
    /// otherwise (baseline if no predictor).
    Measured,
    /// Predictor estimates for both programs.
    Predicted,
};

std::string_view to_string(TimingPolicy p);
TimingPolicy parse_timing_policy(std::string_view text);

struct SampleEval {
    std::size_t sample = 0;  // index into the evaluated sample list
    data::Difficulty difficulty = data::Difficulty::Easy;
    double baseline_time = 0.0;
    double enhanced_time = 0.0;
    double egr = 0.0;
    bool compiles = false;
    bool io_pass = false;
    ErrorKind error = ErrorKind::None;
    double similarity = 0.0;
};

struct EgrReport {
    std::vector<SampleEval> rows;
    double mean_egr = 0.0;
    /// (Σ baseline − Σ enhanced) / Σ baseline.
    double pooled_egr = 0.0;
    double compilation_rate = 0.0;
    double io_pass_rate = 0.0;
    double mean_similarity = 0.0;
    std::map<ErrorKind, std::size_t> errors;
    std::map<data::Difficulty, double> mean_egr_by_difficulty;
};

/// Evaluates one submitted program per sample. `predictor` is required for
/// the Predicted policy and optional otherwise.
EgrReport evaluate_submissions(std::span<const data::EpcSample> samples, std::span<const std::string> programs,
                               TimingPolicy policy, const predictor::RidgeModel* predictor = nullptr);

std::string egr_report_csv(const EgrReport& report);
/// Aggregate block: one "key: value" line per statistic.
std::string egr_summary(const EgrReport& report);

}  // namespace epcforge::eval
