// SPDX-License-Identifier: Apache-2.0
//
// Execution-cost predictor: parse-free token features and a closed-form
// ridge regressor, plus the four runtime dataset variants it trains on.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epcforge/data/sample.hpp"

namespace epcforge::predictor {

enum class Variant { Ori, Uni, LoopRec, RandDel };

inline constexpr std::array<Variant, 4> kAllVariants = {Variant::Ori, Variant::Uni, Variant::LoopRec,
                                                        Variant::RandDel};

std::string_view to_string(Variant v);
/// Accepts "ori", "uni", "looprec", "randdel" (any case).
Variant parse_variant(std::string_view text);

/// Fraction of tokens removed by the RandDel variant.
inline constexpr double kRandDelRatio = 0.2;

struct RuntimeRecord {
    std::vector<std::string> tokens;
    Variant variant = Variant::Ori;
    /// Cost of the original, untransformed program on its first I/O input.
    double cost = 0.0;
    std::int64_t submission_index = 0;

    bool operator==(const RuntimeRecord&) const = default;
};

/// Token texts of a source program (lexer layout tokens included).
std::vector<std::string> token_texts(std::string_view source);

/// One record per program (inefficient code and every efficient code) of
/// every sample. Uni renames, LoopRec extracts loops and recursion from the
/// renamed program, RandDel deletes 20% of the renamed program's tokens.
/// Throws std::runtime_error if a corpus program fails to run.
std::vector<RuntimeRecord> build_variant_dataset(std::span<const data::EpcSample> corpus, Variant kind,
                                                 std::uint64_t seed);

struct SplitRecords {
    std::vector<RuntimeRecord> train, test;
};

/// The round(fraction * N) records (at least one, at most N - 1) with the
/// highest submission index go to test; equal indices keep record order.
/// Throws std::invalid_argument unless 0 < fraction < 1.
SplitRecords time_split(std::span<const RuntimeRecord> records, double test_fraction = 0.1);

inline constexpr std::size_t kNumFeatures = 11;
using FeatureVector = std::array<double, kNumFeatures>;

/// Names in feature order.
const std::array<std::string_view, kNumFeatures>& feature_names();

/// Total function of the token list: never throws.
FeatureVector extract_features(std::span<const std::string> tokens);

struct RidgeModel {
    std::vector<std::string> feature_names;
    std::vector<double> mean, scale;  // z-score statistics from the training set
    std::vector<double> weights;      // on z-scored features
    double intercept = 0.0;
    double lambda = 1.0;

    /// w·z + b, unclipped.
    double linear(std::span<const double> features) const;
    /// Weights and intercept on unscaled features.
    std::pair<std::vector<double>, double> raw_coefficients() const;

    bool operator==(const RidgeModel&) const = default;
};

inline constexpr double kDefaultLambda = 1.0;

/// Solves (ZᵀZ + λI)w = Zᵀy with an unpenalised intercept, Z the z-scored
/// rows of `x`. Throws std::invalid_argument on empty or ragged input and
/// std::runtime_error when the system is singular.
RidgeModel fit_ridge(const std::vector<std::vector<double>>& x, std::span<const double> y,
                     double lambda = kDefaultLambda);
RidgeModel fit_ridge(std::span<const RuntimeRecord> train, double lambda = kDefaultLambda);

/// max(0, model.linear(extract_features(tokens))).
double predict_time(const RidgeModel& model, std::span<const std::string> tokens);
double predict_source(const RidgeModel& model, std::string_view source);

struct PredictorEval {
    double mae = 0.0;
    std::map<Variant, double> mae_by_variant;
    std::size_t count = 0;
};

PredictorEval evaluate_predictor(const RidgeModel& model, std::span<const RuntimeRecord> test);
/// MAE of always predicting the mean training label.
double mean_baseline_mae(std::span<const RuntimeRecord> train, std::span<const RuntimeRecord> test);

inline constexpr const char* kPredictorHeader = "epcforge-etp-v1";
inline constexpr const char* kRuntimeDatasetHeader = "epcforge-runtime-v1";

void save_predictor(const std::filesystem::path& path, const RidgeModel& model);
RidgeModel load_predictor(const std::filesystem::path& path);

void save_runtime_dataset(const std::filesystem::path& path, std::span<const RuntimeRecord> records);
std::vector<RuntimeRecord> load_runtime_dataset(const std::filesystem::path& path);

}  // namespace epcforge::predictor
