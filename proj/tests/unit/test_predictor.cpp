// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "epcforge/data/corpus.hpp"
#include "epcforge/minilang/interpreter.hpp"
#include "epcforge/minilang/parser.hpp"
#include "epcforge/predictor/runtime.hpp"
#include "epcforge/util/rng.hpp"

using namespace epcforge;
using namespace epcforge::predictor;
namespace fs = std::filesystem;

namespace {

const std::vector<data::EpcSample>& corpus() {
    static const auto c = data::generate_corpus(300, 17);
    return c;
}

std::size_t feature_index(std::string_view name) {
    const auto& names = feature_names();
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

double feature(const FeatureVector& f, std::string_view name) { return f[feature_index(name)]; }

}  // namespace

TEST_CASE("variants: labels come from the original program") {
    const auto ori = build_variant_dataset(corpus(), Variant::Ori, 1);
    const auto uni = build_variant_dataset(corpus(), Variant::Uni, 1);
    const auto loop = build_variant_dataset(corpus(), Variant::LoopRec, 1);
    const auto del = build_variant_dataset(corpus(), Variant::RandDel, 1);
    REQUIRE(ori.size() == uni.size());
    REQUIRE(ori.size() == loop.size());
    REQUIRE(ori.size() == del.size());
    std::size_t i = 0;
    for (const auto& s : corpus()) {
        std::vector<std::string> programs{s.inefficient_code};
        programs.insert(programs.end(), s.efficient_codes.begin(), s.efficient_codes.end());
        for (const auto& p : programs) {
            const auto run = minilang::run_source(p, s.io_examples[0].input);
            CHECK(ori[i].cost == static_cast<double>(run.cost));
            CHECK(ori[i].tokens == token_texts(p));
            CHECK(uni[i].cost == ori[i].cost);
            CHECK(loop[i].cost == ori[i].cost);
            CHECK(del[i].cost == ori[i].cost);
            CHECK(ori[i].variant == Variant::Ori);
            CHECK(del[i].variant == Variant::RandDel);
            CHECK(del[i].tokens.size() == uni[i].tokens.size() - static_cast<std::size_t>(std::llround(0.2 * uni[i].tokens.size())));
            ++i;
        }
    }
    CHECK(build_variant_dataset(corpus(), Variant::RandDel, 1) == del);
    CHECK(build_variant_dataset(corpus(), Variant::RandDel, 2) != del);
}

TEST_CASE("time_split: highest indices go to test") {
    std::vector<RuntimeRecord> recs(100);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        recs[i].submission_index = static_cast<std::int64_t>((i * 37) % 100);
        recs[i].cost = static_cast<double>(i);
    }
    const auto sp = time_split(recs, 0.1);
    REQUIRE(sp.test.size() == 10);
    CHECK(sp.train.size() == 90);
    for (const auto& t : sp.test) CHECK(t.submission_index >= 90);
    for (const auto& t : sp.train) CHECK(t.submission_index < 90);

    // all indices equal: record order decides, still a partition
    std::vector<RuntimeRecord> same(20);
    for (std::size_t i = 0; i < same.size(); ++i) same[i].cost = static_cast<double>(i);
    const auto s2 = time_split(same, 0.25);
    REQUIRE(s2.test.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(s2.test[i].cost == 15.0 + static_cast<double>(i));
    for (std::size_t i = 0; i < 15; ++i) CHECK(s2.train[i].cost == static_cast<double>(i));

    CHECK_THROWS_AS(time_split(recs, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(time_split(recs, 1.0), std::invalid_argument);
}

TEST_CASE("features: hand counts") {
    const std::vector<std::string> none;
    const FeatureVector empty = extract_features(none);
    for (std::size_t j = 0; j + 1 < kNumFeatures; ++j) CHECK(empty[j] == 0.0);
    CHECK(feature(empty, "parse_ok") == 1.0);

    const auto loop = token_texts("n = read()\ns = 0\nfor i in range(0, n):\n    s = s + i\nprint(s)");
    const FeatureVector f = extract_features(loop);
    CHECK(feature(f, "token_count") == static_cast<double>(loop.size()));
    CHECK(feature(f, "loop_count") == 1.0);
    CHECK(feature(f, "max_nesting") >= 1.0);
    CHECK(feature(f, "max_loop_depth") == 1.0);
    CHECK(feature(f, "nested_loop_count") == 0.0);
    CHECK(feature(f, "recursion") == 0.0);
    CHECK(feature(f, "log_range_sum") == 0.0);  // range(0, n): literal 0 only
    CHECK(feature(f, "parse_ok") == 1.0);

    const auto nested = token_texts(
        "n = read()\nc = 0\nfor i in range(0, 100):\n    for j in range(0, n):\n        c = c + 1\nprint(c)");
    const FeatureVector g = extract_features(nested);
    CHECK(feature(g, "loop_count") == 2.0);
    CHECK(feature(g, "max_loop_depth") == 2.0);
    CHECK(feature(g, "nested_loop_count") == 1.0);
    CHECK(feature(g, "log_range_sum") == doctest::Approx(std::log1p(100.0)));

    const auto rec = token_texts("def f(k):\n    if k == 0:\n        return 0\n    return k + f(k - 1)\nprint(f(read()))");
    const FeatureVector h = extract_features(rec);
    CHECK(feature(h, "recursion") == 1.0);
    CHECK(feature(h, "call_count") == 2.0);

    const auto maps = token_texts("m = {}\nm[1] = 2\nl = [1, 2]\nappend(l, 3)\nprint(len(l) + has(m, 1))");
    const FeatureVector k = extract_features(maps);
    CHECK(feature(k, "map_ops") == 2.0);
    CHECK(feature(k, "list_ops") == 4.0);  // two [, append, len
}

TEST_CASE("features: total over garbage and renaming-invariant") {
    Rng rng(5);
    const std::vector<std::string> alphabet{"for", "(", ")", "<indent>", "<dedent>", "x", "1", ":", "def", "range",
                                            "+", "<nl>", "]", "{", "while", "f"};
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::string> toks(rng.index(40));
        for (auto& t : toks) t = alphabet[rng.index(alphabet.size())];
        FeatureVector f{};
        CHECK_NOTHROW(f = extract_features(toks));
        for (double v : f) CHECK(std::isfinite(v));
        CHECK(extract_features(toks) == f);
    }
    const auto ori = build_variant_dataset(corpus(), Variant::Ori, 1);
    const auto uni = build_variant_dataset(corpus(), Variant::Uni, 1);
    for (std::size_t i = 0; i < ori.size(); ++i) CHECK(extract_features(ori[i].tokens) == extract_features(uni[i].tokens));

    // degraded programs mostly stop parsing
    const auto del = build_variant_dataset(corpus(), Variant::RandDel, 3);
    std::size_t broken = 0;
    for (const auto& r : del) broken += extract_features(r.tokens)[kNumFeatures - 1] == 0.0;
    CHECK(broken * 2 > del.size());
}

TEST_CASE("ridge: exact recovery, shrinkage and singularity") {
    Rng rng(8);
    const std::vector<double> w{2.0, -1.5, 0.25};
    const double b = 4.0;
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 50; ++i) {
        std::vector<double> row{rng.normal(), 3.0 * rng.normal() + 1.0, rng.uniform()};
        y.push_back(b + w[0] * row[0] + w[1] * row[1] + w[2] * row[2]);
        x.push_back(row);
    }
    const RidgeModel exact = fit_ridge(x, y, 0.0);
    const auto [rw, rb] = exact.raw_coefficients();
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::fabs(rw[j] - w[j]) < 1e-6);
    CHECK(std::fabs(rb - b) < 1e-6);
    CHECK(fit_ridge(x, y, 0.0) == exact);

    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    const RidgeModel heavy = fit_ridge(x, y, 1e12);
    for (double v : heavy.weights) CHECK(std::fabs(v) < 1e-8);
    CHECK(heavy.intercept == doctest::Approx(mean).epsilon(1e-9));

    // duplicated column with λ = 0 is singular
    std::vector<std::vector<double>> dup;
    for (const auto& row : x) dup.push_back({row[0], row[0]});
    CHECK_THROWS_AS(fit_ridge(dup, y, 0.0), std::runtime_error);
    CHECK_NOTHROW(fit_ridge(dup, y, 1.0));
    CHECK_THROWS_AS(fit_ridge({}, {}, 1.0), std::invalid_argument);
}

TEST_CASE("predict_time: clipping and monotonicity") {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    Rng rng(2);
    for (int i = 0; i < 40; ++i) {
        std::vector<double> row(kNumFeatures);
        for (double& v : row) v = rng.uniform() * 5;
        y.push_back(10.0 + 30.0 * row[1]);
        x.push_back(row);
    }
    RidgeModel m = fit_ridge(x, y, 0.1);
    CHECK(m.weights[1] > 0.0);
    // predictions grow with the loop count when other features are fixed
    FeatureVector base{};
    double prev = m.linear(base);
    for (int loops = 1; loops < 5; ++loops) {
        base[1] = loops;
        const double now = m.linear(base);
        CHECK(now > prev);
        prev = now;
    }
    // zero feature vector from an empty token list: max(0, linear)
    const std::vector<std::string> none;
    CHECK(predict_time(m, none) == std::max(0.0, m.linear(extract_features(none))));
    m.intercept = -1e9;
    CHECK(predict_time(m, none) == 0.0);
    CHECK(predict_source(m, "@@@ not code") == 0.0);
}

TEST_CASE("predictor beats the mean baseline on the time split") {
    std::vector<RuntimeRecord> all;
    for (Variant v : kAllVariants) {
        const auto r = build_variant_dataset(corpus(), v, 4);
        all.insert(all.end(), r.begin(), r.end());
    }
    const auto sp = time_split(all, 0.1);
    const RidgeModel m = fit_ridge(sp.train);
    const PredictorEval e = evaluate_predictor(m, sp.test);
    CHECK(e.count == sp.test.size());
    CHECK(e.mae < mean_baseline_mae(sp.train, sp.test));
    CHECK(e.mae_by_variant.size() == 4);

    // a perfect model has zero error; the mean predictor's MAE is the mean
    // absolute deviation from the training mean
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (const auto& r : sp.train) {
        const auto f = extract_features(r.tokens);
        x.emplace_back(f.begin(), f.end());
        y.push_back(5.0);
    }
    const RidgeModel constant = fit_ridge(x, y, 1.0);
    std::vector<RuntimeRecord> fives = sp.test;
    for (auto& r : fives) r.cost = 5.0;
    CHECK(evaluate_predictor(constant, fives).mae < 1e-9);
}

TEST_CASE("persistence round trips") {
    const auto recs = build_variant_dataset(corpus(), Variant::LoopRec, 1);
    const fs::path data_path = fs::temp_directory_path() / "epcforge_rt_dataset.jsonl";
    save_runtime_dataset(data_path, recs);
    CHECK(load_runtime_dataset(data_path) == recs);
    const RidgeModel m = fit_ridge(recs);
    const fs::path model_path = fs::temp_directory_path() / "epcforge_rt_model.etp";
    save_predictor(model_path, m);
    CHECK(load_predictor(model_path) == m);
    fs::remove(data_path);
    fs::remove(model_path);
    CHECK_THROWS(load_predictor(fs::temp_directory_path() / "epcforge_missing.etp"));
    CHECK(parse_variant("RandDel") == Variant::RandDel);
    CHECK_THROWS(parse_variant("foo"));
}
