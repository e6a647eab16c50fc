// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "epcforge/cli/commands.hpp"
#include "epcforge/cli/run_config.hpp"

using namespace epcforge;
using namespace epcforge::cli;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream o(p, std::ios::binary);
    o << text;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("epcforge_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

}  // namespace

TEST_CASE("run config: layering and unknown keys") {
    const nlohmann::json j = {{"seed", 9},
                              {"corpus", "c.jsonl"},
                              {"k", 3},
                              {"model", {{"preset", "tiny"}, {"d_model", 96}}},
                              {"train", {{"epochs", 4}}},
                              {"decode", {{"top_k", 5}}}};
    const RunConfig rc = run_config_from_json(j);
    CHECK(rc.seed == 9);
    CHECK(rc.k == 3);
    CHECK(rc.train.epochs == 4);
    CHECK(rc.train.batch_size == 32);
    CHECK(rc.decode.top_k == 5);
    CHECK(rc.decode.top_p == 0.95);
    const auto mc = rc.model_config(100);
    CHECK(mc.d_model == 96);
    CHECK(mc.d_expert == 16);
    CHECK(mc.vocab_size == 100);
    CHECK(run_config_from_json(to_json(rc)).model_config(100) == mc);

    CHECK_THROWS_AS(run_config_from_json({{"sed", 1}}), std::invalid_argument);
    CHECK_THROWS_AS(run_config_from_json({{"train", {{"epoch", 1}}}}), std::invalid_argument);
    CHECK_THROWS_AS(run_config_from_json({{"decode", {{"topk", 1}}}}), std::invalid_argument);
    CHECK_THROWS_AS(run_config_from_json({{"model", {{"width", 1}}}}), std::invalid_argument);
    CHECK_THROWS_AS(run_config_from_json({{"seed", "x"}}), std::invalid_argument);
    CHECK_THROWS_AS(run_config_from_json({{"model", {{"vocab_size", 7}}}}).model_config(100), std::invalid_argument);
    CHECK_THROWS_AS(run_config_from_json({{"model", {{"d_model", 50}}}}).model_config(100), std::invalid_argument);
    CHECK_THROWS_AS(run_config_from_json({{"decode", {{"top_p", 0.0}}}}), std::invalid_argument);
}

TEST_CASE("cli: usage errors exit with 2") {
    CHECK(invoke({}).code == kExitUsage);
    CHECK(invoke({"no-such-command"}).code == kExitUsage);
    CHECK(invoke({"corpus-gen", "--n", "3"}).code == kExitUsage);
    CHECK(invoke({"--help"}).code == kExitOk);
    const Run missing = invoke({"stats", "--corpus", "/nonexistent/c.jsonl"});
    CHECK(missing.code == kExitUsage);
    CHECK(missing.err.find("corpus not found") != std::string::npos);
}

TEST_CASE("cli: corpus-gen is byte-reproducible and atomic") {
    TempDir t("corpus");
    REQUIRE(invoke({"corpus-gen", "--n", "20", "--seed", "2", "--out", t / "a.jsonl"}).code == kExitOk);
    REQUIRE(invoke({"corpus-gen", "--n", "20", "--seed", "2", "--out", t / "b.jsonl"}).code == kExitOk);
    CHECK(slurp(t / "a.jsonl") == slurp(t / "b.jsonl"));
    CHECK(fs::exists(t / "a.jsonl.meta.json"));
    const std::string text = slurp(t / "a.jsonl");
    CHECK(std::count(text.begin(), text.end(), '\n') == 21);

    CHECK(invoke({"corpus-gen", "--n", "5", "--out", t / "missing/c.jsonl"}).code == kExitUsage);
    CHECK_FALSE(fs::exists(t / "missing"));

    const Run stats = invoke({"stats", "--corpus", t / "a.jsonl"});
    CHECK(stats.code == kExitOk);
    std::map<std::string, double> sums;
    std::istringstream lines(stats.out);
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        REQUIRE(cells.size() == 6);
        sums[cells[0]] += std::stod(cells[4]);
    }
    CHECK_FALSE(sums.empty());
    for (const auto& [d, s] : sums) CHECK(std::fabs(s - 1.0) < 1e-9);
}

TEST_CASE("cli: train, resume, generate, filter and evaluate") {
    TempDir t("pipeline");
    const std::string corpus = t / "c.jsonl";
    REQUIRE(invoke({"corpus-gen", "--n", "12", "--seed", "5", "--out", corpus}).code == kExitOk);

    spit(t / "bad.json", R"({"train": {"epochs": 1, "learningrate": 1}})");
    CHECK(invoke({"train", "--config", t / "bad.json", "--corpus", corpus, "--out-dir", t / "x"}).code == kExitUsage);
    CHECK(invoke({"train", "--corpus", t / "nope.jsonl", "--out-dir", t / "x"}).code == kExitUsage);

    // flags override the config file
    spit(t / "cfg.json", R"({"seed": 4, "train": {"epochs": 5, "batch_size": 4}, "model": {"preset": "tiny"}})");
    const Run full = invoke({"train", "--config", t / "cfg.json", "--corpus", corpus, "--out-dir", t / "full", "--epochs", "2"});
    REQUIRE(full.code == kExitOk);
    CHECK(full.out.find("epoch 2 ") != std::string::npos);
    CHECK(full.out.find("epoch 3 ") == std::string::npos);
    CHECK(fs::exists(t / "full/epoch-001.ckpt"));
    CHECK(fs::exists(t / "full/train.meta.json"));

    REQUIRE(invoke({"train", "--config", t / "cfg.json", "--corpus", corpus, "--out-dir", t / "half", "--epochs", "1"}).code == kExitOk);
    REQUIRE(invoke({"train", "--corpus", corpus, "--out-dir", t / "half", "--resume", t / "half/last.ckpt", "--epochs", "2"}).code == kExitOk);
    CHECK(slurp(t / "half/last.ckpt") == slurp(t / "full/last.ckpt"));
    CHECK(slurp(t / "half/loss.csv") == slurp(t / "full/loss.csv"));

    const std::vector<std::string> gen = {"generate", "--corpus", corpus, "--checkpoint", t / "full", "--max-len", "12", "--seed", "8"};
    auto with = [](std::vector<std::string> v, std::initializer_list<std::string> extra) {
        v.insert(v.end(), extra);
        return v;
    };
    CHECK(invoke(with(gen, {"--k", "6", "--out-dir", t / "g6"})).code == kExitUsage);
    CHECK(invoke(with(gen, {"--k", "6", "--allow-over-cap", "--sample", "0", "--out-dir", t / "g6"})).code == kExitOk);
    CHECK(fs::exists(t / "g6/sample-00000/candidate-5.ml"));

    REQUIRE(invoke(with(gen, {"--k", "5", "--sample", "1", "--out-dir", t / "g5"})).code == kExitOk);
    const auto log = nlohmann::json::parse(slurp(t / "g5/sample-00001/candidates.json"));
    REQUIRE(log["candidates"].size() == 5);
    CHECK(log["candidates"][0]["seed"] != log["candidates"][1]["seed"]);

    REQUIRE(invoke(with(gen, {"--k", "1", "--sample", "2", "--out-dir", t / "k1a"})).code == kExitOk);
    REQUIRE(invoke(with(gen, {"--k", "1", "--sample", "2", "--out-dir", t / "k1b"})).code == kExitOk);
    CHECK(slurp(t / "k1a/sample-00002/candidate-0.ml") == slurp(t / "k1b/sample-00002/candidate-0.ml"));

    REQUIRE(invoke({"fit-predictor", "--corpus", corpus, "--out", t / "p.etp"}).code == kExitOk);
    REQUIRE(invoke(with(gen, {"--k", "3", "--out-dir", t / "g3"})).code == kExitOk);
    const Run filt = invoke({"filter", "--candidates", t / "g3", "--predictor", t / "p.etp", "--each"});
    REQUIRE(filt.code == kExitOk);
    CHECK(filt.out.find("selected") != std::string::npos);

    fs::create_directories(t / "empty");
    CHECK(invoke({"filter", "--candidates", t / "empty", "--predictor", t / "p.etp"}).code == kExitUsage);
    CHECK(invoke({"filter", "--candidates", t / "g3", "--predictor", t / "nope.etp"}).code == kExitUsage);

    // identical candidates: the lowest filename wins
    fs::create_directories(t / "tie");
    spit(t / "tie/b.ml", "print(1)\n");
    spit(t / "tie/a.ml", "print(1)\n");
    spit(t / "tie/c.ml", "n = read()\nfor i in range(0, n):\n    print(i)\n");
    REQUIRE(invoke({"filter", "--candidates", t / "tie", "--predictor", t / "p.etp"}).code == kExitOk);
    CHECK(nlohmann::json::parse(slurp(t / "tie/selection.json"))["selected"] == "a.ml");

    const Run ev = invoke({"evaluate", "--corpus", corpus, "--generations", t / "g3", "--out-dir", t / "rep"});
    REQUIRE(ev.code == kExitOk);
    CHECK(fs::exists(t / "rep/egr.csv"));
    CHECK(ev.out.find("mean_egr: ") != std::string::npos);
    CHECK(invoke({"evaluate", "--corpus", corpus, "--generations", t / "g5", "--pick", "filtered"}).code == kExitUsage);
    CHECK(invoke({"evaluate", "--corpus", corpus, "--generations", t / "g5", "--pick", "first"}).code == kExitOk);

    const Run pt = invoke({"predict-time", "--predictor", t / "p.etp", "--code", t / "tie/c.ml"});
    CHECK(pt.code == kExitOk);
    CHECK(std::stod(pt.out) >= 0.0);
}

TEST_CASE("cli: evaluate on reference programs reports the corpus gaps") {
    TempDir t("refs");
    REQUIRE(invoke({"corpus-gen", "--n", "40", "--seed", "6", "--out", t / "c.jsonl"}).code == kExitOk);
    const Run r = invoke({"evaluate", "--corpus", t / "c.jsonl", "--references", "--out-dir", t / "rep"});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.find("io_pass_rate: 1\n") != std::string::npos);
    std::istringstream lines(slurp(t / "rep/egr.csv"));
    std::string line;
    std::getline(lines, line);
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        const double base = std::stod(cells[2]), enh = std::stod(cells[3]);
        CHECK(std::stod(cells[4]) == doctest::Approx((base - enh) / base).epsilon(1e-9));
        CHECK(enh < base);
    }
    CHECK(rows == 8);
}

TEST_CASE("cli: grad-check passes") {
    const Run r = invoke({"grad-check", "--seeds", "2", "--composite-seeds", "1"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find(" 0 failed") != std::string::npos);
}
