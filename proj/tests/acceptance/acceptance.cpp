// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "epcforge/cli/commands.hpp"
#include "epcforge/data/corpus.hpp"
#include "epcforge/eval/metrics.hpp"
#include "epcforge/minilang/interpreter.hpp"
#include "epcforge/minilang/parser.hpp"
#include "epcforge/minilang/transforms.hpp"
#include "epcforge/model/decode.hpp"
#include "epcforge/model/grad_suite.hpp"
#include "epcforge/nn/grad_suite.hpp"
#include "epcforge/nn/ops.hpp"
#include "epcforge/predictor/runtime.hpp"
#include "epcforge/train/trainer.hpp"
#include "epcforge/util/rng.hpp"

using namespace epcforge;
namespace fs = std::filesystem;
namespace ml = epcforge::minilang;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    std::function<Outcome()> run;
};

class Timer {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string num(double x, int precision = 4) {
    std::ostringstream o;
    o << std::setprecision(precision) << x;
    return o.str();
}

// ---- 1 -------------------------------------------------------------------------

Outcome gradient_suite() {
    constexpr int kSeeds = 20;
    const Timer t;
    double worst_primitive = 0.0, worst_composite = 0.0;
    std::size_t checks = 0, failed = 0;
    std::string first_failure;
    for (std::uint64_t s = 0; s < kSeeds; ++s) {
        for (const auto& c : nn::primitive_grad_suite(s)) {
            ++checks;
            worst_primitive = std::max(worst_primitive, c.max_rel_error);
            if (!(c.max_rel_error < nn::kPrimitiveTolerance) && failed++ == 0) first_failure = c.name;
        }
        for (const auto& c : model::ecode_grad_check(s)) {
            ++checks;
            worst_composite = std::max(worst_composite, c.max_rel_error);
            if (!(c.max_rel_error < model::kCompositeTolerance) && failed++ == 0) first_failure = c.name;
        }
    }
    const double secs = t.seconds();
    Outcome o;
    o.pass = failed == 0 && secs < 120.0;
    o.detail = std::to_string(checks) + " checks over " + std::to_string(kSeeds) + " seeds, worst primitive " +
               num(worst_primitive, 3) + " (< 1e-4), worst composite " + num(worst_composite, 3) + " (< 1e-3), " +
               num(secs, 3) + " s (< 120 s)";
    if (failed) o.detail += ", " + std::to_string(failed) + " failed, first: " + first_failure;
    return o;
}

// ---- 2 -------------------------------------------------------------------------

Outcome log_prob_consistency() {
    const auto corpus = data::generate_corpus(100, 23);
    const auto vocab = data::Vocabulary::build(corpus);
    model::ECodeConfig cfg = model::ECodeConfig::tiny(vocab.size());
    model::ECodeModel m = model::ECodeModel::create(cfg, 5);
    Rng rng(17);
    double worst = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto inputs = model::make_inputs(corpus[i], vocab, cfg);
        std::vector<data::TokenId> seq;
        if (i % 2 == 0) {
            seq = model::make_target(corpus[i], vocab, cfg);
        } else {
            seq.resize(rng.index(60));
            for (auto& id : seq) id = static_cast<data::TokenId>(data::kNumReserved + rng.index(vocab.size() - data::kNumReserved));
            seq.push_back(data::kEos);
        }
        const double joint = m.sequence_log_prob(inputs, seq);
        const nn::Tensor enc = m.encode_plain(inputs);
        std::vector<data::TokenId> prefix{data::kBos};
        double stepwise = 0.0;
        for (data::TokenId t : seq) {
            stepwise += std::log(m.next_token_probs(enc, prefix)[static_cast<std::size_t>(t)]);
            prefix.push_back(t);
        }
        worst = std::max(worst, std::fabs(joint - stepwise));
    }
    return {worst < 1e-6, "100 (sample, sequence) pairs, max |joint - stepwise| = " + num(worst, 3) + " (< 1e-6)"};
}

// ---- 3 -------------------------------------------------------------------------

// Work measured from the attention maps actually computed: every score entry
// costs one d-length dot product and one d-length weighted sum.
std::uint64_t measured_attention_work(std::size_t len, std::size_t d, Rng& rng) {
    nn::AttentionParams p;
    p.heads = 1;
    for (nn::Tensor* w : {&p.w_q, &p.w_k, &p.w_v, &p.w_h}) {
        *w = nn::Tensor({d, d});
        for (double& v : w->values) v = 0.1 * rng.normal();
    }
    nn::Tensor x({len, d});
    for (double& v : x.values) v = rng.normal();
    std::uint64_t work = 0;
    for (const nn::Tensor& a : nn::attention_weights(x, x, p)) work += 2ull * a.rows() * a.cols() * d;
    return work;
}

Outcome flop_claim() {
    Rng rng(3);
    std::size_t cases = 0, ok = 0;
    std::string bad;
    for (std::uint64_t len : {50u, 100u, 500u, 2000u}) {
        for (std::uint64_t d : {8u, 64u}) {
            ++cases;
            const std::uint64_t mono = nn::attention_flops(len, d);
            const std::uint64_t experts = 5 * nn::attention_flops(len / 5, d);
            const std::uint64_t mono_measured = measured_attention_work(len, d, rng);
            std::uint64_t experts_measured = 0;
            for (int e = 0; e < 5; ++e) experts_measured += measured_attention_work(len / 5, d, rng);
            const bool exact = 5 * experts == mono && 5 * experts_measured == mono_measured && mono == mono_measured;
            ok += exact;
            if (!exact) bad += " L=" + std::to_string(len) + ",d=" + std::to_string(d);
        }
    }
    return {ok == cases, std::to_string(ok) + "/" + std::to_string(cases) +
                             " (L, d) cases with 5 segments of L/5 costing exactly 1/5 of one length-L pass" + bad};
}

// ---- 4 -------------------------------------------------------------------------

Outcome memorisation() {
    const Timer t;
    const auto corpus = data::generate_corpus(50, 7);
    const auto vocab = data::Vocabulary::build(corpus);
    const auto cfg = model::ECodeConfig::tiny(vocab.size());
    model::ECodeModel m = model::ECodeModel::create(cfg, 1);
    const auto examples = train::make_examples(corpus, vocab, cfg);
    train::TrainConfig tc;
    tc.learning_rate = 2e-3;
    tc.batch_size = 10;
    tc.epochs = 200;
    tc.weight_decay = 0.0;
    tc.seed = 1;
    train::TrainState st;
    train::fit(m, examples, tc, st);
    const double acc = train::evaluate(m, examples).token_accuracy;
    model::DecodeParams greedy;
    greedy.greedy = true;
    int exact = 0;
    for (const auto& ex : examples) exact += model::generate(m, ex.inputs, greedy, 0).tokens == ex.target;
    const double secs = t.seconds();
    return {acc > 0.95 && exact >= 45 && secs < 900.0,
            "200 epochs on 50 samples: token accuracy " + num(acc) + " (> 0.95), greedy exact " +
                std::to_string(exact) + "/50 (>= 45), " + num(secs, 3) + " s (< 900 s)"};
}

// ---- 5 -------------------------------------------------------------------------

Outcome efficiency_gain() {
    const Timer t;
    const auto corpus = data::generate_corpus(2500, 1);
    std::vector<data::EpcSample> train_split, test_split;
    for (const auto& s : corpus) (s.split == data::Split::Train ? train_split : test_split).push_back(s);

    const auto vocab = data::Vocabulary::build(train_split);
    const auto cfg = model::ECodeConfig::tiny(vocab.size());
    model::ECodeModel m = model::ECodeModel::create(cfg, derive_seed(1, "init"));
    train::TrainConfig tc;
    tc.learning_rate = 2e-3;
    tc.batch_size = 16;
    tc.epochs = 8;
    tc.seed = 1;
    train::TrainState st;
    train::fit(m, train::make_examples(train_split, vocab, cfg), tc, st);

    std::vector<predictor::RuntimeRecord> records;
    for (predictor::Variant v : predictor::kAllVariants) {
        const auto r = predictor::build_variant_dataset(train_split, v, 1);
        records.insert(records.end(), r.begin(), r.end());
    }
    const predictor::RidgeModel ridge = predictor::fit_ridge(records);

    const model::DecodeParams dp;  // temperature 0.25, top-k 50, top-p 0.95
    std::vector<std::string> single, filtered;
    std::size_t differing = 0;
    for (std::size_t i = 0; i < test_split.size(); ++i) {
        const auto inputs = model::make_inputs(test_split[i], vocab, cfg);
        const auto gens = model::sample_k_candidates(m, inputs, 3, dp, derive_seed(derive_seed(1, "generate"), i));
        std::vector<std::string> sources;
        for (const auto& g : gens) sources.push_back(data::detokenize_code(g.tokens, vocab));
        differing += std::set<std::string>(sources.begin(), sources.end()).size() > 1;
        single.push_back(sources[0]);
        filtered.push_back(sources[eval::efficiency_filter(sources, ridge)]);
    }
    const auto one = eval::evaluate_submissions(test_split, single, eval::TimingPolicy::Strict);
    const auto three = eval::evaluate_submissions(test_split, filtered, eval::TimingPolicy::Strict);
    return {three.mean_egr > 0.0 && three.mean_egr >= one.mean_egr,
            std::to_string(train_split.size()) + " train / " + std::to_string(test_split.size()) +
                " test, final train loss " + num(st.trace.back().mean_loss, 3) + "; filtered k=3 mean EGR " +
                num(three.mean_egr) + " (io pass " + num(three.io_pass_rate, 3) + ") vs single " + num(one.mean_egr) +
                " (io pass " + num(one.io_pass_rate, 3) + "); candidates differ on " + std::to_string(differing) +
                " tasks; " + num(t.seconds(), 4) + " s"};
}

// ---- 6 -------------------------------------------------------------------------

Outcome egr_spot() {
    const double v = eval::egr(266, 22);
    return {std::fabs(v - 0.9173) <= 1e-4, "egr(266, 22) = " + num(v, 6) + " (0.9173 +- 1e-4)"};
}

// ---- 7 -------------------------------------------------------------------------

Outcome predictor_utility() {
    const auto corpus = data::generate_corpus(1000, 3);
    std::map<predictor::Variant, std::vector<predictor::RuntimeRecord>> by_variant;
    std::vector<predictor::RuntimeRecord> all;
    for (predictor::Variant v : predictor::kAllVariants) {
        by_variant[v] = predictor::build_variant_dataset(corpus, v, 2);
        all.insert(all.end(), by_variant[v].begin(), by_variant[v].end());
    }
    const auto& ori = by_variant[predictor::Variant::Ori];
    const auto& uni = by_variant[predictor::Variant::Uni];
    bool labels_equal = ori.size() == uni.size();
    for (std::size_t i = 0; labels_equal && i < ori.size(); ++i) labels_equal = ori[i].cost == uni[i].cost;

    const auto split = predictor::time_split(all, 0.1);
    const auto model = predictor::fit_ridge(split.train);
    const double mae = predictor::evaluate_predictor(model, split.test).mae;
    const double baseline = predictor::mean_baseline_mae(split.train, split.test);
    return {mae < baseline && labels_equal,
            std::to_string(all.size()) + " records, test MAE " + num(mae, 5) + " vs mean baseline " +
                num(baseline, 5) + "; Uni labels equal Ori: " + (labels_equal ? "yes" : "no")};
}

// ---- 8 -------------------------------------------------------------------------

Outcome transform_invariants() {
    const auto corpus = data::generate_corpus(500, 8);
    std::size_t programs = 0, renamed_ok = 0, deletes_ok = 0, deletes = 0, reparse_ok = 0;
    for (const auto& s : corpus) {
        std::vector<std::string> sources{s.inefficient_code};
        sources.insert(sources.end(), s.efficient_codes.begin(), s.efficient_codes.end());
        for (const auto& src : sources) {
            ++programs;
            const ml::Program p = ml::parse_source(src);
            const ml::Program r = ml::rename_uniform(p);
            bool same = true;
            for (const auto& io : s.io_examples) {
                const auto a = ml::execute(p, io.input);
                const auto b = ml::execute(r, io.input);
                same = same && a.status == b.status && a.output == b.output && a.cost == b.cost;
            }
            renamed_ok += same;

            const auto tokens = ml::lex(src);
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                ++deletes;
                const auto kept = ml::random_token_delete(tokens, 0.2, seed);
                const auto removed = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(tokens.size())));
                deletes_ok += kept.size() + removed == tokens.size();
            }

            try {
                (void)ml::parse_source(ml::to_source(ml::extract_loops_recursion(p)));
                ++reparse_ok;
            } catch (const std::exception&) {
            }
        }
    }
    return {renamed_ok == programs && deletes_ok == deletes && reparse_ok == programs,
            "rename preserves output+cost " + std::to_string(renamed_ok) + "/" + std::to_string(programs) +
                "; deletion count exact " + std::to_string(deletes_ok) + "/" + std::to_string(deletes) +
                "; loop/recursion extracts re-parse " + std::to_string(reparse_ok) + "/" + std::to_string(programs)};
}

// ---- 9 -------------------------------------------------------------------------

std::array<double, 5> counting_oracle(std::vector<double> times) {
    std::sort(times.begin(), times.end());
    times.resize(times.size() - times.size() / 100);
    const double lo = times.front(), hi = times.back();
    std::array<double, 5> counts{};
    for (double t : times) {
        std::size_t bin = 0;
        if (hi > lo) {
            for (std::size_t i = 0; i < 5; ++i) {
                const double left = lo + static_cast<double>(i) * (hi - lo) / 5.0;
                const double right = i == 4 ? hi : lo + static_cast<double>(i + 1) * (hi - lo) / 5.0;
                if (t >= left && (t < right || (i == 4 && t <= right))) bin = i;
            }
        }
        counts[bin] += 1.0;
    }
    for (double& c : counts) c /= static_cast<double>(times.size());
    return counts;
}

Outcome bin_statistics() {
    Rng rng(41);
    std::map<data::Difficulty, std::vector<std::vector<double>>> groups;
    std::map<data::Difficulty, std::array<double, 5>> expected;
    const data::Difficulty tiers[] = {data::Difficulty::Easy, data::Difficulty::Intermediate, data::Difficulty::Hard};
    for (int problem = 0; problem < 50; ++problem) {
        const data::Difficulty d = tiers[rng.index(3)];
        std::vector<double> times(1 + rng.index(400));
        for (double& t : times) t = problem % 3 == 0 ? static_cast<double>(rng.index(30)) : 1.0 + 500.0 * std::pow(rng.uniform(), 3);
        const auto r = counting_oracle(times);
        for (std::size_t i = 0; i < 5; ++i) expected[d][i] += r[i];
        groups[d].push_back(std::move(times));
    }
    const eval::BinStats stats = eval::bin_ratios(groups);
    double worst_sum = 0.0, worst_oracle = 0.0;
    for (const auto& [d, b] : stats) {
        double sum = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            sum += b.ratios[i];
            worst_oracle = std::max(worst_oracle, std::fabs(b.ratios[i] - expected[d][i] / static_cast<double>(b.problems)));
        }
        worst_sum = std::max(worst_sum, std::fabs(sum - 1.0));
    }
    return {worst_sum <= 1e-9 && worst_oracle <= 1e-12 && stats.size() == 3,
            "50 problems in " + std::to_string(stats.size()) + " tiers, max |sum - 1| = " + num(worst_sum, 3) +
                " (<= 1e-9), max deviation from counting oracle = " + num(worst_oracle, 3)};
}

// ---- 10 ------------------------------------------------------------------------

int cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    if (code != 0) std::cerr << "epcforge " << args.front() << " failed: " << err.str();
    return code;
}

bool run_pipeline(const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string corpus = (dir / "corpus.jsonl").string();
    const std::string run = (dir / "run").string();
    const std::string gens = (dir / "generations").string();
    const std::string pred = (dir / "predictor.etp").string();
    return cli({"corpus-gen", "--n", "60", "--seed", "11", "--out", corpus}) == 0 &&
           cli({"train", "--corpus", corpus, "--out-dir", run, "--epochs", "1", "--seed", "11"}) == 0 &&
           cli({"generate", "--corpus", corpus, "--checkpoint", run, "--k", "3", "--max-len", "40", "--seed", "11",
                "--out-dir", gens}) == 0 &&
           cli({"fit-predictor", "--corpus", corpus, "--out", pred}) == 0 &&
           cli({"filter", "--candidates", gens, "--predictor", pred, "--each"}) == 0 &&
           cli({"evaluate", "--corpus", corpus, "--generations", gens, "--out-dir", (dir / "report").string()}) == 0;
}

std::map<std::string, std::string> artifacts(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), root).string();
        if (rel.size() >= 10 && rel.ends_with(".meta.json")) continue;  // wall-clock sidecars
        std::ifstream in(e.path(), std::ios::binary);
        files[rel] = std::string(std::istreambuf_iterator<char>(in), {});
    }
    return files;
}

Outcome determinism() {
    const fs::path base = fs::temp_directory_path() / "epcforge_acceptance_pipeline";
    if (!run_pipeline(base / "a") || !run_pipeline(base / "b")) return {false, "pipeline command failed"};
    const auto a = artifacts(base / "a"), b = artifacts(base / "b");
    std::size_t same = 0;
    std::string differ;
    for (const auto& [name, bytes] : a) {
        const auto it = b.find(name);
        if (it != b.end() && it->second == bytes) ++same;
        else if (differ.empty()) differ = name;
    }
    const bool pass = a.size() == b.size() && same == a.size() && !a.empty();
    fs::remove_all(base);
    return {pass, std::to_string(same) + "/" + std::to_string(a.size()) +
                      " artifacts byte-identical across two runs (corpus-gen, train, generate, fit-predictor, "
                      "filter, evaluate)" + (differ.empty() ? "" : "; first difference: " + differ)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "gradient suite", gradient_suite},
        {2, "joint log-probability equals the stepwise sum", log_prob_consistency},
        {3, "expert-segment attention cost", flop_claim},
        {4, "memorisation run", memorisation},
        {5, "end-to-end efficiency gain", efficiency_gain},
        {6, "EGR spot value", egr_spot},
        {7, "runtime predictor utility", predictor_utility},
        {8, "transform invariants", transform_invariants},
        {9, "interval statistics", bin_statistics},
        {10, "pipeline determinism", determinism},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const Criterion& c : criteria) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.title << ": " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
