// SPDX-License-Identifier: Apache-2.0

#include "epcforge/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "epcforge/cli/run_config.hpp"
#include "epcforge/data/corpus.hpp"
#include "epcforge/eval/metrics.hpp"
#include "epcforge/minilang/parser.hpp"
#include "epcforge/model/decode.hpp"
#include "epcforge/model/grad_suite.hpp"
#include "epcforge/nn/grad_suite.hpp"
#include "epcforge/predictor/runtime.hpp"
#include "epcforge/train/checkpoint.hpp"
#include "epcforge/util/rng.hpp"

namespace epcforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad input or usage; maps to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Stopwatch {
public:
    Stopwatch() : wall_(std::chrono::system_clock::now()), start_(std::chrono::steady_clock::now()) {}

    json meta(const std::string& command) const {
        const std::time_t t = std::chrono::system_clock::to_time_t(wall_);
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::ostringstream iso;
        iso << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
        return json{{"command", command},
                    {"started_at", iso.str()},
                    {"elapsed_seconds", seconds()},
                    {"deterministic_env", determinism_forced()}};
    }
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::system_clock::time_point wall_;
    std::chrono::steady_clock::time_point start_;
};

void require_parent_dir(const fs::path& path) {
    const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
    if (!fs::is_directory(parent)) throw UsageError("output directory does not exist: " + parent.string());
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    require_parent_dir(path);
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
        if (!o) throw UsageError("cannot write " + path.string());
        o << text;
        if (!o.flush()) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("write failed: " + path.string());
        }
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_meta(const fs::path& path, const json& meta) { write_text_atomic(path, meta.dump(2) + "\n"); }

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw UsageError("missing " + what + " path");
    if (!fs::is_regular_file(path)) throw UsageError(what + " not found: " + path);
}

std::vector<data::EpcSample> open_corpus(const std::string& path) {
    require_file(path, "corpus");
    return data::load_corpus(path);
}

predictor::RidgeModel open_predictor(const std::string& path) {
    require_file(path, "predictor");
    try {
        return predictor::load_predictor(path);
    } catch (const std::runtime_error& e) {
        throw UsageError(e.what());
    }
}

std::vector<data::EpcSample> split_of(const std::vector<data::EpcSample>& corpus, data::Split split) {
    std::vector<data::EpcSample> out;
    for (const auto& s : corpus) {
        if (s.split == split) out.push_back(s);
    }
    return out;
}

std::string fixed(double x, int digits = 6) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(digits) << x;
    return o.str();
}

std::string loss_csv(const train::TrainState& st) {
    std::ostringstream o;
    o << "epoch,mean_loss,token_accuracy\n";
    o << std::setprecision(17);
    for (const auto& e : st.trace) o << e.epoch << ',' << e.mean_loss << ',' << e.token_accuracy << '\n';
    return o.str();
}

/// Layers the config file and the explicitly given flags over the defaults.
struct ConfigLayer {
    std::string config_path;
    std::optional<std::uint64_t> seed;

    RunConfig resolve() const {
        RunConfig rc;
        if (!config_path.empty()) rc = load_run_config(config_path);
        if (seed) {
            rc.seed = *seed;
            rc.train.seed = *seed;
        }
        if (determinism_forced()) rc.train.deterministic = true;
        return rc;
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run config; flags override its values");
        cmd->add_option("--seed", seed, "Global seed");
    }
};

// ---- corpus-gen ---------------------------------------------------------------

struct CorpusGenArgs {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string out;
    double test_fraction = 0.2;
};

int cmd_corpus_gen(const CorpusGenArgs& a, std::ostream& out) {
    const Stopwatch clock;
    require_parent_dir(a.out);
    data::CorpusOptions opt;
    opt.test_fraction = a.test_fraction;
    const auto corpus = data::generate_corpus(a.n, a.seed, opt);
    data::save_corpus(a.out, corpus);
    std::map<std::string, std::size_t> counts;
    for (const auto& s : corpus) {
        ++counts[std::string(data::to_string(s.difficulty))];
        ++counts["split_" + std::string(data::to_string(s.split))];
    }
    out << "samples: " << corpus.size() << '\n';
    for (const auto& [k, v] : counts) out << k << ": " << v << '\n';
    write_meta(a.out + ".meta.json", clock.meta("corpus-gen"));
    return kExitOk;
}

// ---- train ---------------------------------------------------------------------

struct TrainArgs {
    ConfigLayer layer;
    std::string corpus;
    std::string out_dir;
    std::string resume;
    std::string preset;
    std::optional<std::size_t> epochs, batch_size;
    std::optional<double> lr;
    std::size_t save_every = 1;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const Stopwatch clock;
    RunConfig rc = a.layer.resolve();
    if (!a.corpus.empty()) rc.corpus = a.corpus;
    if (!a.preset.empty()) rc.preset = a.preset;
    if (!a.out_dir.empty()) rc.checkpoint = a.out_dir;
    if (rc.checkpoint.empty()) throw UsageError("train: --out-dir is required");
    const auto corpus = open_corpus(rc.corpus);
    const auto train_split = split_of(corpus, data::Split::Train);
    if (train_split.empty()) throw UsageError("train: corpus has no training samples");
    fs::create_directories(rc.checkpoint);

    data::Vocabulary vocab;
    model::ECodeConfig mcfg;
    train::TrainConfig tcfg = rc.train;
    train::TrainState state;
    std::optional<model::ECodeModel> model;
    if (!a.resume.empty()) {
        require_file(a.resume, "checkpoint");
        train::Checkpoint ck = train::load_checkpoint(a.resume);
        vocab = ck.vocab;
        mcfg = ck.model_config;
        tcfg = ck.train_config;
        state = std::move(ck.state);
        model.emplace(mcfg, std::move(ck.params));
        out << "resumed from " << a.resume << " after epoch " << state.epochs_done << '\n';
    } else {
        vocab = data::Vocabulary::build(train_split);
        mcfg = rc.model_config(vocab.size());
        model.emplace(model::ECodeModel::create(mcfg, derive_seed(rc.seed, "init")));
    }
    if (a.epochs) tcfg.epochs = *a.epochs;
    if (a.batch_size) tcfg.batch_size = *a.batch_size;
    if (a.lr) tcfg.learning_rate = *a.lr;
    if (determinism_forced()) tcfg.deterministic = true;
    tcfg.validate();

    const auto examples = train::make_examples(train_split, vocab, mcfg);
    out << "training on " << examples.size() << " samples, vocab " << vocab.size() << ", "
        << model->params().parameter_count() << " parameters\n";

    const fs::path dir = rc.checkpoint;
    json epoch_seconds = json::array();
    Stopwatch epoch_clock;
    train::fit(*model, examples, tcfg, state, [&](const model::ECodeModel& m, const train::TrainState& st) {
        const auto& e = st.trace.back();
        out << "epoch " << e.epoch << " loss " << fixed(e.mean_loss) << " token_accuracy " << fixed(e.token_accuracy)
            << std::endl;
        const train::Checkpoint ck{mcfg, tcfg, vocab, m.params(), st};
        train::save_checkpoint(dir / "last.ckpt", ck);
        if (a.save_every > 0 && e.epoch % a.save_every == 0) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch-%03zu.ckpt", e.epoch);
            train::save_checkpoint(dir / name, ck);
        }
        write_text_atomic(dir / "loss.csv", loss_csv(st));
        epoch_seconds.push_back(epoch_clock.seconds());
        epoch_clock = Stopwatch();
    });
    if (state.trace.empty() || !fs::exists(dir / "last.ckpt")) {
        train::save_checkpoint(dir / "last.ckpt", {mcfg, tcfg, vocab, model->params(), state});
        write_text_atomic(dir / "loss.csv", loss_csv(state));
    }
    json meta = clock.meta("train");
    meta["epoch_seconds"] = epoch_seconds;
    write_meta(dir / "train.meta.json", meta);
    return kExitOk;
}

// ---- generate ------------------------------------------------------------------

struct GenerateArgs {
    ConfigLayer layer;
    std::string corpus, checkpoint, out_dir;
    std::vector<std::size_t> samples;
    std::string split = "test";
    std::size_t limit = 0;
    std::optional<std::size_t> k, top_k, max_len;
    std::optional<double> temperature, top_p;
    bool greedy = false;
    bool allow_over_cap = false;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    const Stopwatch clock;
    RunConfig rc = a.layer.resolve();
    if (!a.corpus.empty()) rc.corpus = a.corpus;
    if (!a.checkpoint.empty()) rc.checkpoint = a.checkpoint;
    if (a.k) rc.k = *a.k;
    if (a.temperature) rc.decode.temperature = *a.temperature;
    if (a.top_k) rc.decode.top_k = *a.top_k;
    if (a.top_p) rc.decode.top_p = *a.top_p;
    if (a.max_len) rc.decode.max_len = *a.max_len;
    if (a.greedy) rc.decode.greedy = true;
    rc.decode.validate();
    if (rc.k == 0) throw UsageError("generate: k must be at least 1");
    if (rc.k > model::kMaxCandidates && !a.allow_over_cap) {
        throw UsageError("generate: k=" + std::to_string(rc.k) + " exceeds the cap of " +
                         std::to_string(model::kMaxCandidates) + " (pass --allow-over-cap to override)");
    }
    if (a.out_dir.empty()) throw UsageError("generate: --out-dir is required");

    const auto corpus = open_corpus(rc.corpus);
    fs::path ck_path = rc.checkpoint;
    if (fs::is_directory(ck_path)) ck_path /= "last.ckpt";
    require_file(ck_path.string(), "checkpoint");
    train::Checkpoint ck = train::load_checkpoint(ck_path);
    model::ECodeModel model(ck.model_config, std::move(ck.params));

    std::vector<std::size_t> ids = a.samples;
    if (ids.empty()) {
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            if (a.split == "all" || data::to_string(corpus[i].split) == a.split) ids.push_back(i);
        }
        if (a.split != "all" && a.split != "train" && a.split != "test") throw UsageError("generate: unknown split " + a.split);
    }
    if (a.limit > 0 && ids.size() > a.limit) ids.resize(a.limit);
    for (std::size_t id : ids) {
        if (id >= corpus.size()) throw UsageError("generate: sample " + std::to_string(id) + " out of range");
    }
    fs::create_directories(a.out_dir);

    const std::uint64_t base = derive_seed(rc.seed, "generate");
    for (std::size_t id : ids) {
        const std::uint64_t seed = derive_seed(base, id);
        const auto inputs = model::make_inputs(corpus[id], ck.vocab, ck.model_config);
        const auto gens = model::sample_k_candidates(model, inputs, rc.k, rc.decode, seed, std::max(rc.k, model::kMaxCandidates));
        const fs::path dir = fs::path(a.out_dir) / sample_dir_name(id);
        fs::create_directories(dir);
        json log{{"sample", id}, {"k", rc.k}, {"seed", seed}, {"decode", to_json(rc.decode)}, {"candidates", json::array()}};
        for (std::size_t j = 0; j < gens.size(); ++j) {
            const std::string name = "candidate-" + std::to_string(j) + ".ml";
            write_text_atomic(dir / name, data::detokenize_code(gens[j].tokens, ck.vocab) + "\n");
            log["candidates"].push_back(json{{"file", name},
                                             {"seed", derive_seed(seed, j)},
                                             {"tokens", gens[j].tokens.size()},
                                             {"truncated", gens[j].truncated}});
        }
        write_text_atomic(dir / "candidates.json", log.dump(2) + "\n");
        out << sample_dir_name(id) << ": " << gens.size() << " candidates\n";
    }
    json meta = clock.meta("generate");
    meta["samples"] = ids.size();
    write_meta(fs::path(a.out_dir) / "generate.meta.json", meta);
    return kExitOk;
}

// ---- filter --------------------------------------------------------------------

struct FilterArgs {
    std::string candidates, predictor;
    bool each = false;
};

int filter_dir(const fs::path& dir, const predictor::RidgeModel& ridge, std::ostream& out) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".ml") files.push_back(e.path());
    }
    if (files.empty()) throw UsageError("filter: no .ml candidates in " + dir.string());
    std::sort(files.begin(), files.end(), [](const fs::path& x, const fs::path& y) {
        return x.filename().string() < y.filename().string();
    });
    std::vector<double> preds;
    json entries = json::array();
    for (const auto& f : files) {
        preds.push_back(predictor::predict_source(ridge, read_text(f)));
        entries.push_back(json{{"file", f.filename().string()}, {"predicted_cost", preds.back()}});
    }
    const std::size_t pick = eval::efficiency_filter(preds);
    for (std::size_t i = 0; i < files.size(); ++i) {
        out << dir.filename().string() << '/' << files[i].filename().string() << ' ' << fixed(preds[i], 3)
            << (i == pick ? " selected" : "") << '\n';
    }
    write_text_atomic(dir / "selection.json",
                      json{{"selected", files[pick].filename().string()}, {"predictions", entries}}.dump(2) + "\n");
    return kExitOk;
}

int cmd_filter(const FilterArgs& a, std::ostream& out) {
    if (!fs::is_directory(a.candidates)) throw UsageError("filter: not a directory: " + a.candidates);
    const predictor::RidgeModel ridge = open_predictor(a.predictor);
    if (!a.each) return filter_dir(a.candidates, ridge, out);
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(a.candidates)) {
        if (e.is_directory()) dirs.push_back(e.path());
    }
    if (dirs.empty()) throw UsageError("filter: no candidate directories in " + a.candidates);
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) filter_dir(d, ridge, out);
    return kExitOk;
}

// ---- fit-predictor / predict-time ------------------------------------------------

struct FitPredictorArgs {
    std::string corpus, out, dataset_out;
    double lambda = predictor::kDefaultLambda;
    double test_fraction = 0.1;
    std::uint64_t seed = 0;
};

int cmd_fit_predictor(const FitPredictorArgs& a, std::ostream& out) {
    const Stopwatch clock;
    require_parent_dir(a.out);
    const auto corpus = open_corpus(a.corpus);
    const auto train_split = split_of(corpus, data::Split::Train);
    if (train_split.empty()) throw UsageError("fit-predictor: corpus has no training samples");
    std::vector<predictor::RuntimeRecord> records;
    for (predictor::Variant v : predictor::kAllVariants) {
        const auto r = predictor::build_variant_dataset(train_split, v, a.seed);
        records.insert(records.end(), r.begin(), r.end());
    }
    if (!a.dataset_out.empty()) {
        require_parent_dir(a.dataset_out);
        predictor::save_runtime_dataset(a.dataset_out, records);
    }
    const auto split = predictor::time_split(records, a.test_fraction);
    const predictor::RidgeModel held_out = predictor::fit_ridge(split.train, a.lambda);
    const predictor::PredictorEval ev = predictor::evaluate_predictor(held_out, split.test);
    out << "records: " << records.size() << " (train " << split.train.size() << ", test " << split.test.size() << ")\n"
        << "test_mae: " << fixed(ev.mae, 3) << '\n'
        << "mean_baseline_mae: " << fixed(predictor::mean_baseline_mae(split.train, split.test), 3) << '\n';
    for (const auto& [v, mae] : ev.mae_by_variant) out << "test_mae_" << predictor::to_string(v) << ": " << fixed(mae, 3) << '\n';
    // the shipped model sees every record
    predictor::save_predictor(a.out, predictor::fit_ridge(records, a.lambda));
    write_meta(a.out + ".meta.json", clock.meta("fit-predictor"));
    return kExitOk;
}

struct PredictArgs {
    std::string predictor, code;
};

int cmd_predict_time(const PredictArgs& a, std::ostream& out) {
    const predictor::RidgeModel ridge = open_predictor(a.predictor);
    std::string source;
    if (a.code == "-") {
        source.assign(std::istreambuf_iterator<char>(std::cin), {});
    } else {
        require_file(a.code, "code");
        source = read_text(a.code);
    }
    out << fixed(predictor::predict_source(ridge, source), 3) << '\n';
    return kExitOk;
}

// ---- evaluate / stats --------------------------------------------------------------

struct EvaluateArgs {
    std::string corpus, generations, predictor, out_dir;
    std::string pick = "filtered";
    std::string policy = "strict";
    bool references = false;
};

std::optional<std::size_t> parse_sample_dir(const std::string& name) {
    constexpr std::string_view prefix = "sample-";
    if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) return std::nullopt;
    std::size_t v = 0;
    for (char c : name.substr(prefix.size())) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    return v;
}

std::string picked_program(const fs::path& dir, const std::string& pick) {
    if (pick == "first") return read_text(dir / "candidate-0.ml");
    if (pick != "filtered") throw UsageError("evaluate: --pick must be 'filtered' or 'first'");
    const fs::path sel = dir / "selection.json";
    if (!fs::exists(sel)) throw UsageError("evaluate: " + dir.string() + " has no selection.json; run filter first");
    const json j = json::parse(read_text(sel));
    return read_text(dir / j.at("selected").get<std::string>());
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const Stopwatch clock;
    const auto corpus = open_corpus(a.corpus);
    const eval::TimingPolicy policy = eval::parse_timing_policy(a.policy);
    std::optional<predictor::RidgeModel> ridge;
    if (!a.predictor.empty()) {
        ridge = open_predictor(a.predictor);
    }
    std::vector<std::size_t> ids;
    std::vector<std::string> programs;
    if (a.references) {
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            if (corpus[i].split != data::Split::Test) continue;
            ids.push_back(i);
            programs.push_back(corpus[i].efficient_codes.at(0));
        }
    } else {
        if (!fs::is_directory(a.generations)) throw UsageError("evaluate: not a directory: " + a.generations);
        std::vector<std::pair<std::size_t, fs::path>> dirs;
        for (const auto& e : fs::directory_iterator(a.generations)) {
            if (!e.is_directory()) continue;
            if (const auto id = parse_sample_dir(e.path().filename().string())) dirs.emplace_back(*id, e.path());
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& [id, dir] : dirs) {
            if (id >= corpus.size()) throw UsageError("evaluate: " + dir.string() + " names a sample outside the corpus");
            ids.push_back(id);
            programs.push_back(picked_program(dir, a.pick));
        }
    }
    if (ids.empty()) throw UsageError("evaluate: nothing to evaluate");
    std::vector<data::EpcSample> samples;
    for (std::size_t id : ids) samples.push_back(corpus[id]);
    eval::EgrReport rep = eval::evaluate_submissions(samples, programs, policy, ridge ? &*ridge : nullptr);
    for (std::size_t i = 0; i < rep.rows.size(); ++i) rep.rows[i].sample = ids[i];
    const std::string summary = "policy: " + std::string(eval::to_string(policy)) + "\n" + eval::egr_summary(rep);
    out << summary;
    if (!a.out_dir.empty()) {
        fs::create_directories(a.out_dir);
        write_text_atomic(fs::path(a.out_dir) / "egr.csv", eval::egr_report_csv(rep));
        write_text_atomic(fs::path(a.out_dir) / "summary.txt", summary);
        write_meta(fs::path(a.out_dir) / "evaluate.meta.json", clock.meta("evaluate"));
    }
    return kExitOk;
}

struct StatsArgs {
    std::string corpus, out;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
    const auto corpus = open_corpus(a.corpus);
    const std::string csv = eval::bin_stats_csv(eval::bin_ratios(eval::corpus_times(corpus)));
    if (a.out.empty()) out << csv;
    else write_text_atomic(a.out, csv);
    return kExitOk;
}

// ---- grad-check --------------------------------------------------------------------

struct GradCheckArgs {
    std::size_t seeds = 20;
    std::size_t composite_seeds = 20;
};

int cmd_grad_check(const GradCheckArgs& a, std::ostream& out) {
    std::map<std::string, double> worst;
    std::size_t checks = 0, failures = 0;
    auto record = [&](const nn::NamedCheck& c, double tol, std::uint64_t seed) {
        ++checks;
        worst[c.name] = std::max(worst[c.name], c.max_rel_error);
        if (!(c.max_rel_error < tol)) {
            ++failures;
            out << "FAIL " << c.name << " seed " << seed << " rel_error " << c.max_rel_error << '\n';
        }
    };
    for (std::uint64_t s = 0; s < a.seeds; ++s) {
        for (const auto& c : nn::primitive_grad_suite(s)) record(c, nn::kPrimitiveTolerance, s);
    }
    for (std::uint64_t s = 0; s < a.composite_seeds; ++s) {
        for (const auto& c : model::ecode_grad_check(s)) record(c, model::kCompositeTolerance, s);
    }
    out << std::scientific << std::setprecision(2);
    for (const auto& [name, err] : worst) out << name << " worst " << err << '\n';
    out << checks << " checks, " << failures << " failed\n";
    return failures == 0 ? kExitOk : kExitInternal;
}

}  // namespace

std::string sample_dir_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample-%05zu", index);
    return buf;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"epcforge: train and evaluate efficient-code generators on a synthetic corpus"};
    app.name("epcforge");
    app.require_subcommand(1, 1);

    CorpusGenArgs cg;
    auto* corpus_gen = app.add_subcommand("corpus-gen", "Generate a synthetic corpus");
    corpus_gen->add_option("--n", cg.n, "Number of samples")->required();
    corpus_gen->add_option("--seed", cg.seed, "Seed");
    corpus_gen->add_option("--out", cg.out, "Output corpus file")->required();
    corpus_gen->add_option("--test-fraction", cg.test_fraction, "Fraction assigned to the test split");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a model on the corpus training split");
    tr.layer.attach(train_cmd);
    train_cmd->add_option("--corpus", tr.corpus, "Corpus file");
    train_cmd->add_option("--out-dir", tr.out_dir, "Directory for checkpoints, loss.csv and metadata");
    train_cmd->add_option("--resume", tr.resume, "Continue from this checkpoint");
    train_cmd->add_option("--preset", tr.preset, "Model preset: tiny, standard or eight-head");
    train_cmd->add_option("--epochs", tr.epochs, "Total epochs");
    train_cmd->add_option("--batch-size", tr.batch_size, "Batch size");
    train_cmd->add_option("--lr", tr.lr, "Peak learning rate");
    train_cmd->add_option("--save-every", tr.save_every, "Keep epoch-N.ckpt every N epochs (0: only last.ckpt)");

    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "Sample candidate programs from a checkpoint");
    gen.layer.attach(gen_cmd);
    gen_cmd->add_option("--corpus", gen.corpus, "Corpus file");
    gen_cmd->add_option("--checkpoint", gen.checkpoint, "Checkpoint file or training directory");
    gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory");
    gen_cmd->add_option("--sample", gen.samples, "Corpus sample index (repeatable)");
    gen_cmd->add_option("--split", gen.split, "Split to generate for when no --sample is given: test, train or all");
    gen_cmd->add_option("--limit", gen.limit, "Generate for at most this many samples");
    gen_cmd->add_option("--k", gen.k, "Candidates per sample");
    gen_cmd->add_option("--temperature", gen.temperature, "Sampling temperature");
    gen_cmd->add_option("--top-k", gen.top_k, "Top-k cutoff");
    gen_cmd->add_option("--top-p", gen.top_p, "Nucleus mass");
    gen_cmd->add_option("--max-len", gen.max_len, "Maximum generated tokens (0: decoder cap)");
    gen_cmd->add_flag("--greedy", gen.greedy, "Greedy decoding");
    gen_cmd->add_flag("--allow-over-cap", gen.allow_over_cap, "Allow more than five candidates");

    FilterArgs fl;
    auto* filter_cmd = app.add_subcommand("filter", "Pick the candidate with the lowest predicted cost");
    filter_cmd->add_option("--candidates", fl.candidates, "Directory of .ml candidates")->required();
    filter_cmd->add_option("--predictor", fl.predictor, "Runtime predictor file")->required();
    filter_cmd->add_flag("--each", fl.each, "Treat every subdirectory as one candidate set");

    FitPredictorArgs fp;
    auto* fit_cmd = app.add_subcommand("fit-predictor", "Fit the ridge runtime predictor on the training split");
    fit_cmd->add_option("--corpus", fp.corpus, "Corpus file")->required();
    fit_cmd->add_option("--out", fp.out, "Predictor output file")->required();
    fit_cmd->add_option("--dataset-out", fp.dataset_out, "Also write the runtime dataset here");
    fit_cmd->add_option("--lambda", fp.lambda, "Ridge penalty");
    fit_cmd->add_option("--test-fraction", fp.test_fraction, "Held-out fraction for the reported MAE");
    fit_cmd->add_option("--seed", fp.seed, "Seed for token deletion");

    PredictArgs pt;
    auto* predict_cmd = app.add_subcommand("predict-time", "Estimate the cost of a program");
    predict_cmd->add_option("--predictor", pt.predictor, "Runtime predictor file")->required();
    predict_cmd->add_option("--code", pt.code, "Program file, or - for stdin")->required();

    EvaluateArgs ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score generated programs against the corpus");
    eval_cmd->add_option("--corpus", ev.corpus, "Corpus file")->required();
    eval_cmd->add_option("--generations", ev.generations, "Directory written by generate");
    eval_cmd->add_option("--pick", ev.pick, "Program per sample: filtered (selection.json) or first");
    eval_cmd->add_option("--policy", ev.policy, "Timing policy: strict, measured or predicted");
    eval_cmd->add_option("--predictor", ev.predictor, "Runtime predictor file");
    eval_cmd->add_option("--out-dir", ev.out_dir, "Write egr.csv and summary.txt here");
    eval_cmd->add_flag("--references", ev.references, "Score the reference efficient programs of the test split");

    StatsArgs st;
    auto* stats_cmd = app.add_subcommand("stats", "Running-time interval ratios per difficulty");
    stats_cmd->add_option("--corpus", st.corpus, "Corpus file")->required();
    stats_cmd->add_option("--out", st.out, "CSV output file (default: stdout)");

    GradCheckArgs gc;
    auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference gradient checks");
    grad_cmd->add_option("--seeds", gc.seeds, "Seeds for the primitive checks");
    grad_cmd->add_option("--composite-seeds", gc.composite_seeds, "Seeds for the end-to-end model check");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*corpus_gen) return cmd_corpus_gen(cg, out);
        if (*train_cmd) return cmd_train(tr, out);
        if (*gen_cmd) return cmd_generate(gen, out);
        if (*filter_cmd) return cmd_filter(fl, out);
        if (*fit_cmd) return cmd_fit_predictor(fp, out);
        if (*predict_cmd) return cmd_predict_time(pt, out);
        if (*eval_cmd) return cmd_evaluate(ev, out);
        if (*stats_cmd) return cmd_stats(st, out);
        if (*grad_cmd) return cmd_grad_check(gc, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const data::CorpusError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const train::CheckpointError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const json::exception& e) {
        err << "error: malformed JSON: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitUsage;
}

}  // namespace epcforge::cli
