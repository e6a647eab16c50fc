// SPDX-License-Identifier: Apache-2.0
//
// Template families for the synthetic corpus. Each family pairs a slow
// program with faster equivalents; expected outputs come from the C++
// reference computations below, never from running the programs.

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>

#include "epcforge/data/corpus.hpp"
#include "epcforge/minilang/interpreter.hpp"
#include "epcforge/minilang/parser.hpp"
#include "epcforge/minilang/transforms.hpp"
#include "epcforge/util/rng.hpp"

namespace epcforge::data {

namespace {

using Names = std::map<std::string, std::string>;

const std::vector<std::string> kVarPool = {
    "n",   "m",   "k",    "x",   "y",    "z",     "s",    "t",    "a",     "b",    "c",
    "d",   "p",   "q",    "r",   "u",    "v",     "w",    "total", "res",  "ans",  "cnt",
    "cur", "val", "idx",  "num", "arr",  "lst",   "vals", "nums",  "data", "seen", "tmp",
    "count", "found", "hit", "lo", "hi", "left", "right", "i", "j", "e", "h"};

const std::vector<std::string> kFuncPool = {"f", "g", "go", "calc", "solve", "rec", "fn", "walk", "step"};

// Draws distinct names for the given roles.
Names draw_names(Rng& rng, const std::vector<std::string>& roles, const std::vector<std::string>& pool) {
    std::vector<std::string> avail = pool;
    Names out;
    for (const std::string& role : roles) {
        const std::size_t k = rng.index(avail.size());
        out[role] = avail[k];
        avail.erase(avail.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return out;
}

// Replaces every {key} with its value.
std::string fill(std::string text, const Names& names) {
    for (const auto& [key, value] : names) {
        const std::string pattern = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = text.find(pattern, pos)) != std::string::npos) {
            text.replace(pos, pattern.size(), value);
            pos += value.size();
        }
    }
    if (text.find('{') != std::string::npos && text.find("{}") == std::string::npos) {
        throw std::logic_error("unfilled placeholder in template: " + text);
    }
    return text;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& options) {
    return options[rng.index(options.size())];
}

std::string canonical_code(const std::string& source) {
    return minilang::to_source(minilang::parse_source(source));
}

std::string uniform_code(const std::string& source) {
    return minilang::to_source(minilang::rename_uniform(minilang::parse_source(source)));
}

std::string join_ints(const std::vector<std::int64_t>& xs, const char* sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += std::to_string(xs[i]);
    }
    return out;
}

std::vector<std::int64_t> random_list(Rng& rng, std::size_t n, std::int64_t lo, std::int64_t hi) {
    std::vector<std::int64_t> out(n);
    for (auto& x : out) x = rng.range(lo, hi);
    return out;
}

std::size_t test_count(Rng& rng) { return static_cast<std::size_t>(rng.range(3, 5)); }

struct Draft {
    std::string tags;
    std::string description;
    std::string input_format;
    std::string output_format;
    std::vector<IoExample> tests;
    std::string inefficient;
    std::vector<std::string> efficient;
};

// --- easy ------------------------------------------------------------------

Draft loop_sum(Rng& rng) {
    const std::int64_t c = rng.range(2, 9);
    Names v = draw_names(rng, {"n", "s", "i"}, kVarPool);
    v["c"] = std::to_string(c);
    Draft d;
    d.inefficient = fill(pick<std::string>(rng, {
        "{n} = read()\n{s} = 0\nfor {i} in range(0, {n}):\n    {s} = {s} + {c} * {i}\nprint({s})",
        "{n} = read()\n{s} = 0\n{i} = 0\nwhile {i} < {n}:\n    {s} = {s} + {c} * {i}\n    {i} = {i} + 1\nprint({s})",
    }), v);
    d.efficient = {fill("n = read()\nprint({c} * n * (n - 1) / 2)", v),
                   fill("n = read()\nh = n * (n - 1) / 2\nprint({c} * h)", v)};
    d.tags = pick<std::string>(rng, {"math", "implementation , math", "math , brute force"});
    d.description = fill(pick<std::string>(rng, {
        "Read an integer n and print the sum of {c} * i over all i from 0 to n - 1 .",
        "Given n , compute {c} * 0 + {c} * 1 + ... + {c} * ( n - 1 ) and output it .",
        "For a number n , output the total of {c} times every integer i from 0 up to n - 1 .",
    }), v);
    d.input_format = "The only line contains one integer n ( 3 to 60 ) .";
    d.output_format = pick<std::string>(rng, {"Print the sum .", "Output one integer , the total ."});
    const std::size_t tests = test_count(rng);
    for (std::size_t t = 0; t < tests; ++t) {
        const std::int64_t n = rng.range(3, 60);
        d.tests.push_back({std::to_string(n), std::to_string(c * n * (n - 1) / 2)});
    }
    return d;
}

Draft count_multiples(Rng& rng) {
    const std::int64_t k = rng.range(2, 9);
    Names v = draw_names(rng, {"n", "c", "i"}, kVarPool);
    v["k"] = std::to_string(k);
    Draft d;
    d.inefficient = fill(pick<std::string>(rng, {
        "{n} = read()\n{c} = 0\nfor {i} in range(0, {n}):\n    if {i} % {k} == 0:\n        {c} = {c} + 1\nprint({c})",
        "{n} = read()\n{c} = 0\n{i} = 0\nwhile {i} < {n}:\n    if {i} % {k} == 0:\n        {c} = {c} + 1\n    {i} = {i} + 1\nprint({c})",
    }), v);
    d.efficient = {fill("n = read()\nprint((n + {k} - 1) / {k})", v)};
    d.tags = pick<std::string>(rng, {"math", "number theory", "math , number theory"});
    d.description = fill(pick<std::string>(rng, {
        "Count the integers i from 0 to n - 1 that are divisible by {k} .",
        "How many numbers among 0 , 1 , ... , n - 1 are multiples of {k} ? Print the count .",
    }), v);
    d.input_format = "A single integer n ( 2 to 80 ) .";
    d.output_format = "Print the number of multiples .";
    const std::size_t tests = test_count(rng);
    for (std::size_t t = 0; t < tests; ++t) {
        const std::int64_t n = rng.range(2, 80);
        d.tests.push_back({std::to_string(n), std::to_string((n + k - 1) / k)});
    }
    return d;
}

// --- intermediate ------------------------------------------------------------

Draft membership(Rng& rng) {
    Names v = draw_names(rng, {"n", "xs", "i", "m", "j", "q", "found"}, kVarPool);
    Draft d;
    d.inefficient = fill(pick<std::string>(rng, {
        "{n} = read()\n{xs} = []\nfor {i} in range(0, {n}):\n    append({xs}, read())\n{m} = read()\n"
        "for {j} in range(0, {m}):\n    {q} = read()\n    {found} = 0\n    for {i} in range(0, {n}):\n"
        "        if {xs}[{i}] == {q}:\n            {found} = 1\n    print({found})",
        "{n} = read()\n{xs} = []\nfor {i} in range(0, {n}):\n    append({xs}, read())\n{m} = read()\n"
        "for {j} in range(0, {m}):\n    {q} = read()\n    {found} = 0\n    {i} = 0\n"
        "    while {i} < {n}:\n        if {xs}[{i}] == {q}:\n            {found} = 1\n        {i} = {i} + 1\n"
        "    print({found})",
    }), v);
    d.efficient = {
        "n = read()\nseen = {}\nfor i in range(0, n):\n    seen[read()] = 1\nm = read()\n"
        "for j in range(0, m):\n    if has(seen, read()):\n        print(1)\n    else:\n        print(0)"};
    d.tags = pick<std::string>(rng, {"data structures", "hashing , data structures", "searching"});
    d.description = pick<std::string>(rng, {
        "You are given a list of n numbers and m queries . For each query value print 1 if it occurs in the list , otherwise print 0 .",
        "For every query , decide whether the value appears in the given list . Answer 1 for yes and 0 for no .",
    });
    d.input_format = "n , then n integers , then m , then m query integers .";
    d.output_format = "m lines , each 1 or 0 .";
    const std::size_t tests = test_count(rng);
    for (std::size_t t = 0; t < tests; ++t) {
        const std::size_t n = static_cast<std::size_t>(rng.range(4, 9));
        const std::size_t m = static_cast<std::size_t>(rng.range(2, 4));
        const auto xs = random_list(rng, n, 1, 30);
        const auto qs = random_list(rng, m, 1, 30);
        std::vector<std::int64_t> answers;
        for (std::int64_t q : qs) answers.push_back(std::find(xs.begin(), xs.end(), q) != xs.end());
        d.tests.push_back({std::to_string(n) + "\n" + join_ints(xs) + "\n" + std::to_string(m) + "\n" + join_ints(qs),
                           join_ints(answers, "\n")});
    }
    return d;
}

Draft range_sums(Rng& rng) {
    Names v = draw_names(rng, {"n", "a", "i", "m", "j", "l", "r", "s"}, kVarPool);
    Draft d;
    d.inefficient = fill(
        "{n} = read()\n{a} = []\nfor {i} in range(0, {n}):\n    append({a}, read())\n{m} = read()\n"
        "for {j} in range(0, {m}):\n    {l} = read()\n    {r} = read()\n    {s} = 0\n"
        "    for {i} in range({l}, {r}):\n        {s} = {s} + {a}[{i}]\n    print({s})",
        v);
    d.efficient = {
        "n = read()\np = [0]\nfor i in range(0, n):\n    append(p, p[i] + read())\nm = read()\n"
        "for j in range(0, m):\n    l = read()\n    r = read()\n    print(p[r] - p[l])"};
    d.tags = pick<std::string>(rng, {"prefix sums", "implementation , prefix sums", "data structures"});
    d.description = pick<std::string>(rng, {
        "Given an array of n numbers , answer m queries . Each query l r asks for the sum of elements with index from l to r - 1 .",
        "Answer m range sum queries over an array . Query l r wants a [ l ] + ... + a [ r - 1 ] .",
    });
    d.input_format = "n , then n integers , then m , then m pairs l r .";
    d.output_format = "For each query print its sum on its own line .";
    const std::size_t tests = test_count(rng);
    for (std::size_t t = 0; t < tests; ++t) {
        const std::int64_t n = rng.range(5, 9);
        const std::int64_t m = rng.range(2, 4);
        const auto xs = random_list(rng, static_cast<std::size_t>(n), 1, 20);
        std::string input = std::to_string(n) + "\n" + join_ints(xs) + "\n" + std::to_string(m);
        std::vector<std::int64_t> sums;
        for (std::int64_t q = 0; q < m; ++q) {
            const std::int64_t l = rng.range(0, 1);
            const std::int64_t r = rng.range(n - 1, n);
            std::int64_t s = 0;
            for (std::int64_t i = l; i < r; ++i) s += xs[static_cast<std::size_t>(i)];
            sums.push_back(s);
            input += "\n" + std::to_string(l) + " " + std::to_string(r);
        }
        d.tests.push_back({input, join_ints(sums, "\n")});
    }
    return d;
}

// --- hard --------------------------------------------------------------------

Draft fibonacci(Rng& rng) {
    const std::int64_t c = rng.range(1, 5);
    Names v = draw_names(rng, {"x", "n"}, kVarPool);
    const Names fv = draw_names(rng, {"f"}, kFuncPool);
    v.insert(fv.begin(), fv.end());
    v["c"] = std::to_string(c);
    Draft d;
    d.inefficient = fill(pick<std::string>(rng, {
        "def {f}({x}):\n    if {x} < 2:\n        return {x} * {c}\n    return {f}({x} - 1) + {f}({x} - 2)\n"
        "{n} = read()\nprint({f}({n}))",
        "def {f}({x}):\n    if {x} == 0:\n        return 0\n    if {x} == 1:\n        return {c}\n"
        "    return {f}({x} - 1) + {f}({x} - 2)\n{n} = read()\nprint({f}({n}))",
    }), v);
    d.efficient = {fill("n = read()\na = 0\nb = {c}\nfor i in range(0, n):\n    t = a + b\n    a = b\n    b = t\nprint(a)", v)};
    d.tags = pick<std::string>(rng, {"dp", "recursion , dp", "math , dp"});
    d.description = fill(pick<std::string>(rng, {
        "The sequence starts with F ( 0 ) = 0 and F ( 1 ) = {c} , and F ( x ) = F ( x - 1 ) + F ( x - 2 ) . Print F ( n ) .",
        "Compute the n - th term of a Fibonacci - like sequence whose first two terms are 0 and {c} .",
    }), v);
    d.input_format = "One integer n ( 5 to 15 ) .";
    d.output_format = "Print F ( n ) .";
    const std::size_t tests = test_count(rng);
    for (std::size_t t = 0; t < tests; ++t) {
        const std::int64_t n = rng.range(5, 15);
        std::int64_t a = 0, b = c;
        for (std::int64_t i = 0; i < n; ++i) {
            const std::int64_t next = a + b;
            a = b;
            b = next;
        }
        d.tests.push_back({std::to_string(n), std::to_string(a)});
    }
    return d;
}

Draft recursive_sum(Rng& rng) {
    const std::int64_t c = rng.range(2, 9);
    Names v = draw_names(rng, {"x", "n"}, kVarPool);
    const Names fv = draw_names(rng, {"f"}, kFuncPool);
    v.insert(fv.begin(), fv.end());
    v["c"] = std::to_string(c);
    Draft d;
    d.inefficient = fill(pick<std::string>(rng, {
        "def {f}({x}):\n    if {x} == 0:\n        return 0\n    return {f}({x} - 1) + {c} * {x}\n{n} = read()\nprint({f}({n}))",
        "def {f}({x}):\n    if {x} < 1:\n        return 0\n    return {c} * {x} + {f}({x} - 1)\n{n} = read()\nprint({f}({n}))",
    }), v);
    d.efficient = {fill("n = read()\ns = 0\nfor i in range(1, n + 1):\n    s = s + {c} * i\nprint(s)", v),
                   fill("n = read()\nprint({c} * n * (n + 1) / 2)", v)};
    d.tags = pick<std::string>(rng, {"recursion", "math , recursion", "recursion , implementation"});
    d.description = fill(pick<std::string>(rng, {
        "Let G ( 0 ) = 0 and G ( x ) = G ( x - 1 ) + {c} * x . Print G ( n ) .",
        "Accumulate {c} * x for every x from 1 to n and print the result .",
    }), v);
    d.input_format = "A single integer n ( 3 to 60 ) .";
    d.output_format = "Print one integer .";
    const std::size_t tests = test_count(rng);
    for (std::size_t t = 0; t < tests; ++t) {
        const std::int64_t n = rng.range(3, 60);
        d.tests.push_back({std::to_string(n), std::to_string(c * n * (n + 1) / 2)});
    }
    return d;
}

Draft pair_count(Rng& rng) {
    Names v = draw_names(rng, {"n", "t", "a", "i", "j", "cnt"}, kVarPool);
    Draft d;
    d.inefficient = fill(
        "{n} = read()\n{t} = read()\n{a} = []\nfor {i} in range(0, {n}):\n    append({a}, read())\n{cnt} = 0\n"
        "for {i} in range(0, {n}):\n    for {j} in range({i} + 1, {n}):\n"
        "        if {a}[{i}] + {a}[{j}] == {t}:\n            {cnt} = {cnt} + 1\nprint({cnt})",
        v);
    d.efficient = {
        "n = read()\nt = read()\nseen = {}\ncnt = 0\nfor i in range(0, n):\n    x = read()\n"
        "    if has(seen, t - x):\n        cnt = cnt + seen[t - x]\n    if has(seen, x):\n"
        "        seen[x] = seen[x] + 1\n    else:\n        seen[x] = 1\nprint(cnt)"};
    d.tags = pick<std::string>(rng, {"hashing", "two pointers , hashing", "brute force , hashing"});
    d.description = pick<std::string>(rng, {
        "Count pairs of positions i < j such that a [ i ] + a [ j ] equals t .",
        "Given n numbers and a target t , how many unordered pairs of different positions sum to t ?",
    });
    d.input_format = "n and t , then n integers .";
    d.output_format = "Print the number of pairs .";
    const std::size_t tests = test_count(rng);
    for (std::size_t t = 0; t < tests; ++t) {
        const std::int64_t n = rng.range(8, 12);
        const std::int64_t target = rng.range(4, 16);
        const auto xs = random_list(rng, static_cast<std::size_t>(n), 1, 12);
        std::int64_t pairs = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            for (std::size_t j = i + 1; j < xs.size(); ++j) pairs += xs[i] + xs[j] == target;
        }
        d.tests.push_back({std::to_string(n) + " " + std::to_string(target) + "\n" + join_ints(xs),
                           std::to_string(pairs)});
    }
    return d;
}

struct Family {
    std::string name;
    Difficulty difficulty;
    std::function<Draft(Rng&)> make;
};

const std::vector<Family>& families() {
    static const std::vector<Family> all = {
        {"loop-sum", Difficulty::Easy, loop_sum},
        {"count-multiples", Difficulty::Easy, count_multiples},
        {"membership", Difficulty::Intermediate, membership},
        {"range-sums", Difficulty::Intermediate, range_sums},
        {"fibonacci", Difficulty::Hard, fibonacci},
        {"recursive-sum", Difficulty::Hard, recursive_sum},
        {"pair-count", Difficulty::Hard, pair_count},
    };
    return all;
}

}  // namespace

const std::vector<std::string>& template_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const Family& f : families()) out.push_back(f.name);
        return out;
    }();
    return names;
}

Difficulty template_difficulty(std::size_t family) { return families().at(family).difficulty; }

EpcSample generate_template(std::size_t family, std::uint64_t seed) {
    const Family& fam = families().at(family);
    Rng rng(seed);
    Draft d = fam.make(rng);

    EpcSample s;
    s.tags = d.tags;
    s.description = d.description;
    s.input_format = d.input_format;
    s.output_format = d.output_format;
    s.io_examples = std::move(d.tests);
    s.difficulty = fam.difficulty;
    s.inefficient_code = canonical_code(d.inefficient);

    // Efficient programs use uniform names and are ordered by cost on the
    // first test, cheapest first.
    std::vector<std::pair<std::uint64_t, std::string>> ranked;
    for (std::size_t i = 0; i < d.efficient.size(); ++i) {
        std::string code = uniform_code(d.efficient[i]);
        const auto out = minilang::execute(minilang::parse_source(code), s.io_examples.front().input);
        ranked.emplace_back(out.cost, std::move(code));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [cost, code] : ranked) s.efficient_codes.push_back(std::move(code));

    if (const std::string why = validate_sample(s); !why.empty()) {
        throw std::logic_error("template " + fam.name + " produced an invalid sample: " + why);
    }
    return s;
}

std::vector<EpcSample> generate_corpus(std::size_t n, std::uint64_t seed, const CorpusOptions& options) {
    if (n == 0) throw std::invalid_argument("corpus size must be at least 1");
    if (!(options.test_fraction >= 0.0 && options.test_fraction < 1.0)) {
        throw std::invalid_argument("test fraction must be in [0, 1)");
    }
    const DifficultyMix& mix = options.mix;
    const double total = mix.easy + mix.intermediate + mix.hard;
    if (!(mix.easy >= 0 && mix.intermediate >= 0 && mix.hard >= 0 && total > 0)) {
        throw std::invalid_argument("difficulty mix weights must be nonnegative with a positive sum");
    }
    std::vector<std::vector<std::size_t>> by_tier(3);
    for (std::size_t f = 0; f < families().size(); ++f) {
        by_tier[static_cast<std::size_t>(families()[f].difficulty)].push_back(f);
    }

    const auto test_count = static_cast<std::size_t>(std::llround(options.test_fraction * static_cast<double>(n)));
    std::vector<EpcSample> corpus;
    corpus.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng pick_rng(derive_seed(seed, i));
        const double u = pick_rng.uniform() * total;
        const std::size_t tier = u < mix.easy ? 0 : (u < mix.easy + mix.intermediate ? 1 : 2);
        const auto& fams = by_tier[tier];
        const std::size_t family = fams[pick_rng.index(fams.size())];
        EpcSample s = generate_template(family, pick_rng.next());
        s.submission_index = static_cast<std::int64_t>(i);
        s.split = i + test_count >= n ? Split::Test : Split::Train;
        corpus.push_back(std::move(s));
    }
    return corpus;
}

std::string validate_sample(const EpcSample& sample) {
    if (sample.io_examples.empty()) return "no I/O examples";
    if (sample.efficient_codes.empty()) return "no efficient code";
    auto load = [](const std::string& code, const char* what) -> std::pair<minilang::Program, std::string> {
        try {
            return {minilang::parse_source(code), ""};
        } catch (const minilang::ParseError& err) {
            return {{}, std::string(what) + " does not parse: " + err.what()};
        }
    };
    auto [slow, slow_err] = load(sample.inefficient_code, "inefficient code");
    if (!slow_err.empty()) return slow_err;
    std::vector<minilang::Program> fast;
    for (const std::string& code : sample.efficient_codes) {
        auto [p, err] = load(code, "efficient code");
        if (!err.empty()) return err;
        fast.push_back(std::move(p));
    }
    for (std::size_t t = 0; t < sample.io_examples.size(); ++t) {
        const IoExample& io = sample.io_examples[t];
        const auto base = minilang::check(slow, io.input, io.output);
        if (base.status != minilang::ExecStatus::Ok) {
            return "inefficient code fails test " + std::to_string(t) + " (" +
                   std::string(minilang::to_string(base.status)) + ")";
        }
        std::uint64_t best = UINT64_MAX;
        for (std::size_t e = 0; e < fast.size(); ++e) {
            const auto out = minilang::check(fast[e], io.input, io.output);
            if (out.status != minilang::ExecStatus::Ok) {
                return "efficient code " + std::to_string(e) + " fails test " + std::to_string(t) + " (" +
                       std::string(minilang::to_string(out.status)) + ")";
            }
            best = std::min(best, out.cost);
        }
        if (best >= base.cost) {
            return "efficient cost " + std::to_string(best) + " not below inefficient cost " +
                   std::to_string(base.cost) + " on test " + std::to_string(t);
        }
    }
    return "";
}

}  // namespace epcforge::data
