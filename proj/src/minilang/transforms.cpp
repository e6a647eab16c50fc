// SPDX-License-Identifier: Apache-2.0

#include "epcforge/minilang/transforms.hpp"

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include "epcforge/util/rng.hpp"

namespace epcforge::minilang {

namespace {

// --- renaming --------------------------------------------------------------

class Renamer {
public:
    std::string var(const std::string& name) { return lookup(vars_, name, "var"); }
    std::string func(const std::string& name) { return lookup(funcs_, name, "func"); }

    void expr(Expr& e) {
        if (e.kind == ExprKind::Var) e.name = var(e.name);
        if (e.kind == ExprKind::Call) e.name = func(e.name);
        for (Expr& a : e.args) expr(a);
    }

    void block(std::vector<Stmt>& stmts) {
        for (Stmt& s : stmts) {
            if (s.kind == StmtKind::Assign || s.kind == StmtKind::IndexAssign || s.kind == StmtKind::For) {
                s.target = var(s.target);
            }
            for (Expr& e : s.exprs) expr(e);
            block(s.body);
            block(s.orelse);
        }
    }

private:
    static std::string lookup(std::map<std::string, std::string>& table, const std::string& name,
                              const char* prefix) {
        auto it = table.find(name);
        if (it != table.end()) return it->second;
        std::string fresh = prefix + std::to_string(table.size() + 1);
        table.emplace(name, fresh);
        return fresh;
    }

    std::map<std::string, std::string> vars_;
    std::map<std::string, std::string> funcs_;
};

// --- loop / recursion extraction --------------------------------------------

using NameSet = std::set<std::string>;

void collect_calls(const Expr& e, NameSet& out) {
    visit_exprs(e, [&](const Expr& x) {
        if (x.kind == ExprKind::Call) out.insert(x.name);
    });
}

void collect_calls(const std::vector<Stmt>& stmts, NameSet& out) {
    visit_exprs(stmts, [&](const Expr& x) {
        if (x.kind == ExprKind::Call) out.insert(x.name);
    });
}

void collect_uses(const Expr& e, NameSet& out) {
    visit_exprs(e, [&](const Expr& x) {
        if (x.kind == ExprKind::Var) out.insert(x.name);
    });
}

void collect_uses(const std::vector<Stmt>& stmts, NameSet& out) {
    for (const Stmt& s : stmts) {
        if (s.kind == StmtKind::IndexAssign) out.insert(s.target);
        for (const Expr& e : s.exprs) collect_uses(e, out);
        collect_uses(s.body, out);
        collect_uses(s.orelse, out);
    }
}

bool has_read(const Expr& e) {
    bool found = false;
    visit_exprs(e, [&](const Expr& x) {
        if (x.kind == ExprKind::Builtin && x.builtin == Builtin::Read) found = true;
    });
    return found;
}

class Extractor {
public:
    explicit Extractor(const Program& program) : program_(program) {
        for (const Function& f : program.functions) collect_calls(f.body, calls_[f.name]);
        for (const Function& f : program.functions) {
            const NameSet reach = reachable(calls_[f.name]);
            if (reach.count(f.name)) recursive_.insert(f.name);
            reaches_[f.name] = reach;
        }
        for (const Function& f : program.functions) {
            bool hits = recursive_.count(f.name) > 0;
            for (const std::string& g : reaches_[f.name]) hits = hits || recursive_.count(g) > 0;
            if (hits) to_recursion_.insert(f.name);
        }
        for (const Function& f : program.functions) {
            bool reads = false;
            visit_exprs(f.body, [&](const Expr& x) {
                if (x.kind == ExprKind::Builtin && x.builtin == Builtin::Read) reads = true;
            });
            if (reads) direct_readers_.insert(f.name);
        }
    }

    Program run() {
        NameSet needed;
        bool input_needed = false;
        Program out;
        out.main = slice(program_.main, needed, input_needed);

        NameSet keep = recursive_;
        collect_calls(out.main, keep);
        keep = closure(keep);
        for (const Function& f : program_.functions) {
            if (keep.count(f.name)) out.functions.push_back(f);
        }
        return out;
    }

private:
    NameSet reachable(const NameSet& start) {
        NameSet seen;
        std::vector<std::string> stack(start.begin(), start.end());
        while (!stack.empty()) {
            std::string f = stack.back();
            stack.pop_back();
            if (!seen.insert(f).second) continue;
            for (const std::string& g : calls_[f]) stack.push_back(g);
        }
        return seen;
    }

    NameSet closure(const NameSet& start) {
        NameSet all = start;
        const NameSet reach = reachable(start);
        all.insert(reach.begin(), reach.end());
        return all;
    }

    bool calls_recursion(const Expr& e) {
        NameSet called;
        collect_calls(e, called);
        for (const std::string& f : called) {
            if (to_recursion_.count(f)) return true;
        }
        return false;
    }

    bool reads_input(const Expr& e) {
        if (has_read(e)) return true;
        NameSet called;
        collect_calls(e, called);
        for (const std::string& f : closure(called)) {
            if (direct_readers_.count(f)) return true;
        }
        return false;
    }

    bool reads_input(const std::vector<Stmt>& stmts) {
        bool found = false;
        for (const Stmt& s : stmts) {
            for (const Expr& e : s.exprs) found = found || reads_input(e);
            found = found || reads_input(s.body) || reads_input(s.orelse);
        }
        return found;
    }

    // Backward slice. `needed` holds variables read by kept code after this
    // point; `input_needed` is set when kept code after this point reads input,
    // so earlier reads must stay to keep the input stream aligned.
    std::vector<Stmt> slice(const std::vector<Stmt>& stmts, NameSet& needed, bool& input_needed) {
        std::vector<Stmt> kept_rev;
        for (auto it = stmts.rbegin(); it != stmts.rend(); ++it) {
            const Stmt& s = *it;
            if (s.is_loop()) {
                collect_uses(std::vector<Stmt>{s}, needed);
                if (reads_input(std::vector<Stmt>{s})) input_needed = true;
                kept_rev.push_back(s);
                continue;
            }
            if (s.kind == StmtKind::If) {
                NameSet needed_then = needed;
                NameSet needed_else = needed;
                bool input_then = input_needed;
                bool input_else = input_needed;
                std::vector<Stmt> then_part = slice(s.body, needed_then, input_then);
                std::vector<Stmt> else_part = slice(s.orelse, needed_else, input_else);
                if (then_part.empty() && else_part.empty() && !(input_needed && reads_input(s.exprs[0]))) {
                    continue;
                }
                if (then_part.empty()) then_part.push_back(placeholder());
                Stmt kept = s;
                kept.body = std::move(then_part);
                kept.orelse = std::move(else_part);
                needed = std::move(needed_then);
                needed.insert(needed_else.begin(), needed_else.end());
                collect_uses(s.exprs[0], needed);
                input_needed = input_then || input_else || reads_input(s.exprs[0]);
                kept_rev.push_back(std::move(kept));
                continue;
            }

            bool keep = false;
            bool recursion = false;
            for (const Expr& e : s.exprs) recursion = recursion || calls_recursion(e);
            keep = recursion;
            bool reads = false;
            for (const Expr& e : s.exprs) reads = reads || reads_input(e);
            if (reads && input_needed) keep = true;
            switch (s.kind) {
                case StmtKind::Assign:
                    keep = keep || needed.count(s.target) > 0;
                    break;
                case StmtKind::IndexAssign:
                    keep = keep || needed.count(s.target) > 0;
                    break;
                case StmtKind::ExprStmt: {
                    NameSet uses;
                    collect_uses(s.exprs[0], uses);
                    for (const std::string& u : uses) keep = keep || needed.count(u) > 0;
                    break;
                }
                default:
                    break;
            }
            if (!keep) continue;

            Stmt kept = s;
            if (s.kind == StmtKind::Print) kept.kind = StmtKind::ExprStmt;
            if (s.kind == StmtKind::Assign) needed.erase(s.target);
            if (s.kind == StmtKind::IndexAssign) needed.insert(s.target);
            for (const Expr& e : s.exprs) collect_uses(e, needed);
            if (reads) input_needed = true;
            kept_rev.push_back(std::move(kept));
        }
        return {kept_rev.rbegin(), kept_rev.rend()};
    }

    static Stmt placeholder() {
        Stmt s;
        s.kind = StmtKind::ExprStmt;
        s.exprs.push_back(Expr::integer(0));
        return s;
    }

    const Program& program_;
    std::map<std::string, NameSet> calls_;
    std::map<std::string, NameSet> reaches_;
    NameSet recursive_;
    NameSet to_recursion_;
    NameSet direct_readers_;
};

}  // namespace

Program rename_uniform(const Program& program) {
    Program out = program;
    Renamer r;
    for (Function& f : out.functions) {
        f.name = r.func(f.name);
        for (std::string& p : f.params) p = r.var(p);
        r.block(f.body);
    }
    r.block(out.main);
    return out;
}

Program extract_loops_recursion(const Program& program) { return Extractor(program).run(); }

std::vector<Token> random_token_delete(std::span<const Token> tokens, double ratio,
                                       std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("deletion ratio must be in [0, 1]");
    const std::size_t n = tokens.size();
    const auto remove = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = 0; i < remove; ++i) {
        const std::size_t j = i + rng.index(n - i);
        std::swap(order[i], order[j]);
    }
    std::vector<bool> dropped(n, false);
    for (std::size_t i = 0; i < remove; ++i) dropped[order[i]] = true;
    std::vector<Token> out;
    out.reserve(n - remove);
    for (std::size_t i = 0; i < n; ++i) {
        if (!dropped[i]) out.push_back(tokens[i]);
    }
    return out;
}

}  // namespace epcforge::minilang
