// SPDX-License-Identifier: Apache-2.0

#include "epcforge/minilang/parser.hpp"

#include <map>
#include <set>

namespace epcforge::minilang {

namespace {

class Parser {
public:
    explicit Parser(std::span<const Token> tokens) : tokens_(tokens) {}

    Program parse_program() {
        Program prog;
        while (!at_end()) {
            if (peek_is("def")) {
                in_function_ = true;
                prog.functions.push_back(parse_def());
                in_function_ = false;
                end_statement(true);
            } else {
                bool block = false;
                prog.main.push_back(parse_statement(block));
                end_statement(block);
            }
        }
        return prog;
    }

private:
    // --- token helpers --------------------------------------------------

    bool at_end() const { return pos_ >= tokens_.size(); }

    const Token* peek(std::size_t ahead = 0) const {
        return pos_ + ahead < tokens_.size() ? &tokens_[pos_ + ahead] : nullptr;
    }

    bool peek_is(std::string_view text, std::size_t ahead = 0) const {
        const Token* t = peek(ahead);
        return t && t->text == text && t->kind != TokenKind::Identifier;
    }

    std::size_t offset_here() const {
        if (const Token* t = peek()) return t->offset;
        if (tokens_.empty()) return 0;
        return tokens_.back().offset + tokens_.back().text.size();
    }

    [[noreturn]] void fail(const std::string& message, std::vector<std::string> expected) const {
        std::string found = at_end() ? "end of input" : "'" + peek()->text + "'";
        throw ParseError(offset_here(), message + ", found " + found, std::move(expected));
    }

    const Token& expect(std::string_view text) {
        if (!peek_is(text)) fail("unexpected token", {std::string(text)});
        return tokens_[pos_++];
    }

    bool accept(std::string_view text) {
        if (!peek_is(text)) return false;
        ++pos_;
        return true;
    }

    std::string expect_identifier() {
        const Token* t = peek();
        if (!t || t->kind != TokenKind::Identifier) fail("unexpected token", {"identifier"});
        ++pos_;
        return t->text;
    }

    // After a statement: a newline, the end of the enclosing block, or
    // nothing when the statement itself closed a block.
    void end_statement(bool ended_with_block) {
        if (accept(kNewline)) return;
        if (ended_with_block || at_end() || peek_is(kDedent)) return;
        fail("expected end of statement", {std::string(kNewline)});
    }

    // --- statements -----------------------------------------------------

    Function parse_def() {
        expect("def");
        Function fn;
        fn.name = expect_identifier();
        expect("(");
        if (!peek_is(")")) {
            fn.params.push_back(expect_identifier());
            while (accept(",")) fn.params.push_back(expect_identifier());
        }
        expect(")");
        expect(":");
        bool block = false;
        fn.body = parse_suite(block);
        if (!block) {
            // keep the def terminator rule uniform for inline bodies
            if (peek_is(kNewline) && !peek(1)) ++pos_;
        }
        return fn;
    }

    // ':' has been consumed.
    std::vector<Stmt> parse_suite(bool& ended_with_block) {
        std::vector<Stmt> body;
        if (!accept(kNewline)) {
            bool nested = false;
            if (peek_is("for") || peek_is("while") || peek_is("if") || peek_is("def")) {
                fail("compound statement in an inline block", {std::string(kNewline)});
            }
            body.push_back(parse_statement(nested));
            ended_with_block = false;
            return body;
        }
        expect(kIndent);
        while (true) {
            if (peek_is("def")) fail("nested function definition", {"statement"});
            bool block = false;
            body.push_back(parse_statement(block));
            if (accept(kNewline)) {
                if (accept(kDedent)) break;
                continue;
            }
            if (accept(kDedent)) break;
            if (block) continue;
            fail("expected end of statement", {std::string(kNewline), std::string(kDedent)});
        }
        ended_with_block = true;
        return body;
    }

    Stmt parse_statement(bool& ended_with_block) {
        ended_with_block = false;
        Stmt s;
        if (accept("for")) {
            s.kind = StmtKind::For;
            s.target = expect_identifier();
            expect("in");
            expect("range");
            expect("(");
            s.exprs.push_back(parse_expr());
            expect(",");
            s.exprs.push_back(parse_expr());
            expect(")");
            expect(":");
            s.body = parse_suite(ended_with_block);
            return s;
        }
        if (accept("while")) {
            s.kind = StmtKind::While;
            s.exprs.push_back(parse_expr());
            expect(":");
            s.body = parse_suite(ended_with_block);
            return s;
        }
        if (accept("if")) {
            s.kind = StmtKind::If;
            s.exprs.push_back(parse_expr());
            expect(":");
            s.body = parse_suite(ended_with_block);
            if (!ended_with_block && peek_is(kNewline) && peek_is("else", 1)) ++pos_;
            if (accept("else")) {
                expect(":");
                s.orelse = parse_suite(ended_with_block);
            }
            return s;
        }
        if (accept("return")) {
            if (!in_function_) fail("return outside function", {"statement"});
            s.kind = StmtKind::Return;
            s.exprs.push_back(parse_expr());
            return s;
        }
        if (accept("print")) {
            s.kind = StmtKind::Print;
            expect("(");
            s.exprs.push_back(parse_expr());
            expect(")");
            return s;
        }
        if (peek_is("def")) fail("function definition inside a block", {"statement"});

        const std::size_t start = offset_here();
        Expr lhs = parse_expr();
        if (accept("=")) {
            if (lhs.kind == ExprKind::Var) {
                s.kind = StmtKind::Assign;
                s.target = lhs.name;
                s.exprs.push_back(parse_expr());
            } else if (lhs.kind == ExprKind::Index && lhs.args[0].kind == ExprKind::Var) {
                s.kind = StmtKind::IndexAssign;
                s.target = lhs.args[0].name;
                s.exprs.push_back(std::move(lhs.args[1]));
                s.exprs.push_back(parse_expr());
            } else {
                throw ParseError(start, "invalid assignment target", {"identifier"});
            }
            return s;
        }
        s.kind = StmtKind::ExprStmt;
        s.exprs.push_back(std::move(lhs));
        return s;
    }

    // --- expressions ----------------------------------------------------

    Expr parse_expr() { return parse_or(); }

    Expr parse_or() {
        Expr lhs = parse_and();
        while (accept("or")) lhs = Expr::binary(BinOp::Or, std::move(lhs), parse_and());
        return lhs;
    }

    Expr parse_and() {
        Expr lhs = parse_not();
        while (accept("and")) lhs = Expr::binary(BinOp::And, std::move(lhs), parse_not());
        return lhs;
    }

    Expr parse_not() {
        if (accept("not")) return Expr::unary(UnOp::Not, parse_not());
        return parse_comparison();
    }

    static bool comparison_op(std::string_view t, BinOp& op) {
        static const std::map<std::string_view, BinOp> ops = {
            {"==", BinOp::Eq}, {"!=", BinOp::Ne}, {"<", BinOp::Lt},
            {"<=", BinOp::Le}, {">", BinOp::Gt},  {">=", BinOp::Ge}};
        auto it = ops.find(t);
        if (it == ops.end()) return false;
        op = it->second;
        return true;
    }

    Expr parse_comparison() {
        Expr lhs = parse_additive();
        BinOp op;
        if (peek() && peek()->kind == TokenKind::Operator && comparison_op(peek()->text, op)) {
            ++pos_;
            lhs = Expr::binary(op, std::move(lhs), parse_additive());
            if (peek() && peek()->kind == TokenKind::Operator && comparison_op(peek()->text, op)) {
                fail("chained comparison", {"expression end"});
            }
        }
        return lhs;
    }

    Expr parse_additive() {
        Expr lhs = parse_multiplicative();
        while (true) {
            if (accept("+")) {
                lhs = Expr::binary(BinOp::Add, std::move(lhs), parse_multiplicative());
            } else if (accept("-")) {
                lhs = Expr::binary(BinOp::Sub, std::move(lhs), parse_multiplicative());
            } else {
                return lhs;
            }
        }
    }

    Expr parse_multiplicative() {
        Expr lhs = parse_unary();
        while (true) {
            if (accept("*")) {
                lhs = Expr::binary(BinOp::Mul, std::move(lhs), parse_unary());
            } else if (accept("/")) {
                lhs = Expr::binary(BinOp::Div, std::move(lhs), parse_unary());
            } else if (accept("%")) {
                lhs = Expr::binary(BinOp::Mod, std::move(lhs), parse_unary());
            } else {
                return lhs;
            }
        }
    }

    Expr parse_unary() {
        if (accept("-")) {
            Expr operand = parse_unary();
            // literals fold so that printed negative constants re-parse identically
            if (operand.kind == ExprKind::Int) {
                operand.value = -operand.value;
                return operand;
            }
            return Expr::unary(UnOp::Neg, std::move(operand));
        }
        return parse_postfix();
    }

    Expr parse_postfix() {
        Expr e = parse_primary();
        while (accept("[")) {
            Expr idx = parse_expr();
            expect("]");
            e = Expr::index(std::move(e), std::move(idx));
        }
        return e;
    }

    std::vector<Expr> parse_args() {
        std::vector<Expr> args;
        expect("(");
        if (!peek_is(")")) {
            args.push_back(parse_expr());
            while (accept(",")) args.push_back(parse_expr());
        }
        expect(")");
        return args;
    }

    Expr parse_builtin(Builtin b, std::size_t arity) {
        const std::size_t start = offset_here();
        std::vector<Expr> args = parse_args();
        if (args.size() != arity) {
            throw ParseError(start, std::string(name(b)) + " takes " + std::to_string(arity) +
                                        " argument(s), given " + std::to_string(args.size()),
                             {std::to_string(arity) + " argument(s)"});
        }
        return Expr::builtin_call(b, std::move(args));
    }

    Expr parse_primary() {
        const Token* t = peek();
        if (!t) fail("unexpected end of input", {"expression"});
        if (t->kind == TokenKind::Integer) {
            ++pos_;
            return Expr::integer(std::stoll(t->text));
        }
        if (t->kind == TokenKind::Identifier) {
            ++pos_;
            if (peek_is("(")) {
                const std::size_t off = t->offset;
                Expr call = Expr::call(t->text, parse_args());
                calls_.push_back({off, call.name, call.args.size()});
                return call;
            }
            return Expr::var(t->text);
        }
        if (accept("len")) return parse_builtin(Builtin::Len, 1);
        if (accept("append")) return parse_builtin(Builtin::Append, 2);
        if (accept("read")) return parse_builtin(Builtin::Read, 0);
        if (accept("has")) return parse_builtin(Builtin::Has, 2);
        if (accept("(")) {
            Expr e = parse_expr();
            expect(")");
            return e;
        }
        if (accept("[")) {
            Expr list;
            list.kind = ExprKind::List;
            if (!peek_is("]")) {
                list.args.push_back(parse_expr());
                while (accept(",")) list.args.push_back(parse_expr());
            }
            expect("]");
            return list;
        }
        if (accept("{")) {
            expect("}");
            Expr map;
            map.kind = ExprKind::Map;
            return map;
        }
        fail("unexpected token", {"expression"});
    }

public:
    struct CallSite {
        std::size_t offset;
        std::string name;
        std::size_t arity;
    };

    const std::vector<CallSite>& calls() const { return calls_; }

private:
    std::span<const Token> tokens_;
    std::size_t pos_ = 0;
    bool in_function_ = false;
    std::vector<CallSite> calls_;
};

// --- semantic validation ---------------------------------------------------

void check_defined(const Expr& e, const std::set<std::string>& defined, const std::string& scope) {
    visit_exprs(e, [&](const Expr& x) {
        if (x.kind == ExprKind::Var && !defined.count(x.name)) {
            throw ParseError(0, "variable '" + x.name + "' used before assignment in " + scope,
                             {"assignment to " + x.name});
        }
    });
}

void check_block(const std::vector<Stmt>& stmts, std::set<std::string>& defined,
                 const std::string& scope) {
    for (const Stmt& s : stmts) {
        switch (s.kind) {
            case StmtKind::Assign:
                check_defined(s.exprs[0], defined, scope);
                defined.insert(s.target);
                break;
            case StmtKind::IndexAssign:
                if (!defined.count(s.target)) {
                    throw ParseError(0, "variable '" + s.target + "' indexed before assignment in " + scope,
                                     {"assignment to " + s.target});
                }
                for (const Expr& e : s.exprs) check_defined(e, defined, scope);
                break;
            case StmtKind::For:
                check_defined(s.exprs[0], defined, scope);
                check_defined(s.exprs[1], defined, scope);
                defined.insert(s.target);
                check_block(s.body, defined, scope);
                break;
            case StmtKind::While:
                check_defined(s.exprs[0], defined, scope);
                check_block(s.body, defined, scope);
                break;
            case StmtKind::If:
                check_defined(s.exprs[0], defined, scope);
                check_block(s.body, defined, scope);
                check_block(s.orelse, defined, scope);
                break;
            case StmtKind::Return:
            case StmtKind::Print:
            case StmtKind::ExprStmt:
                check_defined(s.exprs[0], defined, scope);
                break;
        }
    }
}

}  // namespace

Program parse(std::span<const Token> tokens) {
    Parser p(tokens);
    Program prog = p.parse_program();

    std::map<std::string, std::size_t> arity;
    for (const Function& f : prog.functions) {
        if (!arity.emplace(f.name, f.params.size()).second) {
            throw ParseError(0, "function '" + f.name + "' defined twice", {"unique function name"});
        }
        std::set<std::string> seen;
        for (const std::string& param : f.params) {
            if (!seen.insert(param).second) {
                throw ParseError(0, "duplicate parameter '" + param + "' in " + f.name, {"identifier"});
            }
        }
    }
    for (const auto& call : p.calls()) {
        auto it = arity.find(call.name);
        if (it == arity.end()) {
            throw ParseError(call.offset, "call to undefined function '" + call.name + "'",
                             {"defined function"});
        }
        if (it->second != call.arity) {
            throw ParseError(call.offset, "'" + call.name + "' takes " + std::to_string(it->second) +
                                              " argument(s), given " + std::to_string(call.arity),
                             {std::to_string(it->second) + " argument(s)"});
        }
    }
    for (const Function& f : prog.functions) {
        std::set<std::string> defined(f.params.begin(), f.params.end());
        check_block(f.body, defined, "function " + f.name);
    }
    std::set<std::string> defined;
    check_block(prog.main, defined, "main");
    return prog;
}

Program parse_source(std::string_view source) {
    const std::vector<Token> tokens = lex(source);
    return parse(tokens);
}

}  // namespace epcforge::minilang
