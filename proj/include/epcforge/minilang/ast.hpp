// SPDX-License-Identifier: Apache-2.0
//
// Abstract syntax tree of the mini-language. Nodes are plain values so that
// transforms copy and compare them structurally.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace epcforge::minilang {

enum class BinOp { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
enum class UnOp { Neg, Not };
enum class Builtin { Len, Append, Read, Has };

std::string_view symbol(BinOp op);
std::string_view symbol(UnOp op);
std::string_view name(Builtin b);

enum class ExprKind {
    Int,      // value
    Var,      // name
    Binary,   // bin_op, args[0], args[1]
    Unary,    // un_op, args[0]
    Call,     // name(args...) of a user function
    Builtin,  // builtin(args...)
    Index,    // args[0][args[1]]
    List,     // [args...]
    Map,      // {}
};

struct Expr {
    ExprKind kind = ExprKind::Int;
    std::int64_t value = 0;
    std::string name;
    BinOp bin_op = BinOp::Add;
    UnOp un_op = UnOp::Neg;
    Builtin builtin = Builtin::Len;
    std::vector<Expr> args;

    bool operator==(const Expr&) const = default;

    static Expr integer(std::int64_t v);
    static Expr var(std::string n);
    static Expr binary(BinOp op, Expr lhs, Expr rhs);
    static Expr unary(UnOp op, Expr operand);
    static Expr call(std::string fn, std::vector<Expr> args);
    static Expr builtin_call(Builtin b, std::vector<Expr> args);
    static Expr index(Expr base, Expr idx);
};

enum class StmtKind {
    Assign,       // target = exprs[0]
    IndexAssign,  // target[exprs[0]] = exprs[1]
    For,          // for target in range(exprs[0], exprs[1]): body
    While,        // while exprs[0]: body
    If,           // if exprs[0]: body else: orelse
    Return,       // return exprs[0]
    Print,        // print(exprs[0])
    ExprStmt,     // exprs[0]
};

struct Stmt {
    StmtKind kind = StmtKind::ExprStmt;
    std::string target;
    std::vector<Expr> exprs;
    std::vector<Stmt> body;
    std::vector<Stmt> orelse;

    bool operator==(const Stmt&) const = default;

    bool is_loop() const noexcept { return kind == StmtKind::For || kind == StmtKind::While; }
};

struct Function {
    std::string name;
    std::vector<std::string> params;
    std::vector<Stmt> body;

    bool operator==(const Function&) const = default;
};

struct Program {
    std::vector<Function> functions;
    std::vector<Stmt> main;

    bool operator==(const Program&) const = default;

    const Function* find(std::string_view fn) const;
};

/// Visits every expression (pre-order) below a statement list.
template <typename F>
void visit_exprs(const Expr& e, F&& f) {
    f(e);
    for (const Expr& a : e.args) visit_exprs(a, f);
}

template <typename F>
void visit_exprs(const std::vector<Stmt>& stmts, F&& f) {
    for (const Stmt& s : stmts) {
        for (const Expr& e : s.exprs) visit_exprs(e, f);
        visit_exprs(s.body, f);
        visit_exprs(s.orelse, f);
    }
}

}  // namespace epcforge::minilang
