// SPDX-License-Identifier: Apache-2.0

#include "epcforge/minilang/ast.hpp"

namespace epcforge::minilang {

std::string_view symbol(BinOp op) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "/";
        case BinOp::Mod: return "%";
        case BinOp::Eq: return "==";
        case BinOp::Ne: return "!=";
        case BinOp::Lt: return "<";
        case BinOp::Le: return "<=";
        case BinOp::Gt: return ">";
        case BinOp::Ge: return ">=";
        case BinOp::And: return "and";
        case BinOp::Or: return "or";
    }
    return "?";
}

std::string_view symbol(UnOp op) { return op == UnOp::Neg ? "-" : "not"; }

std::string_view name(Builtin b) {
    switch (b) {
        case Builtin::Len: return "len";
        case Builtin::Append: return "append";
        case Builtin::Read: return "read";
        case Builtin::Has: return "has";
    }
    return "?";
}

Expr Expr::integer(std::int64_t v) {
    Expr e;
    e.kind = ExprKind::Int;
    e.value = v;
    return e;
}

Expr Expr::var(std::string n) {
    Expr e;
    e.kind = ExprKind::Var;
    e.name = std::move(n);
    return e;
}

Expr Expr::binary(BinOp op, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.bin_op = op;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
}

Expr Expr::unary(UnOp op, Expr operand) {
    Expr e;
    e.kind = ExprKind::Unary;
    e.un_op = op;
    e.args.push_back(std::move(operand));
    return e;
}

Expr Expr::call(std::string fn, std::vector<Expr> args) {
    Expr e;
    e.kind = ExprKind::Call;
    e.name = std::move(fn);
    e.args = std::move(args);
    return e;
}

Expr Expr::builtin_call(Builtin b, std::vector<Expr> args) {
    Expr e;
    e.kind = ExprKind::Builtin;
    e.builtin = b;
    e.args = std::move(args);
    return e;
}

Expr Expr::index(Expr base, Expr idx) {
    Expr e;
    e.kind = ExprKind::Index;
    e.args.push_back(std::move(base));
    e.args.push_back(std::move(idx));
    return e;
}

const Function* Program::find(std::string_view fn) const {
    for (const Function& f : functions) {
        if (f.name == fn) return &f;
    }
    return nullptr;
}

}  // namespace epcforge::minilang
