// SPDX-License-Identifier: Apache-2.0

#include "epcforge/minilang/parser.hpp"

namespace epcforge::minilang {

namespace {

int precedence(BinOp op) {
    switch (op) {
        case BinOp::Or: return 1;
        case BinOp::And: return 2;
        case BinOp::Eq:
        case BinOp::Ne:
        case BinOp::Lt:
        case BinOp::Le:
        case BinOp::Gt:
        case BinOp::Ge: return 4;
        case BinOp::Add:
        case BinOp::Sub: return 5;
        case BinOp::Mul:
        case BinOp::Div:
        case BinOp::Mod: return 6;
    }
    return 0;
}

int precedence(const Expr& e) {
    switch (e.kind) {
        case ExprKind::Binary: return precedence(e.bin_op);
        case ExprKind::Unary: return e.un_op == UnOp::Not ? 3 : 7;
        case ExprKind::Int: return e.value < 0 ? 7 : 9;
        case ExprKind::Index: return 8;
        default: return 9;
    }
}

class Writer {
public:
    std::vector<Token> tokens;

    void emit(std::string_view text) { tokens.push_back(token_from_text(text)); }

    void expr(const Expr& e, int min_prec = 0) {
        const bool paren = precedence(e) < min_prec;
        if (paren) emit("(");
        switch (e.kind) {
            case ExprKind::Int:
                if (e.value < 0) {
                    emit("-");
                    // magnitude as unsigned so the most negative value prints
                    emit(std::to_string(0ULL - static_cast<unsigned long long>(e.value)));
                } else {
                    emit(std::to_string(e.value));
                }
                break;
            case ExprKind::Var:
                emit(e.name);
                break;
            case ExprKind::Binary: {
                const int p = precedence(e.bin_op);
                if (p == 4) {
                    expr(e.args[0], 5);
                    emit(symbol(e.bin_op));
                    expr(e.args[1], 5);
                } else {
                    expr(e.args[0], p);
                    emit(symbol(e.bin_op));
                    expr(e.args[1], p + 1);
                }
                break;
            }
            case ExprKind::Unary:
                emit(symbol(e.un_op));
                expr(e.args[0], e.un_op == UnOp::Not ? 3 : 7);
                break;
            case ExprKind::Call:
                emit(e.name);
                arg_list(e.args, "(", ")");
                break;
            case ExprKind::Builtin:
                emit(name(e.builtin));
                arg_list(e.args, "(", ")");
                break;
            case ExprKind::Index:
                expr(e.args[0], 8);
                emit("[");
                expr(e.args[1]);
                emit("]");
                break;
            case ExprKind::List:
                arg_list(e.args, "[", "]");
                break;
            case ExprKind::Map:
                emit("{");
                emit("}");
                break;
        }
        if (paren) emit(")");
    }

    void arg_list(const std::vector<Expr>& args, std::string_view open, std::string_view close) {
        emit(open);
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (i) emit(",");
            expr(args[i]);
        }
        emit(close);
    }

    void block(const std::vector<Stmt>& body) {
        emit(":");
        emit(kNewline);
        emit(kIndent);
        stmts(body);
        emit(kDedent);
    }

    void stmts(const std::vector<Stmt>& body) {
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (i) emit(kNewline);
            stmt(body[i]);
        }
    }

    void stmt(const Stmt& s) {
        switch (s.kind) {
            case StmtKind::Assign:
                emit(s.target);
                emit("=");
                expr(s.exprs[0]);
                break;
            case StmtKind::IndexAssign:
                emit(s.target);
                emit("[");
                expr(s.exprs[0]);
                emit("]");
                emit("=");
                expr(s.exprs[1]);
                break;
            case StmtKind::For:
                emit("for");
                emit(s.target);
                emit("in");
                emit("range");
                arg_list(s.exprs, "(", ")");
                block(s.body);
                break;
            case StmtKind::While:
                emit("while");
                expr(s.exprs[0]);
                block(s.body);
                break;
            case StmtKind::If:
                emit("if");
                expr(s.exprs[0]);
                block(s.body);
                if (!s.orelse.empty()) {
                    emit(kNewline);
                    emit("else");
                    block(s.orelse);
                }
                break;
            case StmtKind::Return:
                emit("return");
                expr(s.exprs[0]);
                break;
            case StmtKind::Print:
                emit("print");
                emit("(");
                expr(s.exprs[0]);
                emit(")");
                break;
            case StmtKind::ExprStmt:
                expr(s.exprs[0]);
                break;
        }
    }
};

}  // namespace

std::string to_source(const Program& program) {
    Writer w;
    bool first = true;
    for (const Function& f : program.functions) {
        if (!first) w.emit(kNewline);
        first = false;
        w.emit("def");
        w.emit(f.name);
        w.emit("(");
        for (std::size_t i = 0; i < f.params.size(); ++i) {
            if (i) w.emit(",");
            w.emit(f.params[i]);
        }
        w.emit(")");
        w.block(f.body);
    }
    if (!program.main.empty()) {
        if (!first) w.emit(kNewline);
        w.stmts(program.main);
    }
    return join_tokens(w.tokens);
}

std::string to_source(const Expr& expr) {
    Writer w;
    w.expr(expr);
    return join_tokens(w.tokens);
}

}  // namespace epcforge::minilang
