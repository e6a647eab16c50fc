// SPDX-License-Identifier: Apache-2.0

#include "epcforge/minilang/interpreter.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <map>
#include <memory>
#include <unordered_map>
#include <variant>
#include <vector>

#include "epcforge/minilang/parser.hpp"

namespace epcforge::minilang {

namespace {

struct Value;
using List = std::vector<Value>;
using Map = std::map<std::int64_t, Value>;

struct Value {
    std::variant<std::int64_t, std::shared_ptr<List>, std::shared_ptr<Map>> v;

    bool is_int() const { return v.index() == 0; }
    bool is_list() const { return v.index() == 1; }
    bool is_map() const { return v.index() == 2; }
};

struct RuntimeFault {
    std::string message;
};
struct FuelOut {};

struct Frame {
    std::unordered_map<std::string, Value> vars;
    bool returning = false;
    Value result{std::int64_t{0}};
};

std::string format(const Value& value) {
    if (value.is_int()) return std::to_string(std::get<0>(value.v));
    std::string out;
    if (value.is_list()) {
        out = "[";
        const List& list = *std::get<1>(value.v);
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (i) out += ", ";
            out += format(list[i]);
        }
        return out + "]";
    }
    out = "{";
    bool first = true;
    for (const auto& [k, val] : *std::get<2>(value.v)) {
        if (!first) out += ", ";
        first = false;
        out += std::to_string(k) + ": " + format(val);
    }
    return out + "}";
}

class Machine {
public:
    Machine(const Program& program, std::string_view input, std::uint64_t fuel)
        : program_(program), input_(input), fuel_(fuel) {
        for (const Function& f : program.functions) functions_[f.name] = &f;
    }

    ExecOutcome run() {
        ExecOutcome out;
        try {
            Frame main;
            exec_block(program_.main, main);
            out.status = ExecStatus::Ok;
        } catch (const RuntimeFault& fault) {
            out.status = ExecStatus::RuntimeError;
            out.message = fault.message;
        } catch (const FuelOut&) {
            out.status = ExecStatus::FuelExhausted;
            out.message = "fuel of " + std::to_string(fuel_) + " cost units exhausted";
        }
        out.cost = cost_;
        for (std::size_t i = 0; i < prints_.size(); ++i) {
            if (i) out.output += '\n';
            out.output += prints_[i];
        }
        return out;
    }

private:
    void charge(std::uint64_t units) {
        if (units > fuel_ - cost_) {
            cost_ = fuel_;
            throw FuelOut{};
        }
        cost_ += units;
    }

    [[noreturn]] static void fault(std::string message) { throw RuntimeFault{std::move(message)}; }

    static std::int64_t as_int(const Value& v, std::string_view what) {
        if (!v.is_int()) fault(std::string(what) + " expects an integer");
        return std::get<0>(v.v);
    }

    static bool truthy(const Value& v) {
        if (v.is_int()) return std::get<0>(v.v) != 0;
        if (v.is_list()) return !std::get<1>(v.v)->empty();
        return !std::get<2>(v.v)->empty();
    }

    std::int64_t read_int() {
        while (read_pos_ < input_.size() &&
               (input_[read_pos_] == ' ' || input_[read_pos_] == '\n' || input_[read_pos_] == '\t' ||
                input_[read_pos_] == '\r')) {
            ++read_pos_;
        }
        if (read_pos_ >= input_.size()) fault("read() past end of input");
        std::size_t end = read_pos_;
        while (end < input_.size() && !std::isspace(static_cast<unsigned char>(input_[end]))) ++end;
        std::int64_t value = 0;
        const auto res = std::from_chars(input_.data() + read_pos_, input_.data() + end, value);
        if (res.ec != std::errc{} || res.ptr != input_.data() + end) {
            fault("read() found a non-integer token");
        }
        read_pos_ = end;
        return value;
    }

    static std::int64_t arith(BinOp op, std::int64_t a, std::int64_t b) {
        std::int64_t r = 0;
        switch (op) {
            case BinOp::Add:
                if (__builtin_add_overflow(a, b, &r)) fault("integer overflow");
                return r;
            case BinOp::Sub:
                if (__builtin_sub_overflow(a, b, &r)) fault("integer overflow");
                return r;
            case BinOp::Mul:
                if (__builtin_mul_overflow(a, b, &r)) fault("integer overflow");
                return r;
            case BinOp::Div:
            case BinOp::Mod: {
                if (b == 0) fault("division by zero");
                if (a == INT64_MIN && b == -1) fault("integer overflow");
                std::int64_t q = a / b;
                std::int64_t m = a % b;
                // floor semantics
                if (m != 0 && ((m < 0) != (b < 0))) {
                    --q;
                    m += b;
                }
                return op == BinOp::Div ? q : m;
            }
            case BinOp::Eq: return a == b;
            case BinOp::Ne: return a != b;
            case BinOp::Lt: return a < b;
            case BinOp::Le: return a <= b;
            case BinOp::Gt: return a > b;
            case BinOp::Ge: return a >= b;
            case BinOp::And:
            case BinOp::Or: break;
        }
        fault("bad operator");
    }

    Value eval(const Expr& e, Frame& frame) {
        switch (e.kind) {
            case ExprKind::Int: return Value{e.value};
            case ExprKind::Var: {
                auto it = frame.vars.find(e.name);
                if (it == frame.vars.end()) fault("variable '" + e.name + "' is not assigned");
                return it->second;
            }
            case ExprKind::Binary: {
                charge(cost::kOperator);
                if (e.bin_op == BinOp::And) {
                    if (!truthy(eval(e.args[0], frame))) return Value{std::int64_t{0}};
                    return Value{std::int64_t{truthy(eval(e.args[1], frame))}};
                }
                if (e.bin_op == BinOp::Or) {
                    if (truthy(eval(e.args[0], frame))) return Value{std::int64_t{1}};
                    return Value{std::int64_t{truthy(eval(e.args[1], frame))}};
                }
                const std::int64_t a = as_int(eval(e.args[0], frame), symbol(e.bin_op));
                const std::int64_t b = as_int(eval(e.args[1], frame), symbol(e.bin_op));
                return Value{arith(e.bin_op, a, b)};
            }
            case ExprKind::Unary: {
                charge(cost::kOperator);
                const Value v = eval(e.args[0], frame);
                if (e.un_op == UnOp::Not) return Value{std::int64_t{!truthy(v)}};
                const std::int64_t x = as_int(v, "-");
                if (x == INT64_MIN) fault("integer overflow");
                return Value{-x};
            }
            case ExprKind::Call: return call(e, frame);
            case ExprKind::Builtin: return builtin(e, frame);
            case ExprKind::Index: {
                const Value base = eval(e.args[0], frame);
                const std::int64_t key = as_int(eval(e.args[1], frame), "index");
                return lookup(base, key);
            }
            case ExprKind::List: {
                charge(cost::kListElement * e.args.size());
                auto list = std::make_shared<List>();
                list->reserve(e.args.size());
                for (const Expr& a : e.args) list->push_back(eval(a, frame));
                return Value{std::move(list)};
            }
            case ExprKind::Map: return Value{std::make_shared<Map>()};
        }
        fault("bad expression");
    }

    Value lookup(const Value& base, std::int64_t key) {
        if (base.is_list()) {
            charge(cost::kIndex);
            const List& list = *std::get<1>(base.v);
            if (key < 0 || static_cast<std::size_t>(key) >= list.size()) {
                fault("list index " + std::to_string(key) + " out of range");
            }
            return list[static_cast<std::size_t>(key)];
        }
        if (base.is_map()) {
            charge(cost::kMapLookup);
            const Map& map = *std::get<2>(base.v);
            auto it = map.find(key);
            if (it == map.end()) fault("missing map key " + std::to_string(key));
            return it->second;
        }
        fault("indexing an integer");
    }

    Value builtin(const Expr& e, Frame& frame) {
        switch (e.builtin) {
            case Builtin::Len: {
                charge(cost::kLen);
                const Value v = eval(e.args[0], frame);
                if (v.is_list()) return Value{static_cast<std::int64_t>(std::get<1>(v.v)->size())};
                if (v.is_map()) return Value{static_cast<std::int64_t>(std::get<2>(v.v)->size())};
                fault("len of an integer");
            }
            case Builtin::Append: {
                charge(cost::kAppend);
                const Value target = eval(e.args[0], frame);
                Value item = eval(e.args[1], frame);
                if (!target.is_list()) fault("append to a non-list");
                std::get<1>(target.v)->push_back(std::move(item));
                return Value{std::int64_t{0}};
            }
            case Builtin::Read:
                charge(cost::kRead);
                return Value{read_int()};
            case Builtin::Has: {
                charge(cost::kMapLookup);
                const Value target = eval(e.args[0], frame);
                const std::int64_t key = as_int(eval(e.args[1], frame), "has");
                if (!target.is_map()) fault("has on a non-map");
                return Value{std::int64_t{std::get<2>(target.v)->count(key) > 0}};
            }
        }
        fault("bad builtin");
    }

    Value call(const Expr& e, Frame& frame) {
        charge(cost::kCall);
        auto it = functions_.find(e.name);
        if (it == functions_.end()) fault("undefined function '" + e.name + "'");
        const Function& fn = *it->second;
        if (fn.params.size() != e.args.size()) fault("arity mismatch calling '" + e.name + "'");
        Frame callee;
        for (std::size_t i = 0; i < e.args.size(); ++i) callee.vars[fn.params[i]] = eval(e.args[i], frame);
        if (depth_ >= kMaxCallDepth) fault("recursion deeper than " + std::to_string(kMaxCallDepth));
        ++depth_;
        exec_block(fn.body, callee);
        --depth_;
        return callee.result;
    }

    void exec_block(const std::vector<Stmt>& stmts, Frame& frame) {
        for (const Stmt& s : stmts) {
            exec(s, frame);
            if (frame.returning) return;
        }
    }

    void exec(const Stmt& s, Frame& frame) {
        charge(cost::kStatement);
        switch (s.kind) {
            case StmtKind::Assign:
                frame.vars[s.target] = eval(s.exprs[0], frame);
                return;
            case StmtKind::IndexAssign: {
                auto it = frame.vars.find(s.target);
                if (it == frame.vars.end()) fault("variable '" + s.target + "' is not assigned");
                const Value target = it->second;
                const std::int64_t key = as_int(eval(s.exprs[0], frame), "index");
                Value item = eval(s.exprs[1], frame);
                if (target.is_list()) {
                    charge(cost::kIndex);
                    List& list = *std::get<1>(target.v);
                    if (key < 0 || static_cast<std::size_t>(key) >= list.size()) {
                        fault("list index " + std::to_string(key) + " out of range");
                    }
                    list[static_cast<std::size_t>(key)] = std::move(item);
                } else if (target.is_map()) {
                    charge(cost::kMapInsert);
                    (*std::get<2>(target.v))[key] = std::move(item);
                } else {
                    fault("index assignment into an integer");
                }
                return;
            }
            case StmtKind::For: {
                const std::int64_t lo = as_int(eval(s.exprs[0], frame), "range");
                const std::int64_t hi = as_int(eval(s.exprs[1], frame), "range");
                for (std::int64_t i = lo; i < hi; ++i) {
                    frame.vars[s.target] = Value{i};
                    exec_block(s.body, frame);
                    if (frame.returning) return;
                }
                return;
            }
            case StmtKind::While:
                while (truthy(eval(s.exprs[0], frame))) {
                    exec_block(s.body, frame);
                    if (frame.returning) return;
                }
                return;
            case StmtKind::If:
                if (truthy(eval(s.exprs[0], frame))) {
                    exec_block(s.body, frame);
                } else {
                    exec_block(s.orelse, frame);
                }
                return;
            case StmtKind::Return:
                frame.result = eval(s.exprs[0], frame);
                frame.returning = true;
                return;
            case StmtKind::Print:
                prints_.push_back(format(eval(s.exprs[0], frame)));
                return;
            case StmtKind::ExprStmt:
                eval(s.exprs[0], frame);
                return;
        }
    }

    const Program& program_;
    std::string_view input_;
    std::size_t read_pos_ = 0;
    std::uint64_t fuel_;
    std::uint64_t cost_ = 0;
    int depth_ = 0;
    std::unordered_map<std::string, const Function*> functions_;
    std::vector<std::string> prints_;
};

std::string_view trim_right(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

std::string_view to_string(ExecStatus status) {
    switch (status) {
        case ExecStatus::Ok: return "ok";
        case ExecStatus::ParseError: return "parse-error";
        case ExecStatus::RuntimeError: return "runtime-error";
        case ExecStatus::FuelExhausted: return "fuel-exhausted";
        case ExecStatus::OutputMismatch: return "output-mismatch";
    }
    return "unknown";
}

ExecOutcome execute(const Program& program, std::string_view input, std::uint64_t fuel) {
    return Machine(program, input, fuel).run();
}

ExecOutcome check(const Program& program, std::string_view input, std::string_view expected,
                  std::uint64_t fuel) {
    ExecOutcome out = execute(program, input, fuel);
    if (out.status == ExecStatus::Ok && trim_right(out.output) != trim_right(expected)) {
        out.status = ExecStatus::OutputMismatch;
        out.message = "output differs from expected";
    }
    return out;
}

ExecOutcome run_source(std::string_view source, std::string_view input, std::uint64_t fuel,
                       std::optional<std::string_view> expected) {
    Program program;
    try {
        program = parse_source(source);
    } catch (const ParseError& err) {
        ExecOutcome out;
        out.status = ExecStatus::ParseError;
        out.message = err.what();
        return out;
    }
    return expected ? check(program, input, *expected, fuel) : execute(program, input, fuel);
}

double wall_clock_us(const Program& program, std::string_view input, int repetitions,
                     std::uint64_t fuel) {
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(std::max(repetitions, 1)));
    for (int r = 0; r < std::max(repetitions, 1); ++r) {
        const auto start = std::chrono::steady_clock::now();
        (void)execute(program, input, fuel);
        const auto stop = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double, std::micro>(stop - start).count());
    }
    std::nth_element(samples.begin(), samples.begin() + samples.size() / 2, samples.end());
    return samples[samples.size() / 2];
}

}  // namespace epcforge::minilang
