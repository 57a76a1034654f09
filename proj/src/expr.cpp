#include "sdu/expr.hpp"

#include "sdu/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

namespace sdu {

// Recursive descent:
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | '+' unary | atom
//   atom   := number | ident | ident '(' args ')' | '(' expr ')'
class ExprParser {
public:
    ExprParser(std::string_view src, VarSet allowed, Expression& out)
        : src_(src), allowed_(allowed), out_(out) {}

    void run() {
        parse_expr();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        int depth = 0;
        for (const auto& in : out_.code_) {
            switch (in.op) {
            case Expression::Op::push:
            case Expression::Op::var_t:
            case Expression::Op::var_w:
            case Expression::Op::var_theta: ++depth; break;
            case Expression::Op::neg:
            case Expression::Op::exp:
            case Expression::Op::tanh:
            case Expression::Op::sin: break;
            case Expression::Op::clamp: depth -= 2; break;
            default: depth -= 1; break;
            }
            out_.max_depth_ = std::max(out_.max_depth_, depth);
        }
        if (out_.max_depth_ > 64) fail("expression nests too deeply");
    }

private:
    std::string_view src_;
    VarSet allowed_;
    Expression& out_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("expr", -1,
                         "expression '" + std::string(src_) + "' at column " + std::to_string(pos_ + 1) +
                             ": " + msg);
    }

    void emit(Expression::Op op, double v = 0.0) { out_.code_.push_back({op, v}); }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    void parse_expr() {
        parse_term();
        for (;;) {
            if (accept('+')) {
                parse_term();
                emit(Expression::Op::add);
            } else if (accept('-')) {
                parse_term();
                emit(Expression::Op::sub);
            } else {
                return;
            }
        }
    }

    void parse_term() {
        parse_unary();
        for (;;) {
            if (accept('*')) {
                parse_unary();
                emit(Expression::Op::mul);
            } else if (accept('/')) {
                parse_unary();
                emit(Expression::Op::div);
            } else {
                return;
            }
        }
    }

    void parse_unary() {
        if (accept('-')) {
            parse_unary();
            emit(Expression::Op::neg);
        } else if (accept('+')) {
            parse_unary();
        } else {
            parse_atom();
        }
    }

    int parse_args() {
        expect('(');
        int n = 0;
        skip_ws();
        if (accept(')')) return 0;
        do {
            parse_expr();
            ++n;
        } while (accept(','));
        expect(')');
        return n;
    }

    void parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of expression");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            parse_expr();
            expect(')');
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            double v = 0.0;
            const char* first = src_.data() + pos_;
            const char* last = src_.data() + src_.size();
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc()) fail("bad number");
            pos_ += static_cast<std::size_t>(ptr - first);
            emit(Expression::Op::push, v);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            const std::string_view id = src_.substr(start, pos_ - start);
            skip_ws();
            const bool call = pos_ < src_.size() && src_[pos_] == '(';
            if (!call) {
                if (id == "t" && allowed_.t) {
                    out_.uses_mask_ |= 1u << static_cast<int>(Var::t);
                    emit(Expression::Op::var_t);
                } else if (id == "w" && allowed_.w) {
                    out_.uses_mask_ |= 1u << static_cast<int>(Var::w);
                    emit(Expression::Op::var_w);
                } else if (id == "theta" && allowed_.theta) {
                    out_.uses_mask_ |= 1u << static_cast<int>(Var::theta);
                    emit(Expression::Op::var_theta);
                } else {
                    pos_ = start;
                    fail("unknown or disallowed variable '" + std::string(id) + "'");
                }
                return;
            }
            struct Fn {
                std::string_view name;
                int arity;
                Expression::Op op;
            };
            static constexpr std::array<Fn, 6> fns{{{"exp", 1, Expression::Op::exp},
                                                    {"tanh", 1, Expression::Op::tanh},
                                                    {"sin", 1, Expression::Op::sin},
                                                    {"min", 2, Expression::Op::min},
                                                    {"max", 2, Expression::Op::max},
                                                    {"clamp", 3, Expression::Op::clamp}}};
            const auto it = std::find_if(fns.begin(), fns.end(), [&](const Fn& f) { return f.name == id; });
            if (it == fns.end()) {
                pos_ = start;
                fail("unknown function '" + std::string(id) + "'");
            }
            const int n = parse_args();
            if (n != it->arity) fail(std::string(id) + " takes " + std::to_string(it->arity) + " argument(s)");
            emit(it->op);
            return;
        }
        fail(std::string("unexpected '") + c + "'");
    }
};

Expression Expression::compile(std::string_view source, VarSet allowed) {
    Expression e;
    e.source_ = std::string(source);
    ExprParser(source, allowed, e).run();
    return e;
}

double Expression::eval(double t, double w, double theta) const noexcept {
    std::array<double, 66> st;
    int sp = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
        case Op::push: st[sp++] = in.value; break;
        case Op::var_t: st[sp++] = t; break;
        case Op::var_w: st[sp++] = w; break;
        case Op::var_theta: st[sp++] = theta; break;
        case Op::add: --sp; st[sp - 1] += st[sp]; break;
        case Op::sub: --sp; st[sp - 1] -= st[sp]; break;
        case Op::mul: --sp; st[sp - 1] *= st[sp]; break;
        case Op::div: --sp; st[sp - 1] /= st[sp]; break;
        case Op::neg: st[sp - 1] = -st[sp - 1]; break;
        case Op::exp: st[sp - 1] = std::exp(st[sp - 1]); break;
        case Op::tanh: st[sp - 1] = std::tanh(st[sp - 1]); break;
        case Op::sin: st[sp - 1] = std::sin(st[sp - 1]); break;
        case Op::min: --sp; st[sp - 1] = std::min(st[sp - 1], st[sp]); break;
        case Op::max: --sp; st[sp - 1] = std::max(st[sp - 1], st[sp]); break;
        case Op::clamp:
            sp -= 2;
            st[sp - 1] = std::clamp(st[sp - 1], st[sp], std::max(st[sp], st[sp + 1]));
            break;
        }
    }
    return sp == 1 ? st[0] : std::nan("");
}

} // namespace sdu
