#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sdu {

// Variables an expression may reference.
enum class Var : std::uint8_t { t = 0, w = 1, theta = 2 };

struct VarSet {
    bool t = true;
    bool w = true;
    bool theta = false;
};

// Compiled arithmetic expression over {t, w, theta, constants, + - * /,
// exp, tanh, sin, min, max, clamp}. Evaluated by a small stack machine.
class Expression {
public:
    Expression() = default;

    // Throws ParseError (key "expr") on syntax errors or disallowed variables.
    static Expression compile(std::string_view source, VarSet allowed = {});

    double eval(double t, double w, double theta = 0.0) const noexcept;

    const std::string& source() const noexcept { return source_; }
    bool uses(Var v) const noexcept { return (uses_mask_ >> static_cast<int>(v)) & 1u; }
    bool is_constant() const noexcept { return uses_mask_ == 0; }

    enum class Op : std::uint8_t {
        push, var_t, var_w, var_theta, add, sub, mul, div, neg, exp, tanh, sin, min, max, clamp
    };
    struct Instr {
        Op op;
        double value;
    };

private:
    std::string source_;
    std::vector<Instr> code_;
    std::uint8_t uses_mask_ = 0;
    int max_depth_ = 0;

    friend class ExprParser;
};

} // namespace sdu
