#pragma once

#include "nom/field.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace nom {

/// Arithmetic expression over variables x1..xn, compiled to a postfix tape.
///
/// Grammar (usual precedence, '^' right-associative and binding tighter
/// than unary minus):
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := '-' unary | power
///   power  := atom ('^' unary)?
///   atom   := number | 'x'<index> | ('sin' | 'cos') '(' expr ')' | '(' expr ')'
///
/// Gradients come from a reverse sweep over the tape.
class Expression final : public ScalarField {
public:
    /// Throws Error with the offending position on a syntax error or a
    /// variable index outside 1..dim.
    static Expression parse(std::string_view text, std::size_t dim);

    std::size_t dim() const override { return dim_; }
    double value(std::span<const double> x) const override;
    double value_and_gradient(std::span<const double> x, std::span<double> grad) const override;
    std::string describe() const override { return text_; }
    const std::string& text() const { return text_; }

    enum class Op : unsigned char { constant, variable, add, sub, mul, div, pow, neg, sin, cos };
    struct Instr {
        Op op;
        std::size_t operand = 0; ///< variable index for Op::variable
        double constant = 0.0;   ///< literal for Op::constant
    };
    /// Compiled postfix program, for independent re-evaluation.
    const std::vector<Instr>& tape() const { return tape_; }

private:
    Expression() = default;
    friend class ExpressionParser;

    std::size_t dim_ = 0;
    std::string text_;
    std::vector<Instr> tape_;
};

FieldPtr make_expression(std::string_view text, std::size_t dim);

} // namespace nom
