#include "nom/expr.hpp"

#include "nom/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

namespace nom {

class ExpressionParser {
public:
    ExpressionParser(std::string_view text, std::size_t dim) : text_(text), dim_(dim) {}

    Expression run()
    {
        Expression e;
        e.dim_ = dim_;
        e.text_ = std::string(text_);
        tape_ = &e.tape_;
        expr();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    using Op = Expression::Op;

    [[noreturn]] void fail(const std::string& what) const
    {
        throw Error("expression '" + std::string(text_) + "': " + what + " at position " +
                    std::to_string(pos_));
    }

    void skip_space()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c)
    {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    void emit(Op op) { tape_->push_back({op, 0, 0.0}); }

    void expr()
    {
        term();
        for (;;) {
            if (accept('+')) {
                term();
                emit(Op::add);
            } else if (accept('-')) {
                term();
                emit(Op::sub);
            } else {
                return;
            }
        }
    }

    void term()
    {
        unary();
        for (;;) {
            if (accept('*')) {
                unary();
                emit(Op::mul);
            } else if (accept('/')) {
                unary();
                emit(Op::div);
            } else {
                return;
            }
        }
    }

    void unary()
    {
        if (accept('-')) {
            unary();
            emit(Op::neg);
        } else if (accept('+')) {
            unary();
        } else {
            power();
        }
    }

    void power()
    {
        atom();
        if (accept('^')) {
            unary();
            emit(Op::pow);
        }
    }

    void atom()
    {
        skip_space();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            expr();
            expect(')');
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            const std::string_view word = text_.substr(start, pos_ - start);
            if (word == "x") {
                variable();
                return;
            }
            if (word == "sin" || word == "cos") {
                expect('(');
                expr();
                expect(')');
                emit(word == "sin" ? Op::sin : Op::cos);
                return;
            }
            pos_ = start;
            fail("unknown identifier '" + std::string(word) + "'");
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    void number()
    {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
            ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
            if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
                pos_ = p;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                    ++pos_;
                }
            }
        }
        double v = 0.0;
        const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
        if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
            pos_ = start;
            fail("malformed number");
        }
        tape_->push_back({Op::constant, 0, v});
    }

    void variable()
    {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        std::size_t index = 0;
        const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, index);
        if (res.ec != std::errc() || start == pos_) fail("expected variable index after 'x'");
        if (index == 0 || index > dim_) {
            fail("variable x" + std::to_string(index) + " outside x1..x" + std::to_string(dim_));
        }
        tape_->push_back({Op::variable, index - 1, 0.0});
    }

    std::string_view text_;
    std::size_t dim_;
    std::size_t pos_ = 0;
    std::vector<Expression::Instr>* tape_ = nullptr;
};

Expression Expression::parse(std::string_view text, std::size_t dim)
{
    if (dim == 0) throw Error("expression: dimension must be positive");
    return ExpressionParser(text, dim).run();
}

double Expression::value(std::span<const double> x) const
{
    double stack[64] = {};
    std::vector<double> heap;
    double* s = stack;
    if (tape_.size() > 64) {
        heap.resize(tape_.size());
        s = heap.data();
    }
    std::size_t top = 0;
    for (const Instr& in : tape_) {
        switch (in.op) {
        case Op::constant: s[top++] = in.constant; break;
        case Op::variable: s[top++] = x[in.operand]; break;
        case Op::add: --top; s[top - 1] += s[top]; break;
        case Op::sub: --top; s[top - 1] -= s[top]; break;
        case Op::mul: --top; s[top - 1] *= s[top]; break;
        case Op::div: --top; s[top - 1] /= s[top]; break;
        case Op::pow: --top; s[top - 1] = std::pow(s[top - 1], s[top]); break;
        case Op::neg: s[top - 1] = -s[top - 1]; break;
        case Op::sin: s[top - 1] = std::sin(s[top - 1]); break;
        case Op::cos: s[top - 1] = std::cos(s[top - 1]); break;
        }
    }
    return s[0];
}

double Expression::value_and_gradient(std::span<const double> x, std::span<double> grad) const
{
    // Forward sweep recording every node's value and the tape positions of
    // its operands, then a reverse sweep accumulating adjoints.
    const std::size_t n = tape_.size();
    std::vector<double> val(n), adj(n, 0.0);
    std::vector<std::size_t> lhs(n, 0), rhs(n, 0);
    std::vector<std::size_t> stack;
    stack.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Instr& in = tape_[i];
        switch (in.op) {
        case Op::constant: val[i] = in.constant; break;
        case Op::variable: val[i] = x[in.operand]; break;
        case Op::neg:
        case Op::sin:
        case Op::cos: {
            lhs[i] = stack.back();
            stack.pop_back();
            const double a = val[lhs[i]];
            val[i] = in.op == Op::neg ? -a : in.op == Op::sin ? std::sin(a) : std::cos(a);
            break;
        }
        default: {
            rhs[i] = stack.back();
            stack.pop_back();
            lhs[i] = stack.back();
            stack.pop_back();
            const double a = val[lhs[i]], b = val[rhs[i]];
            switch (in.op) {
            case Op::add: val[i] = a + b; break;
            case Op::sub: val[i] = a - b; break;
            case Op::mul: val[i] = a * b; break;
            case Op::div: val[i] = a / b; break;
            default: val[i] = std::pow(a, b); break;
            }
        }
        }
        stack.push_back(i);
    }

    std::fill(grad.begin(), grad.end(), 0.0);
    adj[n - 1] = 1.0;
    for (std::size_t i = n; i-- > 0;) {
        const double g = adj[i];
        if (g == 0.0) continue;
        const Instr& in = tape_[i];
        switch (in.op) {
        case Op::constant: break;
        case Op::variable: grad[in.operand] += g; break;
        case Op::neg: adj[lhs[i]] -= g; break;
        case Op::sin: adj[lhs[i]] += g * std::cos(val[lhs[i]]); break;
        case Op::cos: adj[lhs[i]] -= g * std::sin(val[lhs[i]]); break;
        case Op::add:
            adj[lhs[i]] += g;
            adj[rhs[i]] += g;
            break;
        case Op::sub:
            adj[lhs[i]] += g;
            adj[rhs[i]] -= g;
            break;
        case Op::mul:
            adj[lhs[i]] += g * val[rhs[i]];
            adj[rhs[i]] += g * val[lhs[i]];
            break;
        case Op::div: {
            const double b = val[rhs[i]];
            adj[lhs[i]] += g / b;
            adj[rhs[i]] -= g * val[lhs[i]] / (b * b);
            break;
        }
        case Op::pow: {
            const double a = val[lhs[i]], b = val[rhs[i]];
            adj[lhs[i]] += g * b * std::pow(a, b - 1.0);
            // d/db a^b = a^b ln a, only defined for a > 0; a constant
            // exponent never carries an adjoint anyway.
            if (a > 0.0) adj[rhs[i]] += g * val[i] * std::log(a);
            break;
        }
        }
    }
    return val[n - 1];
}

FieldPtr make_expression(std::string_view text, std::size_t dim)
{
    return std::make_shared<const Expression>(Expression::parse(text, dim));
}

} // namespace nom
