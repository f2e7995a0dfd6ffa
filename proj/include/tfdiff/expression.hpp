#pragma once

// Small closed expression grammar for coefficient / source / initial-datum
// fields: arithmetic, '^' powers, sin, cos, exp, constant pi, variables
// x, y, t. Parsed once into a flat RPN program.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tfdiff {

struct ParseError : std::runtime_error {
    std::size_t column;
    ParseError(const std::string& msg, std::size_t col)
        : std::runtime_error(msg + " (column " + std::to_string(col + 1) + ")"), column(col) {}
};

class Expression {
public:
    Expression() { code_.push_back(Op::push_const); consts_.push_back(0.0); }

    static Expression parse(const std::string& text) {
        Parser p{text, 0};
        Expression e;
        e.code_.clear();
        e.consts_.clear();
        p.parse_expr(e);
        p.skip_ws();
        if (p.pos != text.size())
            throw ParseError("unexpected trailing input '" + text.substr(p.pos) + "'", p.pos);
        if (e.code_.empty()) throw ParseError("empty expression", 0);
        return e;
    }

    double operator()(double x, double y, double t) const {
        double stack[64];
        int sp = 0;
        std::size_t ci = 0;
        for (Op op : code_) {
            switch (op) {
                case Op::push_const: stack[sp++] = consts_[ci++]; break;
                case Op::push_x: stack[sp++] = x; break;
                case Op::push_y: stack[sp++] = y; break;
                case Op::push_t: stack[sp++] = t; break;
                case Op::add: --sp; stack[sp - 1] += stack[sp]; break;
                case Op::sub: --sp; stack[sp - 1] -= stack[sp]; break;
                case Op::mul: --sp; stack[sp - 1] *= stack[sp]; break;
                case Op::div: --sp; stack[sp - 1] /= stack[sp]; break;
                case Op::pow_op: --sp; stack[sp - 1] = std::pow(stack[sp - 1], stack[sp]); break;
                case Op::neg: stack[sp - 1] = -stack[sp - 1]; break;
                case Op::sin_fn: stack[sp - 1] = std::sin(stack[sp - 1]); break;
                case Op::cos_fn: stack[sp - 1] = std::cos(stack[sp - 1]); break;
                case Op::exp_fn: stack[sp - 1] = std::exp(stack[sp - 1]); break;
            }
        }
        return stack[0];
    }

    bool uses_variable(char v) const {
        const Op target = v == 'x' ? Op::push_x : v == 'y' ? Op::push_y : Op::push_t;
        for (Op op : code_)
            if (op == target) return true;
        return false;
    }

private:
    enum class Op : std::uint8_t {
        push_const, push_x, push_y, push_t,
        add, sub, mul, div, pow_op, neg,
        sin_fn, cos_fn, exp_fn
    };

    struct Parser {
        const std::string& text;
        std::size_t pos;

        void skip_ws() {
            while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        }
        bool accept(char c) {
            skip_ws();
            if (pos < text.size() && text[pos] == c) { ++pos; return true; }
            return false;
        }

        // expr := term (('+'|'-') term)*
        void parse_expr(Expression& e) {
            parse_term(e);
            while (true) {
                if (accept('+')) { parse_term(e); e.code_.push_back(Op::add); }
                else if (accept('-')) { parse_term(e); e.code_.push_back(Op::sub); }
                else break;
            }
        }
        // term := factor (('*'|'/') factor)*
        void parse_term(Expression& e) {
            parse_factor(e);
            while (true) {
                if (accept('*')) { parse_factor(e); e.code_.push_back(Op::mul); }
                else if (accept('/')) { parse_factor(e); e.code_.push_back(Op::div); }
                else break;
            }
        }
        // factor := '-' factor | primary ('^' factor)?
        // '^' is right-associative and binds tighter than unary minus
        void parse_factor(Expression& e) {
            if (accept('-')) {
                parse_factor(e);
                e.code_.push_back(Op::neg);
                return;
            }
            parse_primary(e);
            if (accept('^')) { parse_factor(e); e.code_.push_back(Op::pow_op); }
        }
        void parse_primary(Expression& e) {
            skip_ws();
            if (pos >= text.size()) throw ParseError("unexpected end of expression", pos);
            const char c = text[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(text.substr(pos), &used);
                } catch (const std::exception&) {
                    throw ParseError("invalid number", pos);
                }
                pos += used;
                e.code_.push_back(Op::push_const);
                e.consts_.push_back(v);
                return;
            }
            if (c == '(') {
                ++pos;
                parse_expr(e);
                if (!accept(')')) throw ParseError("expected ')'", pos);
                return;
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                const std::size_t start = pos;
                while (pos < text.size() &&
                       std::isalnum(static_cast<unsigned char>(text[pos])))
                    ++pos;
                const std::string name = text.substr(start, pos - start);
                if (name == "x") { e.code_.push_back(Op::push_x); return; }
                if (name == "y") { e.code_.push_back(Op::push_y); return; }
                if (name == "t") { e.code_.push_back(Op::push_t); return; }
                if (name == "pi") {
                    e.code_.push_back(Op::push_const);
                    e.consts_.push_back(3.14159265358979323846);
                    return;
                }
                if (name == "sin" || name == "cos" || name == "exp") {
                    if (!accept('(')) throw ParseError("expected '(' after " + name, pos);
                    parse_expr(e);
                    if (!accept(')')) throw ParseError("expected ')'", pos);
                    e.code_.push_back(name == "sin" ? Op::sin_fn
                                                    : name == "cos" ? Op::cos_fn : Op::exp_fn);
                    return;
                }
                throw ParseError("unknown identifier '" + name + "'", start);
            }
            throw ParseError(std::string("unexpected character '") + c + "'", pos);
        }
    };

    std::vector<Op> code_;
    std::vector<double> consts_;
};

}  // namespace tfdiff
