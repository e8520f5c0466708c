#pragma once

#include "parametrix/core/types.hpp"

#include <cctype>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace parametrix {

/// Error raised while parsing a coefficient expression; `column` is 1-based.
class ExpressionError : public ArgumentError {
public:
    ExpressionError(const std::string& what, std::size_t column)
        : ArgumentError(what + " at column " + std::to_string(column)), column_(column) {}
    [[nodiscard]] std::size_t column() const { return column_; }

private:
    std::size_t column_;
};

// Grammar:
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | primary
//   primary:= number | 't' | 'x' index | func '(' expr (',' expr)? ')' | '(' expr ')'
//   func   := abs | exp | pow | min
class Expression {
public:
    Expression() = default;

    static Expression parse(std::string_view text, int dimension) {
        Parser parser{text, dimension};
        Expression e;
        e.root_ = parser.parse_all();
        e.source_ = std::string(text);
        return e;
    }

    [[nodiscard]] double operator()(double t, const Vec& x) const { return eval(*root_, t, x); }

    [[nodiscard]] const std::string& source() const { return source_; }
    [[nodiscard]] bool valid() const { return static_cast<bool>(root_); }

private:
    enum class Kind { constant, time, coord, neg, add, sub, mul, div, abs, exp, pow, min };

    struct Node {
        Kind kind;
        double value = 0.0;
        int index = 0;
        std::shared_ptr<const Node> lhs, rhs;
    };
    using NodePtr = std::shared_ptr<const Node>;

    static double eval(const Node& n, double t, const Vec& x) {
        switch (n.kind) {
            case Kind::constant: return n.value;
            case Kind::time: return t;
            case Kind::coord: return x[n.index];
            case Kind::neg: return -eval(*n.lhs, t, x);
            case Kind::add: return eval(*n.lhs, t, x) + eval(*n.rhs, t, x);
            case Kind::sub: return eval(*n.lhs, t, x) - eval(*n.rhs, t, x);
            case Kind::mul: return eval(*n.lhs, t, x) * eval(*n.rhs, t, x);
            case Kind::div: return eval(*n.lhs, t, x) / eval(*n.rhs, t, x);
            case Kind::abs: return std::abs(eval(*n.lhs, t, x));
            case Kind::exp: return std::exp(eval(*n.lhs, t, x));
            case Kind::pow: return std::pow(eval(*n.lhs, t, x), eval(*n.rhs, t, x));
            case Kind::min: return std::min(eval(*n.lhs, t, x), eval(*n.rhs, t, x));
        }
        return 0.0;
    }

    struct Parser {
        std::string_view s;
        int dim;
        std::size_t pos = 0;

        NodePtr parse_all() {
            NodePtr n = expr();
            skip();
            if (pos != s.size()) fail("unexpected character '" + std::string(1, s[pos]) + "'");
            return n;
        }

        [[noreturn]] void fail(const std::string& msg) const { throw ExpressionError(msg, pos + 1); }

        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }

        bool accept(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        void expect(char c) {
            if (!accept(c)) fail(std::string("expected '") + c + "'");
        }

        static NodePtr make(Kind k, NodePtr l = nullptr, NodePtr r = nullptr) {
            return std::make_shared<const Node>(Node{k, 0.0, 0, std::move(l), std::move(r)});
        }

        NodePtr expr() {
            NodePtr n = term();
            while (true) {
                if (accept('+')) n = make(Kind::add, n, term());
                else if (accept('-')) n = make(Kind::sub, n, term());
                else return n;
            }
        }

        NodePtr term() {
            NodePtr n = unary();
            while (true) {
                if (accept('*')) n = make(Kind::mul, n, unary());
                else if (accept('/')) n = make(Kind::div, n, unary());
                else return n;
            }
        }

        NodePtr unary() {
            if (accept('-')) return make(Kind::neg, unary());
            return primary();
        }

        NodePtr primary() {
            skip();
            if (pos >= s.size()) fail("unexpected end of expression");
            const char c = s[pos];
            if (accept('(')) {
                NodePtr n = expr();
                expect(')');
                return n;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
            if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
            fail(std::string("unexpected character '") + c + "'");
        }

        NodePtr number() {
            const std::size_t start = pos;
            while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.')) ++pos;
            if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
                ++pos;
                if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
                while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
            }
            const std::string token(s.substr(start, pos - start));
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(token, &used);
            } catch (const std::exception&) {
                pos = start;
                fail("malformed number '" + token + "'");
            }
            if (used != token.size()) {
                pos = start;
                fail("malformed number '" + token + "'");
            }
            auto node = std::make_shared<Node>(Node{Kind::constant});
            node->value = v;
            return node;
        }

        NodePtr identifier() {
            const std::size_t start = pos;
            while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
            const std::string name(s.substr(start, pos - start));
            if (name == "t") return make(Kind::time);
            if (name.size() > 1 && name[0] == 'x' &&
                name.find_first_not_of("0123456789", 1) == std::string::npos) {
                const int i = std::stoi(name.substr(1));
                if (i < 1 || i > dim) {
                    pos = start;
                    fail("variable " + name + " out of range for dimension " + std::to_string(dim));
                }
                auto node = std::make_shared<Node>(Node{Kind::coord});
                node->index = i - 1;
                return node;
            }
            Kind k;
            int arity = 1;
            if (name == "abs") k = Kind::abs;
            else if (name == "exp") k = Kind::exp;
            else if (name == "pow") { k = Kind::pow; arity = 2; }
            else if (name == "min") { k = Kind::min; arity = 2; }
            else {
                pos = start;
                fail("unknown identifier '" + name + "'");
            }
            expect('(');
            NodePtr a = expr();
            NodePtr b;
            if (arity == 2) {
                expect(',');
                b = expr();
            }
            expect(')');
            return make(k, a, b);
        }
    };

    NodePtr root_;
    std::string source_;
};

}  // namespace parametrix
