#include "dexkit/dsl.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace dexkit::dsl {

std::string to_string(ParseErrorKind k) {
    switch (k) {
        case ParseErrorKind::syntax: return "syntax";
        case ParseErrorKind::unknown_symbol: return "unknown symbol";
        case ParseErrorKind::type_mismatch: return "type mismatch";
        case ParseErrorKind::index_out_of_range: return "index out of range";
    }
    return "syntax";
}

ParseError::ParseError(ParseErrorKind k, size_t pos, const std::string& message)
    : Error(to_string(k) + " at position " + std::to_string(pos) + ": " + message),
      kind(k),
      position(pos) {}

namespace {

enum class TokenKind { number, ident, lparen, rparen, lbracket, rbracket, comma, plus, minus, star, dot, end };

struct Token {
    TokenKind kind = TokenKind::end;
    size_t position = 0;
    double number = 0.0;
    std::string text;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        Token t;
        t.position = pos_;
        if (pos_ >= src_.size()) return t;
        const char c = src_[pos_];
        switch (c) {
            case '(': t.kind = TokenKind::lparen; ++pos_; return t;
            case ')': t.kind = TokenKind::rparen; ++pos_; return t;
            case '[': t.kind = TokenKind::lbracket; ++pos_; return t;
            case ']': t.kind = TokenKind::rbracket; ++pos_; return t;
            case ',': t.kind = TokenKind::comma; ++pos_; return t;
            case '+': t.kind = TokenKind::plus; ++pos_; return t;
            case '-': t.kind = TokenKind::minus; ++pos_; return t;
            case '*': t.kind = TokenKind::star; ++pos_; return t;
            case '.':
                if (pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))
                    break;  // number like .5
                t.kind = TokenKind::dot;
                ++pos_;
                return t;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            char* end = nullptr;
            t.number = std::strtod(src_.c_str() + pos_, &end);
            if (end == src_.c_str() + pos_)
                throw ParseError(ParseErrorKind::syntax, pos_, "malformed number");
            t.kind = TokenKind::number;
            t.text = src_.substr(pos_, static_cast<size_t>(end - src_.c_str() - static_cast<long>(pos_)));
            pos_ = static_cast<size_t>(end - src_.c_str());
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            t.kind = TokenKind::ident;
            t.text = src_.substr(start, pos_ - start);
            return t;
        }
        throw ParseError(ParseErrorKind::syntax, pos_, std::string("unexpected character '") + c + "'");
    }

private:
    const std::string& src_;
    size_t pos_ = 0;
};

class Parser {
public:
    Parser(const std::string& src, int num_fingers)
        : lexer_(src), num_fingers_(num_fingers) {
        advance();
    }

    Node parse() {
        Node root = expr();
        if (current_.kind != TokenKind::end)
            throw ParseError(ParseErrorKind::syntax, current_.position, "trailing input");
        if (root.type != ValueType::scalar)
            throw ParseError(ParseErrorKind::type_mismatch, 0, "program must evaluate to a scalar");
        return root;
    }

private:
    void advance() { current_ = lexer_.next(); }

    Token expect(TokenKind kind, const char* what) {
        if (current_.kind != kind)
            throw ParseError(ParseErrorKind::syntax, current_.position, std::string("expected ") + what);
        Token t = current_;
        advance();
        return t;
    }

    Node expr() {
        Node lhs = term();
        while (current_.kind == TokenKind::plus || current_.kind == TokenKind::minus) {
            const bool plus = current_.kind == TokenKind::plus;
            const size_t op_pos = current_.position;
            advance();
            Node rhs = term();
            if (lhs.type != rhs.type)
                throw ParseError(ParseErrorKind::type_mismatch, op_pos,
                                 "'+'/'-' operands must share one type");
            Node n;
            n.kind = plus ? NodeKind::add : NodeKind::sub;
            n.type = lhs.type;
            n.children.push_back(std::move(lhs));
            n.children.push_back(std::move(rhs));
            lhs = std::move(n);
        }
        return lhs;
    }

    Node term() {
        Node lhs = unary();
        while (current_.kind == TokenKind::star) {
            const size_t op_pos = current_.position;
            advance();
            Node rhs = unary();
            if (lhs.type == ValueType::vector3 && rhs.type == ValueType::vector3)
                throw ParseError(ParseErrorKind::type_mismatch, op_pos,
                                 "'*' needs at least one scalar operand");
            Node n;
            n.kind = NodeKind::mul;
            n.type = (lhs.type == ValueType::vector3 || rhs.type == ValueType::vector3)
                         ? ValueType::vector3
                         : ValueType::scalar;
            n.children.push_back(std::move(lhs));
            n.children.push_back(std::move(rhs));
            lhs = std::move(n);
        }
        return lhs;
    }

    Node unary() {
        if (current_.kind == TokenKind::minus) {
            advance();
            Node operand = unary();
            Node n;
            n.kind = NodeKind::neg;
            n.type = operand.type;
            n.children.push_back(std::move(operand));
            return n;
        }
        return primary();
    }

    Node primary() {
        switch (current_.kind) {
            case TokenKind::number: {
                Node n;
                n.kind = NodeKind::number;
                n.type = ValueType::scalar;
                n.number = current_.number;
                advance();
                return n;
            }
            case TokenKind::lparen: {
                advance();
                Node inner = expr();
                expect(TokenKind::rparen, "')'");
                return inner;
            }
            case TokenKind::lbracket: return vec_literal();
            case TokenKind::ident: return call();
            default:
                throw ParseError(ParseErrorKind::syntax, current_.position, "expected an expression");
        }
    }

    double signed_number() {
        double sign = 1.0;
        if (current_.kind == TokenKind::minus) {
            sign = -1.0;
            advance();
        }
        const Token t = expect(TokenKind::number, "a number");
        return sign * t.number;
    }

    Node vec_literal() {
        expect(TokenKind::lbracket, "'['");
        Node n;
        n.kind = NodeKind::vec_literal;
        n.type = ValueType::vector3;
        n.vec[0] = signed_number();
        expect(TokenKind::comma, "','");
        n.vec[1] = signed_number();
        expect(TokenKind::comma, "','");
        n.vec[2] = signed_number();
        expect(TokenKind::rbracket, "']'");
        return n;
    }

    Node call() {
        const Token name = expect(TokenKind::ident, "an identifier");
        if (name.text == "tip") return tip_ref(name.position);
        if (name.text == "neg") {
            auto args = arguments(name.position, 1, 1);
            Node n;
            n.kind = NodeKind::neg;
            n.type = args[0].type;
            n.children = std::move(args);
            return n;
        }
        if (name.text == "norm") {
            auto args = arguments(name.position, 1, 1);
            if (args[0].type != ValueType::vector3)
                throw ParseError(ParseErrorKind::type_mismatch, name.position,
                                 "norm expects a vector argument");
            Node n;
            n.kind = NodeKind::norm;
            n.type = ValueType::scalar;
            n.children = std::move(args);
            return n;
        }
        if (name.text == "dot") {
            auto args = arguments(name.position, 2, 2);
            if (args[0].type != ValueType::vector3 || args[1].type != ValueType::vector3)
                throw ParseError(ParseErrorKind::type_mismatch, name.position,
                                 "dot expects two vector arguments");
            Node n;
            n.kind = NodeKind::dot;
            n.type = ValueType::scalar;
            n.children = std::move(args);
            return n;
        }
        if (name.text == "mean") {
            auto args = arguments(name.position, 1, -1);
            for (const Node& a : args)
                if (a.type != ValueType::scalar)
                    throw ParseError(ParseErrorKind::type_mismatch, name.position,
                                     "mean expects scalar arguments");
            Node n;
            n.kind = NodeKind::mean;
            n.type = ValueType::scalar;
            n.children = std::move(args);
            return n;
        }
        throw ParseError(ParseErrorKind::unknown_symbol, name.position,
                         "unknown function '" + name.text + "'");
    }

    Node tip_ref(size_t name_pos) {
        expect(TokenKind::lparen, "'('");
        const Token index = expect(TokenKind::number, "a finger index");
        const double raw = index.number;
        if (raw != std::floor(raw))
            throw ParseError(ParseErrorKind::syntax, index.position, "finger index must be an integer");
        const int i = static_cast<int>(raw);
        if (i < 0 || i >= num_fingers_)
            throw ParseError(ParseErrorKind::index_out_of_range, index.position,
                             "tip(" + std::to_string(i) + ") on a " + std::to_string(num_fingers_) +
                                 "-finger hand");
        expect(TokenKind::rparen, "')'");
        Node n;
        n.tip_index = i;
        if (current_.kind == TokenKind::dot) {
            advance();
            const Token axis = expect(TokenKind::ident, "x, y or z");
            if (axis.text != "x" && axis.text != "y" && axis.text != "z")
                throw ParseError(ParseErrorKind::unknown_symbol, axis.position,
                                 "unknown component '" + axis.text + "'");
            n.kind = NodeKind::tip_component;
            n.type = ValueType::scalar;
            n.axis = axis.text == "x" ? 0 : (axis.text == "y" ? 1 : 2);
        } else {
            n.kind = NodeKind::tip;
            n.type = ValueType::vector3;
        }
        (void)name_pos;
        return n;
    }

    std::vector<Node> arguments(size_t name_pos, int min_args, int max_args) {
        expect(TokenKind::lparen, "'('");
        std::vector<Node> args;
        if (current_.kind != TokenKind::rparen) {
            args.push_back(expr());
            while (current_.kind == TokenKind::comma) {
                advance();
                args.push_back(expr());
            }
        }
        expect(TokenKind::rparen, "')'");
        if (static_cast<int>(args.size()) < min_args ||
            (max_args >= 0 && static_cast<int>(args.size()) > max_args))
            throw ParseError(ParseErrorKind::syntax, name_pos, "wrong number of arguments");
        return args;
    }

    Lexer lexer_;
    Token current_;
    int num_fingers_;
};

struct Value {
    ValueType type = ValueType::scalar;
    double s = 0.0;
    double v[3] = {0.0, 0.0, 0.0};
};

Value eval_node(const Node& n, std::span<const double> tips) {
    Value out;
    out.type = n.type;
    switch (n.kind) {
        case NodeKind::number: out.s = n.number; return out;
        case NodeKind::tip:
            for (int c = 0; c < 3; ++c) out.v[c] = tips[static_cast<size_t>(3 * n.tip_index + c)];
            return out;
        case NodeKind::tip_component:
            out.s = tips[static_cast<size_t>(3 * n.tip_index + n.axis)];
            return out;
        case NodeKind::vec_literal:
            for (int c = 0; c < 3; ++c) out.v[c] = n.vec[c];
            return out;
        case NodeKind::add:
        case NodeKind::sub: {
            const Value a = eval_node(n.children[0], tips);
            const Value b = eval_node(n.children[1], tips);
            const double sign = n.kind == NodeKind::add ? 1.0 : -1.0;
            if (out.type == ValueType::scalar)
                out.s = a.s + sign * b.s;
            else
                for (int c = 0; c < 3; ++c) out.v[c] = a.v[c] + sign * b.v[c];
            return out;
        }
        case NodeKind::mul: {
            const Value a = eval_node(n.children[0], tips);
            const Value b = eval_node(n.children[1], tips);
            if (out.type == ValueType::scalar) {
                out.s = a.s * b.s;
            } else {
                const double scale = a.type == ValueType::scalar ? a.s : b.s;
                const double* vec = a.type == ValueType::vector3 ? a.v : b.v;
                for (int c = 0; c < 3; ++c) out.v[c] = scale * vec[c];
            }
            return out;
        }
        case NodeKind::neg: {
            const Value a = eval_node(n.children[0], tips);
            if (out.type == ValueType::scalar)
                out.s = -a.s;
            else
                for (int c = 0; c < 3; ++c) out.v[c] = -a.v[c];
            return out;
        }
        case NodeKind::norm: {
            const Value a = eval_node(n.children[0], tips);
            out.s = std::sqrt(a.v[0] * a.v[0] + a.v[1] * a.v[1] + a.v[2] * a.v[2]);
            return out;
        }
        case NodeKind::dot: {
            const Value a = eval_node(n.children[0], tips);
            const Value b = eval_node(n.children[1], tips);
            out.s = a.v[0] * b.v[0] + a.v[1] * b.v[1] + a.v[2] * b.v[2];
            return out;
        }
        case NodeKind::mean: {
            double sum = 0.0;
            for (const Node& c : n.children) sum += eval_node(c, tips).s;
            out.s = sum / static_cast<double>(n.children.size());
            return out;
        }
    }
    throw Error("eval_cost: unreachable node kind");
}

int precedence(NodeKind k) {
    switch (k) {
        case NodeKind::add:
        case NodeKind::sub: return 1;
        case NodeKind::mul: return 2;
        default: return 3;
    }
}

void print_node(const Node& n, std::string& out) {
    auto child = [&](const Node& c, bool needs_paren) {
        if (needs_paren) out += '(';
        print_node(c, out);
        if (needs_paren) out += ')';
    };
    switch (n.kind) {
        case NodeKind::number:
            // the parser only yields non-negative literals (unary minus
            // becomes a neg node), so normalize hand-built negatives
            if (n.number < 0.0) {
                out += "neg(" + format_number(-n.number) + ")";
            } else {
                out += format_number(n.number);
            }
            return;
        case NodeKind::tip:
            out += "tip(" + std::to_string(n.tip_index) + ")";
            return;
        case NodeKind::tip_component:
            out += "tip(" + std::to_string(n.tip_index) + ").";
            out += n.axis == 0 ? 'x' : (n.axis == 1 ? 'y' : 'z');
            return;
        case NodeKind::vec_literal:
            out += '[';
            out += format_number(n.vec[0]) + ", " + format_number(n.vec[1]) + ", " +
                   format_number(n.vec[2]);
            out += ']';
            return;
        case NodeKind::add:
        case NodeKind::sub: {
            child(n.children[0], precedence(n.children[0].kind) < 1);
            out += n.kind == NodeKind::add ? " + " : " - ";
            // subtraction is left-associative: parenthesize +/- on the right
            child(n.children[1], precedence(n.children[1].kind) <= 1);
            return;
        }
        case NodeKind::mul: {
            child(n.children[0], precedence(n.children[0].kind) < 2);
            out += " * ";
            child(n.children[1], precedence(n.children[1].kind) <= 2);
            return;
        }
        case NodeKind::neg:
            out += "neg(";
            print_node(n.children[0], out);
            out += ')';
            return;
        case NodeKind::norm:
            out += "norm(";
            print_node(n.children[0], out);
            out += ')';
            return;
        case NodeKind::dot:
            out += "dot(";
            print_node(n.children[0], out);
            out += ", ";
            print_node(n.children[1], out);
            out += ')';
            return;
        case NodeKind::mean: {
            out += "mean(";
            for (size_t i = 0; i < n.children.size(); ++i) {
                if (i > 0) out += ", ";
                print_node(n.children[i], out);
            }
            out += ')';
            return;
        }
    }
}

}  // namespace

bool nodes_equal(const Node& a, const Node& b) {
    if (a.kind != b.kind || a.type != b.type) return false;
    switch (a.kind) {
        case NodeKind::number:
            if (a.number != b.number) return false;
            break;
        case NodeKind::tip:
        case NodeKind::tip_component:
            if (a.tip_index != b.tip_index || a.axis != b.axis) return false;
            break;
        case NodeKind::vec_literal:
            for (int c = 0; c < 3; ++c)
                if (a.vec[c] != b.vec[c]) return false;
            break;
        default: break;
    }
    if (a.children.size() != b.children.size()) return false;
    for (size_t i = 0; i < a.children.size(); ++i)
        if (!nodes_equal(a.children[i], b.children[i])) return false;
    return true;
}

CostProgram parse_cost(const std::string& text, int num_fingers) {
    if (num_fingers <= 0) throw ConfigError("parse_cost: num_fingers must be positive");
    CostProgram program;
    program.source = text;
    program.num_fingers = num_fingers;
    Parser parser(text, num_fingers);
    program.root = parser.parse();
    return program;
}

double eval_cost(const CostProgram& program, std::span<const double> fingertips) {
    if (static_cast<int>(fingertips.size()) != 3 * program.num_fingers)
        throw ShapeError("eval_cost: expected " + std::to_string(3 * program.num_fingers) +
                         " fingertip coordinates");
    if (!all_finite(fingertips)) throw NumericError("eval_cost: non-finite fingertip input");
    return eval_node(program.root, fingertips).s;
}

std::string format_number(double v) {
    // integers print plainly, everything else as the shortest decimal form
    // that parses back to the same double
    if (v == std::floor(v) && std::fabs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    for (int precision = 1; precision <= 17; ++precision) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return "0";
}

std::string print_program(const Node& node) {
    std::string out;
    print_node(node, out);
    return out;
}

std::string print_program(const CostProgram& program) { return print_program(program.root); }

namespace {

Node random_typed(Rng& rng, int num_fingers, int depth, ValueType want) {
    Node n;
    n.type = want;
    const bool leaf = depth <= 0 || rng.uniform01() < 0.3;
    if (want == ValueType::scalar) {
        if (leaf) {
            if (rng.uniform01() < 0.5) {
                n.kind = NodeKind::number;
                n.number = std::fabs(std::round(rng.uniform(-8.0, 8.0) * 16.0) / 16.0);
            } else {
                n.kind = NodeKind::tip_component;
                n.tip_index = rng.uniform_int(num_fingers);
                n.axis = rng.uniform_int(3);
            }
            return n;
        }
        switch (rng.uniform_int(6)) {
            case 0:
            case 1: {
                n.kind = rng.uniform01() < 0.5 ? NodeKind::add : NodeKind::sub;
                n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::scalar));
                n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::scalar));
                return n;
            }
            case 2: {
                n.kind = NodeKind::mul;
                n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::scalar));
                n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::scalar));
                return n;
            }
            case 3: {
                n.kind = NodeKind::norm;
                n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::vector3));
                return n;
            }
            case 4: {
                n.kind = NodeKind::dot;
                n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::vector3));
                n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::vector3));
                return n;
            }
            default: {
                n.kind = NodeKind::mean;
                const int args = 1 + rng.uniform_int(3);
                for (int i = 0; i < args; ++i)
                    n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::scalar));
                return n;
            }
        }
    }
    if (leaf) {
        if (rng.uniform01() < 0.6) {
            n.kind = NodeKind::tip;
            n.tip_index = rng.uniform_int(num_fingers);
        } else {
            n.kind = NodeKind::vec_literal;
            for (int c = 0; c < 3; ++c) n.vec[c] = std::round(rng.uniform(-2.0, 2.0) * 16.0) / 16.0;
        }
        return n;
    }
    switch (rng.uniform_int(4)) {
        case 0: {
            n.kind = rng.uniform01() < 0.5 ? NodeKind::add : NodeKind::sub;
            n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::vector3));
            n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::vector3));
            return n;
        }
        case 1: {
            n.kind = NodeKind::mul;
            n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::vector3));
            n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::scalar));
            return n;
        }
        case 2: {
            n.kind = NodeKind::neg;
            n.children.push_back(random_typed(rng, num_fingers, depth - 1, ValueType::vector3));
            return n;
        }
        default: {
            n.kind = NodeKind::tip;
            n.tip_index = rng.uniform_int(num_fingers);
            return n;
        }
    }
}

}  // namespace

Node random_program(Rng& rng, int num_fingers, int max_depth) {
    return random_typed(rng, num_fingers, max_depth, ValueType::scalar);
}

}  // namespace dexkit::dsl
