#pragma once

#include <map>
#include <string>
#include <vector>

#include "dexkit/linalg.hpp"
#include "dexkit/rng.hpp"

namespace dexkit::dsl {

enum class ParseErrorKind { syntax, unknown_symbol, type_mismatch, index_out_of_range };

std::string to_string(ParseErrorKind k);

class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, size_t position, const std::string& message);

    ParseErrorKind kind;
    size_t position;  // 0-based character offset into the source
};

enum class ValueType { scalar, vector3 };

enum class NodeKind {
    number,         // literal
    tip,            // tip(i) -> vector3
    tip_component,  // tip(i).x|y|z -> scalar
    vec_literal,    // [a, b, c] -> vector3
    add,
    sub,
    mul,
    neg,
    norm,  // norm(vector) -> scalar
    dot,   // dot(vector, vector) -> scalar
    mean   // mean(scalar, ...) -> scalar
};

struct Node {
    NodeKind kind = NodeKind::number;
    ValueType type = ValueType::scalar;
    double number = 0.0;
    int tip_index = 0;
    int axis = 0;  // tip_component: 0=x 1=y 2=z
    double vec[3] = {0.0, 0.0, 0.0};
    std::vector<Node> children;
};

bool nodes_equal(const Node& a, const Node& b);

// Cost expression over fingertip positions of one hand.
struct CostProgram {
    Node root;  // always scalar-typed
    std::string source;
    int num_fingers = 0;
    std::map<std::string, int> finger_roles;  // optional semantic map (thumb, index, ...)
};

// Grammar:
//   expr    := term (('+'|'-') term)*
//   term    := unary ('*' unary)*
//   unary   := '-' unary | primary
//   primary := NUMBER | tip(INT)['.'x|y|z] | '[' num ',' num ',' num ']'
//            | neg(expr) | norm(vec) | dot(vec, vec) | mean(scalar, ...)
//            | '(' expr ')'
// '+','-' need both sides of one type; '*' needs at least one scalar side.
CostProgram parse_cost(const std::string& text, int num_fingers);

// Deterministic scalar value of the program at the given fingertip layout
// (3 values per finger). Throws NumericError on non-finite inputs.
double eval_cost(const CostProgram& program, std::span<const double> fingertips);

// Canonical text form; parse(print(p)) reproduces the tree exactly.
std::string print_program(const Node& node);
std::string print_program(const CostProgram& program);

// Shortest decimal representation that round-trips through strtod.
std::string format_number(double v);

// Random well-typed scalar program (for fuzzing).
Node random_program(Rng& rng, int num_fingers, int max_depth);

}  // namespace dexkit::dsl
