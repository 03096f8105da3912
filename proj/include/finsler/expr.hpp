#pragma once

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"

namespace finsler {

enum class UnaryFn { neg, sqrt_fn, exp_fn, log_fn, sin_fn, cos_fn, tanh_fn, abs_fn };
enum class BinaryOp { add, sub, mul, div, pow };

// One node of the expression tree; nodes live in the ExprAst arena and refer
// to children by index.
struct ExprNode {
  enum class Kind { constant, variable, unary, binary };
  Kind kind = Kind::constant;
  double constant = 0.0;
  bool var_is_y = false;
  int var_index = 0;
  UnaryFn fn = UnaryFn::neg;
  BinaryOp op = BinaryOp::add;
  int child0 = -1;
  int child1 = -1;
  std::size_t offset = 0;  // byte offset in the source text
};

class ExprAst;
ExprAst parse(std::string_view text, int dimension);

namespace detail {
class Parser;
}

/// Immutable expression over coordinates x0..x{n-1}, y0..y{n-1}, evaluable
/// generically over the numeric tower.
class ExprAst {
public:
  int dimension() const { return dimension_; }
  const std::vector<ExprNode>& nodes() const { return nodes_; }
  int root() const { return root_; }

  template <class S>
  S evaluate(std::span<const S> x, std::span<const S> y) const {
    if (static_cast<int>(x.size()) < dimension_ && uses_x_)
      throw EvalError(0, "missing x bindings");
    if (static_cast<int>(y.size()) < dimension_ && uses_y_)
      throw EvalError(0, "missing y bindings");
    return eval_node<S>(root_, x, y);
  }

  std::set<std::string> free_vars() const {
    std::set<std::string> out;
    for (const auto& n : nodes_)
      if (n.kind == ExprNode::Kind::variable)
        out.insert((n.var_is_y ? "y" : "x") + std::to_string(n.var_index));
    return out;
  }

  bool depends_on_y() const {
    for (const auto& n : nodes_)
      if (n.kind == ExprNode::Kind::variable && n.var_is_y) return true;
    return false;
  }

  std::string pretty_print() const { return print_node(root_, 0); }

  friend bool structural_equal(const ExprAst& a, const ExprAst& b) {
    return a.dimension_ == b.dimension_ && a.equal_nodes(a.root_, b, b.root_);
  }

private:
  friend class detail::Parser;

  std::vector<ExprNode> nodes_;
  int root_ = -1;
  int dimension_ = 0;
  bool uses_x_ = false;
  bool uses_y_ = false;

  template <class S>
  S eval_node(int idx, std::span<const S> x, std::span<const S> y) const {
    const ExprNode& n = nodes_[idx];
    switch (n.kind) {
      case ExprNode::Kind::constant: {
        if (x.size())
          return tower_constant_like(n.constant, x[0]);
        if (y.size())
          return tower_constant_like(n.constant, y[0]);
        if constexpr (std::is_same_v<S, double>)
          return n.constant;
        else
          throw EvalError(n.offset, "constant expression needs a binding to shape the tower");
      }
      case ExprNode::Kind::variable: {
        const auto& src = n.var_is_y ? y : x;
        return src[static_cast<std::size_t>(n.var_index)];
      }
      case ExprNode::Kind::unary: {
        S a = eval_node<S>(n.child0, x, y);
        S r = apply_unary(n, a);
        check_node(n, r);
        return r;
      }
      case ExprNode::Kind::binary: {
        S a = eval_node<S>(n.child0, x, y);
        if (n.op == BinaryOp::pow) {
          double e = nodes_[n.child1].constant;
          double base = tower_value(a);
          if (base < 0.0 && e != std::floor(e))
            throw EvalError(n.offset, "pow of negative base with non-integer exponent");
          if (base == 0.0 && e < 0.0)
            throw EvalError(n.offset, "pow of zero with negative exponent");
          using std::pow;
          S r = pow(a, e);
          check_node(n, r);
          return r;
        }
        S b = eval_node<S>(n.child1, x, y);
        S r{};
        switch (n.op) {
          case BinaryOp::add: r = a + b; break;
          case BinaryOp::sub: r = a - b; break;
          case BinaryOp::mul: r = a * b; break;
          case BinaryOp::div:
            if (tower_value(b) == 0.0) throw EvalError(n.offset, "division by zero");
            r = a / b;
            break;
          case BinaryOp::pow: break;  // handled above
        }
        check_node(n, r);
        return r;
      }
    }
    throw EvalError(n.offset, "corrupt expression node");
  }

  template <class S>
  static S apply_unary(const ExprNode& n, const S& a) {
    using std::abs;
    using std::cos;
    using std::exp;
    using std::log;
    using std::sin;
    using std::sqrt;
    using std::tanh;
    switch (n.fn) {
      case UnaryFn::neg: return -a;
      case UnaryFn::sqrt_fn:
        if (tower_value(a) < 0.0) throw EvalError(n.offset, "sqrt of negative value");
        return sqrt(a);
      case UnaryFn::exp_fn: return exp(a);
      case UnaryFn::log_fn:
        if (tower_value(a) <= 0.0) throw EvalError(n.offset, "log of non-positive value");
        return log(a);
      case UnaryFn::sin_fn: return sin(a);
      case UnaryFn::cos_fn: return cos(a);
      case UnaryFn::tanh_fn: return tanh(a);
      case UnaryFn::abs_fn:
        try {
          return abs(a);
        } catch (const DomainError&) {
          throw EvalError(n.offset, "abs differentiated at 0");
        }
    }
    throw EvalError(n.offset, "corrupt unary node");
  }

  template <class S>
  static void check_node(const ExprNode& n, const S& v) {
    if (!std::isfinite(tower_value(v)))
      throw EvalError(n.offset, "non-finite value in evaluation");
  }

  bool equal_nodes(int ia, const ExprAst& other, int ib) const {
    const ExprNode& a = nodes_[ia];
    const ExprNode& b = other.nodes_[ib];
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case ExprNode::Kind::constant: return a.constant == b.constant;
      case ExprNode::Kind::variable:
        return a.var_is_y == b.var_is_y && a.var_index == b.var_index;
      case ExprNode::Kind::unary:
        return a.fn == b.fn && equal_nodes(a.child0, other, b.child0);
      case ExprNode::Kind::binary:
        return a.op == b.op && equal_nodes(a.child0, other, b.child0) &&
               equal_nodes(a.child1, other, b.child1);
    }
    return false;
  }

  static int precedence_of(const ExprNode& n) {
    if (n.kind == ExprNode::Kind::unary && n.fn == UnaryFn::neg) return 30;
    if (n.kind != ExprNode::Kind::binary) return 100;
    switch (n.op) {
      case BinaryOp::add:
      case BinaryOp::sub: return 10;
      case BinaryOp::mul:
      case BinaryOp::div: return 20;
      case BinaryOp::pow: return 40;
    }
    return 100;
  }

  std::string print_node(int idx, int parent_prec) const {
    const ExprNode& n = nodes_[idx];
    std::string s;
    switch (n.kind) {
      case ExprNode::Kind::constant: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", n.constant);
        s = buf;
        if (n.constant < 0.0) s = "(" + s + ")";
        return s;
      }
      case ExprNode::Kind::variable:
        return (n.var_is_y ? "y" : "x") + std::to_string(n.var_index);
      case ExprNode::Kind::unary: {
        if (n.fn == UnaryFn::neg) {
          s = "-" + print_node(n.child0, 30);
          if (parent_prec > 30) s = "(" + s + ")";
          return s;
        }
        const char* name = "";
        switch (n.fn) {
          case UnaryFn::sqrt_fn: name = "sqrt"; break;
          case UnaryFn::exp_fn: name = "exp"; break;
          case UnaryFn::log_fn: name = "log"; break;
          case UnaryFn::sin_fn: name = "sin"; break;
          case UnaryFn::cos_fn: name = "cos"; break;
          case UnaryFn::tanh_fn: name = "tanh"; break;
          case UnaryFn::abs_fn: name = "abs"; break;
          case UnaryFn::neg: break;
        }
        return std::string(name) + "(" + print_node(n.child0, 0) + ")";
      }
      case ExprNode::Kind::binary: {
        int prec = precedence_of(n);
        const char* op = "";
        switch (n.op) {
          case BinaryOp::add: op = " + "; break;
          case BinaryOp::sub: op = " - "; break;
          case BinaryOp::mul: op = "*"; break;
          case BinaryOp::div: op = "/"; break;
          case BinaryOp::pow: op = "^"; break;
        }
        // left child at own precedence, right one tighter (left-assoc ops);
        // pow's exponent is a constant and prints atomically
        s = print_node(n.child0, prec) + op + print_node(n.child1, prec + 1);
        if (parent_prec > prec) s = "(" + s + ")";
        return s;
      }
    }
    return s;
  }
};

namespace detail {

struct Token {
  enum class Kind { number, ident, op, lparen, rparen, end };
  Kind kind = Kind::end;
  std::size_t offset = 0;
  double number = 0.0;
  std::string text;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    Token t;
    t.offset = pos_;
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      t.kind = Token::Kind::number;
      t.number = lex_number(t.offset);
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      t.kind = Token::Kind::ident;
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    switch (c) {
      case '+': case '-': case '*': case '/': case '^':
        t.kind = Token::Kind::op;
        t.text = std::string(1, c);
        ++pos_;
        return t;
      case '(':
        t.kind = Token::Kind::lparen;
        ++pos_;
        return t;
      case ')':
        t.kind = Token::Kind::rparen;
        ++pos_;
        return t;
      default:
        throw ParseError({t.offset, {"number", "identifier", "operator", "(", ")"},
                          std::string("unexpected character '") + c + "'"},
                         "parse error at offset " + std::to_string(t.offset));
    }
  }

private:
  // decimal literal with optional fraction and exponent; no hex, no underscores
  double lex_number(std::size_t start) {
    std::size_t p = pos_;
    bool digits = false;
    while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p, digits = true;
    if (p < src_.size() && src_[p] == '.') {
      ++p;
      while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p, digits = true;
    }
    if (!digits)
      throw ParseError({start, {"digit"}, "malformed numeric literal"},
                       "parse error at offset " + std::to_string(start));
    if (p < src_.size() && (src_[p] == 'e' || src_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < src_.size() && (src_[q] == '+' || src_[q] == '-')) ++q;
      if (q >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[q])))
        throw ParseError({p, {"exponent digits"}, "malformed exponent"},
                         "parse error at offset " + std::to_string(p));
      while (q < src_.size() && std::isdigit(static_cast<unsigned char>(src_[q]))) ++q;
      p = q;
    }
    double v = std::strtod(std::string(src_.substr(pos_, p - pos_)).c_str(), nullptr);
    pos_ = p;
    return v;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

class Parser {
public:
  Parser(std::string_view src, int dimension) : lex_(src), dim_(dimension) { advance(); }

  ExprAst run() {
    ExprAst ast;
    ast.dimension_ = dim_;
    int root = parse_expr(ast);
    if (cur_.kind != Token::Kind::end)
      fail({"operator", "end of input"}, "trailing input");
    ast.root_ = root;
    for (const auto& n : ast.nodes_)
      if (n.kind == ExprNode::Kind::variable)
        (n.var_is_y ? ast.uses_y_ : ast.uses_x_) = true;
    return ast;
  }

private:
  [[noreturn]] void fail(std::vector<std::string> expected, const std::string& msg) {
    throw ParseError({cur_.offset, std::move(expected), msg},
                     msg + " at offset " + std::to_string(cur_.offset));
  }

  void advance() { cur_ = lex_.next(); }

  bool at_op(const char* s) const {
    return cur_.kind == Token::Kind::op && cur_.text == s;
  }

  int parse_expr(ExprAst& ast) {
    int lhs = parse_term(ast);
    while (at_op("+") || at_op("-")) {
      BinaryOp op = at_op("+") ? BinaryOp::add : BinaryOp::sub;
      std::size_t off = cur_.offset;
      advance();
      int rhs = parse_term(ast);
      lhs = push_binary(ast, op, lhs, rhs, off);
    }
    return lhs;
  }

  int parse_term(ExprAst& ast) {
    int lhs = parse_unary(ast);
    while (at_op("*") || at_op("/")) {
      BinaryOp op = at_op("*") ? BinaryOp::mul : BinaryOp::div;
      std::size_t off = cur_.offset;
      advance();
      int rhs = parse_unary(ast);
      lhs = push_binary(ast, op, lhs, rhs, off);
    }
    return lhs;
  }

  int parse_unary(ExprAst& ast) {
    if (at_op("-")) {
      std::size_t off = cur_.offset;
      advance();
      int arg = parse_unary(ast);
      // fold -literal so that pow exponents like (-0.5) stay constant nodes
      if (ast.nodes_[arg].kind == ExprNode::Kind::constant) {
        ast.nodes_[arg].constant = -ast.nodes_[arg].constant;
        ast.nodes_[arg].offset = off;
        return arg;
      }
      ExprNode n;
      n.kind = ExprNode::Kind::unary;
      n.fn = UnaryFn::neg;
      n.child0 = arg;
      n.offset = off;
      return push(ast, n);
    }
    return parse_power(ast);
  }

  int parse_power(ExprAst& ast) {
    int base = parse_primary(ast);
    if (at_op("^")) {
      std::size_t off = cur_.offset;
      advance();
      std::size_t expo_off = cur_.offset;
      int expo = parse_unary(ast);  // right-associative entry point
      if (ast.nodes_[expo].kind != ExprNode::Kind::constant)
        throw ParseError({expo_off, {"numeric constant"}, "exponent must be a constant"},
                         "exponent must be a constant at offset " + std::to_string(expo_off));
      return push_binary(ast, BinaryOp::pow, base, expo, off);
    }
    return base;
  }

  int parse_primary(ExprAst& ast) {
    switch (cur_.kind) {
      case Token::Kind::number: {
        ExprNode n;
        n.kind = ExprNode::Kind::constant;
        n.constant = cur_.number;
        n.offset = cur_.offset;
        advance();
        return push(ast, n);
      }
      case Token::Kind::lparen: {
        advance();
        int inner = parse_expr(ast);
        if (cur_.kind != Token::Kind::rparen) fail({")"}, "expected closing parenthesis");
        advance();
        return inner;
      }
      case Token::Kind::ident:
        return parse_ident(ast);
      default:
        fail({"number", "identifier", "(", "-"}, "expected an operand");
    }
  }

  int parse_ident(ExprAst& ast) {
    const std::string name = cur_.text;
    const std::size_t off = cur_.offset;
    static const std::pair<const char*, UnaryFn> fns[] = {
        {"sqrt", UnaryFn::sqrt_fn}, {"exp", UnaryFn::exp_fn}, {"log", UnaryFn::log_fn},
        {"sin", UnaryFn::sin_fn},   {"cos", UnaryFn::cos_fn}, {"tanh", UnaryFn::tanh_fn},
        {"abs", UnaryFn::abs_fn}};
    for (const auto& [fname, fn] : fns) {
      if (name == fname) {
        advance();
        if (cur_.kind != Token::Kind::lparen) fail({"("}, "function call needs parentheses");
        advance();
        int arg = parse_expr(ast);
        if (cur_.kind != Token::Kind::rparen) fail({")"}, "expected closing parenthesis");
        advance();
        ExprNode n;
        n.kind = ExprNode::Kind::unary;
        n.fn = fn;
        n.child0 = arg;
        n.offset = off;
        return push(ast, n);
      }
    }
    if ((name[0] == 'x' || name[0] == 'y') && name.size() > 1 &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      int idx = std::stoi(name.substr(1));
      if (idx >= dim_)
        throw ParseError({off, {}, "undeclared variable '" + name + "' (dimension " +
                                       std::to_string(dim_) + ")"},
                         "undeclared variable at offset " + std::to_string(off));
      ExprNode n;
      n.kind = ExprNode::Kind::variable;
      n.var_is_y = (name[0] == 'y');
      n.var_index = idx;
      n.offset = off;
      advance();
      return push(ast, n);
    }
    throw ParseError({off, {"x<i>", "y<i>", "function name"},
                      "undeclared variable '" + name + "'"},
                     "undeclared variable at offset " + std::to_string(off));
  }

  static int push(ExprAst& ast, const ExprNode& n) {
    ast.nodes_.push_back(n);
    return static_cast<int>(ast.nodes_.size()) - 1;
  }

  int push_binary(ExprAst& ast, BinaryOp op, int lhs, int rhs, std::size_t off) {
    ExprNode n;
    n.kind = ExprNode::Kind::binary;
    n.op = op;
    n.child0 = lhs;
    n.child1 = rhs;
    n.offset = off;
    return push(ast, n);
  }

  Lexer lex_;
  Token cur_;
  int dim_;
};

}  // namespace detail

/// Parse an infix expression over x0..x{n-1}, y0..y{n-1}. Throws ParseError
/// with a byte-offset diagnostic on malformed input, undeclared variables,
/// or non-constant pow exponents.
inline ExprAst parse(std::string_view text, int dimension) {
  if (text.empty())
    throw ParseError({0, {"expression"}, "empty expression"}, "empty expression");
  return detail::Parser(text, dimension).run();
}

}  // namespace finsler
