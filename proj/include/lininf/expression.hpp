#pragma once

// Closed expression trees for deterministic node functions: evaluation,
// symbolic differentiation, an infix parser and a printer whose output
// re-parses to the identical tree.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lininf/error.hpp"

namespace lininf {

enum class Op { constant, variable, negate, add, subtract, multiply, divide, power, exp, ln };

class Expression {
 public:
  Expression() : Expression(constant(0.0)) {}

  static Expression constant(double v) { return Expression(make(Op::constant, v)); }
  static Expression variable(std::string name) {
    auto n = make(Op::variable, 0.0);
    n->name = std::move(name);
    return Expression(std::move(n));
  }
  static Expression unary(Op op, Expression arg) {
    auto n = make(op, 0.0);
    n->lhs = std::move(arg.node_);
    return Expression(std::move(n));
  }
  static Expression binary(Op op, Expression l, Expression r) {
    auto n = make(op, 0.0);
    n->lhs = std::move(l.node_);
    n->rhs = std::move(r.node_);
    return Expression(std::move(n));
  }
  static Expression power(Expression base, double exponent) {
    auto n = make(Op::power, exponent);
    n->lhs = std::move(base.node_);
    return Expression(std::move(n));
  }

  Op op() const noexcept { return node_->op; }
  /// Constant value, or the exponent of a power node.
  double value() const noexcept { return node_->value; }
  const std::string& name() const noexcept { return node_->name; }
  Expression lhs() const { return Expression(node_->lhs); }
  Expression rhs() const { return Expression(node_->rhs); }

  bool is_constant() const noexcept { return node_->op == Op::constant; }
  bool is_constant(double v) const noexcept { return is_constant() && node_->value == v; }

  /// Number of nodes in the tree.
  std::size_t size() const {
    std::size_t n = 1;
    if (node_->lhs) n += lhs().size();
    if (node_->rhs) n += rhs().size();
    return n;
  }

  friend bool operator==(const Expression& l, const Expression& r) {
    if (l.node_ == r.node_) return true;
    const Node& a = *l.node_;
    const Node& b = *r.node_;
    if (a.op != b.op) return false;
    switch (a.op) {
      case Op::constant: return a.value == b.value;
      case Op::variable: return a.name == b.name;
      case Op::power: return a.value == b.value && l.lhs() == r.lhs();
      case Op::negate:
      case Op::exp:
      case Op::ln: return l.lhs() == r.lhs();
      default: return l.lhs() == r.lhs() && l.rhs() == r.rhs();
    }
  }

 private:
  struct Node {
    Op op;
    double value;
    std::string name;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  explicit Expression(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static std::shared_ptr<Node> make(Op op, double v) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->value = v;
    return n;
  }

  std::shared_ptr<const Node> node_;
};

// Builders that fold constants and drop identities. Used by differentiation
// and by tests; the parser builds raw trees.
namespace build {

inline Expression num(double v) { return Expression::constant(v); }
inline Expression var(std::string n) { return Expression::variable(std::move(n)); }

inline Expression neg(const Expression& e) {
  if (e.is_constant()) return num(-e.value());
  if (e.op() == Op::negate) return e.lhs();
  return Expression::unary(Op::negate, e);
}
inline Expression add(const Expression& l, const Expression& r) {
  if (l.is_constant() && r.is_constant()) return num(l.value() + r.value());
  if (l.is_constant(0.0)) return r;
  if (r.is_constant(0.0)) return l;
  return Expression::binary(Op::add, l, r);
}
inline Expression sub(const Expression& l, const Expression& r) {
  if (l.is_constant() && r.is_constant()) return num(l.value() - r.value());
  if (r.is_constant(0.0)) return l;
  if (l.is_constant(0.0)) return neg(r);
  return Expression::binary(Op::subtract, l, r);
}
inline Expression mul(const Expression& l, const Expression& r) {
  if (l.is_constant() && r.is_constant()) return num(l.value() * r.value());
  if (l.is_constant(0.0) || r.is_constant(0.0)) return num(0.0);
  if (l.is_constant(1.0)) return r;
  if (r.is_constant(1.0)) return l;
  return Expression::binary(Op::multiply, l, r);
}
inline Expression div(const Expression& l, const Expression& r) {
  if (l.is_constant() && r.is_constant() && r.value() != 0.0) return num(l.value() / r.value());
  if (l.is_constant(0.0)) return num(0.0);
  if (r.is_constant(1.0)) return l;
  return Expression::binary(Op::divide, l, r);
}
inline Expression pow(const Expression& base, double k) {
  if (k == 1.0) return base;
  if (k == 0.0) return num(1.0);
  if (base.is_constant() && (base.value() > 0.0 || k == std::floor(k))) {
    return num(std::pow(base.value(), k));
  }
  return Expression::power(base, k);
}
inline Expression exp(const Expression& e) {
  if (e.is_constant()) return num(std::exp(e.value()));
  return Expression::unary(Op::exp, e);
}
inline Expression ln(const Expression& e) {
  if (e.is_constant() && e.value() > 0.0) return num(std::log(e.value()));
  return Expression::unary(Op::ln, e);
}

}  // namespace build

inline Expression operator-(const Expression& e) { return build::neg(e); }
inline Expression operator+(const Expression& l, const Expression& r) { return build::add(l, r); }
inline Expression operator-(const Expression& l, const Expression& r) { return build::sub(l, r); }
inline Expression operator*(const Expression& l, const Expression& r) { return build::mul(l, r); }
inline Expression operator/(const Expression& l, const Expression& r) { return build::div(l, r); }

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char small[32];
    std::snprintf(small, sizeof small, "%.*g", prec, v);
    if (std::strtod(small, nullptr) == v) return small;
  }
  return buf;
}

// Binding strength of the printed form: 1 additive, 2 multiplicative,
// 3 unary minus, 4 power, 5 atom.
inline int precedence(const Expression& e) {
  switch (e.op()) {
    case Op::add:
    case Op::subtract: return 1;
    case Op::multiply:
    case Op::divide: return 2;
    case Op::negate: return 3;
    case Op::power: return 4;
    case Op::constant: return e.value() < 0.0 || std::signbit(e.value()) ? 3 : 5;
    default: return 5;
  }
}

inline void print(std::ostream& os, const Expression& e, int min_prec);

inline void print_wrapped(std::ostream& os, const Expression& e, int min_prec) {
  if (precedence(e) < min_prec) {
    os << '(';
    print(os, e, 0);
    os << ')';
  } else {
    print(os, e, min_prec);
  }
}

inline void print(std::ostream& os, const Expression& e, int) {
  switch (e.op()) {
    case Op::constant: os << format_number(e.value()); return;
    case Op::variable: os << e.name(); return;
    case Op::negate: {
      os << '-';
      // A bare literal after '-' would re-parse as a negative constant.
      const Expression arg = e.lhs();
      if (arg.op() == Op::constant || arg.op() == Op::negate) {
        os << '(';
        print(os, arg, 0);
        os << ')';
      } else {
        print_wrapped(os, arg, 3);
      }
      return;
    }
    case Op::add:
    case Op::subtract:
    case Op::multiply:
    case Op::divide: {
      const int level = precedence(e);
      const char sym = e.op() == Op::add        ? '+'
                       : e.op() == Op::subtract ? '-'
                       : e.op() == Op::multiply ? '*'
                                                : '/';
      print_wrapped(os, e.lhs(), level);
      os << ' ' << sym << ' ';
      print_wrapped(os, e.rhs(), level + 1);
      return;
    }
    case Op::power:
      print_wrapped(os, e.lhs(), 5);
      os << '^' << format_number(e.value());
      return;
    case Op::exp:
    case Op::ln:
      os << (e.op() == Op::exp ? "exp(" : "ln(");
      print(os, e.lhs(), 0);
      os << ')';
      return;
  }
}

}  // namespace detail

inline std::string to_string(const Expression& e) {
  std::ostringstream os;
  detail::print(os, e, 0);
  return os.str();
}

inline std::ostream& operator<<(std::ostream& os, const Expression& e) {
  detail::print(os, e, 0);
  return os;
}

// ---------------------------------------------------------------------------
// Inspection

/// Distinct variable names in order of first appearance (left to right).
inline std::vector<std::string> variables(const Expression& e) {
  std::vector<std::string> out;
  auto visit = [&](auto&& self, const Expression& x) -> void {
    switch (x.op()) {
      case Op::constant: return;
      case Op::variable:
        for (const auto& n : out) {
          if (n == x.name()) return;
        }
        out.push_back(x.name());
        return;
      case Op::negate:
      case Op::power:
      case Op::exp:
      case Op::ln: self(self, x.lhs()); return;
      default:
        self(self, x.lhs());
        self(self, x.rhs());
        return;
    }
  };
  visit(visit, e);
  return out;
}

inline bool depends_on(const Expression& e, std::string_view name) {
  for (const auto& v : variables(e)) {
    if (v == name) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

[[noreturn]] inline void eval_fail(const std::string& what, const Expression& at) {
  throw EvaluationError(what + " in '" + to_string(at) + "'");
}

inline double apply_power(double base, double k, const Expression& at) {
  if (base == 0.0 && k < 0.0) eval_fail("zero raised to a negative power", at);
  if (base < 0.0 && k != std::floor(k)) eval_fail("negative base with non-integer exponent", at);
  return std::pow(base, k);
}

template <class Lookup>
double evaluate(const Expression& e, Lookup& lookup) {
  switch (e.op()) {
    case Op::constant: return e.value();
    case Op::variable: return lookup(e.name());
    case Op::negate: return -evaluate(e.lhs(), lookup);
    case Op::add: return evaluate(e.lhs(), lookup) + evaluate(e.rhs(), lookup);
    case Op::subtract: return evaluate(e.lhs(), lookup) - evaluate(e.rhs(), lookup);
    case Op::multiply: return evaluate(e.lhs(), lookup) * evaluate(e.rhs(), lookup);
    case Op::divide: {
      const double num = evaluate(e.lhs(), lookup);
      const double den = evaluate(e.rhs(), lookup);
      if (den == 0.0) eval_fail("division by zero", e);
      return num / den;
    }
    case Op::power: return apply_power(evaluate(e.lhs(), lookup), e.value(), e);
    case Op::exp: {
      const double r = std::exp(evaluate(e.lhs(), lookup));
      if (!std::isfinite(r)) eval_fail("exp overflow", e);
      return r;
    }
    case Op::ln: {
      const double arg = evaluate(e.lhs(), lookup);
      if (!(arg > 0.0)) eval_fail("ln of non-positive value", e);
      return std::log(arg);
    }
  }
  return 0.0;
}

}  // namespace detail

using Environment = std::map<std::string, double, std::less<>>;

inline double eval_expr(const Expression& e, const Environment& env) {
  auto lookup = [&](const std::string& n) {
    auto it = env.find(n);
    if (it == env.end()) throw EvaluationError("unbound variable '" + n + "'");
    return it->second;
  };
  return detail::evaluate(e, lookup);
}

/// Expression with variables pre-resolved to slots of a value vector; the
/// hot path for sampling and relinearization.
class CompiledExpression {
 public:
  CompiledExpression() = default;

  /// `slot_of` maps a variable name to its index in the value vector.
  template <class SlotOf>
  CompiledExpression(const Expression& e, SlotOf&& slot_of) : source_(e) {
    compile(e, slot_of);
  }

  double operator()(const std::vector<double>& values) const {
    std::vector<double> stack;
    stack.reserve(code_.size());
    for (const auto& ins : code_) {
      switch (ins.op) {
        case Op::constant: stack.push_back(ins.value); break;
        case Op::variable: stack.push_back(values[ins.slot]); break;
        case Op::negate: stack.back() = -stack.back(); break;
        case Op::power:
          stack.back() = detail::apply_power(stack.back(), ins.value, *ins.origin);
          break;
        case Op::exp: {
          stack.back() = std::exp(stack.back());
          if (!std::isfinite(stack.back())) detail::eval_fail("exp overflow", *ins.origin);
          break;
        }
        case Op::ln: {
          if (!(stack.back() > 0.0)) detail::eval_fail("ln of non-positive value", *ins.origin);
          stack.back() = std::log(stack.back());
          break;
        }
        default: {
          const double r = stack.back();
          stack.pop_back();
          double& l = stack.back();
          switch (ins.op) {
            case Op::add: l += r; break;
            case Op::subtract: l -= r; break;
            case Op::multiply: l *= r; break;
            case Op::divide:
              if (r == 0.0) detail::eval_fail("division by zero", *ins.origin);
              l /= r;
              break;
            default: break;
          }
        }
      }
    }
    return stack.back();
  }

  const Expression& source() const noexcept { return source_; }

 private:
  struct Instruction {
    Op op;
    double value;
    std::size_t slot;
    std::shared_ptr<const Expression> origin;
  };

  template <class SlotOf>
  void compile(const Expression& e, SlotOf& slot_of) {
    switch (e.op()) {
      case Op::constant: code_.push_back({Op::constant, e.value(), 0, nullptr}); return;
      case Op::variable: code_.push_back({Op::variable, 0.0, slot_of(e.name()), nullptr}); return;
      case Op::negate:
      case Op::power:
      case Op::exp:
      case Op::ln:
        compile(e.lhs(), slot_of);
        code_.push_back({e.op(), e.value(), 0, std::make_shared<const Expression>(e)});
        return;
      default:
        compile(e.lhs(), slot_of);
        compile(e.rhs(), slot_of);
        code_.push_back({e.op(), 0.0, 0, std::make_shared<const Expression>(e)});
        return;
    }
  }

  Expression source_;
  std::vector<Instruction> code_;
};

// ---------------------------------------------------------------------------
// Differentiation

inline Expression diff_expr(const Expression& e, std::string_view wrt) {
  using namespace build;
  switch (e.op()) {
    case Op::constant: return num(0.0);
    case Op::variable: return num(e.name() == wrt ? 1.0 : 0.0);
    case Op::negate: return neg(diff_expr(e.lhs(), wrt));
    case Op::add: return add(diff_expr(e.lhs(), wrt), diff_expr(e.rhs(), wrt));
    case Op::subtract: return sub(diff_expr(e.lhs(), wrt), diff_expr(e.rhs(), wrt));
    case Op::multiply: {
      const Expression u = e.lhs(), v = e.rhs();
      return add(mul(diff_expr(u, wrt), v), mul(u, diff_expr(v, wrt)));
    }
    case Op::divide: {
      const Expression u = e.lhs(), v = e.rhs();
      const Expression du = diff_expr(u, wrt), dv = diff_expr(v, wrt);
      if (dv.is_constant(0.0)) return div(du, v);
      return div(sub(mul(du, v), mul(u, dv)), pow(v, 2.0));
    }
    case Op::power: {
      const Expression u = e.lhs();
      const double k = e.value();
      return mul(mul(num(k), pow(u, k - 1.0)), diff_expr(u, wrt));
    }
    case Op::exp: return mul(e, diff_expr(e.lhs(), wrt));
    case Op::ln: return div(diff_expr(e.lhs(), wrt), e.lhs());
  }
  return num(0.0);
}

// ---------------------------------------------------------------------------
// Parsing
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' exponent)*
//   exponent:= ['-'] number | '(' ['-'] number ')'
//   primary := number | ident | ('exp' | 'ln') '(' expr ')' | '(' expr ')'
//
// '-' directly before a literal that is not itself raised to a power reads
// as a negative constant.

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  Expression parse() {
    Expression e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "expression syntax error at column " << pos_ + 1 << ": " << what << " in \"" << text_
       << "\"";
    throw SchemaError(os.str());
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool accept(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static bool starts_number(char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '.'; }

  double number() {
    skip_ws();
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
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_ || start == pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return v;
  }

  // True when a literal starting at the cursor is followed by '^'.
  bool literal_followed_by_power() {
    const std::size_t save = pos_;
    number();
    const bool result = peek() == '^';
    pos_ = save;
    return result;
  }

  Expression parse_expr() {
    Expression lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = Expression::binary(Op::add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = Expression::binary(Op::subtract, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  Expression parse_term() {
    Expression lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expression::binary(Op::multiply, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = Expression::binary(Op::divide, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expression parse_unary() {
    if (accept('-')) {
      skip_ws();
      if (pos_ < text_.size() && starts_number(text_[pos_]) && !literal_followed_by_power()) {
        return Expression::constant(-number());
      }
      return Expression::unary(Op::negate, parse_unary());
    }
    return parse_power();
  }

  double parse_exponent() {
    const bool paren = accept('(');
    const bool negative = accept('-');
    if (!starts_number(peek())) fail("exponent must be a numeric constant");
    double k = number();
    if (negative) k = -k;
    if (paren && !accept(')')) fail("expected ')'");
    return k;
  }

  Expression parse_power() {
    Expression base = parse_primary();
    while (accept('^')) base = Expression::power(base, parse_exponent());
    return base;
  }

  Expression parse_primary() {
    const char c = peek();
    if (c == '\0') fail("unexpected end of input");
    if (starts_number(c)) return Expression::constant(number());
    if (accept('(')) {
      Expression inner = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      std::string ident(text_.substr(start, pos_ - start));
      if ((ident == "exp" || ident == "ln") && peek() == '(') {
        accept('(');
        Expression arg = parse_expr();
        if (!accept(')')) fail("expected ')'");
        return Expression::unary(ident == "exp" ? Op::exp : Op::ln, arg);
      }
      return Expression::variable(std::move(ident));
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline Expression parse_expression(std::string_view text) { return ExpressionParser(text).parse(); }

}  // namespace lininf
