#include "varcert/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <utility>

#include "varcert/errors.hpp"

namespace varcert {

namespace detail {

struct Node {
  Op op = Op::Number;
  double number = 0.0;
  std::size_t var = 0;
  std::vector<std::shared_ptr<const Node>> args;
  bool constant = true;
};

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<const Node>;

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Verified:
      return "VERIFIED";
    case Verdict::Refuted:
      return "REFUTED";
    case Verdict::Inconclusive:
      return "INCONCLUSIVE";
  }
  return "?";
}

namespace {

struct FunctionInfo {
  const char* name;
  Op op;
  int arity;
};

constexpr std::array<FunctionInfo, 8> kFunctions{{
    {"sin", Op::Sin, 1},
    {"cos", Op::Cos, 1},
    {"exp", Op::Exp, 1},
    {"log", Op::Log, 1},
    {"sqrt", Op::Sqrt, 1},
    {"abs", Op::Abs, 1},
    {"max", Op::Max, 2},
    {"min", Op::Min, 2},
}};

const FunctionInfo* find_function(std::string_view name) {
  for (const auto& f : kFunctions) {
    if (name == f.name) return &f;
  }
  return nullptr;
}

const char* function_name(Op op) {
  for (const auto& f : kFunctions) {
    if (f.op == op) return f.name;
  }
  return "?";
}

NodePtr make_number(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Number;
  n->number = v;
  return n;
}

NodePtr make_variable(std::size_t index) {
  auto n = std::make_shared<Node>();
  n->op = Op::Variable;
  n->var = index;
  n->constant = false;
  return n;
}

NodePtr make_op(Op op, std::vector<NodePtr> args) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->constant = true;
  for (const auto& a : args) n->constant = n->constant && a->constant;
  n->args = std::move(args);
  return n;
}

bool same_tree(const Node& a, const Node& b) {
  if (a.op != b.op) return false;
  if (a.op == Op::Number) return a.number == b.number;
  if (a.op == Op::Variable) return a.var == b.var;
  if (a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!same_tree(*a.args[i], *b.args[i])) return false;
  }
  return true;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (v < 0) return "(" + s + ")";
  return s;
}

void unparse(const Node& n, const std::vector<std::string>& vars,
             std::string& out) {
  switch (n.op) {
    case Op::Number:
      out += format_number(n.number);
      return;
    case Op::Variable:
      out += vars[n.var];
      return;
    case Op::Neg:
      out += "(-";
      unparse(*n.args[0], vars, out);
      out += ")";
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Pow: {
      static constexpr std::array<const char*, 5> kSym{" + ", " - ", " * ",
                                                       " / ", " ^ "};
      const auto idx = static_cast<std::size_t>(n.op) -
                       static_cast<std::size_t>(Op::Add);
      out += "(";
      unparse(*n.args[0], vars, out);
      out += kSym[idx];
      unparse(*n.args[1], vars, out);
      out += ")";
      return;
    }
    default:
      out += function_name(n.op);
      out += "(";
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i > 0) out += ", ";
        unparse(*n.args[i], vars, out);
      }
      out += ")";
      return;
  }
}

// Recursive-descent parser over the grammar documented in the header.
class Parser {
 public:
  Parser(std::string_view text, std::span<const std::string> vars)
      : text_(text), vars_(vars) {}

  NodePtr parse_all() {
    skip_ws();
    if (pos_ >= text_.size()) throw SyntaxError(pos_, "empty expression");
    auto n = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) {
      throw SyntaxError(pos_, std::string("unexpected '") + text_[pos_] + "'");
    }
    return n;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      throw SyntaxError(pos_, std::string("expected '") + c + "'");
    }
  }

  NodePtr parse_expr() {
    auto lhs = parse_term();
    while (true) {
      if (accept('+')) {
        lhs = make_op(Op::Add, {lhs, parse_term()});
      } else if (accept('-')) {
        lhs = make_op(Op::Sub, {lhs, parse_term()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    auto lhs = parse_factor();
    while (true) {
      if (accept('*')) {
        lhs = make_op(Op::Mul, {lhs, parse_factor()});
      } else if (accept('/')) {
        lhs = make_op(Op::Div, {lhs, parse_factor()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_factor() {
    if (accept('-')) return make_op(Op::Neg, {parse_factor()});
    auto base = parse_atom();
    if (accept('^')) {
      NodePtr exponent;
      if (accept('-')) {
        exponent = make_op(Op::Neg, {parse_atom()});
      } else {
        exponent = parse_atom();
      }
      return make_op(Op::Pow, {base, exponent});
    }
    return base;
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) throw SyntaxError(pos_, "unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return parse_number();
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_')) {
        ++pos_;
      }
      const std::string_view name = text_.substr(start, pos_ - start);
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        const FunctionInfo* fn = find_function(name);
        if (fn == nullptr) {
          throw SyntaxError(start,
                            "unknown function '" + std::string(name) + "'");
        }
        ++pos_;
        std::vector<NodePtr> args{parse_expr()};
        if (accept(',')) args.push_back(parse_expr());
        expect(')');
        if (static_cast<int>(args.size()) != fn->arity) {
          throw SyntaxError(start, std::string(fn->name) + " expects " +
                                       std::to_string(fn->arity) +
                                       " argument(s)");
        }
        return make_op(fn->op, std::move(args));
      }
      for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i] == name) return make_variable(i);
      }
      throw UnknownVariable(std::string(name));
    }
    throw SyntaxError(pos_, std::string("unexpected '") + c + "'");
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() &&
               std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          ++pos_;
        }
      }
    }
    double v = 0.0;
    const auto* first = text_.data() + start;
    const auto* last = text_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      throw SyntaxError(start, "malformed number");
    }
    return make_number(v);
  }

  std::string_view text_;
  std::span<const std::string> vars_;
  std::size_t pos_ = 0;
};

// Forward-mode dual number.
struct Dual {
  double v = 0.0;
  double d = 0.0;
};

struct EvalFlags {
  bool domain = false;
  bool kink = false;
};

double as_value(double x) { return x; }
double as_value(const Dual& x) { return x.v; }

template <typename T>
T constant_of(double v) {
  if constexpr (std::is_same_v<T, double>) {
    return v;
  } else {
    return Dual{v, 0.0};
  }
}

template <typename T>
T apply_unary(Op op, const T& a, EvalFlags& flags) {
  const double x = as_value(a);
  double v = 0.0;
  double dv = 0.0;  // derivative of the scalar function at x
  switch (op) {
    case Op::Neg:
      v = -x;
      dv = -1.0;
      break;
    case Op::Sin:
      v = std::sin(x);
      dv = std::cos(x);
      break;
    case Op::Cos:
      v = std::cos(x);
      dv = -std::sin(x);
      break;
    case Op::Exp:
      v = std::exp(x);
      dv = v;
      break;
    case Op::Log:
      if (!(x > 0.0)) {
        flags.domain = true;
        v = kInf;
        dv = 0.0;
      } else {
        v = std::log(x);
        dv = 1.0 / x;
      }
      break;
    case Op::Sqrt:
      if (x < 0.0) {
        flags.domain = true;
        v = kInf;
        dv = 0.0;
      } else {
        v = std::sqrt(x);
        if (x == 0.0) {
          // sqrt is not differentiable at 0; the value is still defined.
          if constexpr (!std::is_same_v<T, double>) {
            if (a.d != 0.0) flags.domain = true;
          }
          dv = 0.0;
        } else {
          dv = 0.5 / v;
        }
      }
      break;
    case Op::Abs:
      v = std::abs(x);
      if (x > 0.0) {
        dv = 1.0;
      } else if (x < 0.0) {
        dv = -1.0;
      } else {
        flags.kink = true;
        dv = -1.0;
      }
      break;
    default:
      break;
  }
  if constexpr (std::is_same_v<T, double>) {
    return v;
  } else {
    return Dual{v, dv * a.d};
  }
}

// Integer power by repeated squaring (exact derivative k·b^(k−1)).
template <typename T>
T int_power(const T& base, unsigned long k) {
  const double b = as_value(base);
  double v = 1.0;
  double p = b;
  unsigned long e = k;
  while (e > 0) {
    if (e & 1UL) v *= p;
    p *= p;
    e >>= 1UL;
  }
  if constexpr (std::is_same_v<T, double>) {
    return v;
  } else {
    double dpow = 0.0;
    if (k > 0) {
      double w = 1.0;
      for (unsigned long i = 1; i < k; ++i) w *= b;
      dpow = static_cast<double>(k) * w;
    }
    return Dual{v, dpow * base.d};
  }
}

template <typename T>
T eval_node(const Node& n, std::span<const T> point, EvalFlags& flags) {
  switch (n.op) {
    case Op::Number:
      return constant_of<T>(n.number);
    case Op::Variable:
      return point[n.var];
    case Op::Neg:
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Log:
    case Op::Sqrt:
    case Op::Abs:
      return apply_unary(n.op, eval_node(*n.args[0], point, flags), flags);
    case Op::Pow: {
      const T base = eval_node(*n.args[0], point, flags);
      const Node& ex = *n.args[1];
      if (ex.op == Op::Number && ex.number >= 0.0 &&
          ex.number == std::floor(ex.number) && ex.number < 1e9) {
        return int_power(base, static_cast<unsigned long>(ex.number));
      }
      const T expo = eval_node(ex, point, flags);
      const double b = as_value(base);
      const double e = as_value(expo);
      if (!(b > 0.0)) {
        flags.domain = true;
        return constant_of<T>(kInf);
      }
      const double v = std::pow(b, e);
      if constexpr (std::is_same_v<T, double>) {
        return v;
      } else {
        return Dual{v, v * (expo.d * std::log(b) + e * base.d / b)};
      }
    }
    default:
      break;
  }
  const T a = eval_node(*n.args[0], point, flags);
  const T b = eval_node(*n.args[1], point, flags);
  const double x = as_value(a);
  const double y = as_value(b);
  if constexpr (std::is_same_v<T, double>) {
    switch (n.op) {
      case Op::Add:
        return x + y;
      case Op::Sub:
        return x - y;
      case Op::Mul:
        return x * y;
      case Op::Div:
        if (y == 0.0) {
          flags.domain = true;
          return kInf;
        }
        return x / y;
      case Op::Max:
        if (x == y) flags.kink = true;
        return x >= y ? x : y;
      case Op::Min:
        if (x == y) flags.kink = true;
        return x <= y ? x : y;
      default:
        return 0.0;
    }
  } else {
    switch (n.op) {
      case Op::Add:
        return Dual{x + y, a.d + b.d};
      case Op::Sub:
        return Dual{x - y, a.d - b.d};
      case Op::Mul:
        return Dual{x * y, a.d * y + x * b.d};
      case Op::Div:
        if (y == 0.0) {
          flags.domain = true;
          return Dual{kInf, 0.0};
        }
        return Dual{x / y, (a.d * y - x * b.d) / (y * y)};
      case Op::Max:
        if (x == y) flags.kink = true;
        return x >= y ? a : b;
      case Op::Min:
        if (x == y) flags.kink = true;
        return x <= y ? a : b;
      default:
        return Dual{};
    }
  }
}

void check_dimension(const Expr& e, const Vector& point) {
  if (static_cast<std::size_t>(point.size()) != e.dimension()) {
    throw DimensionMismatch("expression over " + std::to_string(e.dimension()) +
                            " variables evaluated at a point of length " +
                            std::to_string(point.size()));
  }
}

}  // namespace

class ExprAccess {
 public:
  static const Node& node(const Expr& e) { return *e.node_; }
  static Expr make(NodePtr node, std::vector<std::string> vars) {
    return Expr(std::move(node),
                std::make_shared<const std::vector<std::string>>(std::move(vars)));
  }
};

Expr::Expr()
    : node_(make_number(0.0)),
      vars_(std::make_shared<const std::vector<std::string>>()) {}

Expr::Expr(std::shared_ptr<const Node> node,
           std::shared_ptr<const std::vector<std::string>> vars)
    : node_(std::move(node)), vars_(std::move(vars)) {}

Op Expr::op() const { return node_->op; }
double Expr::number() const { return node_->number; }
std::size_t Expr::var_index() const { return node_->var; }
const std::string& Expr::var_name() const { return (*vars_)[node_->var]; }
std::size_t Expr::arg_count() const { return node_->args.size(); }
Expr Expr::arg(std::size_t i) const { return Expr(node_->args.at(i), vars_); }
const std::vector<std::string>& Expr::variables() const { return *vars_; }
bool Expr::is_constant() const { return node_->constant; }

std::string Expr::to_string() const {
  std::string out;
  unparse(*node_, *vars_, out);
  return out;
}

bool operator==(const Expr& a, const Expr& b) {
  return *a.vars_ == *b.vars_ && same_tree(*a.node_, *b.node_);
}

Expr Expr::constant(double value, std::vector<std::string> vars) {
  return Expr(make_number(value),
              std::make_shared<const std::vector<std::string>>(std::move(vars)));
}

Expr Expr::variable(std::size_t index, std::vector<std::string> vars) {
  if (index >= vars.size()) throw DimensionMismatch("variable index out of range");
  return Expr(make_variable(index),
              std::make_shared<const std::vector<std::string>>(std::move(vars)));
}

Expr Expr::unary(Op op, const Expr& a) {
  return Expr(make_op(op, {a.node_}), a.vars_);
}

Expr Expr::binary(Op op, const Expr& a, const Expr& b) {
  if (*a.vars_ != *b.vars_) {
    throw DimensionMismatch("operands declare different variables");
  }
  return Expr(make_op(op, {a.node_, b.node_}), a.vars_);
}

Expr parse(std::string_view text, std::span<const std::string> declared_vars) {
  Parser p(text, declared_vars);
  return ExprAccess::make(p.parse_all(), std::vector<std::string>(
                                             declared_vars.begin(),
                                             declared_vars.end()));
}

Expr parse(std::string_view text,
           const std::vector<std::string>& declared_vars) {
  return parse(text, std::span<const std::string>(declared_vars));
}

std::vector<std::string> numbered_names(std::string_view prefix,
                                        std::size_t count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    names.push_back(std::string(prefix) + std::to_string(i));
  }
  return names;
}

Evaluation eval(const Expr& e, const Vector& point) {
  check_dimension(e, point);
  EvalFlags flags;
  const double v = eval_node<double>(
      ExprAccess::node(e),
      std::span<const double>(point.data(), static_cast<std::size_t>(point.size())),
      flags);
  if (flags.domain || std::isnan(v)) return {kInf, true};
  return {v, false};
}

double value(const Expr& e, const Vector& point) { return eval(e, point).value; }

Gradient directional(const Expr& e, const Vector& point,
                     const Vector& direction) {
  check_dimension(e, point);
  check_dimension(e, direction);
  std::vector<Dual> duals(static_cast<std::size_t>(point.size()));
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    duals[static_cast<std::size_t>(i)] = Dual{point[i], direction[i]};
  }
  EvalFlags flags;
  const Dual r = eval_node<Dual>(ExprAccess::node(e),
                                 std::span<const Dual>(duals), flags);
  Gradient g;
  g.value = Vector::Constant(1, flags.domain ? kInf : r.d);
  g.kink = flags.kink;
  g.domain_violation = flags.domain;
  return g;
}

Gradient grad(const Expr& e, const Vector& point) {
  check_dimension(e, point);
  const auto n = point.size();
  Gradient g;
  g.value = Vector::Zero(n);
  if (e.is_constant()) return g;
  std::vector<Dual> duals(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    duals[static_cast<std::size_t>(i)] = Dual{point[i], 0.0};
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    duals[static_cast<std::size_t>(j)].d = 1.0;
    EvalFlags flags;
    const Dual r = eval_node<Dual>(ExprAccess::node(e),
                                   std::span<const Dual>(duals), flags);
    duals[static_cast<std::size_t>(j)].d = 0.0;
    g.value[j] = flags.domain ? kInf : r.d;
    g.kink = g.kink || flags.kink;
    g.domain_violation = g.domain_violation || flags.domain;
  }
  return g;
}

SmoothMap::SmoothMap(std::vector<Expr> components, std::size_t input_dim,
                     CachePolicy policy)
    : components_(std::move(components)), input_dim_(input_dim), policy_(policy) {
  for (const auto& c : components_) {
    if (c.dimension() != input_dim_) {
      throw DimensionMismatch("component declares " +
                              std::to_string(c.dimension()) +
                              " variables, map input dimension is " +
                              std::to_string(input_dim_));
    }
  }
  if (policy_ == CachePolicy::LastPoint) cache_ = std::make_shared<Cache>();
}

SmoothMap SmoothMap::parse(std::span<const std::string> texts,
                           const std::vector<std::string>& vars,
                           CachePolicy policy) {
  std::vector<Expr> comps;
  comps.reserve(texts.size());
  for (const auto& t : texts) comps.push_back(varcert::parse(t, vars));
  return SmoothMap(std::move(comps), vars.size(), policy);
}

SmoothMap SmoothMap::identity(std::size_t n) {
  const auto vars = numbered_names("x", n);
  std::vector<Expr> comps;
  for (std::size_t i = 0; i < n; ++i) comps.push_back(Expr::variable(i, vars));
  return SmoothMap(std::move(comps), n);
}

SmoothMap SmoothMap::affine(const Matrix& a, const Vector& b) {
  const auto n = static_cast<std::size_t>(a.cols());
  const auto vars = numbered_names("x", n);
  std::vector<Expr> comps;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Expr row = Expr::constant(b[i], vars);
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) == 0.0) continue;
      row = Expr::binary(
          Op::Add, row,
          Expr::binary(Op::Mul, Expr::constant(a(i, j), vars),
                       Expr::variable(static_cast<std::size_t>(j), vars)));
    }
    comps.push_back(row);
  }
  return SmoothMap(std::move(comps), n);
}

Vector SmoothMap::eval(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != input_dim_) {
    throw DimensionMismatch("map evaluated at a point of wrong length");
  }
  if (cache_) {
    std::lock_guard lock(cache_->mutex);
    if (cache_->has_value && cache_->point.size() == x.size() &&
        cache_->point == x) {
      return cache_->value;
    }
  }
  Vector out(static_cast<Eigen::Index>(components_.size()));
  for (std::size_t i = 0; i < components_.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = varcert::value(components_[i], x);
  }
  if (cache_) {
    std::lock_guard lock(cache_->mutex);
    if (!(cache_->point.size() == x.size() && cache_->point == x)) {
      cache_->has_jacobian = false;
    }
    cache_->point = x;
    cache_->value = out;
    cache_->has_value = true;
  }
  return out;
}

Matrix SmoothMap::jacobian(const Vector& x, bool* kink) const {
  if (static_cast<std::size_t>(x.size()) != input_dim_) {
    throw DimensionMismatch("Jacobian requested at a point of wrong length");
  }
  if (cache_ && kink == nullptr) {
    std::lock_guard lock(cache_->mutex);
    if (cache_->has_jacobian && cache_->point.size() == x.size() &&
        cache_->point == x) {
      return cache_->jacobian;
    }
  }
  Matrix j(static_cast<Eigen::Index>(components_.size()), x.size());
  bool any_kink = false;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const Gradient g = grad(components_[i], x);
    j.row(static_cast<Eigen::Index>(i)) = g.value.transpose();
    any_kink = any_kink || g.kink;
  }
  if (kink != nullptr) *kink = any_kink;
  if (cache_) {
    std::lock_guard lock(cache_->mutex);
    if (!(cache_->point.size() == x.size() && cache_->point == x)) {
      cache_->has_value = false;
    }
    cache_->point = x;
    cache_->jacobian = j;
    cache_->has_jacobian = true;
  }
  return j;
}

}  // namespace varcert
