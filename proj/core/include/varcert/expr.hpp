#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "varcert/types.hpp"

namespace varcert {

/**
 * Scalar expressions over a declared list of named variables.
 *
 * Grammar (whitespace insignificant):
 *
 *   expr   := term (('+'|'-') term)*
 *   term   := factor (('*'|'/') factor)*
 *   factor := '-' factor | atom ('^' ['-'] atom)?
 *   atom   := number | var | func '(' expr (',' expr)? ')' | '(' expr ')'
 *
 * Functions: sin cos exp log sqrt abs (one argument) and max min (two).
 * Unary minus binds looser than '^', so "-x^2" is −(x²).
 */
enum class Op {
  Number,
  Variable,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Sin,
  Cos,
  Exp,
  Log,
  Sqrt,
  Abs,
  Max,
  Min,
};

namespace detail {
struct Node;
}

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  Expr();

  Op op() const;
  /// Literal value; only meaningful for Op::Number.
  double number() const;
  /// Index into the declared variable list; only for Op::Variable.
  std::size_t var_index() const;
  const std::string& var_name() const;

  std::size_t arg_count() const;
  Expr arg(std::size_t i) const;

  /// Names of the declared variables, in point order.
  const std::vector<std::string>& variables() const;
  std::size_t dimension() const { return variables().size(); }

  /// True when no variable occurs in the tree.
  bool is_constant() const;

  /// Canonical, fully parenthesized text that parses back to the same tree.
  std::string to_string() const;

  friend bool operator==(const Expr& a, const Expr& b);

  // Builders used by the parser and by programmatic constructions.
  static Expr constant(double value, std::vector<std::string> vars);
  static Expr variable(std::size_t index, std::vector<std::string> vars);
  static Expr unary(Op op, const Expr& a);
  static Expr binary(Op op, const Expr& a, const Expr& b);

 private:
  Expr(std::shared_ptr<const detail::Node> node,
       std::shared_ptr<const std::vector<std::string>> vars);

  std::shared_ptr<const detail::Node> node_;
  std::shared_ptr<const std::vector<std::string>> vars_;

  friend class ExprAccess;
};

/// Parses text against the declared variable names.
///
/// Throws SyntaxError or UnknownVariable.
Expr parse(std::string_view text, std::span<const std::string> declared_vars);
Expr parse(std::string_view text, const std::vector<std::string>& declared_vars);

/// Variable names "<prefix>1" … "<prefix>count".
std::vector<std::string> numbered_names(std::string_view prefix,
                                        std::size_t count);

struct Evaluation {
  /// +∞ when domain_violation is set.
  double value = 0.0;
  /// log/sqrt/pow/division outside their domain occurred somewhere.
  bool domain_violation = false;
};

/// Evaluates at a point of length dimension(); throws DimensionMismatch.
Evaluation eval(const Expr& e, const Vector& point);

/// Convenience: the value with domain violations mapped to +∞.
double value(const Expr& e, const Vector& point);

struct Gradient {
  Vector value;
  /// An abs/max/min was evaluated exactly at its kink. The returned entries
  /// then use the first branch: the left branch (−1) for abs, the first
  /// argument for max/min.
  bool kink = false;
  bool domain_violation = false;
};

/// Exact forward-mode gradient with respect to every declared variable.
Gradient grad(const Expr& e, const Vector& point);

/// One forward pass: ⟨∇e(point), direction⟩.
Gradient directional(const Expr& e, const Vector& point,
                     const Vector& direction);

enum class CachePolicy { None, LastPoint };

/**
 * A vector-valued C¹ map f: Rⁿ → Rᵐ given by m expressions in n variables.
 *
 * With CachePolicy::LastPoint the most recent value/Jacobian pair is reused
 * when the same point is queried again; the cache is mutex protected.
 */
class SmoothMap {
 public:
  SmoothMap() = default;
  SmoothMap(std::vector<Expr> components, std::size_t input_dim,
            CachePolicy policy = CachePolicy::None);

  static SmoothMap parse(std::span<const std::string> texts,
                         const std::vector<std::string>& vars,
                         CachePolicy policy = CachePolicy::None);
  /// f(x) = x on Rⁿ.
  static SmoothMap identity(std::size_t n);
  /// f(x) = A x + b, with variables x1..xn.
  static SmoothMap affine(const Matrix& a, const Vector& b);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return components_.size(); }
  const Expr& component(std::size_t i) const { return components_[i]; }
  const std::vector<Expr>& components() const { return components_; }

  /// Entries with domain violations are +∞.
  Vector eval(const Vector& x) const;
  /// m×n Jacobian. Sets *kink when any entry hit an abs/max/min kink.
  Matrix jacobian(const Vector& x, bool* kink = nullptr) const;

 private:
  struct Cache {
    std::mutex mutex;
    bool has_value = false;
    bool has_jacobian = false;
    Vector point;
    Vector value;
    Matrix jacobian;
  };

  std::vector<Expr> components_;
  std::size_t input_dim_ = 0;
  CachePolicy policy_ = CachePolicy::None;
  std::shared_ptr<Cache> cache_;
};

}  // namespace varcert
