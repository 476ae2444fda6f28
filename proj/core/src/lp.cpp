#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/LU>

#include "varcert/errors.hpp"
#include "varcert/solvers.hpp"

namespace varcert {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
constexpr double kMinPivot = 1e-12;
constexpr int kRefactorEvery = 50;

// How a standard-form column maps back onto an original variable:
// x_orig[var] += sign * x_std[col].
struct ColumnMap {
  Eigen::Index var = -1;
  double sign = 1.0;
};

/**
 * Dense tableau for  min cᵀx  s.t.  A x = b (b ≥ 0), x ≥ 0.
 *
 * Rows of `tab_` hold B⁻¹[A | b]; `cost_` is the reduced-cost row.
 */
class Tableau {
 public:
  Tableau(Matrix a, Vector b, std::vector<Eigen::Index> basis)
      : a_(std::move(a)), b_(std::move(b)), basis_(std::move(basis)) {
    refactor();
  }

  void set_costs(const Vector& c) {
    c_ = c;
    recompute_cost_row();
  }

  // Returns false when unbounded.
  bool optimize(int& pivots) {
    const Eigen::Index rhs = a_.cols();
    int since_refactor = 0;
    while (true) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < a_.cols(); ++j) {
        if (!allowed(j)) continue;
        if (cost_[j] < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;

      Eigen::Index leave = -1;
      double best = kInf;
      for (Eigen::Index i = 0; i < tab_.rows(); ++i) {
        const double aij = tab_(i, enter);
        if (aij <= kPivotTol) continue;
        const double ratio = tab_(i, rhs) / aij;
        if (leave < 0 || ratio < best - 1e-12) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + 1e-12 &&
                   basis_[static_cast<std::size_t>(i)] <
                       basis_[static_cast<std::size_t>(leave)]) {
          // Bland: among tied rows the lowest basic index leaves.
          leave = i;
        }
      }
      if (leave < 0) return false;

      pivot(leave, enter);
      ++pivots;
      if (++since_refactor >= kRefactorEvery) {
        refactor();
        recompute_cost_row();
        since_refactor = 0;
      }
    }
  }

  void pivot(Eigen::Index r, Eigen::Index col) {
    const double p = tab_(r, col);
    if (std::abs(p) < kMinPivot) throw NumericalBreakdown(p);
    tab_.row(r) /= p;
    for (Eigen::Index i = 0; i < tab_.rows(); ++i) {
      if (i == r) continue;
      const double f = tab_(i, col);
      if (f != 0.0) tab_.row(i) -= f * tab_.row(r);
    }
    const double f = cost_[col];
    if (f != 0.0) {
      cost_ -= f * tab_.row(r).head(a_.cols()).transpose();
      cost_value_ -= f * tab_(r, a_.cols());
    }
    basis_[static_cast<std::size_t>(r)] = col;
  }

  // Recomputes B⁻¹[A | b] from the original data.
  void refactor() {
    const Eigen::Index m = a_.rows();
    if (m == 0) {
      tab_.resize(0, a_.cols() + 1);
      return;
    }
    Matrix basis_cols(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      basis_cols.col(i) = a_.col(basis_[static_cast<std::size_t>(i)]);
    }
    Eigen::FullPivLU<Matrix> lu(basis_cols);
    if (lu.rank() < m) {
      throw NumericalBreakdown(std::abs(lu.maxPivot()) *
                               lu.threshold());
    }
    Matrix aug(m, a_.cols() + 1);
    aug << a_, b_;
    tab_ = lu.solve(aug);
    // Clean basic columns to exact unit vectors.
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto col = basis_[static_cast<std::size_t>(i)];
      tab_.col(col).setZero();
      tab_(i, col) = 1.0;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      if (tab_(i, a_.cols()) < 0.0 && tab_(i, a_.cols()) > -1e-11) {
        tab_(i, a_.cols()) = 0.0;
      }
    }
  }

  void recompute_cost_row() {
    cost_ = c_;
    cost_value_ = 0.0;
    for (Eigen::Index i = 0; i < tab_.rows(); ++i) {
      const double cb = c_[basis_[static_cast<std::size_t>(i)]];
      if (cb == 0.0) continue;
      cost_ -= cb * tab_.row(i).head(a_.cols()).transpose();
      cost_value_ -= cb * tab_(i, a_.cols());
    }
  }

  double objective() const { return -cost_value_; }

  Vector primal() const {
    Vector x = Vector::Zero(a_.cols());
    for (Eigen::Index i = 0; i < tab_.rows(); ++i) {
      x[basis_[static_cast<std::size_t>(i)]] = tab_(i, a_.cols());
    }
    return x;
  }

  // y solving Bᵀy = c_B.
  Vector duals() const {
    const Eigen::Index m = a_.rows();
    if (m == 0) return Vector();
    Matrix basis_cols(m, m);
    Vector cb(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto col = basis_[static_cast<std::size_t>(i)];
      basis_cols.col(i) = a_.col(col);
      cb[i] = c_[col];
    }
    return basis_cols.transpose().fullPivLu().solve(cb);
  }

  // Removes row r (a redundant equality) from the problem.
  void drop_row(Eigen::Index r) {
    auto remove_row = [r](Matrix& m) {
      Matrix out(m.rows() - 1, m.cols());
      out << m.topRows(r), m.bottomRows(m.rows() - r - 1);
      m = std::move(out);
    };
    remove_row(a_);
    remove_row(tab_);
    Vector nb(b_.size() - 1);
    nb << b_.head(r), b_.tail(b_.size() - r - 1);
    b_ = std::move(nb);
    basis_.erase(basis_.begin() + r);
    dropped_.push_back(r);
  }

  // Restricts the problem to the first `cols` columns (drops artificials).
  void truncate_columns(Eigen::Index cols) {
    Matrix a = a_.leftCols(cols);
    a_ = std::move(a);
    Matrix t(tab_.rows(), cols + 1);
    t << tab_.leftCols(cols), tab_.col(tab_.cols() - 1);
    tab_ = std::move(t);
    blocked_from_ = cols;
  }

  void block_from(Eigen::Index col) { blocked_from_ = col; }

  const Matrix& tab() const { return tab_; }
  const std::vector<Eigen::Index>& basis() const { return basis_; }
  const std::vector<Eigen::Index>& dropped_rows() const { return dropped_; }
  Eigen::Index cols() const { return a_.cols(); }

 private:
  bool allowed(Eigen::Index j) const { return j < blocked_from_; }

  Matrix a_;
  Vector b_;
  Vector c_;
  std::vector<Eigen::Index> basis_;
  Matrix tab_;
  Vector cost_;
  double cost_value_ = 0.0;
  Eigen::Index blocked_from_ = std::numeric_limits<Eigen::Index>::max();
  std::vector<Eigen::Index> dropped_;
};

}  // namespace

const char* to_string(LPStatus s) {
  switch (s) {
    case LPStatus::Optimal:
      return "Optimal";
    case LPStatus::Infeasible:
      return "Infeasible";
    case LPStatus::Unbounded:
      return "Unbounded";
  }
  return "?";
}

LPProblem LPProblem::make(Vector c, Matrix a, Vector b,
                          std::vector<RowSense> senses) {
  LPProblem p;
  const auto n = c.size();
  p.c = std::move(c);
  p.a = std::move(a);
  p.b = std::move(b);
  p.senses = std::move(senses);
  p.lower = Vector::Constant(n, -kInf);
  p.upper = Vector::Constant(n, kInf);
  return p;
}

void LPProblem::validate() const {
  const auto n = c.size();
  if (a.cols() != n && a.rows() > 0) {
    throw DimensionMismatch("LP constraint matrix has wrong column count");
  }
  if (b.size() != a.rows() ||
      senses.size() != static_cast<std::size_t>(a.rows())) {
    throw DimensionMismatch("LP rhs/senses do not match constraint rows");
  }
  if (lower.size() != n || upper.size() != n) {
    throw DimensionMismatch("LP bounds have wrong length");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (lower[j] > upper[j]) throw InputError("LP bound lower > upper");
    if (!std::isfinite(c[j])) throw InputError("LP objective not finite");
  }
  if (!a.allFinite() || !b.allFinite()) throw InputError("LP data not finite");
}

double LPSolution::dual_objective(const LPProblem& p) const {
  double v = p.b.dot(y);
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    if (z[j] > 0.0 && std::isfinite(p.lower[j])) v += p.lower[j] * z[j];
    if (z[j] < 0.0 && std::isfinite(p.upper[j])) v += p.upper[j] * z[j];
  }
  return v;
}

LPSolution lp_solve(const LPProblem& p) {
  p.validate();
  const Eigen::Index n = p.num_vars();
  const Eigen::Index m0 = p.num_rows();

  // Substitute bounds to get nonnegative variables.
  std::vector<ColumnMap> colmap;
  Vector offset = Vector::Zero(n);
  std::vector<std::pair<Eigen::Index, double>> bound_rows;  // (std col, cap)
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool lo = std::isfinite(p.lower[j]);
    const bool hi = std::isfinite(p.upper[j]);
    if (lo) {
      offset[j] = p.lower[j];
      colmap.push_back({j, 1.0});
      if (hi) {
        bound_rows.emplace_back(static_cast<Eigen::Index>(colmap.size()) - 1,
                                p.upper[j] - p.lower[j]);
      }
    } else if (hi) {
      offset[j] = p.upper[j];
      colmap.push_back({j, -1.0});
    } else {
      colmap.push_back({j, 1.0});
      colmap.push_back({j, -1.0});
    }
  }
  const auto nstd = static_cast<Eigen::Index>(colmap.size());
  const Eigen::Index m = m0 + static_cast<Eigen::Index>(bound_rows.size());

  Matrix a_std = Matrix::Zero(m, nstd);
  Vector b_std(m);
  std::vector<RowSense> senses(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m0; ++i) {
    for (Eigen::Index k = 0; k < nstd; ++k) {
      const auto& cm = colmap[static_cast<std::size_t>(k)];
      a_std(i, k) = cm.sign * p.a(i, cm.var);
    }
    b_std[i] = p.b[i] - (m0 > 0 ? p.a.row(i).dot(offset) : 0.0);
    senses[static_cast<std::size_t>(i)] = p.senses[static_cast<std::size_t>(i)];
  }
  for (std::size_t r = 0; r < bound_rows.size(); ++r) {
    const auto i = m0 + static_cast<Eigen::Index>(r);
    a_std(i, bound_rows[r].first) = 1.0;
    b_std[i] = bound_rows[r].second;
    senses[static_cast<std::size_t>(i)] = RowSense::Le;
  }

  // Slacks, row flips and the starting basis.
  Eigen::Index nslack = 0;
  for (auto s : senses) nslack += (s != RowSense::Eq) ? 1 : 0;
  std::vector<double> flip(static_cast<std::size_t>(m), 1.0);
  Matrix body = Matrix::Zero(m, nstd + nslack);
  body.leftCols(nstd) = a_std;
  Eigen::Index sc = nstd;
  std::vector<Eigen::Index> slack_col(static_cast<std::size_t>(m), -1);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto s = senses[static_cast<std::size_t>(i)];
    if (s == RowSense::Le) {
      body(i, sc) = 1.0;
      slack_col[static_cast<std::size_t>(i)] = sc++;
    } else if (s == RowSense::Ge) {
      body(i, sc) = -1.0;
      slack_col[static_cast<std::size_t>(i)] = sc++;
    }
    if (b_std[i] < 0.0) {
      body.row(i) *= -1.0;
      b_std[i] = -b_std[i];
      flip[static_cast<std::size_t>(i)] = -1.0;
    }
  }
  const Eigen::Index ncore = nstd + nslack;

  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m), -1);
  Eigen::Index nart = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto s = slack_col[static_cast<std::size_t>(i)];
    if (s >= 0 && body(i, s) > 0.0) {
      basis[static_cast<std::size_t>(i)] = s;
    } else {
      ++nart;
    }
  }
  Matrix full = Matrix::Zero(m, ncore + nart);
  full.leftCols(ncore) = body;
  Eigen::Index ac = ncore;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[static_cast<std::size_t>(i)] < 0) {
      full(i, ac) = 1.0;
      basis[static_cast<std::size_t>(i)] = ac++;
    }
  }

  LPSolution sol;
  Tableau tab(std::move(full), b_std, std::move(basis));

  // Phase 1.
  if (nart > 0) {
    Vector c1 = Vector::Zero(ncore + nart);
    c1.tail(nart).setOnes();
    tab.set_costs(c1);
    tab.optimize(sol.pivots);
    if (tab.objective() > 1e-9 * (1.0 + b_std.lpNorm<Eigen::Infinity>())) {
      sol.status = LPStatus::Infeasible;
      return sol;
    }
    // Drive artificials out of the basis.
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(tab.basis().size());) {
      if (tab.basis()[static_cast<std::size_t>(i)] < ncore) {
        ++i;
        continue;
      }
      Eigen::Index col = -1;
      double best = kPivotTol;
      for (Eigen::Index j = 0; j < ncore; ++j) {
        if (std::abs(tab.tab()(i, j)) > best) {
          best = std::abs(tab.tab()(i, j));
          col = j;
        }
      }
      if (col >= 0) {
        tab.pivot(i, col);
        ++sol.pivots;
        ++i;
      } else {
        tab.drop_row(i);
      }
    }
    tab.truncate_columns(ncore);
    tab.refactor();
  }

  // Phase 2.
  Vector c2 = Vector::Zero(ncore);
  for (Eigen::Index k = 0; k < nstd; ++k) {
    const auto& cm = colmap[static_cast<std::size_t>(k)];
    c2[k] = cm.sign * p.c[cm.var];
  }
  tab.set_costs(c2);
  if (!tab.optimize(sol.pivots)) {
    sol.status = LPStatus::Unbounded;
    return sol;
  }
  tab.refactor();
  tab.recompute_cost_row();

  const Vector xs = tab.primal();
  sol.x = offset;
  for (Eigen::Index k = 0; k < nstd; ++k) {
    const auto& cm = colmap[static_cast<std::size_t>(k)];
    sol.x[cm.var] += cm.sign * xs[k];
  }
  sol.objective = p.c.dot(sol.x);

  // Row duals, reinserting dropped rows with zero multipliers.
  const Vector ys = tab.duals();
  std::vector<Eigen::Index> kept;
  {
    std::vector<bool> alive(static_cast<std::size_t>(m), true);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (auto r : tab.dropped_rows()) {
      // Dropped indices refer to the row numbering at the time of removal.
      Eigen::Index seen = -1;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (!alive[static_cast<std::size_t>(i)]) continue;
        if (++seen == r) {
          alive[static_cast<std::size_t>(i)] = false;
          break;
        }
      }
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      if (alive[static_cast<std::size_t>(i)]) kept.push_back(i);
    }
  }
  Vector y_all = Vector::Zero(m);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const auto i = kept[k];
    y_all[i] = flip[static_cast<std::size_t>(i)] * ys[static_cast<Eigen::Index>(k)];
  }
  sol.y = y_all.head(m0);
  sol.z = p.c;
  if (m0 > 0) sol.z -= p.a.transpose() * sol.y;
  sol.status = LPStatus::Optimal;
  return sol;
}

}  // namespace varcert
