#include "d3as/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace d3as::lp {

namespace {

constexpr double kPivotEps = 1e-9;
constexpr double kCostEps = 1e-9;

struct Tableau {
  // rows: m constraint rows, then one reduced-cost row.
  // cols: variables, then the rhs column.
  Eigen::MatrixXd t;
  std::vector<int> basis;  // basic variable per constraint row
  int m = 0;
  int n = 0;  // variable columns (excludes rhs)

  double& rhs(int row) { return t(row, n); }
  double cost(int col) const { return t(m, col); }

  void pivot(int row, int col) {
    t.row(row) /= t(row, col);
    for (int r = 0; r <= m; ++r) {
      if (r == row) continue;
      const double factor = t(r, col);
      if (factor != 0.0) t.row(r) -= factor * t.row(row);
    }
    basis[row] = col;
  }

  // Entering column, or -1 at optimality. Dantzig first, Bland once the
  // caller signals too many iterations.
  int entering(bool bland) const {
    if (bland) {
      for (int j = 0; j < n; ++j) {
        if (cost(j) < -kCostEps) return j;
      }
      return -1;
    }
    int best = -1;
    double best_cost = -kCostEps;
    for (int j = 0; j < n; ++j) {
      if (cost(j) < best_cost) {
        best_cost = cost(j);
        best = j;
      }
    }
    return best;
  }

  // Leaving row by ratio test, or -1 when the column is unbounded. Ties go
  // to the row whose basic variable has the smallest index, which is what
  // Bland's rule needs.
  int leaving(int col) const {
    int best = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int r = 0; r < m; ++r) {
      const double a = t(r, col);
      if (a <= kPivotEps) continue;
      const double ratio = t(r, n) / a;
      if (ratio < best_ratio - kPivotEps ||
          (ratio < best_ratio + kPivotEps &&
           (best == -1 || basis[r] < basis[best]))) {
        best_ratio = ratio;
        best = r;
      }
    }
    return best;
  }
};

enum class IterateResult { kOptimal, kUnbounded, kLimit };

IterateResult iterate(Tableau& tab, int max_iterations) {
  const int dantzig_budget = max_iterations / 2;
  for (int it = 0; it < max_iterations; ++it) {
    const int col = tab.entering(it >= dantzig_budget);
    if (col < 0) return IterateResult::kOptimal;
    const int row = tab.leaving(col);
    if (row < 0) return IterateResult::kUnbounded;
    tab.pivot(row, col);
  }
  return IterateResult::kLimit;
}

}  // namespace

Solution solve_standard_form(const Eigen::MatrixXd& a,
                             const Eigen::VectorXd& b,
                             const Eigen::VectorXd& c,
                             int max_iterations) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  if (b.size() != m || c.size() != n) {
    throw std::invalid_argument("solve_standard_form: dimension mismatch");
  }

  Solution sol;
  if (m == 0) {
    // No constraints: optimum is x = 0 unless some cost is negative.
    for (int j = 0; j < n; ++j) {
      if (c(j) < -kCostEps) {
        sol.status = Status::kUnbounded;
        return sol;
      }
    }
    sol.status = Status::kOptimal;
    sol.objective = 0.0;
    sol.x = Eigen::VectorXd::Zero(n);
    return sol;
  }

  // Phase 1 tableau: [A | I | b] with artificial basis, after flipping rows
  // so that b >= 0.
  Tableau tab;
  tab.m = m;
  tab.n = n + m;
  tab.t.setZero(m + 1, tab.n + 1);
  tab.t.block(0, 0, m, n) = a;
  tab.t.block(0, n, m, m) = Eigen::MatrixXd::Identity(m, m);
  tab.t.block(0, tab.n, m, 1) = b;
  for (int r = 0; r < m; ++r) {
    if (tab.rhs(r) < 0.0) {
      tab.t.row(r).head(n) *= -1.0;
      tab.t(r, tab.n) *= -1.0;
    }
  }
  tab.basis.resize(m);
  for (int r = 0; r < m; ++r) tab.basis[r] = n + r;

  // Phase 1 objective: sum of artificials, priced out against the basis.
  for (int j = n; j < tab.n; ++j) tab.t(m, j) = 1.0;
  for (int r = 0; r < m; ++r) tab.t.row(m) -= tab.t.row(r);

  IterateResult res = iterate(tab, max_iterations);
  if (res == IterateResult::kLimit) {
    sol.status = Status::kIterationLimit;
    return sol;
  }
  const double phase1_obj = -tab.t(m, tab.n);
  if (phase1_obj > 1e-7) {
    sol.status = Status::kInfeasible;
    return sol;
  }

  // Drive leftover artificials out of the basis; rows where no structural
  // column can enter are redundant and get neutralized.
  std::vector<bool> dead_row(m, false);
  for (int r = 0; r < m; ++r) {
    if (tab.basis[r] < n) continue;
    int col = -1;
    for (int j = 0; j < n; ++j) {
      if (std::abs(tab.t(r, j)) > kPivotEps) {
        col = j;
        break;
      }
    }
    if (col >= 0) {
      tab.pivot(r, col);
    } else {
      dead_row[r] = true;
    }
  }

  // Phase 2: blank the artificial columns, install the real objective, and
  // price it out.
  for (int j = n; j < tab.n; ++j) tab.t.col(j).setZero();
  tab.t.row(m).setZero();
  tab.t.row(m).head(n) = c;
  for (int r = 0; r < m; ++r) {
    if (dead_row[r]) continue;
    const int bv = tab.basis[r];
    const double cost = tab.t(m, bv);
    if (cost != 0.0) tab.t.row(m) -= cost * tab.t.row(r);
  }

  res = iterate(tab, max_iterations);
  if (res == IterateResult::kLimit) {
    sol.status = Status::kIterationLimit;
    return sol;
  }
  if (res == IterateResult::kUnbounded) {
    sol.status = Status::kUnbounded;
    return sol;
  }

  sol.status = Status::kOptimal;
  sol.x = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < m; ++r) {
    if (!dead_row[r] && tab.basis[r] < n) sol.x(tab.basis[r]) = tab.rhs(r);
  }
  sol.objective = c.dot(sol.x);
  return sol;
}

}  // namespace d3as::lp
