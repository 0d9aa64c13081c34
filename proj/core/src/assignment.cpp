#include "d3as/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace d3as::assign {

Result solve_min_cost(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows < cols) {
    throw std::invalid_argument(
        "solve_min_cost: more columns than rows, assignment infeasible");
  }
  Result result;
  result.row_of_col.assign(cols, -1);
  if (cols == 0) return result;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based augmenting-path scheme with dual potentials u (columns) and v
  // (rows); assigned[r] is the column currently matched to row r, with row 0
  // acting as the virtual unmatched slot.
  std::vector<double> u(cols + 1, 0.0), v(rows + 1, 0.0);
  std::vector<int> assigned(rows + 1, 0), way(rows + 1, 0);

  for (int c = 1; c <= cols; ++c) {
    assigned[0] = c;
    int r0 = 0;
    std::vector<double> min_reduced(rows + 1, kInf);
    std::vector<bool> used(rows + 1, false);
    do {
      used[r0] = true;
      const int c0 = assigned[r0];
      int r1 = -1;
      double delta = kInf;
      for (int r = 1; r <= rows; ++r) {
        if (used[r]) continue;
        const double reduced = cost(r - 1, c0 - 1) - u[c0] - v[r];
        if (reduced < min_reduced[r]) {
          min_reduced[r] = reduced;
          way[r] = r0;
        }
        if (min_reduced[r] < delta) {
          delta = min_reduced[r];
          r1 = r;
        }
      }
      for (int r = 0; r <= rows; ++r) {
        if (used[r]) {
          u[assigned[r]] += delta;
          v[r] -= delta;
        } else {
          min_reduced[r] -= delta;
        }
      }
      r0 = r1;
    } while (assigned[r0] != 0);
    do {
      const int r1 = way[r0];
      assigned[r0] = assigned[r1];
      r0 = r1;
    } while (r0);
  }

  for (int r = 1; r <= rows; ++r) {
    if (assigned[r] != 0) {
      result.row_of_col[assigned[r] - 1] = r - 1;
      result.cost += cost(r - 1, assigned[r] - 1);
    }
  }
  return result;
}

}  // namespace d3as::assign
