#pragma once

#include <vector>

#include <Eigen/Dense>

namespace d3as::assign {

struct Result {
  // row index assigned to each column; rows used at most once
  std::vector<int> row_of_col;
  double cost = 0.0;
};

// Min-cost assignment of every column of `cost` (rows x cols, rows >= cols)
// to a distinct row. Shortest augmenting path with dual potentials,
// O(cols^2 * rows). Throws std::invalid_argument when rows < cols.
Result solve_min_cost(const Eigen::MatrixXd& cost);

}  // namespace d3as::assign
