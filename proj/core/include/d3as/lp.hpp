#pragma once

#include <Eigen/Dense>

namespace d3as::lp {

enum class Status { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct Solution {
  Status status = Status::kIterationLimit;
  double objective = 0.0;
  Eigen::VectorXd x;
};

// Minimize c'x subject to A x = b, x >= 0 (standard form; callers add their
// own slack variables to encode inequalities).
//
// Dense two-phase primal simplex on the full tableau. Pivoting is Dantzig
// (most negative reduced cost) with a switch to Bland's rule after a fixed
// number of iterations so degenerate problems cannot cycle.
Solution solve_standard_form(const Eigen::MatrixXd& a,
                             const Eigen::VectorXd& b,
                             const Eigen::VectorXd& c,
                             int max_iterations = 50000);

}  // namespace d3as::lp
