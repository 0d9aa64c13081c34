#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "d3as/random.hpp"
#include "d3as/tensor.hpp"

namespace d3as::nn {

// Define-by-run reverse-mode tape over dense matrices.
//
// Every op appends a node holding its value and a closure that scatters the
// node's gradient into its parents. Node ids are created in topological
// order, so backward() is a single reverse sweep. Parameter leaves add their
// gradient into the owning Tensor, which is how the optimizer sees it.
class Graph {
 public:
  using Id = int;

  Id input(Eigen::MatrixXd value);          // constant leaf
  Id param(Tensor& t);                      // trainable leaf

  Id matmul(Id a, Id b);
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id hadamard(Id a, Id b);
  Id scale(Id a, double s);
  Id add_col_broadcast(Id m, Id col);       // col is rows x 1
  Id transpose(Id a);
  Id vstack(const std::vector<Id>& parts);
  Id hstack(const std::vector<Id>& parts);
  Id block(Id a, int row0, int col0, int rows, int cols);

  Id relu(Id a);
  Id sigmoid(Id a);
  Id softplus(Id a);
  Id square(Id a);
  Id log_clamped(Id a, double floor);       // log(max(x, floor))
  Id softmax_cols(Id a);                    // column-wise, max-stabilized
  Id layer_norm_cols(Id a, Id gain, Id bias, double eps = 1e-5);
  Id sum(Id a);                             // 1 x 1
  Id mean(Id a);                            // 1 x 1

  // Inverted-scaling dropout: keep with probability 1-rate and divide by
  // 1-rate, so evaluation needs no rescaling. Identity (no node) when
  // train is false or rate is 0.
  Id dropout(Id a, double rate, bool train, RandomStream* rng);

  // Columns of the result are rows of `table` (a params x width tensor)
  // selected by index. Backward scatter-adds, so repeated indices accumulate.
  Id lookup_rows_as_cols(Tensor& table, const std::vector<int>& indices);

  const Eigen::MatrixXd& value(Id id) const { return nodes_[id].value; }
  int rows(Id id) const { return static_cast<int>(nodes_[id].value.rows()); }
  int cols(Id id) const { return static_cast<int>(nodes_[id].value.cols()); }

  // Seeds d(scalar)/d(scalar) = 1 and runs the reverse sweep. Throws
  // std::invalid_argument unless the node is 1 x 1.
  void backward(Id scalar);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    std::function<void(Graph&, Node&)> back;  // empty for constants
  };

  Id emplace(Eigen::MatrixXd value, std::function<void(Graph&, Node&)> back);
  Eigen::MatrixXd& grad(Id id);

  std::vector<Node> nodes_;
};

}  // namespace d3as::nn
