#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace d3as::nn {

// Named trainable parameter. Storage is a dense matrix; vectors are column
// matrices. Gradient always has the same dimensions as the value.
struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  Tensor() = default;
  Tensor(std::string n, int rows, int cols)
      : name(std::move(n)),
        value(Eigen::MatrixXd::Zero(rows, cols)),
        grad(Eigen::MatrixXd::Zero(rows, cols)) {}

  int rows() const { return static_cast<int>(value.rows()); }
  int cols() const { return static_cast<int>(value.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
  void zero_grad() { grad.setZero(); }
};

// Ordered, uniquely named collection of parameters. Pointers stay stable for
// the life of the store, so graphs and optimizers can hold Tensor*.
class ParamStore {
 public:
  Tensor& add(const std::string& name, int rows, int cols);
  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;

  std::size_t count() const { return params_.size(); }
  Tensor& at(std::size_t i) { return *params_[i]; }
  const Tensor& at(std::size_t i) const { return *params_[i]; }

  std::size_t total_size() const;
  void zero_grad();
  void scale_grad(double factor);

 private:
  std::vector<std::unique_ptr<Tensor>> params_;
};

}  // namespace d3as::nn
