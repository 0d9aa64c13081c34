#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "d3as/tensor.hpp"

namespace d3as::nn {

struct AdamWConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;  // throws std::invalid_argument
};

// AdamW with bias-corrected moments and decoupled weight decay:
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta.
// Holds one (m, v) pair per tensor, matched by position in the store.
class AdamW {
 public:
  AdamW(ParamStore& store, const AdamWConfig& cfg);

  void step();  // consumes current gradients; does not zero them

  double lr() const { return cfg_.lr; }
  void set_lr(double lr);
  std::int64_t steps_taken() const { return t_; }

 private:
  ParamStore& store_;
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
};

// Halve the learning rate when the moving average of the loss stops
// improving for `patience` consecutive observations. The average uses a
// sliding window of `window` losses and only counts once the window is full.
class PlateauScheduler {
 public:
  PlateauScheduler(int window, int patience, double factor = 0.5,
                   double min_lr = 0.0);

  // Feed one loss observation; returns the learning rate to use next,
  // given the current one.
  double observe(double loss, double current_lr);

  bool window_full() const {
    return static_cast<int>(history_.size()) == window_;
  }
  double moving_average() const;

 private:
  int window_;
  int patience_;
  double factor_;
  double min_lr_;
  std::deque<double> history_;
  double running_sum_ = 0.0;
  double best_ = 0.0;
  bool has_best_ = false;
  int bad_count_ = 0;
};

}  // namespace d3as::nn
