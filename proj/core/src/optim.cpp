#include "d3as/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace d3as::nn {

void AdamWConfig::validate() const {
  if (lr <= 0.0) throw std::invalid_argument("adamw: lr must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0)
    throw std::invalid_argument("adamw: beta1 outside [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("adamw: beta2 outside [0, 1)");
  if (eps <= 0.0) throw std::invalid_argument("adamw: eps must be > 0");
  if (weight_decay < 0.0)
    throw std::invalid_argument("adamw: weight decay negative");
}

AdamW::AdamW(ParamStore& store, const AdamWConfig& cfg)
    : store_(store), cfg_(cfg) {
  cfg_.validate();
  m_.reserve(store.count());
  v_.reserve(store.count());
  for (std::size_t i = 0; i < store.count(); ++i) {
    const Tensor& t = store.at(i);
    m_.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
  }
}

void AdamW::set_lr(double lr) {
  if (lr <= 0.0) throw std::invalid_argument("adamw: lr must be > 0");
  cfg_.lr = lr;
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < store_.count(); ++i) {
    Tensor& t = store_.at(i);
    auto& m = m_[i];
    auto& v = v_[i];
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * t.grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * t.grad.cwiseProduct(t.grad);
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    t.value.array() -= cfg_.lr * m_hat / (v_hat.sqrt() + cfg_.eps);
    if (cfg_.weight_decay != 0.0) {
      t.value.array() -= cfg_.lr * cfg_.weight_decay * t.value.array();
    }
  }
}

PlateauScheduler::PlateauScheduler(int window, int patience, double factor,
                                   double min_lr)
    : window_(window), patience_(patience), factor_(factor), min_lr_(min_lr) {
  if (window < 1) throw std::invalid_argument("plateau: window < 1");
  if (patience < 1) throw std::invalid_argument("plateau: patience < 1");
  if (factor <= 0.0 || factor >= 1.0)
    throw std::invalid_argument("plateau: factor outside (0, 1)");
}

double PlateauScheduler::moving_average() const {
  if (history_.empty()) return 0.0;
  return running_sum_ / static_cast<double>(history_.size());
}

double PlateauScheduler::observe(double loss, double current_lr) {
  history_.push_back(loss);
  running_sum_ += loss;
  if (static_cast<int>(history_.size()) > window_) {
    running_sum_ -= history_.front();
    history_.pop_front();
  }
  if (!window_full()) return current_lr;

  const double ma = moving_average();
  if (!has_best_ || ma < best_) {
    best_ = ma;
    has_best_ = true;
    bad_count_ = 0;
    return current_lr;
  }
  if (++bad_count_ >= patience_) {
    bad_count_ = 0;
    const double next = std::max(current_lr * factor_, min_lr_);
    return next;
  }
  return current_lr;
}

}  // namespace d3as::nn
