#include "d3as/tensor.hpp"

#include <stdexcept>

namespace d3as::nn {

Tensor& ParamStore::add(const std::string& name, int rows, int cols) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("ParamStore::add: empty tensor " + name);
  }
  if (find(name) != nullptr) {
    throw std::invalid_argument("ParamStore::add: duplicate name " + name);
  }
  params_.push_back(std::make_unique<Tensor>(name, rows, cols));
  return *params_.back();
}

Tensor* ParamStore::find(const std::string& name) {
  for (auto& t : params_) {
    if (t->name == name) return t.get();
  }
  return nullptr;
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (const auto& t : params_) {
    if (t->name == name) return t.get();
  }
  return nullptr;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& t : params_) n += t->size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& t : params_) t->zero_grad();
}

void ParamStore::scale_grad(double factor) {
  for (auto& t : params_) t->grad *= factor;
}

}  // namespace d3as::nn
