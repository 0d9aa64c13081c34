#include "d3as/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace d3as::nn {

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}
}  // namespace

Graph::Id Graph::emplace(Eigen::MatrixXd value,
                         std::function<void(Graph&, Node&)> back) {
  Node node;
  node.value = std::move(value);
  node.grad = Eigen::MatrixXd::Zero(node.value.rows(), node.value.cols());
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<Id>(nodes_.size()) - 1;
}

Eigen::MatrixXd& Graph::grad(Id id) { return nodes_[id].grad; }

Graph::Id Graph::input(Eigen::MatrixXd value) {
  return emplace(std::move(value), nullptr);
}

Graph::Id Graph::param(Tensor& t) {
  Tensor* tp = &t;
  return emplace(t.value, [tp](Graph&, Node& self) { tp->grad += self.grad; });
}

Graph::Id Graph::matmul(Id a, Id b) {
  require(cols(a) == rows(b), "matmul: inner dimensions differ");
  return emplace(nodes_[a].value * nodes_[b].value,
                 [a, b](Graph& g, Node& self) {
                   g.grad(a).noalias() +=
                       self.grad * g.nodes_[b].value.transpose();
                   g.grad(b).noalias() +=
                       g.nodes_[a].value.transpose() * self.grad;
                 });
}

Graph::Id Graph::add(Id a, Id b) {
  require(rows(a) == rows(b) && cols(a) == cols(b), "add: shape mismatch");
  return emplace(nodes_[a].value + nodes_[b].value,
                 [a, b](Graph& g, Node& self) {
                   g.grad(a) += self.grad;
                   g.grad(b) += self.grad;
                 });
}

Graph::Id Graph::sub(Id a, Id b) {
  require(rows(a) == rows(b) && cols(a) == cols(b), "sub: shape mismatch");
  return emplace(nodes_[a].value - nodes_[b].value,
                 [a, b](Graph& g, Node& self) {
                   g.grad(a) += self.grad;
                   g.grad(b) -= self.grad;
                 });
}

Graph::Id Graph::hadamard(Id a, Id b) {
  require(rows(a) == rows(b) && cols(a) == cols(b),
          "hadamard: shape mismatch");
  return emplace(
      nodes_[a].value.cwiseProduct(nodes_[b].value),
      [a, b](Graph& g, Node& self) {
        g.grad(a) += self.grad.cwiseProduct(g.nodes_[b].value);
        g.grad(b) += self.grad.cwiseProduct(g.nodes_[a].value);
      });
}

Graph::Id Graph::scale(Id a, double s) {
  return emplace(s * nodes_[a].value, [a, s](Graph& g, Node& self) {
    g.grad(a) += s * self.grad;
  });
}

Graph::Id Graph::add_col_broadcast(Id m, Id col) {
  require(cols(col) == 1, "add_col_broadcast: column operand not rows x 1");
  require(rows(m) == rows(col), "add_col_broadcast: row count mismatch");
  Eigen::MatrixXd value = nodes_[m].value;
  value.colwise() += Eigen::VectorXd(nodes_[col].value.col(0));
  return emplace(std::move(value), [m, col](Graph& g, Node& self) {
    g.grad(m) += self.grad;
    g.grad(col) += self.grad.rowwise().sum();
  });
}

Graph::Id Graph::transpose(Id a) {
  return emplace(nodes_[a].value.transpose(), [a](Graph& g, Node& self) {
    g.grad(a) += self.grad.transpose();
  });
}

Graph::Id Graph::vstack(const std::vector<Id>& parts) {
  require(!parts.empty(), "vstack: empty part list");
  const int c = cols(parts[0]);
  int total_rows = 0;
  for (Id p : parts) {
    require(cols(p) == c, "vstack: column count mismatch");
    total_rows += rows(p);
  }
  Eigen::MatrixXd value(total_rows, c);
  int r0 = 0;
  for (Id p : parts) {
    value.middleRows(r0, rows(p)) = nodes_[p].value;
    r0 += rows(p);
  }
  return emplace(std::move(value),
                 [parts = std::vector<Id>(parts)](Graph& g, Node& self) {
                   int r0 = 0;
                   for (Id p : parts) {
                     const int pr = g.rows(p);
                     g.grad(p) += self.grad.middleRows(r0, pr);
                     r0 += pr;
                   }
                 });
}

Graph::Id Graph::hstack(const std::vector<Id>& parts) {
  require(!parts.empty(), "hstack: empty part list");
  const int r = rows(parts[0]);
  int total_cols = 0;
  for (Id p : parts) {
    require(rows(p) == r, "hstack: row count mismatch");
    total_cols += cols(p);
  }
  Eigen::MatrixXd value(r, total_cols);
  int c0 = 0;
  for (Id p : parts) {
    value.middleCols(c0, cols(p)) = nodes_[p].value;
    c0 += cols(p);
  }
  return emplace(std::move(value),
                 [parts = std::vector<Id>(parts)](Graph& g, Node& self) {
                   int c0 = 0;
                   for (Id p : parts) {
                     const int pc = g.cols(p);
                     g.grad(p) += self.grad.middleCols(c0, pc);
                     c0 += pc;
                   }
                 });
}

Graph::Id Graph::block(Id a, int row0, int col0, int r, int c) {
  require(row0 >= 0 && col0 >= 0 && r >= 0 && c >= 0 && row0 + r <= rows(a) &&
              col0 + c <= cols(a),
          "block: out of range");
  return emplace(nodes_[a].value.block(row0, col0, r, c),
                 [a, row0, col0, r, c](Graph& g, Node& self) {
                   g.grad(a).block(row0, col0, r, c) += self.grad;
                 });
}

Graph::Id Graph::relu(Id a) {
  return emplace(nodes_[a].value.cwiseMax(0.0), [a](Graph& g, Node& self) {
    g.grad(a).array() +=
        self.grad.array() * (g.nodes_[a].value.array() > 0.0).cast<double>();
  });
}

Graph::Id Graph::sigmoid(Id a) {
  Eigen::MatrixXd value = nodes_[a].value.unaryExpr([](double x) {
    // Two-branch form avoids overflow in exp for large |x|.
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
  });
  return emplace(std::move(value), [a](Graph& g, Node& self) {
    g.grad(a).array() += self.grad.array() * self.value.array() *
                         (1.0 - self.value.array());
  });
}

Graph::Id Graph::softplus(Id a) {
  Eigen::MatrixXd value = nodes_[a].value.unaryExpr([](double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  });
  return emplace(std::move(value), [a](Graph& g, Node& self) {
    g.grad(a).array() +=
        self.grad.array() * g.nodes_[a].value.unaryExpr([](double x) {
                                return x >= 0.0
                                           ? 1.0 / (1.0 + std::exp(-x))
                                           : std::exp(x) / (1.0 + std::exp(x));
                              }).array();
  });
}

Graph::Id Graph::square(Id a) {
  return emplace(nodes_[a].value.array().square().matrix(),
                 [a](Graph& g, Node& self) {
                   g.grad(a).array() +=
                       self.grad.array() * 2.0 * g.nodes_[a].value.array();
                 });
}

Graph::Id Graph::log_clamped(Id a, double floor) {
  require(floor > 0.0, "log_clamped: floor must be positive");
  Eigen::MatrixXd value =
      nodes_[a].value.cwiseMax(floor).array().log().matrix();
  return emplace(std::move(value), [a, floor](Graph& g, Node& self) {
    // Zero slope on the clamped branch.
    g.grad(a).array() +=
        self.grad.array() *
        (g.nodes_[a].value.array() > floor).cast<double>() /
        g.nodes_[a].value.array().max(floor);
  });
}

Graph::Id Graph::softmax_cols(Id a) {
  Eigen::MatrixXd value = nodes_[a].value;
  for (Eigen::Index j = 0; j < value.cols(); ++j) {
    auto col = value.col(j).array();
    col -= col.maxCoeff();
    col = col.exp();
    col /= col.sum();
  }
  return emplace(std::move(value), [a](Graph& g, Node& self) {
    for (Eigen::Index j = 0; j < self.value.cols(); ++j) {
      const auto s = self.value.col(j).array();
      const auto dy = self.grad.col(j).array();
      const double dot = (s * dy).sum();
      g.grad(a).col(j).array() += s * (dy - dot);
    }
  });
}

Graph::Id Graph::layer_norm_cols(Id a, Id gain, Id bias, double eps) {
  const int d = rows(a);
  const int n = cols(a);
  require(rows(gain) == d && cols(gain) == 1, "layer_norm: gain must be d x 1");
  require(rows(bias) == d && cols(bias) == 1, "layer_norm: bias must be d x 1");
  Eigen::MatrixXd x_hat(d, n);
  Eigen::VectorXd inv_std(n);
  for (int j = 0; j < n; ++j) {
    const auto x = nodes_[a].value.col(j).array();
    const double mu = x.mean();
    const double var = (x - mu).square().mean();
    inv_std(j) = 1.0 / std::sqrt(var + eps);
    x_hat.col(j) = ((x - mu) * inv_std(j)).matrix();
  }
  const Eigen::VectorXd g_vec = nodes_[gain].value.col(0);
  const Eigen::VectorXd b_vec = nodes_[bias].value.col(0);
  Eigen::MatrixXd value =
      ((x_hat.array().colwise() * g_vec.array()).colwise() + b_vec.array())
          .matrix();
  return emplace(std::move(value), [a, gain, bias, x_hat = std::move(x_hat),
                                    inv_std = std::move(inv_std),
                                    g_vec](Graph& g, Node& self) {
    const int n = static_cast<int>(self.value.cols());
    const int d = static_cast<int>(self.value.rows());
    for (int j = 0; j < n; ++j) {
      const auto dy = self.grad.col(j).array();
      const auto xh = x_hat.col(j).array();
      g.grad(gain).col(0).array() += dy * xh;
      g.grad(bias).col(0).array() += dy;
      const auto dxh = dy * g_vec.array();
      const double mean_dxh = dxh.mean();
      const double mean_dxh_xh = (dxh * xh).sum() / d;
      g.grad(a).col(j).array() +=
          inv_std(j) * (dxh - mean_dxh - xh * mean_dxh_xh);
    }
  });
}

Graph::Id Graph::sum(Id a) {
  Eigen::MatrixXd value(1, 1);
  value(0, 0) = nodes_[a].value.sum();
  return emplace(std::move(value), [a](Graph& g, Node& self) {
    g.grad(a).array() += self.grad(0, 0);
  });
}

Graph::Id Graph::mean(Id a) {
  const double inv = 1.0 / static_cast<double>(nodes_[a].value.size());
  Eigen::MatrixXd value(1, 1);
  value(0, 0) = nodes_[a].value.sum() * inv;
  return emplace(std::move(value), [a, inv](Graph& g, Node& self) {
    g.grad(a).array() += self.grad(0, 0) * inv;
  });
}

Graph::Id Graph::dropout(Id a, double rate, bool train, RandomStream* rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
  if (!train || rate == 0.0) return a;
  require(rng != nullptr, "dropout: training mode needs a random stream");
  const double keep = 1.0 - rate;
  Eigen::MatrixXd mask(rows(a), cols(a));
  // Column-major draw order, fixed so a seed pins the mask bytes.
  for (Eigen::Index j = 0; j < mask.cols(); ++j) {
    for (Eigen::Index i = 0; i < mask.rows(); ++i) {
      mask(i, j) = rng->uniform01() < keep ? 1.0 / keep : 0.0;
    }
  }
  // Materialize before emplace: the capture moves `mask`, and argument
  // evaluation order is unspecified.
  Eigen::MatrixXd value = nodes_[a].value.cwiseProduct(mask);
  return emplace(std::move(value),
                 [a, mask = std::move(mask)](Graph& g, Node& self) {
                   g.grad(a) += self.grad.cwiseProduct(mask);
                 });
}

Graph::Id Graph::lookup_rows_as_cols(Tensor& table,
                                     const std::vector<int>& indices) {
  const int width = table.cols();
  Eigen::MatrixXd value(width, static_cast<int>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= table.rows()) {
      throw std::out_of_range("lookup_rows_as_cols: index outside table");
    }
    value.col(static_cast<int>(i)) = table.value.row(idx).transpose();
  }
  Tensor* tp = &table;
  return emplace(std::move(value),
                 [tp, indices = std::vector<int>(indices)](Graph&, Node& self) {
                   for (std::size_t i = 0; i < indices.size(); ++i) {
                     tp->grad.row(indices[i]) +=
                         self.grad.col(static_cast<int>(i)).transpose();
                   }
                 });
}

void Graph::backward(Id scalar) {
  require(scalar >= 0 && scalar < static_cast<Id>(nodes_.size()),
          "backward: bad node id");
  require(nodes_[scalar].value.rows() == 1 && nodes_[scalar].value.cols() == 1,
          "backward: root must be 1 x 1");
  nodes_[scalar].grad(0, 0) = 1.0;
  for (Id id = scalar; id >= 0; --id) {
    Node& node = nodes_[id];
    if (node.back) node.back(*this, node);
  }
}

}  // namespace d3as::nn
