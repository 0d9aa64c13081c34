#include "d3as/random.hpp"

#include <cmath>
#include <stdexcept>

namespace d3as {

double RandomStream::normal() {
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int RandomStream::poisson(double lambda) {
  if (lambda < 0.0 || !std::isfinite(lambda)) {
    throw std::invalid_argument("poisson: rate must be finite and >= 0");
  }
  int count = 0;
  // exp(-50) ~ 2e-22 stays comfortably inside double range.
  while (lambda > 50.0) {
    double threshold = std::exp(-50.0);
    double p = 1.0;
    do {
      ++count;
      p *= uniform01();
    } while (p > threshold);
    --count;
    lambda -= 50.0;
  }
  double threshold = std::exp(-lambda);
  double p = 1.0;
  do {
    ++count;
    p *= uniform01();
  } while (p > threshold);
  return count - 1;
}

Eigen::VectorXd RandomStream::gaussian(const Eigen::VectorXd& mean,
                                       const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size()) {
    throw std::invalid_argument("gaussian: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("gaussian: covariance not positive definite");
  }
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal();
  return mean + llt.matrixL() * z;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t RandomStream::derive(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = splitmix64(seed);
  for (std::uint64_t p : path) {
    state = splitmix64(state ^ splitmix64(p));
  }
  return state;
}

}  // namespace d3as
