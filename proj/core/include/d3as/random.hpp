#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace d3as {

// Deterministic random stream with explicitly implemented samplers.
//
// The standard library only guarantees bit-reproducible output for the raw
// engines, not for the distribution adaptors, so every sampler here is
// written out by hand on top of mt19937_64. Two builds with the same seed
// therefore consume and produce identical byte streams, which is what the
// dataset and training determinism guarantees rest on.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1): top 53 bits of the engine output.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller, one value per call (the sine branch is
  // discarded so the stream position does not depend on caller pairing).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Poisson count via Knuth's product method; large rates are split using
  // Poisson additivity so the product never underflows.
  int poisson(double lambda);

  // Draw from N(mean, cov) via the lower Cholesky factor of cov.
  Eigen::VectorXd gaussian(const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& cov);

  // Fold a path of indices into a fresh seed. Used to give every scene,
  // training step, and dropout mask its own independent substream so that
  // evaluation order can never change the bytes drawn.
  static std::uint64_t derive(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> path);

 private:
  std::mt19937_64 gen_;
};

}  // namespace d3as
