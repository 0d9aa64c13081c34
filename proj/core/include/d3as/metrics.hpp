#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "d3as/dda.hpp"
#include "d3as/simkit.hpp"
#include "d3as/smoother.hpp"

namespace d3as::metrics {

// A trajectory inside an evaluation window: alive on the contiguous steps
// [t_s, t_s + states.size() - 1], 1-based.
struct Trajectory {
  int t_s = 1;
  std::vector<Eigen::Vector4d> states;

  int last_step() const { return t_s + static_cast<int>(states.size()) - 1; }
  bool alive_at(int t) const { return t >= t_s && t <= last_step(); }
  const Eigen::Vector4d& state_at(int t) const { return states.at(t - t_s); }
};

Trajectory from_truth(const sim::GroundTruthTrajectory& truth);
Trajectory from_extracted(const ds::ExtractedTrajectory& extracted);

struct TgospaParams {
  double p = 1.0;      // order
  double c = 20.0;     // cutoff
  double gamma = 2.0;  // switch penalty

  void validate() const;  // throws std::invalid_argument
};

// Components are reported in the p-th power domain; total is the metric
// value itself, so for p = 1 the components sum to the total.
struct TgospaResult {
  double total = 0.0;
  double localization = 0.0;
  double missed = 0.0;
  double false_detection = 0.0;
  double track_switch = 0.0;
};

// Trajectory metric between sets X and Y over a window of `window` steps,
// with an L1 base distance on the full state. Minimizes per-step assignment
// cost plus switching cost over assignment sequences, solved exactly as a
// linear program over doubly stochastic matrices with switching slacks.
// Throws std::invalid_argument when a trajectory leaves the window or is
// empty.
TgospaResult tgospa(const std::vector<Trajectory>& x,
                    const std::vector<Trajectory>& y, int window,
                    const TgospaParams& params);

// Exact reference: dynamic program over per-step assignment vectors (the
// per-step cost is Markov in the assignment, so this is exhaustive).
// Guarded to |x|, |y| <= 4 and window <= 5; throws std::invalid_argument on
// larger instances.
TgospaResult tgospa_bruteforce(const std::vector<Trajectory>& x,
                               const std::vector<Trajectory>& y, int window,
                               const TgospaParams& params);

// Association accuracy: the fraction of non-clutter measurements whose
// argmax track (ties to the lowest column) is matched to the measurement's
// source object. Empty when the scene has no non-clutter measurements.
std::optional<double> taa(const dda::AssociationMatrix& a,
                          const std::vector<int>& labels,
                          const dda::MatchResult& match);

// Trajectory-set JSON: {"window": T, "trajectories": [{"t_s", "states"}]}.
std::string trajectory_set_to_json(const std::vector<Trajectory>& set,
                                   int window);
struct TrajectorySet {
  int window = 0;
  std::vector<Trajectory> trajectories;
};
TrajectorySet trajectory_set_from_json(const std::string& text);

}  // namespace d3as::metrics
