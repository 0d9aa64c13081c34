#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "d3as/random.hpp"

namespace d3as::sim {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v > lo && v < hi; }
  double width() const { return hi - lo; }
};

enum class BirthSchedule { kEveryStep, kInitialOnly };

// Full description of one tracking task: motion and sensor noise, detection
// and survival probabilities, clutter rate, birth process, field of view.
struct TaskConfig {
  double p_d = 0.99;          // detection probability
  double p_s = 0.98;          // per-step survival probability
  double sigma_q2 = 1.0;      // process noise intensity
  double delta_t = 0.1;       // step length
  int window_length = 10;     // steps per scene

  // Range / range-rate / bearing noise model. Range and bearing variances
  // grow quadratically from the minimum (at r = 0.5 resp. theta = 0) to the
  // maximum at the far edge of the field of view.
  double sigma_r_min2 = 1e-4;
  double sigma_r_max2 = 0.04;
  double sigma_rdot2 = 0.01;
  double sigma_theta_min2 = 1e-4;
  double sigma_theta_max2 = 0.04;

  double lambda_c = 1.6e-2;   // clutter rate per unit volume per step

  // Birth Poisson process. birth_rate applies at every step under
  // kEveryStep; birth_rate_initial is an additional rate at the first step
  // (and the only rate under kInitialOnly).
  double birth_rate = 6.0;
  double birth_rate_initial = 0.0;
  BirthSchedule birth_schedule = BirthSchedule::kEveryStep;
  Eigen::Vector4d birth_mean{7.0, 0.0, 0.0, 0.0};
  Eigen::Vector4d birth_cov_diag{10.0, 30.0, 16.0, 16.0};

  Interval fov_r{0.5, 15.0};
  Interval fov_rdot{0.0, 8.0};
  Interval fov_theta{-1.3, 1.3};

  double fov_volume() const {
    return fov_r.width() * fov_rdot.width() * fov_theta.width();
  }

  // Throws std::invalid_argument when a probability leaves [0,1], a rate or
  // variance is negative, the window is empty, or an interval is reversed.
  void validate() const;
};

// Ten canonical task parameterizations plus the small workbench task.
// task_number is 1-based; throws std::out_of_range otherwise.
TaskConfig make_task(int task_number);
TaskConfig make_desk_task();

// State layout: (px, py, vx, vy).
using SingleState = Eigen::Vector4d;

struct GroundTruthTrajectory {
  int object_id = -1;
  int t_s = 1;  // first step alive, 1-based
  std::vector<SingleState> states;

  int last_step() const { return t_s + static_cast<int>(states.size()) - 1; }
  bool alive_at(int t) const { return t >= t_s && t <= last_step(); }
  const SingleState& state_at(int t) const { return states.at(t - t_s); }
};

struct Measurement {
  Eigen::Vector3d z;  // (range, range-rate, bearing)
  int t = 1;          // 1-based step
  int b = -1;         // source object id, -1 for clutter
};

struct Scene {
  std::vector<GroundTruthTrajectory> truths;
  std::vector<Measurement> measurements;
};

// Nearly-constant-velocity transition x' = F x + w, w ~ N(0, Q).
Eigen::Matrix4d ncv_transition(double delta_t);
Eigen::Matrix4d ncv_process_noise(double delta_t, double sigma_q2);
SingleState motion_step(const SingleState& x, const TaskConfig& cfg,
                        RandomStream& rng);

// Map a state to the clean measurement (r, rdot, theta).
// Throws std::domain_error at the sensor origin where bearing is undefined.
Eigen::Vector3d radar_project(const SingleState& x);

// Coordinate change of a measurement to (r cos theta, r sin theta, rdot):
// Cartesian position plus range rate. Inverse of radar_project's angular
// part; model inputs use it so spatial proximity is linear.
Eigen::Vector3d measurement_to_cartesian(const Eigen::Vector3d& z);

// Diagonal measurement noise covariance evaluated at a clean projection.
Eigen::Matrix3d noise_covariance(const Eigen::Vector3d& z_clean,
                                 const TaskConfig& cfg);

bool in_fov(const TaskConfig& cfg, const Eigen::Vector3d& z);

// Birth states for step t: count ~ Poisson(rate(t)), states ~ N(birth mean,
// birth cov). No field-of-view filtering here; simulate_scene discards
// births whose projection starts outside the box.
std::vector<SingleState> sample_births(const TaskConfig& cfg, int t,
                                       RandomStream& rng);

// Clutter for one step: count ~ Poisson(lambda_c * |FOV|), each point
// uniform over the field-of-view box, labeled b = -1.
std::vector<Measurement> sample_clutter(const TaskConfig& cfg, int t,
                                        RandomStream& rng);

// Sample one full scene. Per step, in a fixed order that keeps the stream
// reproducible: survival and motion of existing objects (in object-id
// order), births, detections, clutter. Objects die when the survival draw
// fails or their projection leaves the box; birth states projecting outside
// the box are discarded. Detected measurements are not clipped to the box.
Scene simulate_scene(const TaskConfig& cfg, RandomStream& rng);

}  // namespace d3as::sim
