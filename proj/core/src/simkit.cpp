#include "d3as/simkit.hpp"

#include <cmath>
#include <stdexcept>

namespace d3as::sim {

void TaskConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_d)) throw std::invalid_argument("p_d outside [0,1]");
  if (!prob(p_s)) throw std::invalid_argument("p_s outside [0,1]");
  if (sigma_q2 < 0.0) throw std::invalid_argument("sigma_q2 negative");
  if (delta_t <= 0.0) throw std::invalid_argument("delta_t must be > 0");
  if (window_length < 1) throw std::invalid_argument("window_length < 1");
  if (sigma_r_min2 < 0.0 || sigma_r_max2 < sigma_r_min2)
    throw std::invalid_argument("range variance bounds invalid");
  if (sigma_rdot2 < 0.0) throw std::invalid_argument("sigma_rdot2 negative");
  if (sigma_theta_min2 < 0.0 || sigma_theta_max2 < sigma_theta_min2)
    throw std::invalid_argument("bearing variance bounds invalid");
  if (lambda_c < 0.0) throw std::invalid_argument("lambda_c negative");
  if (birth_rate < 0.0 || birth_rate_initial < 0.0)
    throw std::invalid_argument("birth rate negative");
  if ((birth_cov_diag.array() < 0.0).any())
    throw std::invalid_argument("birth covariance diagonal negative");
  for (const Interval& iv : {fov_r, fov_rdot, fov_theta}) {
    if (!(iv.lo < iv.hi)) throw std::invalid_argument("FOV interval reversed");
  }
}

TaskConfig make_task(int task_number) {
  // Columns: p_d, sigma_q2, sigma_r_min2, sigma_rdot2, sigma_theta_min2,
  // lambda_c.
  static constexpr double kTable[10][6] = {
      {0.99, 1.0, 1e-4, 0.01, 1e-4, 1.6e-2},
      {0.99, 1.0, 1e-4, 0.01, 1e-4, 3.2e-2},
      {0.85, 1.0, 1e-4, 0.01, 1e-4, 6.6e-2},
      {0.99, 1.0, 1e-4, 0.01, 1e-4, 1.3e-1},
      {0.70, 4.0, 1e-4, 0.01, 1e-4, 6.6e-2},
      {0.70, 2.0, 1e-3, 1.0, 1e-3, 6.6e-2},
      {0.60, 3.0, 1e-2, 1.0, 1e-2, 6.6e-2},
      {0.70, 3.0, 1e-4, 0.01, 1e-4, 1.3e-1},
      {0.70, 1.0, 1e-3, 1.0, 1e-3, 1.3e-1},
      {0.60, 3.0, 1e-2, 1.0, 1e-2, 1.3e-1},
  };
  if (task_number < 1 || task_number > 10) {
    throw std::out_of_range("task number must be in 1..10");
  }
  const double* row = kTable[task_number - 1];
  TaskConfig cfg;
  cfg.p_d = row[0];
  cfg.sigma_q2 = row[1];
  cfg.sigma_r_min2 = row[2];
  cfg.sigma_rdot2 = row[3];
  cfg.sigma_theta_min2 = row[4];
  cfg.lambda_c = row[5];
  cfg.validate();
  return cfg;
}

TaskConfig make_desk_task() {
  TaskConfig cfg = make_task(1);
  cfg.window_length = 5;
  cfg.p_d = 0.95;
  cfg.lambda_c = 5e-3;
  cfg.birth_rate = 0.2;
  cfg.birth_rate_initial = 1.5;
  cfg.birth_schedule = BirthSchedule::kEveryStep;
  cfg.validate();
  return cfg;
}

Eigen::Matrix4d ncv_transition(double delta_t) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = delta_t;
  f(1, 3) = delta_t;
  return f;
}

Eigen::Matrix4d ncv_process_noise(double delta_t, double sigma_q2) {
  const double dt = delta_t;
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  const double a = sigma_q2 * dt * dt * dt / 3.0;
  const double b = sigma_q2 * dt * dt / 2.0;
  const double c = sigma_q2 * dt;
  q(0, 0) = q(1, 1) = a;
  q(0, 2) = q(2, 0) = b;
  q(1, 3) = q(3, 1) = b;
  q(2, 2) = q(3, 3) = c;
  return q;
}

SingleState motion_step(const SingleState& x, const TaskConfig& cfg,
                        RandomStream& rng) {
  Eigen::Vector4d mean = ncv_transition(cfg.delta_t) * x;
  return rng.gaussian(mean, ncv_process_noise(cfg.delta_t, cfg.sigma_q2));
}

Eigen::Vector3d radar_project(const SingleState& x) {
  const double r = std::hypot(x(0), x(1));
  if (r == 0.0) throw std::domain_error("radar_project: state at origin");
  const double rdot = (x(0) * x(2) + x(1) * x(3)) / r;
  const double theta = std::atan2(x(1), x(0));
  return {r, rdot, theta};
}

Eigen::Vector3d measurement_to_cartesian(const Eigen::Vector3d& z) {
  return {z(0) * std::cos(z(2)), z(0) * std::sin(z(2)), z(1)};
}

Eigen::Matrix3d noise_covariance(const Eigen::Vector3d& z_clean,
                                 const TaskConfig& cfg) {
  const double r = z_clean(0);
  const double theta = z_clean(2);
  // Quadratic ramp from min variance at the near/center edge to max variance
  // at the far edge; 14.5 and 1.3 are the extents of the r and theta axes.
  const double dr = (r - cfg.fov_r.lo);
  const double f1 = (cfg.sigma_r_max2 - cfg.sigma_r_min2) / (14.5 * 14.5) *
                        dr * dr +
                    cfg.sigma_r_min2;
  const double f2 = cfg.sigma_rdot2;
  const double f3 = (cfg.sigma_theta_max2 - cfg.sigma_theta_min2) /
                        (1.3 * 1.3) * theta * theta +
                    cfg.sigma_theta_min2;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  cov(0, 0) = f1;
  cov(1, 1) = f2;
  cov(2, 2) = f3;
  return cov;
}

bool in_fov(const TaskConfig& cfg, const Eigen::Vector3d& z) {
  return cfg.fov_r.contains(z(0)) && cfg.fov_rdot.contains(z(1)) &&
         cfg.fov_theta.contains(z(2));
}

namespace {
double birth_rate_at(const TaskConfig& cfg, int t) {
  switch (cfg.birth_schedule) {
    case BirthSchedule::kEveryStep:
      return t == 1 ? cfg.birth_rate + cfg.birth_rate_initial : cfg.birth_rate;
    case BirthSchedule::kInitialOnly:
      return t == 1 ? (cfg.birth_rate_initial > 0.0 ? cfg.birth_rate_initial
                                                    : cfg.birth_rate)
                    : 0.0;
  }
  return 0.0;
}
}  // namespace

std::vector<SingleState> sample_births(const TaskConfig& cfg, int t,
                                       RandomStream& rng) {
  const int count = rng.poisson(birth_rate_at(cfg, t));
  std::vector<SingleState> births;
  births.reserve(count);
  const Eigen::Matrix4d cov = cfg.birth_cov_diag.asDiagonal();
  for (int k = 0; k < count; ++k) {
    births.push_back(rng.gaussian(cfg.birth_mean, cov));
  }
  return births;
}

std::vector<Measurement> sample_clutter(const TaskConfig& cfg, int t,
                                        RandomStream& rng) {
  const int count = rng.poisson(cfg.lambda_c * cfg.fov_volume());
  std::vector<Measurement> clutter;
  clutter.reserve(count);
  for (int k = 0; k < count; ++k) {
    Measurement m;
    m.z(0) = rng.uniform(cfg.fov_r.lo, cfg.fov_r.hi);
    m.z(1) = rng.uniform(cfg.fov_rdot.lo, cfg.fov_rdot.hi);
    m.z(2) = rng.uniform(cfg.fov_theta.lo, cfg.fov_theta.hi);
    m.t = t;
    m.b = -1;
    clutter.push_back(m);
  }
  return clutter;
}

Scene simulate_scene(const TaskConfig& cfg, RandomStream& rng) {
  cfg.validate();
  Scene scene;
  struct Live {
    int truth_index;
    bool alive;
  };
  std::vector<Live> live;  // in object-id order
  int next_id = 0;

  for (int t = 1; t <= cfg.window_length; ++t) {
    if (t > 1) {
      for (Live& obj : live) {
        if (!obj.alive) continue;
        if (rng.uniform01() >= cfg.p_s) {
          obj.alive = false;
          continue;
        }
        GroundTruthTrajectory& traj = scene.truths[obj.truth_index];
        SingleState x = motion_step(traj.states.back(), cfg, rng);
        if (in_fov(cfg, radar_project(x))) {
          traj.states.push_back(x);
        } else {
          obj.alive = false;
        }
      }
    }

    for (const SingleState& x : sample_births(cfg, t, rng)) {
      if (!in_fov(cfg, radar_project(x))) continue;
      GroundTruthTrajectory traj;
      traj.object_id = next_id++;
      traj.t_s = t;
      traj.states.push_back(x);
      scene.truths.push_back(std::move(traj));
      live.push_back({static_cast<int>(scene.truths.size()) - 1, true});
    }

    for (const Live& obj : live) {
      if (!obj.alive) continue;
      const GroundTruthTrajectory& traj = scene.truths[obj.truth_index];
      if (!traj.alive_at(t)) continue;
      if (rng.uniform01() >= cfg.p_d) continue;
      const Eigen::Vector3d z_clean = radar_project(traj.state_at(t));
      const Eigen::Matrix3d cov = noise_covariance(z_clean, cfg);
      Measurement m;
      m.z = rng.gaussian(z_clean, cov);
      m.t = t;
      m.b = traj.object_id;
      scene.measurements.push_back(m);
    }

    for (Measurement& m : sample_clutter(cfg, t, rng)) {
      scene.measurements.push_back(m);
    }
  }
  return scene;
}

}  // namespace d3as::sim
