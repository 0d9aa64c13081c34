#include "d3as/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "d3as/lp.hpp"
#include "d3as/scene_io.hpp"

namespace d3as::metrics {

void TgospaParams::validate() const {
  if (p < 1.0) throw std::invalid_argument("tgospa: p must be >= 1");
  if (c <= 0.0) throw std::invalid_argument("tgospa: c must be > 0");
  if (gamma <= 0.0) throw std::invalid_argument("tgospa: gamma must be > 0");
}

Trajectory from_truth(const sim::GroundTruthTrajectory& truth) {
  Trajectory traj;
  traj.t_s = truth.t_s;
  traj.states = truth.states;
  return traj;
}

Trajectory from_extracted(const ds::ExtractedTrajectory& extracted) {
  Trajectory traj;
  traj.t_s = extracted.t_s;
  traj.states = extracted.states;
  return traj;
}

namespace {

void check_window(const std::vector<Trajectory>& set, int window,
                  const char* which) {
  for (const Trajectory& traj : set) {
    if (traj.states.empty()) {
      throw std::invalid_argument(std::string("tgospa: empty trajectory in ") +
                                  which);
    }
    if (traj.t_s < 1 || traj.last_step() > window) {
      throw std::invalid_argument(
          std::string("tgospa: trajectory outside window in ") + which);
    }
  }
}

double base_distance_p(const Eigen::Vector4d& a, const Eigen::Vector4d& b,
                       double p) {
  const double l1 = (a - b).lpNorm<1>();
  return std::pow(l1, p);
}

// Per-unit-mass step cost for pairing row i with column j at step t, where
// i == nx means the dummy row and j == ny the dummy column.
double pair_cost(const std::vector<Trajectory>& x,
                 const std::vector<Trajectory>& y, int nx, int ny, int i,
                 int j, int t, const TgospaParams& params) {
  const double cp = std::pow(params.c, params.p);
  const bool x_alive = i < nx && x[i].alive_at(t);
  const bool y_alive = j < ny && y[j].alive_at(t);
  if (i < nx && j < ny && x_alive && y_alive) {
    return std::min(base_distance_p(x[i].state_at(t), y[j].state_at(t),
                                    params.p),
                    cp);
  }
  double cost = 0.0;
  if (x_alive) cost += cp / 2.0;
  if (y_alive) cost += cp / 2.0;
  return cost;
}

struct Accounting {
  double localization = 0.0;
  double missed = 0.0;
  double false_detection = 0.0;

  // Attribute `mass` units of the (i, j) pairing at step t.
  void add(const std::vector<Trajectory>& x, const std::vector<Trajectory>& y,
           int nx, int ny, int i, int j, int t, const TgospaParams& params,
           double mass) {
    const double cp = std::pow(params.c, params.p);
    const bool x_alive = i < nx && x[i].alive_at(t);
    const bool y_alive = j < ny && y[j].alive_at(t);
    if (x_alive && y_alive) {
      const double dp =
          base_distance_p(x[i].state_at(t), y[j].state_at(t), params.p);
      if (dp < cp) {
        localization += mass * dp;
      } else {
        missed += mass * cp / 2.0;
        false_detection += mass * cp / 2.0;
      }
      return;
    }
    if (x_alive) missed += mass * cp / 2.0;
    if (y_alive) false_detection += mass * cp / 2.0;
  }
};

}  // namespace

TgospaResult tgospa(const std::vector<Trajectory>& x,
                    const std::vector<Trajectory>& y, int window,
                    const TgospaParams& params) {
  params.validate();
  if (window < 1) throw std::invalid_argument("tgospa: window < 1");
  check_window(x, window, "first set");
  check_window(y, window, "second set");
  const int nx = static_cast<int>(x.size());
  const int ny = static_cast<int>(y.size());
  TgospaResult result;
  if (nx == 0 && ny == 0) return result;

  // Variable layout, in order:
  //   per step t: transport w^t_{ij} over (nx + 1) x (ny + 1) minus the
  //     dummy-dummy cell;
  //   per step t < T: switching magnitude e^t_{ij} over real pairs, then
  //     two slack blocks turning e >= +/-(w^{t+1} - w^t) into equalities.
  const int cells = (nx + 1) * (ny + 1) - 1;
  const int pairs = nx * ny;
  const int t_count = window;
  const int e_blocks = t_count - 1;
  const int n_vars = t_count * cells + e_blocks * pairs * 3;

  const auto w_index = [&](int t, int i, int j) {
    // (dummy, dummy) is the skipped last cell.
    return t * cells + i * (ny + 1) + j;
  };
  const int e_base = t_count * cells;
  const auto e_index = [&](int t, int i, int j) {
    return e_base + t * pairs + i * ny + j;
  };
  const int s1_base = e_base + e_blocks * pairs;
  const int s2_base = s1_base + e_blocks * pairs;

  const int n_rows = t_count * (nx + ny) + e_blocks * pairs * 2;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_rows, n_vars);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_rows);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n_vars);

  const double gamma_p = std::pow(params.gamma, params.p);
  for (int t = 0; t < t_count; ++t) {
    for (int i = 0; i <= nx; ++i) {
      for (int j = 0; j <= ny; ++j) {
        if (i == nx && j == ny) continue;
        c(w_index(t, i, j)) = pair_cost(x, y, nx, ny, i, j, t + 1, params);
      }
    }
  }
  for (int t = 0; t < e_blocks; ++t) {
    for (int k = 0; k < pairs; ++k) {
      c(e_base + t * pairs + k) = gamma_p / 2.0;
    }
  }

  int row = 0;
  for (int t = 0; t < t_count; ++t) {
    for (int i = 0; i < nx; ++i, ++row) {
      for (int j = 0; j <= ny; ++j) a(row, w_index(t, i, j)) = 1.0;
      b(row) = 1.0;
    }
    for (int j = 0; j < ny; ++j, ++row) {
      for (int i = 0; i <= nx; ++i) a(row, w_index(t, i, j)) = 1.0;
      b(row) = 1.0;
    }
  }
  for (int t = 0; t < e_blocks; ++t) {
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) {
        const int e = e_index(t, i, j);
        const int offset = t * pairs + i * ny + j;
        // e - (w_next - w_cur) - s1 = 0
        a(row, e) = 1.0;
        a(row, w_index(t + 1, i, j)) = -1.0;
        a(row, w_index(t, i, j)) = 1.0;
        a(row, s1_base + offset) = -1.0;
        ++row;
        // e + (w_next - w_cur) - s2 = 0
        a(row, e) = 1.0;
        a(row, w_index(t + 1, i, j)) = 1.0;
        a(row, w_index(t, i, j)) = -1.0;
        a(row, s2_base + offset) = -1.0;
        ++row;
      }
    }
  }

  const lp::Solution sol = lp::solve_standard_form(a, b, c);
  if (sol.status != lp::Status::kOptimal) {
    throw std::runtime_error("tgospa: transport program did not solve");
  }

  Accounting acc;
  for (int t = 0; t < t_count; ++t) {
    for (int i = 0; i <= nx; ++i) {
      for (int j = 0; j <= ny; ++j) {
        if (i == nx && j == ny) continue;
        const double mass = sol.x(w_index(t, i, j));
        if (mass > 1e-12) {
          acc.add(x, y, nx, ny, i, j, t + 1, params, mass);
        }
      }
    }
  }
  double switch_power = 0.0;
  for (int t = 0; t < e_blocks; ++t) {
    for (int k = 0; k < pairs; ++k) {
      switch_power += gamma_p / 2.0 * sol.x(e_base + t * pairs + k);
    }
  }

  result.localization = acc.localization;
  result.missed = acc.missed;
  result.false_detection = acc.false_detection;
  result.track_switch = switch_power;
  result.total = std::pow(result.localization + result.missed +
                              result.false_detection + result.track_switch,
                          1.0 / params.p);
  return result;
}

namespace {

// All assignment vectors X -> {unassigned} + Y, injective on Y.
void enumerate_vectors(int nx, int ny, int i, std::vector<int>& current,
                       std::vector<bool>& used,
                       std::vector<std::vector<int>>& out) {
  if (i == nx) {
    out.push_back(current);
    return;
  }
  current[i] = -1;
  enumerate_vectors(nx, ny, i + 1, current, used, out);
  for (int j = 0; j < ny; ++j) {
    if (used[j]) continue;
    used[j] = true;
    current[i] = j;
    enumerate_vectors(nx, ny, i + 1, current, used, out);
    current[i] = -1;
    used[j] = false;
  }
}

double step_cost(const std::vector<Trajectory>& x,
                 const std::vector<Trajectory>& y, const std::vector<int>& pi,
                 int t, const TgospaParams& params) {
  const int nx = static_cast<int>(x.size());
  const int ny = static_cast<int>(y.size());
  const double cp = std::pow(params.c, params.p);
  double cost = 0.0;
  std::vector<bool> y_assigned(ny, false);
  for (int i = 0; i < nx; ++i) {
    const int j = pi[i];
    if (j >= 0) {
      y_assigned[j] = true;
      cost += pair_cost(x, y, nx, ny, i, j, t, params);
    } else if (x[i].alive_at(t)) {
      cost += cp / 2.0;
    }
  }
  for (int j = 0; j < ny; ++j) {
    if (!y_assigned[j] && y[j].alive_at(t)) cost += cp / 2.0;
  }
  return cost;
}

double switch_cost(const std::vector<int>& a, const std::vector<int>& b,
                   double gamma_p) {
  double cost = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    cost += (a[i] == -1 || b[i] == -1) ? gamma_p / 2.0 : gamma_p;
  }
  return cost;
}

}  // namespace

TgospaResult tgospa_bruteforce(const std::vector<Trajectory>& x,
                               const std::vector<Trajectory>& y, int window,
                               const TgospaParams& params) {
  params.validate();
  if (window < 1) throw std::invalid_argument("tgospa: window < 1");
  if (x.size() > 4 || y.size() > 4 || window > 5) {
    throw std::invalid_argument("tgospa_bruteforce: instance too large");
  }
  check_window(x, window, "first set");
  check_window(y, window, "second set");
  const int nx = static_cast<int>(x.size());
  const int ny = static_cast<int>(y.size());
  TgospaResult result;
  if (nx == 0 && ny == 0) return result;

  std::vector<std::vector<int>> vectors;
  {
    std::vector<int> current(nx, -1);
    std::vector<bool> used(ny, false);
    enumerate_vectors(nx, ny, 0, current, used, vectors);
  }
  const int v = static_cast<int>(vectors.size());
  const double gamma_p = std::pow(params.gamma, params.p);

  // cost[s][k]: cheapest way to reach vector k at step s (0-based step).
  std::vector<std::vector<double>> cost(
      window, std::vector<double>(v, std::numeric_limits<double>::infinity()));
  std::vector<std::vector<int>> parent(window, std::vector<int>(v, -1));
  for (int k = 0; k < v; ++k) {
    cost[0][k] = step_cost(x, y, vectors[k], 1, params);
  }
  for (int s = 1; s < window; ++s) {
    for (int k = 0; k < v; ++k) {
      const double base = step_cost(x, y, vectors[k], s + 1, params);
      for (int prev = 0; prev < v; ++prev) {
        const double candidate =
            cost[s - 1][prev] + switch_cost(vectors[prev], vectors[k], gamma_p) +
            base;
        if (candidate < cost[s][k]) {
          cost[s][k] = candidate;
          parent[s][k] = prev;
        }
      }
    }
  }

  int best = 0;
  for (int k = 1; k < v; ++k) {
    if (cost[window - 1][k] < cost[window - 1][best]) best = k;
  }

  // Reconstruct the optimal sequence and attribute its cost.
  std::vector<int> path(window);
  path[window - 1] = best;
  for (int s = window - 1; s > 0; --s) path[s - 1] = parent[s][path[s]];

  Accounting acc;
  double switch_power = 0.0;
  for (int s = 0; s < window; ++s) {
    const std::vector<int>& pi = vectors[path[s]];
    std::vector<bool> y_assigned(ny, false);
    for (int i = 0; i < nx; ++i) {
      const int j = pi[i];
      if (j >= 0) {
        y_assigned[j] = true;
        acc.add(x, y, nx, ny, i, j, s + 1, params, 1.0);
      } else {
        acc.add(x, y, nx, ny, i, ny, s + 1, params, 1.0);
      }
    }
    for (int j = 0; j < ny; ++j) {
      if (!y_assigned[j]) acc.add(x, y, nx, ny, nx, j, s + 1, params, 1.0);
    }
    if (s > 0) {
      switch_power += switch_cost(vectors[path[s - 1]], vectors[path[s]],
                                  gamma_p);
    }
  }

  result.localization = acc.localization;
  result.missed = acc.missed;
  result.false_detection = acc.false_detection;
  result.track_switch = switch_power;
  result.total = std::pow(result.localization + result.missed +
                              result.false_detection + result.track_switch,
                          1.0 / params.p);
  return result;
}

std::optional<double> taa(const dda::AssociationMatrix& a,
                          const std::vector<int>& labels,
                          const dda::MatchResult& match) {
  if (static_cast<int>(labels.size()) != a.n()) {
    throw std::invalid_argument("taa: one label per association row");
  }
  int considered = 0;
  int correct = 0;
  for (int i = 0; i < a.n(); ++i) {
    if (labels[i] < 0) continue;
    ++considered;
    int best = 0;
    for (int j = 1; j < a.tracks(); ++j) {
      if (a.p(i, j) > a.p(i, best)) best = j;
    }
    if (match.track_object[best] == labels[i]) ++correct;
  }
  if (considered == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(considered);
}

std::string trajectory_set_to_json(const std::vector<Trajectory>& set,
                                   int window) {
  std::string out = "{\"window\":" + std::to_string(window);
  out += ",\"trajectories\":[";
  for (std::size_t k = 0; k < set.size(); ++k) {
    if (k) out += ',';
    out += "{\"t_s\":" + std::to_string(set[k].t_s) + ",\"states\":[";
    for (std::size_t s = 0; s < set[k].states.size(); ++s) {
      if (s) out += ',';
      out += '[';
      for (int i = 0; i < 4; ++i) {
        if (i) out += ',';
        out += sim::format_double(set[k].states[s](i));
      }
      out += ']';
    }
    out += "]}";
  }
  out += "]}";
  return out;
}

TrajectorySet trajectory_set_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    TrajectorySet set;
    set.window = j.at("window").get<int>();
    for (const auto& jt : j.at("trajectories")) {
      Trajectory traj;
      traj.t_s = jt.at("t_s").get<int>();
      for (const auto& js : jt.at("states")) {
        if (js.size() != 4) {
          throw std::runtime_error("trajectory state arity != 4");
        }
        Eigen::Vector4d state;
        for (int i = 0; i < 4; ++i) state(i) = js.at(i).get<double>();
        traj.states.push_back(state);
      }
      set.trajectories.push_back(std::move(traj));
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("trajectory set parse error: ") +
                             e.what());
  }
}

}  // namespace d3as::metrics
