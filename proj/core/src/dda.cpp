#include "d3as/dda.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "d3as/assignment.hpp"
#include "d3as/scene_io.hpp"
#include "d3as/simkit.hpp"

namespace d3as::dda {

constexpr double kLogFloor = 1e-12;

void AssociationMatrix::validate(double tol) const {
  if (p.rows() == 0 || p.cols() == 0) {
    throw std::invalid_argument("association matrix is empty");
  }
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (p.row(i).minCoeff() < -tol ||
        std::abs(p.row(i).sum() - 1.0) > tol) {
      throw std::invalid_argument("association row is not a pmf");
    }
  }
}

void DdaConfig::validate() const {
  encoder.validate();
  if (tracks < 1) throw std::invalid_argument("dda: tracks < 1");
  if (clutter_target == ClutterTarget::kSingleColumn && tracks < 2) {
    throw std::invalid_argument(
        "dda: single-column clutter needs at least 2 tracks");
  }
}

MatchResult match_tracks_to_objects(const AssociationMatrix& a,
                                    const std::vector<int>& labels,
                                    ClutterTarget mode) {
  std::set<int> distinct;
  for (int b : labels) {
    if (b >= 0) distinct.insert(b);
  }
  return match_tracks_to_objects(
      a, labels, std::vector<int>(distinct.begin(), distinct.end()), mode);
}

MatchResult match_tracks_to_objects(const AssociationMatrix& a,
                                    const std::vector<int>& labels,
                                    const std::vector<int>& object_ids,
                                    ClutterTarget mode) {
  if (static_cast<int>(labels.size()) != a.n()) {
    throw std::invalid_argument("match: one label per association row");
  }
  {
    std::set<int> uniq(object_ids.begin(), object_ids.end());
    if (uniq.size() != object_ids.size()) {
      throw std::invalid_argument("match: duplicate object ids");
    }
  }
  const int total = a.tracks();
  const int usable =
      mode == ClutterTarget::kSingleColumn ? total - 1 : total;
  const int k = static_cast<int>(object_ids.size());
  if (k > usable) {
    throw std::invalid_argument(
        "match: more objects than usable tracks, cannot assign");
  }

  MatchResult result;
  result.object_ids = object_ids;
  result.track_object.assign(total, -1);
  result.cost = Eigen::MatrixXd::Zero(usable, k);
  for (int col = 0; col < k; ++col) {
    const int object = object_ids[col];
    for (int i = 0; i < a.n(); ++i) {
      if (labels[i] != object) continue;
      result.cost.col(col) -= a.p.row(i).head(usable).transpose();
    }
  }
  if (k > 0) {
    const assign::Result assigned = assign::solve_min_cost(result.cost);
    for (int col = 0; col < k; ++col) {
      result.track_object[assigned.row_of_col[col]] = object_ids[col];
    }
  }
  return result;
}

Eigen::MatrixXd build_target_matrix(const MatchResult& match,
                                    const std::vector<int>& labels,
                                    ClutterTarget mode) {
  const int n = static_cast<int>(labels.size());
  const int total = static_cast<int>(match.track_object.size());
  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(n, total);
  for (int i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0) {
      if (mode == ClutterTarget::kSingleColumn) {
        target(i, total - 1) = 1.0;
      } else {
        for (int j = 0; j < total; ++j) {
          if (match.track_object[j] == -1) target(i, j) = 1.0;
        }
      }
      continue;
    }
    bool found = false;
    for (int j = 0; j < total; ++j) {
      if (match.track_object[j] == label) {
        target(i, j) = 1.0;
        found = true;
      }
    }
    if (!found) {
      throw std::invalid_argument(
          "build_target_matrix: label has no matched track");
    }
  }
  return target;
}

double dda_loss(const AssociationMatrix& a, const Eigen::MatrixXd& target) {
  if (target.rows() != a.p.rows() || target.cols() != a.p.cols()) {
    throw std::invalid_argument("dda_loss: target shape mismatch");
  }
  if (a.n() == 0) throw std::invalid_argument("dda_loss: empty association");
  const double total = (a.p.cwiseMax(kLogFloor).array().log() *
                        target.array())
                           .sum();
  return -total / static_cast<double>(a.n());
}

nn::Graph::Id dda_loss_node(nn::Graph& g, nn::Graph::Id a_node,
                            const Eigen::MatrixXd& target) {
  if (target.rows() != g.rows(a_node) || target.cols() != g.cols(a_node)) {
    throw std::invalid_argument("dda_loss_node: target shape mismatch");
  }
  const double inv_n = 1.0 / static_cast<double>(g.rows(a_node));
  const nn::Graph::Id weighted =
      g.hadamard(g.log_clamped(a_node, kLogFloor), g.input(target));
  return g.scale(g.sum(weighted), -inv_n);
}

DdaModel::DdaModel(const DdaConfig& cfg, nn::ParamStore& store,
                   RandomStream& init)
    : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.encoder.width;
  w_in_ = &store.add("dda.input.w", d, 3);
  b_in_ = &store.add("dda.input.b", d, 1);
  nn::init_uniform_fan_in(*w_in_, 3, init);
  nn::init_uniform_fan_in(*b_in_, 3, init);
  encoder_ = nn::make_encoder(store, cfg_.encoder, "dda.encoder", init);
  head_ = nn::make_mlp(store, "dda.head", d, cfg_.tracks, cfg_.head, init);
}

nn::Graph::Id DdaModel::forward(nn::Graph& g,
                                const std::vector<Eigen::Vector3d>& z,
                                const std::vector<int>& times, bool train,
                                RandomStream* dropout_rng) const {
  const int n = static_cast<int>(z.size());
  if (n == 0) {
    throw std::invalid_argument("dda forward: empty measurement set");
  }
  if (times.size() != z.size()) {
    throw std::invalid_argument("dda forward: one time per measurement");
  }
  Eigen::MatrixXd raw(3, n);
  std::vector<int> positions(n);
  for (int i = 0; i < n; ++i) {
    raw.col(i) = z[i];
    if (times[i] < 1 || times[i] > cfg_.encoder.max_positions) {
      throw std::out_of_range("dda forward: time stamp outside window");
    }
    positions[i] = times[i] - 1;
  }
  const nn::Graph::Id proj = g.add_col_broadcast(
      g.matmul(g.param(*w_in_), g.input(std::move(raw))), g.param(*b_in_));
  const nn::Graph::Id encoded = nn::encoder_forward(
      g, proj, positions, encoder_, cfg_.encoder, train, dropout_rng);
  const nn::Graph::Id logits = nn::mlp_forward(g, encoded, head_);
  return g.transpose(g.softmax_cols(logits));
}

AssociationMatrix DdaModel::run(const std::vector<Eigen::Vector3d>& z,
                                const std::vector<int>& times) const {
  nn::Graph g;
  const nn::Graph::Id a = forward(g, z, times, false, nullptr);
  return AssociationMatrix{g.value(a)};
}

std::string association_to_csv(const AssociationMatrix& a) {
  std::string out;
  for (int j = 0; j < a.tracks(); ++j) {
    if (j) out += ',';
    out += "track_" + std::to_string(j);
  }
  out += '\n';
  for (int i = 0; i < a.n(); ++i) {
    for (int j = 0; j < a.tracks(); ++j) {
      if (j) out += ',';
      out += sim::format_double(a.p(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace d3as::dda
