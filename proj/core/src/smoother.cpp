#include "d3as/smoother.hpp"

#include <cmath>
#include <stdexcept>

namespace d3as::ds {

Eigen::Vector3d preprocess_slot(const Eigen::Vector3d& z) {
  return sim::measurement_to_cartesian(z);
}

void DsConfig::validate() const {
  encoder.validate();
  if (window_length < 1) throw std::invalid_argument("ds: window_length < 1");
  if (encoder.max_positions < window_length) {
    throw std::invalid_argument("ds: positional table shorter than window");
  }
}

DsModel::DsModel(const DsConfig& cfg, nn::ParamStore& store,
                 RandomStream& init)
    : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.encoder.width;
  w_in_ = &store.add("ds.input.w", d, 4);
  b_in_ = &store.add("ds.input.b", d, 1);
  nn::init_uniform_fan_in(*w_in_, 4, init);
  nn::init_uniform_fan_in(*b_in_, 4, init);
  dummy_embed_ = &store.add("ds.dummy", d, 1);
  for (int i = 0; i < d; ++i) dummy_embed_->value(i, 0) = init.normal(0.0, 0.02);
  encoder_ = nn::make_encoder(store, cfg_.encoder, "ds.encoder", init);
  pos_head_ = nn::make_mlp(store, "ds.head_pos", d, 2, cfg_.pos_head, init);
  vel_head_ = nn::make_mlp(store, "ds.head_vel", d, 2, cfg_.vel_head, init);
  pt_head_ = nn::make_mlp(store, "ds.head_pt", d, 1, cfg_.pt_head, init);
  pbar_head_ = nn::make_mlp(store, "ds.head_pbar", d * cfg_.window_length, 1,
                            cfg_.pbar_head, init);
}

DsModel::ForwardNodes DsModel::forward(nn::Graph& g, const track::Track& track,
                                       bool train,
                                       RandomStream* dropout_rng) const {
  const int window = cfg_.window_length;
  if (static_cast<int>(track.slots.size()) != window) {
    throw std::invalid_argument("ds forward: track length != window");
  }

  const nn::Graph::Id dummy_col = g.param(*dummy_embed_);
  std::vector<nn::Graph::Id> slot_cols(window);

  // Project all measured slots in one matmul, then pick columns back out.
  std::vector<int> measured_slots;
  for (int t = 0; t < window; ++t) {
    if (track.slots[t].measured) measured_slots.push_back(t);
  }
  nn::Graph::Id projected = -1;
  if (!measured_slots.empty()) {
    Eigen::MatrixXd raw(4, static_cast<int>(measured_slots.size()));
    for (std::size_t k = 0; k < measured_slots.size(); ++k) {
      const track::TrackSlot& slot = track.slots[measured_slots[k]];
      raw.col(static_cast<int>(k)).head<3>() = preprocess_slot(slot.z);
      raw(3, static_cast<int>(k)) = slot.confidence;
    }
    projected = g.add_col_broadcast(
        g.matmul(g.param(*w_in_), g.input(std::move(raw))), g.param(*b_in_));
  }
  for (std::size_t k = 0; k < measured_slots.size(); ++k) {
    slot_cols[measured_slots[k]] =
        g.block(projected, 0, static_cast<int>(k), cfg_.encoder.width, 1);
  }
  for (int t = 0; t < window; ++t) {
    if (!track.slots[t].measured) slot_cols[t] = dummy_col;
  }

  const nn::Graph::Id enc_in = g.hstack(slot_cols);
  std::vector<int> positions(window);
  for (int t = 0; t < window; ++t) positions[t] = t;
  const nn::Graph::Id encoded = nn::encoder_forward(
      g, enc_in, positions, encoder_, cfg_.encoder, train, dropout_rng);

  ForwardNodes out;
  const nn::Graph::Id pos = nn::mlp_forward(g, encoded, pos_head_);
  const nn::Graph::Id vel = nn::mlp_forward(g, encoded, vel_head_);
  out.x_hat = g.vstack({pos, vel});
  out.p_logits = nn::mlp_forward(g, encoded, pt_head_);
  out.pbar_logit = nn::mlp_forward(g, g.vstack(slot_cols), pbar_head_);
  return out;
}

TrajectoryEstimate DsModel::estimate(const track::Track& track) const {
  nn::Graph g;
  const ForwardNodes nodes = forward(g, track, false, nullptr);
  auto stable_sigmoid = [](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
  };
  TrajectoryEstimate est;
  est.source_column = track.source_column;
  est.x_hat = g.value(nodes.x_hat);
  est.p = g.value(nodes.p_logits).row(0).unaryExpr(stable_sigmoid).transpose();
  est.p_bar = stable_sigmoid(g.value(nodes.pbar_logit)(0, 0));
  return est;
}

namespace {

const sim::GroundTruthTrajectory& find_truth(
    const std::vector<sim::GroundTruthTrajectory>& truths, int object_id) {
  for (const sim::GroundTruthTrajectory& truth : truths) {
    if (truth.object_id == object_id) return truth;
  }
  throw std::invalid_argument("ds_loss: matched object has no trajectory");
}

int matched_object(const dda::MatchResult& match, int source_column) {
  if (source_column < 0 ||
      source_column >= static_cast<int>(match.track_object.size())) {
    throw std::invalid_argument("ds_loss: component without match entry");
  }
  return match.track_object[source_column];
}

}  // namespace

double ds_loss(const std::vector<TrajectoryEstimate>& estimates,
               const std::vector<sim::GroundTruthTrajectory>& truths,
               const dda::MatchResult& match) {
  double total = 0.0;
  for (const TrajectoryEstimate& est : estimates) {
    const int object = matched_object(match, est.source_column);
    if (object < 0) {
      total += -std::log(1.0 - est.p_bar);
      continue;
    }
    const sim::GroundTruthTrajectory& truth = find_truth(truths, object);
    total += -std::log(est.p_bar);
    const int window = static_cast<int>(est.p.size());
    for (int t = 1; t <= window; ++t) {
      if (truth.alive_at(t)) {
        total += (est.x_hat.col(t - 1) - truth.state_at(t)).squaredNorm() -
                 std::log(est.p(t - 1));
      } else {
        total += -std::log(1.0 - est.p(t - 1));
      }
    }
  }
  return total;
}

nn::Graph::Id ds_loss_node(
    nn::Graph& g, const std::vector<DsModel::ForwardNodes>& nodes,
    const std::vector<int>& source_columns,
    const std::vector<sim::GroundTruthTrajectory>& truths,
    const dda::MatchResult& match) {
  if (nodes.size() != source_columns.size()) {
    throw std::invalid_argument("ds_loss_node: one source column per node set");
  }
  if (nodes.empty()) {
    throw std::invalid_argument("ds_loss_node: no components");
  }
  std::vector<nn::Graph::Id> terms;
  for (std::size_t c = 0; c < nodes.size(); ++c) {
    const DsModel::ForwardNodes& fwd = nodes[c];
    const int object = matched_object(match, source_columns[c]);
    if (object < 0) {
      // -log(1 - sigmoid(a)) = softplus(a)
      terms.push_back(g.softplus(fwd.pbar_logit));
      continue;
    }
    const sim::GroundTruthTrajectory& truth = find_truth(truths, object);
    // -log(sigmoid(a)) = softplus(-a)
    terms.push_back(g.softplus(g.scale(fwd.pbar_logit, -1.0)));

    const int window = g.cols(fwd.x_hat);
    Eigen::MatrixXd truth_states = Eigen::MatrixXd::Zero(4, window);
    Eigen::MatrixXd alive_mask = Eigen::MatrixXd::Zero(1, window);
    Eigen::MatrixXd dead_mask = Eigen::MatrixXd::Ones(1, window);
    Eigen::MatrixXd alive_mask4 = Eigen::MatrixXd::Zero(4, window);
    for (int t = 1; t <= window; ++t) {
      if (!truth.alive_at(t)) continue;
      truth_states.col(t - 1) = truth.state_at(t);
      alive_mask(0, t - 1) = 1.0;
      dead_mask(0, t - 1) = 0.0;
      alive_mask4.col(t - 1).setOnes();
    }
    const nn::Graph::Id err =
        g.square(g.sub(fwd.x_hat, g.input(truth_states)));
    terms.push_back(g.sum(g.hadamard(err, g.input(alive_mask4))));
    const nn::Graph::Id miss_logit =
        g.softplus(g.scale(fwd.p_logits, -1.0));  // -log p_t
    terms.push_back(g.sum(g.hadamard(miss_logit, g.input(alive_mask))));
    const nn::Graph::Id off_logit = g.softplus(fwd.p_logits);  // -log(1-p_t)
    terms.push_back(g.sum(g.hadamard(off_logit, g.input(dead_mask))));
  }
  nn::Graph::Id total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) {
    total = g.add(total, terms[i]);
  }
  return total;
}

std::vector<ExtractedTrajectory> extract_trajectories(
    const std::vector<TrajectoryEstimate>& estimates, double p_bar_threshold,
    double p_t_threshold) {
  std::vector<ExtractedTrajectory> out;
  for (const TrajectoryEstimate& est : estimates) {
    if (!(est.p_bar > p_bar_threshold)) continue;
    const int window = static_cast<int>(est.p.size());
    int first = -1, last = -1;
    for (int t = 0; t < window; ++t) {
      if (est.p(t) > p_t_threshold) {
        if (first == -1) first = t;
        last = t;
      }
    }
    if (first == -1) continue;
    ExtractedTrajectory traj;
    traj.t_s = first + 1;
    traj.p_bar = est.p_bar;
    for (int t = first; t <= last; ++t) traj.states.push_back(est.x_hat.col(t));
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace d3as::ds
