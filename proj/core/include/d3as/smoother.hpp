#pragma once

#include <vector>

#include <Eigen/Dense>

#include "d3as/dda.hpp"
#include "d3as/encoder.hpp"
#include "d3as/partitioner.hpp"
#include "d3as/simkit.hpp"

namespace d3as::ds {

// Measurement slot (r, rdot, theta) -> (r cos theta, r sin theta, rdot):
// Cartesian position implied by range and bearing, plus the range rate.
Eigen::Vector3d preprocess_slot(const Eigen::Vector3d& z);

// Multi-Bernoulli style estimate for one track: a full-window state sequence
// x_hat, a per-step existence probability, and an overall existence
// probability for the track as a whole.
struct TrajectoryEstimate {
  int source_column = -1;
  Eigen::MatrixXd x_hat;  // 4 x window, state layout (px, py, vx, vy)
  Eigen::VectorXd p;      // per-step existence, in (0, 1)
  double p_bar = 0.0;     // track existence, in (0, 1)
};

struct ExtractedTrajectory {
  int t_s = 1;  // 1-based first step
  std::vector<Eigen::Vector4d> states;
  double p_bar = 0.0;
};

struct DsConfig {
  nn::EncoderConfig encoder;
  int window_length = 5;
  nn::MlpSpec pos_head{2, 64};
  nn::MlpSpec vel_head{2, 64};
  nn::MlpSpec pt_head{2, 32};
  nn::MlpSpec pbar_head{2, 64};

  void validate() const;
};

// Track encoder. Measured slots enter as [preprocessed z, confidence]
// through a linear projection; dummy slots enter as one shared learnable
// embedding. Slot index is the positional encoding. Heads read the encoded
// slots: position and velocity per slot (concatenated into x_hat), per-step
// existence logit per slot, and one track existence logit computed from the
// concatenation of all slot inputs.
class DsModel {
 public:
  DsModel(const DsConfig& cfg, nn::ParamStore& store, RandomStream& init);

  struct ForwardNodes {
    nn::Graph::Id x_hat;       // 4 x window
    nn::Graph::Id p_logits;    // 1 x window
    nn::Graph::Id pbar_logit;  // 1 x 1
  };

  // Throws std::invalid_argument when the track length differs from the
  // configured window.
  ForwardNodes forward(nn::Graph& g, const track::Track& track, bool train,
                       RandomStream* dropout_rng) const;

  // Evaluation-mode wrapper; probabilities are sigmoids of the logits.
  TrajectoryEstimate estimate(const track::Track& track) const;

  const DsConfig& config() const { return cfg_; }

 private:
  DsConfig cfg_;
  nn::Tensor* w_in_ = nullptr;        // width x 4
  nn::Tensor* b_in_ = nullptr;        // width x 1
  nn::Tensor* dummy_embed_ = nullptr; // width x 1
  nn::EncoderParams encoder_;
  nn::MlpParams pos_head_;
  nn::MlpParams vel_head_;
  nn::MlpParams pt_head_;
  nn::MlpParams pbar_head_;
};

// Negative log likelihood of the truth under the estimates, given which
// object each source column was matched to:
//   unmatched track:  -log(1 - p_bar)
//   matched track:    -log(p_bar)
//                     + sum over alive steps  ||x_hat_t - x_t||^2 - log p_t
//                     + sum over other steps  -log(1 - p_t)
// Throws std::invalid_argument when a source column has no match entry or a
// matched object id has no ground-truth trajectory.
double ds_loss(const std::vector<TrajectoryEstimate>& estimates,
               const std::vector<sim::GroundTruthTrajectory>& truths,
               const dda::MatchResult& match);

// Same loss on forward logits, using softplus identities so saturated
// sigmoids cannot produce infinities. Equal in value to ds_loss evaluated on
// the sigmoid probabilities.
nn::Graph::Id ds_loss_node(nn::Graph& g,
                           const std::vector<DsModel::ForwardNodes>& nodes,
                           const std::vector<int>& source_columns,
                           const std::vector<sim::GroundTruthTrajectory>& truths,
                           const dda::MatchResult& match);

// Keep estimates with p_bar > p_bar_threshold; within each, the reported
// span runs from the first to the last step with p > p_t_threshold
// (interior low-p steps are kept, so the span is contiguous). Estimates
// with no step above threshold are dropped.
std::vector<ExtractedTrajectory> extract_trajectories(
    const std::vector<TrajectoryEstimate>& estimates,
    double p_bar_threshold = 0.5, double p_t_threshold = 0.8);

}  // namespace d3as::ds
