#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "d3as/encoder.hpp"
#include "d3as/graph.hpp"
#include "d3as/random.hpp"
#include "d3as/tensor.hpp"

namespace d3as::dda {

// Soft association of n measurements to B track slots; each row is a pmf.
struct AssociationMatrix {
  Eigen::MatrixXd p;  // n x B

  int n() const { return static_cast<int>(p.rows()); }
  int tracks() const { return static_cast<int>(p.cols()); }
  // Throws std::invalid_argument when a row leaves the simplex by more
  // than tol.
  void validate(double tol = 1e-9) const;
};

// How clutter rows are encoded in the training target. kLiteral marks every
// unmatched track column in a clutter row. kSingleColumn reserves the last
// track column for clutter: objects are matched over the first B-1 columns
// only and clutter rows are one-hot at column B-1.
enum class ClutterTarget { kLiteral, kSingleColumn };

struct MatchResult {
  Eigen::MatrixXd cost;           // usable_tracks x K, entry (j, k) is
                                  // minus the soft mass track j gives object k
  std::vector<int> object_ids;    // the K objects that were matched
  std::vector<int> track_object;  // size B; object id per track, -1 if none
};

// Match objects to tracks by minimizing the summed cost with each object on
// exactly one track and each track taking at most one object. labels[i] is
// the source object of measurement i (-1 for clutter). The two-argument
// form matches the distinct non-clutter labels; the explicit form also
// matches objects that produced no measurement. Throws std::invalid_argument
// when there are more objects than usable tracks.
MatchResult match_tracks_to_objects(const AssociationMatrix& a,
                                    const std::vector<int>& labels,
                                    ClutterTarget mode = ClutterTarget::kLiteral);
MatchResult match_tracks_to_objects(const AssociationMatrix& a,
                                    const std::vector<int>& labels,
                                    const std::vector<int>& object_ids,
                                    ClutterTarget mode = ClutterTarget::kLiteral);

// Hard n x B target: row i is the indicator of the track(s) whose matched
// object equals labels[i]. Throws std::invalid_argument when a non-clutter
// label was not matched to any track.
Eigen::MatrixXd build_target_matrix(const MatchResult& match,
                                    const std::vector<int>& labels,
                                    ClutterTarget mode = ClutterTarget::kLiteral);

// Cross entropy -(1/n) sum_ij log(max(a_ij, 1e-12)) target_ij.
double dda_loss(const AssociationMatrix& a, const Eigen::MatrixXd& target);

// Same value as a graph node so it can be differentiated; `target` is a
// constant.
nn::Graph::Id dda_loss_node(nn::Graph& g, nn::Graph::Id a_node,
                            const Eigen::MatrixXd& target);

struct DdaConfig {
  nn::EncoderConfig encoder;  // max_positions must cover the window length
  int tracks = 8;             // B
  nn::MlpSpec head{2, 64};
  ClutterTarget clutter_target = ClutterTarget::kLiteral;

  void validate() const;
};

// Measurement encoder: linear projection of each (r, rdot, theta) to the
// embedding width, transformer encoder with time-step positional encodings,
// then an MLP head and row softmax yielding the association matrix.
class DdaModel {
 public:
  DdaModel(const DdaConfig& cfg, nn::ParamStore& store, RandomStream& init);

  // times are 1-based scene steps; measurement order is free and only the
  // time stamps matter. Returns an n x B node whose rows are pmfs. Throws
  // std::invalid_argument on an empty measurement set and std::out_of_range
  // when a time stamp exceeds the positional table.
  nn::Graph::Id forward(nn::Graph& g, const std::vector<Eigen::Vector3d>& z,
                        const std::vector<int>& times, bool train,
                        RandomStream* dropout_rng) const;

  // Evaluation-mode convenience wrapper.
  AssociationMatrix run(const std::vector<Eigen::Vector3d>& z,
                        const std::vector<int>& times) const;

  const DdaConfig& config() const { return cfg_; }

 private:
  DdaConfig cfg_;
  nn::Tensor* w_in_ = nullptr;  // width x 3
  nn::Tensor* b_in_ = nullptr;  // width x 1
  nn::EncoderParams encoder_;
  nn::MlpParams head_;
};

// One row per measurement, one column per track, header row included.
std::string association_to_csv(const AssociationMatrix& a);

}  // namespace d3as::dda
