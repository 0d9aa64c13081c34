#pragma once

#include <vector>

#include <Eigen/Dense>

#include "d3as/dda.hpp"

namespace d3as::track {

struct TrackSlot {
  bool measured = false;
  Eigen::Vector3d z = Eigen::Vector3d::Zero();
  double confidence = 0.0;
};

// Fixed-length window of slots; slot t-1 corresponds to scene step t.
struct Track {
  int source_column = -1;  // association matrix column this track came from
  std::vector<TrackSlot> slots;

  int measured_count() const;
};

// Hard-assign each measurement to its argmax track column (ties to the
// lowest column). When two measurements from the same step land on the same
// column, the higher-confidence one wins; confidence ties keep the lower
// measurement index. Columns that end up with at least one measurement
// become tracks of length `window_length`, dummy slots elsewhere, ordered by
// column index. Throws std::invalid_argument when sizes disagree or a time
// stamp falls outside the window.
std::vector<Track> partition(const dda::AssociationMatrix& a,
                             const std::vector<Eigen::Vector3d>& z,
                             const std::vector<int>& times,
                             int window_length);

}  // namespace d3as::track
