#include "d3as/partitioner.hpp"

#include <stdexcept>

namespace d3as::track {

int Track::measured_count() const {
  int count = 0;
  for (const TrackSlot& slot : slots) count += slot.measured ? 1 : 0;
  return count;
}

std::vector<Track> partition(const dda::AssociationMatrix& a,
                             const std::vector<Eigen::Vector3d>& z,
                             const std::vector<int>& times,
                             int window_length) {
  const int n = a.n();
  if (static_cast<int>(z.size()) != n ||
      static_cast<int>(times.size()) != n) {
    throw std::invalid_argument("partition: size mismatch");
  }
  if (window_length < 1) {
    throw std::invalid_argument("partition: window_length < 1");
  }
  const int cols = a.tracks();

  // winner[j][t] = measurement index currently holding slot t of column j.
  std::vector<std::vector<int>> winner(
      cols, std::vector<int>(window_length, -1));
  std::vector<double> confidence(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (times[i] < 1 || times[i] > window_length) {
      throw std::invalid_argument("partition: time stamp outside window");
    }
    int best_col = 0;
    for (int j = 1; j < cols; ++j) {
      if (a.p(i, j) > a.p(i, best_col)) best_col = j;
    }
    confidence[i] = a.p(i, best_col);
    int& holder = winner[best_col][times[i] - 1];
    // Collision: higher confidence wins, earlier index wins ties. The loser
    // is dropped entirely rather than spilling into another column.
    if (holder == -1 || confidence[i] > confidence[holder]) holder = i;
  }

  std::vector<Track> tracks;
  for (int j = 0; j < cols; ++j) {
    bool any = false;
    for (int t = 0; t < window_length; ++t) any = any || winner[j][t] != -1;
    if (!any) continue;
    Track track;
    track.source_column = j;
    track.slots.resize(window_length);
    for (int t = 0; t < window_length; ++t) {
      const int i = winner[j][t];
      if (i == -1) continue;
      track.slots[t].measured = true;
      track.slots[t].z = z[i];
      track.slots[t].confidence = confidence[i];
    }
    tracks.push_back(std::move(track));
  }
  return tracks;
}

}  // namespace d3as::track
