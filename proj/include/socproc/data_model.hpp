#pragma once
// Canonical cue, window, and batch types shared by datasets, models, and
// evaluation. The 15-dim feature layout is the single source of truth for
// standardization masks and metrics.

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

#include "socproc/geometry.hpp"

namespace socproc::data {

inline constexpr int kFeatureDim = 15;
inline constexpr int kHeadLocOffset = 0;   // 3 dims
inline constexpr int kHeadQuatOffset = 3;  // 4 dims
inline constexpr int kBodyLocOffset = 7;   // 3 dims
inline constexpr int kBodyQuatOffset = 10; // 4 dims
inline constexpr int kSpeakingOffset = 14; // 1 dim
inline constexpr std::array<int, 6> kLocationDims{0, 1, 2, 7, 8, 9};

struct BehaviorVector {
  geom::Pose head;
  geom::Pose body;
  double speaking = 0.0;  // binary in ground truth, real for model I/O
};

Eigen::VectorXd flatten(const BehaviorVector& v);
BehaviorVector unflatten(const Eigen::VectorXd& flat);  // throws on arity

// One participant's window. steps is (T, D) with rows in time order;
// D is 15 for pose data and 1 for the single-channel synthetic task.
struct ParticipantSequence {
  std::string participant_id;
  Eigen::MatrixXd steps;
  std::vector<long> timestamps;  // frame indices, strictly increasing, uniform
};

// Observed/future window pair for one group at one (start, offset) slot.
// offset_steps is the gap between the last observed frame and the first
// future frame, so 1 means the future follows immediately.
struct GroupSample {
  std::string group_id;
  std::vector<ParticipantSequence> observed;
  std::vector<ParticipantSequence> future;
  int offset_steps = 1;
};

// One meta-task: context and target sets drawn from a single group.
struct SplitBatch {
  std::string group_id;
  std::vector<GroupSample> context;
  std::vector<GroupSample> target;
};

struct Violation {
  std::string where;
  std::string what;
};

// Collects every invariant violation instead of stopping at the first.
std::vector<Violation> validate_group_sample(const GroupSample& s);

}  // namespace socproc::data
