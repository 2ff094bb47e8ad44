#include "socproc/data_model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace socproc::data {

Eigen::VectorXd flatten(const BehaviorVector& v) {
  Eigen::VectorXd out(kFeatureDim);
  out.segment<3>(kHeadLocOffset) = v.head.location;
  out(kHeadQuatOffset + 0) = v.head.orientation.w;
  out(kHeadQuatOffset + 1) = v.head.orientation.x;
  out(kHeadQuatOffset + 2) = v.head.orientation.y;
  out(kHeadQuatOffset + 3) = v.head.orientation.z;
  out.segment<3>(kBodyLocOffset) = v.body.location;
  out(kBodyQuatOffset + 0) = v.body.orientation.w;
  out(kBodyQuatOffset + 1) = v.body.orientation.x;
  out(kBodyQuatOffset + 2) = v.body.orientation.y;
  out(kBodyQuatOffset + 3) = v.body.orientation.z;
  out(kSpeakingOffset) = v.speaking;
  return out;
}

BehaviorVector unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != kFeatureDim)
    throw std::invalid_argument("unflatten: expected 15 entries");
  BehaviorVector v;
  v.head.location = flat.segment<3>(kHeadLocOffset);
  v.head.orientation = {flat(kHeadQuatOffset + 0), flat(kHeadQuatOffset + 1),
                        flat(kHeadQuatOffset + 2), flat(kHeadQuatOffset + 3)};
  v.body.location = flat.segment<3>(kBodyLocOffset);
  v.body.orientation = {flat(kBodyQuatOffset + 0), flat(kBodyQuatOffset + 1),
                        flat(kBodyQuatOffset + 2), flat(kBodyQuatOffset + 3)};
  v.speaking = flat(kSpeakingOffset);
  return v;
}

namespace {

void check_sequence(const ParticipantSequence& p, const std::string& where,
                    std::vector<Violation>& out) {
  if (p.steps.rows() != static_cast<Eigen::Index>(p.timestamps.size()))
    out.push_back({where, "steps/timestamps length mismatch"});
  long spacing = 0;
  for (size_t t = 1; t < p.timestamps.size(); ++t) {
    const long d = p.timestamps[t] - p.timestamps[t - 1];
    if (d <= 0) {
      out.push_back({where, "timestamps not strictly increasing"});
      break;
    }
    if (spacing == 0)
      spacing = d;
    else if (d != spacing) {
      out.push_back({where, "timestamps not uniformly spaced"});
      break;
    }
  }
  if (!p.steps.allFinite()) out.push_back({where, "non-finite feature value"});
  if (p.steps.cols() == kFeatureDim) {
    for (Eigen::Index t = 0; t < p.steps.rows(); ++t) {
      for (int off : {kHeadQuatOffset, kBodyQuatOffset}) {
        const double n = p.steps.row(t).segment<4>(off).norm();
        if (std::abs(n - 1.0) > 1e-6) {
          out.push_back({where + " step " + std::to_string(t),
                         "orientation quaternion not unit norm"});
          break;
        }
      }
      const double s = p.steps(t, kSpeakingOffset);
      if (s != 0.0 && s != 1.0) {
        out.push_back({where + " step " + std::to_string(t),
                       "speaking status not binary"});
      }
    }
  }
}

}  // namespace

std::vector<Violation> validate_group_sample(const GroupSample& s) {
  std::vector<Violation> out;
  if (s.observed.empty()) out.push_back({"observed", "no participants"});
  if (s.offset_steps < 1) out.push_back({"offset_steps", "offset_steps < 1"});

  std::set<std::string> obs_ids, fut_ids;
  for (const auto& p : s.observed)
    if (!obs_ids.insert(p.participant_id).second)
      out.push_back({"observed " + p.participant_id, "duplicate participant"});
  for (const auto& p : s.future)
    if (!fut_ids.insert(p.participant_id).second)
      out.push_back({"future " + p.participant_id, "duplicate participant"});
  for (const auto& id : obs_ids)
    if (!fut_ids.count(id))
      out.push_back({"future", "participant " + id + " missing"});
  for (const auto& id : fut_ids)
    if (!obs_ids.count(id))
      out.push_back({"observed", "participant " + id + " missing"});

  for (const auto& p : s.observed)
    check_sequence(p, "observed " + p.participant_id, out);
  for (const auto& p : s.future)
    check_sequence(p, "future " + p.participant_id, out);

  // Shared grids and layout widths.
  auto same_grid = [&](const std::vector<ParticipantSequence>& ps,
                       const char* name) {
    for (size_t i = 1; i < ps.size(); ++i) {
      if (ps[i].timestamps != ps[0].timestamps)
        out.push_back({std::string(name) + " " + ps[i].participant_id,
                       "timestamp grid differs from first participant"});
      if (ps[i].steps.cols() != ps[0].steps.cols())
        out.push_back({std::string(name) + " " + ps[i].participant_id,
                       "feature width differs from first participant"});
    }
  };
  same_grid(s.observed, "observed");
  same_grid(s.future, "future");

  if (!s.observed.empty() && !s.future.empty() &&
      !s.observed[0].timestamps.empty() && !s.future[0].timestamps.empty()) {
    const long o_end = s.observed[0].timestamps.back();
    const long f_start = s.future[0].timestamps.front();
    if (f_start <= o_end)
      out.push_back({"future", "future does not start after observed"});
    else if (f_start - o_end != s.offset_steps)
      out.push_back({"offset_steps", "offset_steps does not match windows"});
  }
  return out;
}

}  // namespace socproc::data
