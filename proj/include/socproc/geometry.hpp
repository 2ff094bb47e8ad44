#pragma once
// Quaternion algebra, pose transforms, and orientation metrics. Scalar-first
// component order (w, x, y, z). All functions are pure.

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace socproc::geom {

struct InvalidQuaternionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidOrientationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }
  Quaternion negated() const { return {-w, -x, -y, -z}; }
};

struct Pose {
  Eigen::Vector3d location = Eigen::Vector3d::Zero();  // centimeters
  Quaternion orientation;
};

// Partner cue expressed in the self frame; s_rel is the speaking-status
// difference, so it lives in {-1, 0, 1}.
struct RelativeCue {
  Quaternion q_rel;
  Eigen::Vector3d l_rel = Eigen::Vector3d::Zero();
  int s_rel = 0;
};

double norm(const Quaternion& q);
double dot(const Quaternion& a, const Quaternion& b);
Quaternion normalize(const Quaternion& q);  // throws on near-zero norm
Quaternion hamilton_product(const Quaternion& a, const Quaternion& b);
Quaternion quat_inverse(const Quaternion& q);  // general inverse, not just conjugate

// Rotates v by unit quaternion q.
Eigen::Vector3d rotate(const Quaternion& q, const Eigen::Vector3d& v);

// Shortest-arc rotation carrying the +X reference direction onto the
// normalized input; an antiparallel input maps to a half turn about +Z.
Quaternion normal_to_quaternion(const Eigen::Vector3d& normal);

// Sign-fixes a quaternion sequence onto one hemisphere: the first entry
// gets non-negative w (ties broken by x, then y, then z), every later entry
// keeps a non-negative dot with its predecessor.
std::vector<Quaternion> hemisphere_align(const std::vector<Quaternion>& seq);

// 2*arccos(|dot|) of the normalized inputs, in [0, 180] degrees. Antipodal
// pairs measure zero.
double geodesic_angle_deg(const Quaternion& a, const Quaternion& b);

RelativeCue relative_cue(const Pose& self, double self_speaking,
                         const Pose& partner, double partner_speaking);

}  // namespace socproc::geom
