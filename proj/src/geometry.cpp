#include "socproc/geometry.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace socproc::geom {

namespace {
constexpr double kDegenerateNorm = 1e-9;
}

double norm(const Quaternion& q) {
  return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

double dot(const Quaternion& a, const Quaternion& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

Quaternion normalize(const Quaternion& q) {
  const double n = norm(q);
  if (n < kDegenerateNorm)
    throw InvalidQuaternionError("normalize: near-zero quaternion");
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quaternion hamilton_product(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quaternion quat_inverse(const Quaternion& q) {
  const double n2 = dot(q, q);
  if (n2 < kDegenerateNorm * kDegenerateNorm)
    throw InvalidQuaternionError("quat_inverse: near-zero quaternion");
  return {q.w / n2, -q.x / n2, -q.y / n2, -q.z / n2};
}

Eigen::Vector3d rotate(const Quaternion& q, const Eigen::Vector3d& v) {
  const Eigen::Vector3d u(q.x, q.y, q.z);
  const Eigen::Vector3d t = 2.0 * u.cross(v);
  return v + q.w * t + u.cross(t);
}

Quaternion normal_to_quaternion(const Eigen::Vector3d& normal) {
  const double n = normal.norm();
  if (n < kDegenerateNorm)
    throw InvalidOrientationError("normal_to_quaternion: zero normal");
  const Eigen::Vector3d d = normal / n;
  static const Eigen::Vector3d kRef(1.0, 0.0, 0.0);
  const double c = kRef.dot(d);
  if (c < -1.0 + 1e-12) return {0.0, 0.0, 0.0, 1.0};  // half turn about +Z
  const Eigen::Vector3d axis = kRef.cross(d);
  return normalize({1.0 + c, axis.x(), axis.y(), axis.z()});
}

std::vector<Quaternion> hemisphere_align(const std::vector<Quaternion>& seq) {
  std::vector<Quaternion> out;
  out.reserve(seq.size());
  for (size_t t = 0; t < seq.size(); ++t) {
    Quaternion q = seq[t];
    if (t == 0) {
      bool flip = false;
      if (q.w != 0.0)
        flip = q.w < 0.0;
      else if (q.x != 0.0)
        flip = q.x < 0.0;
      else if (q.y != 0.0)
        flip = q.y < 0.0;
      else
        flip = q.z < 0.0;
      out.push_back(flip ? q.negated() : q);
    } else {
      out.push_back(dot(out.back(), q) < 0.0 ? q.negated() : q);
    }
  }
  return out;
}

double geodesic_angle_deg(const Quaternion& a, const Quaternion& b) {
  const Quaternion an = normalize(a);
  const Quaternion bn = normalize(b);
  double d = std::abs(dot(an, bn));
  if (d > 1.0) d = 1.0;
  return 2.0 * std::acos(d) * 180.0 / M_PI;
}

RelativeCue relative_cue(const Pose& self, double self_speaking,
                         const Pose& partner, double partner_speaking) {
  RelativeCue cue;
  cue.q_rel = hamilton_product(self.orientation,
                               quat_inverse(partner.orientation));
  cue.l_rel = partner.location - self.location;
  cue.s_rel = static_cast<int>(std::lround(partner_speaking)) -
              static_cast<int>(std::lround(self_speaking));
  return cue;
}

}  // namespace socproc::geom
