#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "orthoplanes/error.hpp"
#include "orthoplanes/geometry.hpp"

namespace testing {

using orthoplanes::Mat3;
using orthoplanes::Vec3;

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do v = Vec3(g(rng), g(rng), g(rng));
  while (v.norm() < 1e-6);
  return v.normalized();
}

// Uniform rotation from a random unit quaternion.
inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Mat3 rotation_about(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

// Regular grid of oriented points on a plane patch spanned by u, v.
inline std::vector<orthoplanes::OrientedPoint> grid_patch(const Vec3& origin, const Vec3& u, const Vec3& v,
                                                          int nu, int nv, double step) {
  std::vector<orthoplanes::OrientedPoint> out;
  const Vec3 n = u.cross(v).normalized();
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) out.push_back({origin + i * step * u + j * step * v, n});
  return out;
}

inline orthoplanes::PointCloud make_cloud(std::vector<orthoplanes::OrientedPoint> pts, bool normals = true) {
  orthoplanes::PointCloud c;
  c.points = std::move(pts);
  c.has_normals = normals;
  return c;
}

// Code of the orthoplanes::Error thrown by fn, or nullopt if it returns.
template <typename Fn>
std::optional<orthoplanes::ErrorCode> error_of(Fn&& fn) {
  try {
    fn();
  } catch (const orthoplanes::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace testing
