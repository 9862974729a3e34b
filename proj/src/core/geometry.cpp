#include "orthoplanes/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "orthoplanes/error.hpp"

namespace orthoplanes {

Vec3 canonical_direction(const Vec3& v) {
  for (int i = 0; i < 3; ++i) {
    if (v[i] > 0.0) return v;
    if (v[i] < 0.0) return -v;
  }
  return v;
}

Plane Plane::canonical() const {
  for (int i = 0; i < 3; ++i) {
    if (normal[i] > 0.0) return *this;
    if (normal[i] < 0.0) return flipped();
  }
  return *this;
}

double Line3D::distance_to(const Vec3& x) const {
  const Vec3 rel = x - anchor;
  return (rel - rel.dot(direction) * direction).norm();
}

Corner Corner::from_frame(const Mat3& frame, const Vec3& offsets) {
  return {frame, offsets, intersect_three_planes(frame, offsets)};
}

void DetectionParams::validate() const {
  if (!(delta_n > 0.0 && delta_n < deg_to_rad(45.0)))
    throw Error(ErrorCode::InvalidArgument, "delta_n must lie in (0, 45) degrees");
  if (!(tau_d > 0.0 && theta_bin > 0.0 && rho_bin > 0.0))
    throw Error(ErrorCode::InvalidArgument, "tau_d and bin sizes must be positive");
  if (n_refs == 0 || k_pairs == 0 || c_max < 0)
    throw Error(ErrorCode::InvalidArgument, "n_refs, k_pairs must be positive and c_max >= 0");
}

PairFeature compute_ppf(const OrientedPoint& p1, const OrientedPoint& p2) {
  const Vec3 d = p1.position - p2.position;
  return {p1.normal.dot(p2.normal), p1.normal.dot(d), p2.normal.dot(d), d.norm()};
}

PairClassifier::PairClassifier(const DetectionParams& params)
    : sin_dn_(std::sin(params.delta_n)), cos_dn_(std::cos(params.delta_n)), tau_d_(params.tau_d) {}

PairClass PairClassifier::operator()(const PairFeature& f) const {
  if (std::abs(f.f1) < sin_dn_ && f.f4 <= tau_d_) return PairClass::Orthogonal;
  const double cone = f.f4 * sin_dn_;
  if (std::abs(f.f1) > cos_dn_ && std::abs(f.f2) < cone && std::abs(f.f3) < cone)
    return PairClass::Coplanar;
  return PairClass::Neither;
}

PairClass classify_pair(const PairFeature& f, const DetectionParams& params) {
  return PairClassifier(params)(f);
}

double point_plane_distance(const Vec3& x, const Plane& plane) {
  return plane.normal.dot(x) + plane.offset;
}

Line3D intersect_two_planes(const Plane& p1, const Plane& p2, double eps_parallel) {
  if (std::abs(p1.normal.dot(p2.normal)) >= 1.0 - eps_parallel)
    throw Error(ErrorCode::NearParallel, "cannot intersect near-parallel planes");
  const Vec3 dir = p1.normal.cross(p2.normal).normalized();
  Mat3 A;
  A.row(0) = p1.normal.transpose();
  A.row(1) = p2.normal.transpose();
  A.row(2) = dir.transpose();
  const Vec3 anchor = A.partialPivLu().solve(Vec3(-p1.offset, -p2.offset, 0.0));
  return {canonical_direction(dir), anchor};
}

Vec3 intersect_three_planes(const Mat3& frame, const Vec3& offsets) {
  return -(frame.transpose() * offsets);
}

double unsigned_angle(const Vec3& a, const Vec3& b) {
  // atan2 of |a×b| and |a·b| stays accurate near 0 and π/2.
  return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

std::pair<Vec3, Vec3> tangent_basis(const Vec3& n) {
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  Vec3 b1 = n.cross(helper).normalized();
  Vec3 b2 = n.cross(b1);
  return {b1, b2};
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 exp_so3(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 K = skew(omega);
  if (theta < 1e-8) return Mat3::Identity() + K + 0.5 * K * K;
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * K + b * K * K;
}

double rotation_angle(const Mat3& R) {
  // Axis-angle via atan2 keeps precision at tiny angles where acos does not.
  const Vec3 v(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  return std::atan2(0.5 * v.norm(), 0.5 * (R.trace() - 1.0));
}

}  // namespace orthoplanes

namespace orthoplanes {

PointCloud transformed(const PointCloud& cloud, const Mat3& R, const Vec3& t) {
  PointCloud out = cloud;
  for (auto& p : out.points) {
    p.position = R * p.position + t;
    p.normal = R * p.normal;
  }
  return out;
}

Plane transformed(const Plane& plane, const Mat3& R, const Vec3& t) {
  const Vec3 n = R * plane.normal;
  return {n, plane.offset - n.dot(t)};
}

}  // namespace orthoplanes
