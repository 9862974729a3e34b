#pragma once

#include <utility>
#include <vector>

#include "orthoplanes/geometry.hpp"

namespace orthoplanes {

/// x ↦ rotation·x + translation.
struct RigidMotion {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidMotion inverse() const { return {rotation.transpose(), -(rotation.transpose() * translation)}; }
  RigidMotion operator*(const RigidMotion& o) const {
    return {rotation * o.rotation, rotation * o.translation + translation};
  }
  Eigen::Matrix4d matrix() const;
};

enum class ConstraintKind { Full6DoF, OneCorner3DoF, TwoCorner1DoF, MultiCorner0DoF };
const char* to_string(ConstraintKind kind);

/// Corner correspondence: `source` maps onto `target`.
struct CornerMatch {
  Vec3 source = Vec3::Zero();
  Vec3 target = Vec3::Zero();
};

struct ConstraintClass {
  ConstraintKind kind = ConstraintKind::Full6DoF;
  std::vector<CornerMatch> anchors;
};

struct IcpParams {
  int max_iterations = 30;
  double correspondence_radius = 0.1;
  double convergence_tol = 1e-8;
  double collinearity_tol = deg_to_rad(2.0);
  double corner_match_radius = 1.0;     // position gate for corner matching
  double lrf_tolerance = deg_to_rad(20.0);

  void validate() const;
};

/// True when the points lie within `tol` (as an angle) of one common line.
bool are_collinear(const std::vector<Vec3>& points, double tol);

/// Least-squares rigid motion taking src onto dst, reflections excluded.
/// Throws TooFewCorners (< 3) and Collinear.
RigidMotion kabsch_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                         double collinearity_tol = deg_to_rad(2.0));

/// True when some axis permutation with sign flips maps each axis of `a`
/// within `tol` of an axis of `b`.
bool frames_agree(const Mat3& a, const Mat3& b, double tol);

/// Greedy mutual-nearest matching on corner positions (src moved by
/// `coarse` first) among LRF-compatible pairs closer than the match radius.
/// Returns (src index, dst index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> match_corners(const std::vector<Corner>& src,
                                                               const std::vector<Corner>& dst,
                                                               const RigidMotion* coarse,
                                                               const IcpParams& params);

struct IcpResult {
  RigidMotion motion;
  ConstraintClass constraint;
  int iterations = 0;
  double final_cost = 0.0;
  bool converged = false;
  std::vector<double> cost_trace;
  std::vector<RigidMotion> motion_trace;  // accepted iterates, for constraint checks
};

/// Point-to-plane ICP of src onto dst restricted to the motions that keep
/// the matched corners aligned. ≥3 non-collinear matches: closed form, no
/// iterations. 2 (or collinear): 1-DoF rotation about the corner axis.
/// 1: rotations about the corner. 0: full SE(3). Throws NoOverlap.
IcpResult constrained_icp(const PointCloud& src, const PointCloud& dst,
                          const std::vector<CornerMatch>& matches, const IcpParams& params);

/// Point-to-plane cost Σ((R x' + t - x_j)·n_j)² with nearest-neighbor
/// correspondences inside the radius, and the number of correspondences.
std::pair<double, std::size_t> icp_cost(const PointCloud& src, const PointCloud& dst,
                                        const RigidMotion& motion, double radius);

/// Fraction of src points with a dst neighbor within `radius` after motion.
double overlap_fraction(const PointCloud& src, const PointCloud& dst, const RigidMotion& motion,
                        double radius);

struct PoseError {
  double rotation = 0.0;     // radians
  double translation = 0.0;  // meters
};

PoseError compute_rpe(const RigidMotion& estimate, const RigidMotion& ground_truth);

}  // namespace orthoplanes
