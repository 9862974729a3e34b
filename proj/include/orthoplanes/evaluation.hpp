#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "orthoplanes/geometry.hpp"
#include "orthoplanes/relation_graph.hpp"

namespace orthoplanes {

struct DetectionReport {
  double precision = 0.0;
  double recall = 0.0;
  bool precision_defined = false;  // false when nothing was detected
  std::size_t correct = 0;
  std::size_t noise = 0;
  std::size_t miss = 0;
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (detected, gt)
};

inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

/// Best-score-first one-to-one matching. score[i][j] is lower for better
/// pairs; kInfeasible forbids the pair. Matches sorted by detected index.
std::vector<std::pair<std::size_t, std::size_t>> greedy_match(
    const std::vector<std::vector<double>>& score);

DetectionReport make_report(std::size_t n_detected, std::size_t n_gt,
                            std::vector<std::pair<std::size_t, std::size_t>> matches);

/// A detected plane matches a GT plane when the sign-insensitive normal
/// angle is below angle_tol and, with the detected plane flipped to agree
/// with the GT normal, the offsets differ by less than dist_tol.
DetectionReport evaluate_planes(const std::vector<Plane>& detected, const std::vector<Plane>& gt,
                                double angle_tol = deg_to_rad(10.0), double dist_tol = 0.05);

inline constexpr double kLineAngleTolerance = deg_to_rad(10.0);

/// Direction within 10° (sign-insensitive) and the lines within dist_tol of
/// each other (larger of the two anchor-to-line distances).
DetectionReport evaluate_lines(const std::vector<Line3D>& detected, const std::vector<Line3D>& gt,
                               double dist_tol = 0.05);

/// Graph vertex of the plane each point is assigned to, or -1 when the
/// point is unassigned or farther than dist_tol from it.
std::vector<std::int32_t> label_points(const PointCloud& cloud,
                                       const std::vector<ParallelBundle>& bundles,
                                       double dist_tol, double eps_n);

}  // namespace orthoplanes
