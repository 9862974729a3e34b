#include "orthoplanes/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "orthoplanes/error.hpp"
#include "orthoplanes/refinement.hpp"

namespace orthoplanes {

std::vector<std::pair<std::size_t, std::size_t>> greedy_match(
    const std::vector<std::vector<double>>& score) {
  struct Cand {
    double s;
    std::size_t i, j;
  };
  std::vector<Cand> cands;
  std::size_t n_gt = 0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    n_gt = std::max(n_gt, score[i].size());
    for (std::size_t j = 0; j < score[i].size(); ++j)
      if (score[i][j] < kInfeasible) cands.push_back({score[i][j], i, j});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return std::tie(a.s, a.i, a.j) < std::tie(b.s, b.i, b.j);
  });
  std::vector<bool> used_i(score.size(), false), used_j(n_gt, false);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const Cand& c : cands) {
    if (used_i[c.i] || used_j[c.j]) continue;
    used_i[c.i] = used_j[c.j] = true;
    out.emplace_back(c.i, c.j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

DetectionReport make_report(std::size_t n_detected, std::size_t n_gt,
                            std::vector<std::pair<std::size_t, std::size_t>> matches) {
  DetectionReport r;
  r.correct = matches.size();
  r.noise = n_detected - r.correct;
  r.miss = n_gt - r.correct;
  r.precision_defined = n_detected > 0;
  r.precision = r.precision_defined ? static_cast<double>(r.correct) / static_cast<double>(n_detected) : 0.0;
  r.recall = n_gt > 0 ? static_cast<double>(r.correct) / static_cast<double>(n_gt) : 0.0;
  r.matches = std::move(matches);
  return r;
}

DetectionReport evaluate_planes(const std::vector<Plane>& detected, const std::vector<Plane>& gt,
                                double angle_tol, double dist_tol) {
  if (!(angle_tol > 0.0 && dist_tol > 0.0))
    throw Error(ErrorCode::InvalidArgument, "matching tolerances must be positive");
  std::vector<std::vector<double>> score(detected.size(), std::vector<double>(gt.size(), kInfeasible));
  for (std::size_t i = 0; i < detected.size(); ++i) {
    for (std::size_t j = 0; j < gt.size(); ++j) {
      Plane p = detected[i];
      if (p.normal.dot(gt[j].normal) < 0.0) p = p.flipped();
      const double angle = unsigned_angle(p.normal, gt[j].normal);
      const double dist = std::abs(p.offset - gt[j].offset);
      if (angle < angle_tol && dist < dist_tol) score[i][j] = angle / angle_tol + dist / dist_tol;
    }
  }
  return make_report(detected.size(), gt.size(), greedy_match(score));
}

DetectionReport evaluate_lines(const std::vector<Line3D>& detected, const std::vector<Line3D>& gt,
                               double dist_tol) {
  if (!(dist_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "distance tolerance must be positive");
  std::vector<std::vector<double>> score(detected.size(), std::vector<double>(gt.size(), kInfeasible));
  for (std::size_t i = 0; i < detected.size(); ++i) {
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const double c = std::min(1.0, std::abs(detected[i].direction.dot(gt[j].direction)));
      const double angle = std::acos(c);
      const double dist = std::max(detected[i].distance_to(gt[j].anchor), gt[j].distance_to(detected[i].anchor));
      if (angle < kLineAngleTolerance && dist < dist_tol)
        score[i][j] = angle / kLineAngleTolerance + dist / dist_tol;
    }
  }
  return make_report(detected.size(), gt.size(), greedy_match(score));
}

std::vector<std::int32_t> label_points(const PointCloud& cloud,
                                       const std::vector<ParallelBundle>& bundles,
                                       double dist_tol, double eps_n) {
  const BundleAssignment a = assign_points_to_bundles(cloud, bundles, eps_n);
  std::vector<std::int32_t> labels(cloud.size(), -1);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (a.is_assigned(i) && std::abs(a.residual[i]) < dist_tol)
      labels[i] = static_cast<std::int32_t>(bundles[a.bundle[i]].members[a.slot[i]]);
  return labels;
}

}  // namespace orthoplanes
