#include "orthoplanes/registration.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <array>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "orthoplanes/error.hpp"
#include "orthoplanes/spatial_index.hpp"

namespace orthoplanes {

Eigen::Matrix4d RigidMotion::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::Full6DoF: return "Full6DoF";
    case ConstraintKind::OneCorner3DoF: return "OneCorner3DoF";
    case ConstraintKind::TwoCorner1DoF: return "TwoCorner1DoF";
    case ConstraintKind::MultiCorner0DoF: return "MultiCorner0DoF";
  }
  return "Unknown";
}

void IcpParams::validate() const {
  if (!(max_iterations > 0 && correspondence_radius > 0.0 && convergence_tol > 0.0 &&
        collinearity_tol > 0.0 && corner_match_radius > 0.0 && lrf_tolerance > 0.0))
    throw Error(ErrorCode::InvalidArgument, "ICP parameters must be positive");
}

namespace {

struct LineFit {
  Vec3 centroid = Vec3::Zero();
  Vec3 axis = Vec3::UnitX();
  Vec3 spread = Vec3::Zero();  // covariance eigenvalues, ascending
};

LineFit fit_line(const std::vector<Vec3>& pts) {
  LineFit f;
  for (const auto& p : pts) f.centroid += p;
  f.centroid /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov.noalias() += (p - f.centroid) * (p - f.centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  f.spread = eig.eigenvalues().cwiseMax(0.0);
  f.axis = eig.eigenvectors().col(2);
  return f;
}

Mat3 shortest_arc(const Vec3& from, const Vec3& to) {
  const Vec3 a = from.normalized(), b = to.normalized();
  const double c = a.dot(b);
  if (c < -1.0 + 1e-12) {
    const auto [perp, unused] = tangent_basis(a);
    return exp_so3(kPi * perp);
  }
  const Mat3 K = skew(a.cross(b));
  return Mat3::Identity() + K + K * K / (1.0 + c);
}

}  // namespace

bool are_collinear(const std::vector<Vec3>& points, double tol) {
  if (points.size() < 3) return true;
  const LineFit f = fit_line(points);
  if (f.spread[2] <= 0.0) return true;
  return std::sqrt(f.spread[1]) <= std::tan(tol) * std::sqrt(f.spread[2]);
}

RigidMotion kabsch_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                         double collinearity_tol) {
  if (src.size() != dst.size()) throw Error(ErrorCode::InvalidArgument, "corner lists differ in length");
  if (src.size() < 3) throw Error(ErrorCode::TooFewCorners, "closed-form alignment needs three corners");
  if (are_collinear(src, collinearity_tol) || are_collinear(dst, collinearity_tol))
    throw Error(ErrorCode::Collinear, "corners are collinear; rotation about their line is free");
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  Mat3 H = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) H.noalias() += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  RigidMotion m;
  m.rotation = svd.matrixV() * D * svd.matrixU().transpose();
  m.translation = cd - m.rotation * cs;
  return m;
}

bool frames_agree(const Mat3& a, const Mat3& b, double tol) {
  const double c = std::cos(tol);
  std::array<bool, 3> used{false, false, false};
  for (int i = 0; i < 3; ++i) {
    int hit = -1;
    for (int j = 0; j < 3; ++j)
      if (!used[static_cast<std::size_t>(j)] && std::abs(a.row(i).dot(b.row(j))) > c) hit = j;
    if (hit < 0) return false;
    used[static_cast<std::size_t>(hit)] = true;
  }
  return true;
}

std::vector<std::pair<std::size_t, std::size_t>> match_corners(const std::vector<Corner>& src,
                                                               const std::vector<Corner>& dst,
                                                               const RigidMotion* coarse,
                                                               const IcpParams& params) {
  const RigidMotion move = coarse ? *coarse : RigidMotion{};
  struct Pair {
    double dist;
    std::size_t s, d;
  };
  std::vector<Pair> pairs;
  for (std::size_t s = 0; s < src.size(); ++s) {
    const Vec3 p = move.apply(src[s].position);
    const Mat3 axes = src[s].frame * move.rotation.transpose();  // rows rotated
    for (std::size_t d = 0; d < dst.size(); ++d) {
      const double dist = (p - dst[d].position).norm();
      if (dist < params.corner_match_radius && frames_agree(axes, dst[d].frame, params.lrf_tolerance))
        pairs.push_back({dist, s, d});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    return std::tie(x.dist, x.s, x.d) < std::tie(y.dist, y.s, y.d);
  });
  std::vector<bool> s_used(src.size(), false), d_used(dst.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const Pair& p : pairs) {
    if (s_used[p.s] || d_used[p.d]) continue;
    s_used[p.s] = d_used[p.d] = true;
    out.emplace_back(p.s, p.d);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct Correspondence {
  Vec3 moved;   // R x' + t
  Vec3 target;
  Vec3 normal;
};

std::vector<Correspondence> correspondences(const PointCloud& src, const PointCloud& dst,
                                            const GridIndex& index, const RigidMotion& m,
                                            double radius) {
  std::vector<Correspondence> out;
  out.reserve(src.size());
  for (const auto& p : src.points) {
    const Vec3 y = m.apply(p.position);
    if (const auto j = index.nearest(y, radius))
      out.push_back({y, dst.points[*j].position, dst.points[*j].normal});
  }
  return out;
}

double cost_of(const std::vector<Correspondence>& cs) {
  double e = 0.0;
  for (const auto& c : cs) {
    const double r = (c.moved - c.target).dot(c.normal);
    e += r * r;
  }
  return e;
}

// A constrained motion family: the local Jacobian row of one residual and
// the retraction applying a local step.
struct MotionFamily {
  int dof = 6;
  std::function<void(const Correspondence&, Eigen::VectorXd&)> jacobian;
  std::function<RigidMotion(const Eigen::VectorXd&)> step;
};

}  // namespace

std::pair<double, std::size_t> icp_cost(const PointCloud& src, const PointCloud& dst,
                                        const RigidMotion& motion, double radius) {
  const GridIndex index = GridIndex::from_cloud(dst, radius / 2.0);
  const auto cs = correspondences(src, dst, index, motion, radius);
  return {cost_of(cs), cs.size()};
}

double overlap_fraction(const PointCloud& src, const PointCloud& dst, const RigidMotion& motion,
                        double radius) {
  if (src.empty()) return 0.0;
  const auto [cost, n] = icp_cost(src, dst, motion, radius);
  return static_cast<double>(n) / static_cast<double>(src.size());
}

IcpResult constrained_icp(const PointCloud& src, const PointCloud& dst,
                          const std::vector<CornerMatch>& matches, const IcpParams& params) {
  params.validate();
  if (src.empty() || dst.empty()) throw Error(ErrorCode::EmptyCloud, "registration needs two nonempty clouds");
  if (!dst.has_normals) throw Error(ErrorCode::InvalidArgument, "point-to-plane ICP needs target normals");

  IcpResult result;
  result.constraint.anchors = matches;
  std::vector<Vec3> src_c, dst_c;
  for (const auto& m : matches) {
    src_c.push_back(m.source);
    dst_c.push_back(m.target);
  }
  const bool collinear =
      matches.size() >= 3 && (are_collinear(src_c, params.collinearity_tol) ||
                              are_collinear(dst_c, params.collinearity_tol));
  // Cells finer than the search radius keep ring-ordered lookups short.
  const GridIndex index = GridIndex::from_cloud(dst, params.correspondence_radius / 2.0);

  if (matches.size() >= 3 && !collinear) {
    result.constraint.kind = ConstraintKind::MultiCorner0DoF;
    result.motion = kabsch_align(src_c, dst_c, params.collinearity_tol);
    result.final_cost = cost_of(correspondences(src, dst, index, result.motion, params.correspondence_radius));
    result.cost_trace.push_back(result.final_cost);
    result.motion_trace.push_back(result.motion);
    result.converged = true;
    return result;
  }

  // Current iterate; each family's `step` closes over it.
  RigidMotion current;
  MotionFamily family;
  if (matches.empty()) {
    result.constraint.kind = ConstraintKind::Full6DoF;
    family.dof = 6;
    family.jacobian = [](const Correspondence& c, Eigen::VectorXd& J) {
      J.head<3>() = c.moved.cross(c.normal);
      J.tail<3>() = c.normal;
    };
    family.step = [&current](const Eigen::VectorXd& s) {
      const Mat3 dR = exp_so3(s.head<3>());
      return RigidMotion{dR * current.rotation, dR * current.translation + s.tail<3>()};
    };
  } else if (matches.size() == 1) {
    result.constraint.kind = ConstraintKind::OneCorner3DoF;
    const Vec3 cs = src_c[0], cd = dst_c[0];
    current = RigidMotion{Mat3::Identity(), cd - cs};
    family.dof = 3;
    family.jacobian = [cd](const Correspondence& c, Eigen::VectorXd& J) {
      J = (c.moved - cd).cross(c.normal);
    };
    family.step = [&current, cs, cd](const Eigen::VectorXd& s) {
      const Mat3 R = exp_so3(s.head<3>()) * current.rotation;
      return RigidMotion{R, cd - R * cs};
    };
  } else {
    result.constraint.kind = ConstraintKind::TwoCorner1DoF;
    // Corner axis through the anchor centroids; the sign follows the
    // first-to-farthest anchor so both sides orient the same way.
    const LineFit ls = fit_line(src_c), ld = fit_line(dst_c);
    std::size_t far = 1;
    for (std::size_t k = 1; k < src_c.size(); ++k)
      if ((src_c[k] - src_c[0]).norm() > (src_c[far] - src_c[0]).norm()) far = k;
    Vec3 a_src = ls.axis, a_dst = ld.axis;
    if (a_src.dot(src_c[far] - src_c[0]) < 0.0) a_src = -a_src;
    if (a_dst.dot(dst_c[far] - dst_c[0]) < 0.0) a_dst = -a_dst;
    const Mat3 R0 = shortest_arc(a_src, a_dst);
    const Vec3 ms = ls.centroid, md = ld.centroid;
    auto motion_at = [R0, ms, md, a_dst](double alpha) {
      const Mat3 R = exp_so3(alpha * a_dst) * R0;
      return RigidMotion{R, md - R * ms};
    };
    current = motion_at(0.0);
    family.dof = 1;
    family.jacobian = [a_dst, md](const Correspondence& c, Eigen::VectorXd& J) {
      J[0] = a_dst.cross(c.moved - md).dot(c.normal);
    };
    // α is accumulated so the corner residuals never drift.
    auto alpha = std::make_shared<double>(0.0);
    family.step = [alpha, motion_at](const Eigen::VectorXd& s) { return motion_at(*alpha + s[0]); };
    result.motion_trace.push_back(current);
    // Commit hook for α: compare against the accepted motion below.
    const int n = params.max_iterations;
    double mu = 1e-6;
    auto cs = correspondences(src, dst, index, current, params.correspondence_radius);
    double cost = cost_of(cs);
    result.cost_trace.push_back(cost);
    for (int it = 1; it <= n; ++it) {
      result.iterations = it;
      if (cs.empty()) break;
      double H = 0.0, g = 0.0;
      Eigen::VectorXd J(1);
      for (const auto& c : cs) {
        family.jacobian(c, J);
        const double r = (c.moved - c.target).dot(c.normal);
        H += J[0] * J[0];
        g += J[0] * r;
      }
      bool accepted = false;
      double step = 0.0, rel = 0.0;
      for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
        step = -g / (H * (1.0 + mu) + 1e-12);
        const RigidMotion cand = motion_at(*alpha + step);
        auto cs_new = correspondences(src, dst, index, cand, params.correspondence_radius);
        const double cost_new = cost_of(cs_new);
        if (cost_new <= cost) {
          rel = cost > 0.0 ? (cost - cost_new) / cost : 0.0;
          *alpha += step;
          current = cand;
          cs = std::move(cs_new);
          cost = cost_new;
          result.cost_trace.push_back(cost);
          result.motion_trace.push_back(current);
          mu = std::max(mu * 0.3, 1e-9);
          accepted = true;
        } else {
          mu *= 10.0;
        }
      }
      if (!accepted || std::abs(step) < params.convergence_tol || rel < params.convergence_tol) {
        result.converged = true;
        break;
      }
    }
    result.motion = current;
    result.final_cost = cost;
    return result;
  }

  auto cs = correspondences(src, dst, index, current, params.correspondence_radius);
  if (cs.empty() && result.constraint.kind == ConstraintKind::Full6DoF)
    throw Error(ErrorCode::NoOverlap, "no correspondences within the search radius");
  double cost = cost_of(cs);
  result.cost_trace.push_back(cost);
  result.motion_trace.push_back(current);
  double mu = 1e-6;
  const int dof = family.dof;
  for (int it = 1; it <= params.max_iterations; ++it) {
    result.iterations = it;
    if (cs.empty()) break;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dof, dof);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dof);
    Eigen::VectorXd J(dof);
    for (const auto& c : cs) {
      family.jacobian(c, J);
      const double r = (c.moved - c.target).dot(c.normal);
      H.noalias() += J * J.transpose();
      g.noalias() += J * r;
    }
    bool accepted = false;
    double step_norm = 0.0, rel = 0.0;
    for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
      Eigen::MatrixXd A = H;
      A.diagonal() += mu * H.diagonal() + Eigen::VectorXd::Constant(dof, 1e-12);
      const Eigen::VectorXd s = -A.ldlt().solve(g);
      step_norm = s.norm();
      const RigidMotion cand = family.step(s);
      auto cs_new = correspondences(src, dst, index, cand, params.correspondence_radius);
      const double cost_new = cost_of(cs_new);
      if (cost_new <= cost && !cs_new.empty()) {
        rel = cost > 0.0 ? (cost - cost_new) / cost : 0.0;
        current = cand;
        cs = std::move(cs_new);
        cost = cost_new;
        result.cost_trace.push_back(cost);
        result.motion_trace.push_back(current);
        mu = std::max(mu * 0.3, 1e-9);
        accepted = true;
      } else {
        mu *= 10.0;
      }
    }
    if (!accepted || step_norm < params.convergence_tol || rel < params.convergence_tol) {
      result.converged = true;
      break;
    }
  }
  result.motion = current;
  result.final_cost = cost;
  return result;
}

PoseError compute_rpe(const RigidMotion& estimate, const RigidMotion& ground_truth) {
  const RigidMotion delta = ground_truth.inverse() * estimate;
  return {rotation_angle(delta.rotation),
          (ground_truth.rotation.transpose() * (estimate.translation - ground_truth.translation)).norm()};
}

}  // namespace orthoplanes
