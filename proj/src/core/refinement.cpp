#include "orthoplanes/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "orthoplanes/error.hpp"
#include "orthoplanes/sampling.hpp"

namespace orthoplanes {

double RobustLoss::cost(double r) const {
  const double a = std::abs(r);
  if (kind == LossKind::None || a <= scale) return r * r;
  return 2.0 * scale * a - scale * scale;
}

double RobustLoss::weight(double r) const {
  const double a = std::abs(r);
  if (kind == LossKind::None || a <= scale) return 1.0;
  return scale / a;
}

void RefinementParams::validate() const {
  if (!(epsilon > 0.0 && lambda >= 0.0 && eps_n > 0.0 && max_iterations > 0 &&
        convergence_tol > 0.0 && hierarchy_levels >= 1))
    throw Error(ErrorCode::InvalidArgument, "refinement parameters must be positive");
  if (loss.kind == LossKind::Huber && !(loss.scale > 0.0))
    throw Error(ErrorCode::InvalidArgument, "Huber scale must be positive");
}

RotationProjection project_to_rotation_checked(const Mat3& m) {
  RotationProjection out;
  Mat3 input = m;
  for (int attempt = 0; attempt < 2; ++attempt) {
    Eigen::JacobiSVD<Mat3> svd(input, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues()[2] < 1e-9)
      throw Error(ErrorCode::Singular, "cannot project a singular matrix onto SO(3)");
    out.rotation = svd.matrixU() * svd.matrixV().transpose();
    if (out.rotation.determinant() > 0.0) return out;
    input.row(1).swap(input.row(2));
    out.swapped = !out.swapped;
  }
  // Unreachable for nonsingular input: swapping two rows flips the sign of
  // the determinant of the polar factor.
  throw Error(ErrorCode::Singular, "reflection persisted after row swap");
}

Mat3 project_to_rotation(const Mat3& m) { return project_to_rotation_checked(m).rotation; }

PointCloud select_corner_support(const PointCloud& cloud, const Corner& corner, double epsilon) {
  PointCloud out;
  out.has_normals = cloud.has_normals;
  const double e2 = epsilon * epsilon;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if ((cloud.points[i].position - corner.position).squaredNorm() < e2) {
      out.points.push_back(cloud.points[i]);
      if (!cloud.valid.empty()) out.valid.push_back(cloud.valid[i]);
    }
  }
  return out;
}

CornerInit corner_from_planes(const Plane& a, const Plane& b, const Plane& c) {
  const std::array<Plane, 3> planes{a, b, c};
  Mat3 stacked;
  for (int k = 0; k < 3; ++k) stacked.row(k) = planes[k].normal.transpose();
  const RotationProjection proj = project_to_rotation_checked(stacked);
  CornerInit init;
  if (proj.swapped) init.plane_order = {0, 2, 1};
  Vec3 offsets;
  for (int k = 0; k < 3; ++k) {
    const Plane& p = planes[init.plane_order[k]];
    const double s = proj.rotation.row(k).dot(p.normal.transpose()) < 0.0 ? -1.0 : 1.0;
    offsets[k] = s * p.offset;
  }
  init.corner = Corner::from_frame(proj.rotation, offsets);
  return init;
}

namespace {

int closest_plane(const Mat3& R, const Vec3& d, const Vec3& x, double* r_out) {
  const Vec3 r = R * x + d;
  int k = 0;
  for (int j = 1; j < 3; ++j)
    if (std::abs(r[j]) < std::abs(r[k])) k = j;
  if (r_out) *r_out = r[k];
  return k;
}

// Nearest of the three planes among those whose normal agrees with the
// point normal within eps_n. -1 when none does.
int gated_plane(const Mat3& R, const Vec3& d, const OrientedPoint& p, bool has_normals,
                double cos_eps, double* r_out) {
  const Vec3 r = R * p.position + d;
  int k = -1;
  for (int j = 0; j < 3; ++j) {
    if (has_normals && !(std::abs(R.row(j).dot(p.normal.transpose())) > cos_eps)) continue;
    if (k < 0 || std::abs(r[j]) < std::abs(r[k])) k = j;
  }
  if (r_out && k >= 0) *r_out = r[k];
  return k;
}

double corner_cost(const PointCloud& support, const Mat3& R, const Vec3& d,
                   const RefinementParams& params) {
  const double cos_eps = std::cos(params.eps_n);
  double sum = 0.0;
  for (const auto& p : support.points) {
    double r;
    if (gated_plane(R, d, p, support.has_normals, cos_eps, &r) >= 0) sum += params.loss.cost(r);
  }
  return sum;
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

Corner reestimate_corner_offsets(const PointCloud& support, const Corner& corner) {
  std::array<std::vector<double>, 3> samples;
  for (const auto& p : support.points) {
    const int k = closest_plane(corner.frame, corner.offsets, p.position, nullptr);
    samples[k].push_back(-corner.frame.row(k).dot(p.position.transpose()));
  }
  Vec3 offsets = corner.offsets;
  for (int k = 0; k < 3; ++k)
    if (!samples[k].empty()) offsets[k] = median(samples[k]);
  return Corner::from_frame(corner.frame, offsets);
}

namespace residuals {

double corner(const Mat3& R, const Vec3& d, const Vec3& x, int k, Eigen::Matrix<double, 1, 6>* J) {
  const Vec3 n = R.row(k).transpose();
  if (J) {
    J->head<3>() = x.cross(n).transpose();
    J->tail<3>().setZero();
    (*J)(3 + k) = 1.0;
  }
  return n.dot(x) + d[k];
}

double bundle(const Vec3& n, double d, const Vec3& x, Eigen::RowVector3d* J) {
  if (J) {
    const auto [b1, b2] = tangent_basis(n);
    *J << b1.dot(x), b2.dot(x), 1.0;
  }
  return n.dot(x) + d;
}

double orthogonality(const Vec3& n, const Vec3& m, Eigen::RowVector4d* J) {
  if (J) {
    const auto [b1, b2] = tangent_basis(n);
    const auto [c1, c2] = tangent_basis(m);
    *J << b1.dot(m), b2.dot(m), c1.dot(n), c2.dot(n);
  }
  return n.dot(m);
}

Mat3 retract_rotation(const Mat3& R, const Vec3& omega) { return R * exp_so3(omega); }

Vec3 retract_normal(const Vec3& n, double t1, double t2) {
  const auto [b1, b2] = tangent_basis(n);
  return (n + t1 * b1 + t2 * b2).normalized();
}

}  // namespace residuals

CornerFit refine_corner(const PointCloud& support, const Corner& init,
                        const RefinementParams& params) {
  params.validate();
  if (support.size() < 6)
    throw Error(ErrorCode::InsufficientSupport, "corner refinement needs at least 6 support points");

  // Per-plane inliers: assigned to the plane and, when normals are present,
  // with a normal agreeing with it. A plane without data leaves the energy
  // flat in its offset.
  std::array<std::size_t, 3> inliers{0, 0, 0};
  for (const auto& p : support.points) {
    const int k = closest_plane(init.frame, init.offsets, p.position, nullptr);
    if (!support.has_normals ||
        unsigned_angle(p.normal, init.frame.row(k).transpose()) < params.eps_n)
      ++inliers[k];
  }
  for (int k = 0; k < 3; ++k)
    if (inliers[k] < 3)
      throw Error(ErrorCode::InsufficientSupport,
                  "corner plane " + std::to_string(k) + " has fewer than 3 supporting points");

  Mat3 R = init.frame;
  Vec3 d = init.offsets;
  const double cos_eps = std::cos(params.eps_n);
  double cost = corner_cost(support, R, d, params);
  CornerFit fit;
  fit.initial_cost = cost;
  fit.cost_trace.push_back(cost);
  double mu = 1e-4;
  const double tiny_cost = 1e-24 * static_cast<double>(support.size());

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    if (cost <= tiny_cost) {
      fit.converged = true;
      break;
    }
    fit.iterations = iter + 1;
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    Eigen::Matrix<double, 1, 6> J;
    for (const auto& p : support.points) {
      const int k = gated_plane(R, d, p, support.has_normals, cos_eps, nullptr);
      if (k < 0) continue;
      const double r = residuals::corner(R, d, p.position, k, &J);
      const double w = params.loss.weight(r);
      H.noalias() += w * J.transpose() * J;
      g.noalias() += w * J.transpose() * r;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      Eigen::Matrix<double, 6, 6> A = H;
      A.diagonal() += mu * H.diagonal() + Eigen::Matrix<double, 6, 1>::Constant(1e-12);
      const Eigen::Matrix<double, 6, 1> step = -A.ldlt().solve(g);
      const Mat3 R_new = residuals::retract_rotation(R, step.head<3>());
      const Vec3 d_new = d + step.tail<3>();
      const double cost_new = corner_cost(support, R_new, d_new, params);
      if (cost_new <= cost) {
        const double rel = (cost - cost_new) / std::max(cost, std::numeric_limits<double>::min());
        R = R_new;
        d = d_new;
        cost = cost_new;
        fit.cost_trace.push_back(cost);
        mu = std::max(mu * 0.3, 1e-12);
        accepted = true;
        if (rel < params.convergence_tol || step.norm() < 1e-15) fit.converged = true;
      } else {
        mu *= 10.0;
      }
    }
    if (!accepted) fit.converged = true;  // no descent direction left
    if (fit.converged) break;
  }
  if (cost <= tiny_cost) fit.converged = true;
  fit.final_cost = cost;
  fit.corner = Corner::from_frame(R, d);
  return fit;
}

BundleAssignment assign_points_to_bundles(const PointCloud& cloud,
                                          const std::vector<ParallelBundle>& bundles,
                                          double eps_n) {
  BundleAssignment a;
  a.bundle.assign(cloud.size(), BundleAssignment::kNone);
  a.slot.assign(cloud.size(), BundleAssignment::kNone);
  a.residual.assign(cloud.size(), 0.0);
  const double cos_eps = std::cos(eps_n);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const OrientedPoint& p = cloud.points[i];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < bundles.size(); ++k) {
      const ParallelBundle& b = bundles[k];
      if (b.distances.empty()) continue;
      if (cloud.has_normals && !(std::abs(p.normal.dot(b.normal)) > cos_eps)) continue;
      // argmin_l |n·x + d_l| = distance closest to -n·x in the sorted list.
      const double target = -b.normal.dot(p.position);
      const auto it = std::lower_bound(b.distances.begin(), b.distances.end(), target);
      std::size_t l = static_cast<std::size_t>(it - b.distances.begin());
      if (l == b.distances.size() ||
          (l > 0 && std::abs(b.distances[l - 1] - target) <= std::abs(b.distances[l] - target)))
        --l;
      const double r = b.distances[l] - target;
      if (std::abs(r) < best) {
        best = std::abs(r);
        a.bundle[i] = k;
        a.slot[i] = l;
        a.residual[i] = r;
      }
    }
    if (a.bundle[i] != BundleAssignment::kNone) ++a.assigned;
  }
  return a;
}

namespace {

struct GraphState {
  std::vector<ParallelBundle> bundles;
  std::vector<std::size_t> dist_offset;  // parameter index of each bundle's first distance
  std::size_t n_params = 0;

  explicit GraphState(std::vector<ParallelBundle> b) : bundles(std::move(b)) { layout(); }

  void layout() {
    dist_offset.clear();
    std::size_t next = 2 * bundles.size();
    for (const auto& b : bundles) {
      dist_offset.push_back(next);
      next += b.distances.size();
    }
    n_params = next;
  }
};

double frozen_energy(const PointCloud& cloud, const BundleAssignment& a,
                     const std::vector<ParallelBundle>& bundles, const std::set<Edge>& edges,
                     const RefinementParams& params) {
  double data = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!a.is_assigned(i)) continue;
    const ParallelBundle& b = bundles[a.bundle[i]];
    data += params.loss.cost(b.normal.dot(cloud.points[i].position) + b.distances[a.slot[i]]);
  }
  double reg = 0.0;
  for (const auto& [k, j] : edges) {
    const double c = bundles[k].normal.dot(bundles[j].normal);
    reg += c * c;
  }
  return data / static_cast<double>(std::max<std::size_t>(cloud.size(), 1)) + params.lambda * reg;
}

double max_edge_dot(const std::vector<ParallelBundle>& bundles, const std::set<Edge>& edges) {
  double m = 0.0;
  for (const auto& [k, j] : edges) m = std::max(m, std::abs(bundles[k].normal.dot(bundles[j].normal)));
  return m;
}

// One coarse-to-fine level: alternate assignment and a damped Gauss-Newton
// step until the relative decrease falls below tolerance.
void refine_level(const PointCloud& cloud, GraphState& state, const std::set<Edge>& edges,
                  const RefinementParams& params, GraphFit& fit) {
  const double inv_n = 1.0 / static_cast<double>(std::max<std::size_t>(cloud.size(), 1));
  const std::size_t nb = state.bundles.size();
  double mu = 1e-4;
  fit.converged = false;
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    const BundleAssignment a = assign_points_to_bundles(cloud, state.bundles, params.eps_n);
    if (a.assigned == 0)
      throw Error(ErrorCode::EmptyAssignment, "no point matches any plane bundle");
    const double cost = frozen_energy(cloud, a, state.bundles, edges, params);
    fit.cost_trace.push_back(cost);
    ++fit.iterations;
    if (cost <= 1e-30) {
      fit.converged = true;
      return;
    }

    state.layout();
    const std::size_t np = state.n_params;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np));
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(np));
    Eigen::RowVector3d Jb;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (!a.is_assigned(i)) continue;
      const std::size_t k = a.bundle[i];
      const ParallelBundle& b = state.bundles[k];
      const double r = residuals::bundle(b.normal, b.distances[a.slot[i]], cloud.points[i].position, &Jb);
      const double w = params.loss.weight(r) * inv_n;
      const Eigen::Index idx[3] = {static_cast<Eigen::Index>(2 * k), static_cast<Eigen::Index>(2 * k + 1),
                                   static_cast<Eigen::Index>(state.dist_offset[k] + a.slot[i])};
      for (int u = 0; u < 3; ++u) {
        g[idx[u]] += w * Jb[u] * r;
        for (int v = 0; v < 3; ++v) H(idx[u], idx[v]) += w * Jb[u] * Jb[v];
      }
    }
    Eigen::RowVector4d Je;
    for (const auto& [k, j] : edges) {
      const double r = residuals::orthogonality(state.bundles[k].normal, state.bundles[j].normal, &Je);
      const Eigen::Index idx[4] = {static_cast<Eigen::Index>(2 * k), static_cast<Eigen::Index>(2 * k + 1),
                                   static_cast<Eigen::Index>(2 * j), static_cast<Eigen::Index>(2 * j + 1)};
      for (int u = 0; u < 4; ++u) {
        g[idx[u]] += params.lambda * Je[u] * r;
        for (int v = 0; v < 4; ++v) H(idx[u], idx[v]) += params.lambda * Je[u] * Je[v];
      }
    }

    bool accepted = false;
    double rel = 0.0;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      Eigen::MatrixXd A = H;
      A.diagonal() += mu * H.diagonal() + Eigen::VectorXd::Constant(static_cast<Eigen::Index>(np), 1e-12);
      const Eigen::VectorXd step = -A.ldlt().solve(g);
      std::vector<ParallelBundle> trial = state.bundles;
      for (std::size_t k = 0; k < nb; ++k) {
        trial[k].normal = residuals::retract_normal(state.bundles[k].normal, step[static_cast<Eigen::Index>(2 * k)],
                                                    step[static_cast<Eigen::Index>(2 * k + 1)]);
        for (std::size_t l = 0; l < trial[k].distances.size(); ++l)
          trial[k].distances[l] += step[static_cast<Eigen::Index>(state.dist_offset[k] + l)];
      }
      const double cost_new = frozen_energy(cloud, a, trial, edges, params);
      if (cost_new <= cost) {
        rel = (cost - cost_new) / cost;
        state.bundles = std::move(trial);
        sort_bundle_distances(state.bundles);
        mu = std::max(mu * 0.3, 1e-12);
        accepted = true;
      } else {
        mu *= 10.0;
      }
    }
    if (!accepted || rel < params.convergence_tol) {
      fit.converged = true;
      return;
    }
  }
}

}  // namespace

double graph_energy(const PointCloud& cloud, const std::vector<ParallelBundle>& bundles,
                    const RefinementParams& params) {
  const BundleAssignment a = assign_points_to_bundles(cloud, bundles, params.eps_n);
  return frozen_energy(cloud, a, bundles, bundle_edges(bundles), params);
}

GraphFit refine_graph_levels(const std::vector<PointCloud>& levels,
                             const std::vector<ParallelBundle>& bundles,
                             const RefinementParams& params) {
  params.validate();
  if (levels.empty()) throw Error(ErrorCode::InvalidArgument, "refinement needs at least one level");
  const std::set<Edge> edges = bundle_edges(bundles);
  GraphState state(bundles);
  for (auto& b : state.bundles) b.normal.normalize();
  sort_bundle_distances(state.bundles);
  GraphFit fit;
  for (const PointCloud& level : levels) refine_level(level, state, edges, params, fit);
  fit.cost_trace.push_back(graph_energy(levels.back(), state.bundles, params));
  fit.bundles = std::move(state.bundles);
  fit.max_edge_dot = max_edge_dot(fit.bundles, edges);
  fit.orthogonality_ok = fit.max_edge_dot < GraphFit::kEdgeTolerance;
  return fit;
}

GraphFit refine_graph(const PointCloud& cloud, const std::vector<ParallelBundle>& bundles,
                      const RefinementParams& params) {
  params.validate();
  if (cloud.empty()) throw Error(ErrorCode::EmptyAssignment, "cannot refine against an empty cloud");
  std::vector<PointCloud> levels;
  if (params.hierarchy_levels > 1) {
    SamplingParams sp;
    sp.d_min = adaptive_d_min(cloud);
    sp.hierarchy_levels = params.hierarchy_levels;
    levels = build_hierarchy(cloud, sp);
    levels.back() = cloud;
  } else {
    levels.push_back(cloud);
  }
  return refine_graph_levels(levels, bundles, params);
}

}  // namespace orthoplanes
