#pragma once

#include <array>
#include <vector>

#include "orthoplanes/geometry.hpp"
#include "orthoplanes/relation_graph.hpp"

namespace orthoplanes {

enum class LossKind { None, Huber };

/// M-estimator on point-to-plane residuals. Huber is scaled so that it
/// equals r² inside the scale and grows linearly outside.
struct RobustLoss {
  LossKind kind = LossKind::Huber;
  double scale = 0.02;

  double cost(double r) const;
  /// IRLS weight: cost(r) ≈ weight(r)·r² locally.
  double weight(double r) const;
};

struct RefinementParams {
  double epsilon = 0.15;             // corner support radius, m
  double lambda = 1e4;               // orthogonality weight
  double eps_n = deg_to_rad(30.0);   // normal gate for point assignment
  RobustLoss loss{};
  int max_iterations = 50;
  double convergence_tol = 1e-8;     // relative cost decrease
  int hierarchy_levels = 3;

  void validate() const;
};

/// Nearest rotation in Frobenius norm. If the polar factor is a reflection,
/// rows 2 and 3 of the input are swapped and the projection repeated.
/// Throws Singular.
Mat3 project_to_rotation(const Mat3& m);

struct RotationProjection {
  Mat3 rotation = Mat3::Identity();
  bool swapped = false;
};
RotationProjection project_to_rotation_checked(const Mat3& m);

/// Points strictly inside the ε-ball around the corner.
PointCloud select_corner_support(const PointCloud& cloud, const Corner& corner, double epsilon);

/// Corner whose frame is the projected stack of the three plane normals.
/// Row k stays paired with the plane it came from (after any swap),
/// `plane_order[k]` records which input plane that is.
struct CornerInit {
  Corner corner;
  std::array<int, 3> plane_order{0, 1, 2};
};
CornerInit corner_from_planes(const Plane& a, const Plane& b, const Plane& c);

/// Re-estimates offsets as the per-plane median of -n_k·x over the support
/// points assigned to each plane. Leaves offsets unchanged for planes that
/// receive no points.
Corner reestimate_corner_offsets(const PointCloud& support, const Corner& corner);

struct CornerFit {
  Corner corner;
  bool converged = false;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<double> cost_trace;  // accepted costs, starting with the initial one
};

/// Minimizes Σ_i ρ(min_k (R x_i + d)_k) over R ∈ SO(3), d ∈ R³ with a
/// multiplicative tangent update of R. With normals, plane k only competes
/// for a point whose normal is within eps_n of row k; points matching no
/// plane are ignored. ρ is params.loss. Throws InsufficientSupport.
CornerFit refine_corner(const PointCloud& support, const Corner& init,
                        const RefinementParams& params);

/// Per-point (bundle, distance slot) or unassigned.
struct BundleAssignment {
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> bundle;
  std::vector<std::size_t> slot;
  std::vector<double> residual;
  std::size_t assigned = 0;

  bool is_assigned(std::size_t i) const { return bundle[i] != kNone; }
};

/// Bundles with a normal within eps_n of the point normal (sign-insensitive)
/// compete; the inner argmin over a bundle's sorted distances is a binary
/// search. Points without a normal consider every bundle.
BundleAssignment assign_points_to_bundles(const PointCloud& cloud,
                                          const std::vector<ParallelBundle>& bundles,
                                          double eps_n);

struct GraphFit {
  std::vector<ParallelBundle> bundles;
  bool converged = false;
  int iterations = 0;
  std::vector<double> cost_trace;  // cost at the start of every outer iteration, plus the final
  double max_edge_dot = 0.0;
  bool orthogonality_ok = false;   // every edge |n_k·n_k'| < kEdgeTolerance
  static constexpr double kEdgeTolerance = 1e-4;
};

/// Jointly refines bundle normals (on S²) and distances under the
/// regularized, robustified energy. Runs coarse-to-fine over `levels`
/// (coarsest first), warm-starting each level. Throws EmptyAssignment.
GraphFit refine_graph_levels(const std::vector<PointCloud>& levels,
                             const std::vector<ParallelBundle>& bundles,
                             const RefinementParams& params);

/// Builds a hierarchy of `params.hierarchy_levels` samplings whose finest
/// level is `cloud` itself, then calls refine_graph_levels.
GraphFit refine_graph(const PointCloud& cloud, const std::vector<ParallelBundle>& bundles,
                      const RefinementParams& params);

/// Energy of refine_graph for a fixed cloud (points reassigned by
/// assign_points_to_bundles).
double graph_energy(const PointCloud& cloud, const std::vector<ParallelBundle>& bundles,
                    const RefinementParams& params);

/// Residuals with analytic Jacobians in the local coordinates the solvers
/// use (evaluated at the local origin).
namespace residuals {

/// (R x + d)_k under R ← R·exp(ω^); Jacobian over (ω, d).
double corner(const Mat3& R, const Vec3& d, const Vec3& x, int k, Eigen::Matrix<double, 1, 6>* J);

/// n·x + d under n ← normalize(n + t₁b₁ + t₂b₂); Jacobian over (t₁, t₂, d).
double bundle(const Vec3& n, double d, const Vec3& x, Eigen::RowVector3d* J);

/// n·m with both normals tangent-parameterized; Jacobian over (t_n, t_m).
double orthogonality(const Vec3& n, const Vec3& m, Eigen::RowVector4d* J);

/// Retractions matching the local coordinates above.
Mat3 retract_rotation(const Mat3& R, const Vec3& omega);
Vec3 retract_normal(const Vec3& n, double t1, double t2);

}  // namespace residuals

}  // namespace orthoplanes
