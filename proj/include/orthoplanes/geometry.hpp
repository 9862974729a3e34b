#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace orthoplanes {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// A 3D sample with a unit normal. Normal signs carry no meaning: nothing in
/// the library assumes they are consistent across a cloud.
struct OrientedPoint {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

/// Unorganized point set. `valid[i] == 0` marks a point whose normal must not
/// be used as a voting reference (e.g. a crease or an isolated outlier).
/// `labels` is an optional per-point segmentation carried through I/O.
struct PointCloud {
  std::vector<OrientedPoint> points;
  bool has_normals = false;
  std::vector<std::uint8_t> valid;
  std::vector<std::int32_t> labels;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool is_valid(std::size_t i) const noexcept { return valid.empty() || valid[i] != 0; }
};

/// Plane {x : normal·x + offset = 0}. (n, d) and (-n, -d) are the same plane.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  Plane flipped() const { return {-normal, -offset}; }
  /// Sign convention used for storage: first nonzero normal component > 0.
  Plane canonical() const;
};

/// Simplified point pair feature: (n1·n2, n1·d, n2·d, |d|) with d = x1 - x2.
struct PairFeature {
  double f1 = 0.0;
  double f2 = 0.0;
  double f3 = 0.0;
  double f4 = 0.0;
};

enum class PairClass { Orthogonal, Coplanar, Neither };

struct Line3D {
  Vec3 direction = Vec3::UnitX();
  Vec3 anchor = Vec3::Zero();  // closest line point to the origin

  double distance_to(const Vec3& x) const;
};

/// Corner at the meeting point of three mutually orthogonal planes. Row k of
/// `frame` is the normal of plane k, `offsets[k]` its offset.
struct Corner {
  Mat3 frame = Mat3::Identity();
  Vec3 offsets = Vec3::Zero();
  Vec3 position = Vec3::Zero();

  static Corner from_frame(const Mat3& frame, const Vec3& offsets);
  Plane plane(int k) const { return {frame.row(k).transpose(), offsets[k]}; }
};

struct DetectionParams {
  double delta_n = deg_to_rad(20.0);  // normal tolerance, radians
  double tau_d = 1.0;                 // pair distance limit, meters
  std::size_t n_refs = 2000;
  std::size_t k_pairs = 250;
  double theta_bin = deg_to_rad(10.0);
  double rho_bin = 0.08;
  int c_max = 4;  // a bin must hold strictly more votes

  void validate() const;
};

PairFeature compute_ppf(const OrientedPoint& p1, const OrientedPoint& p2);
/// Orthogonal: |f1| < sin δn and f4 <= τd (a pair exactly τd apart still
/// votes). Coplanar: |f1| > cos δn and |f2|, |f3| < f4·sin δn.
PairClass classify_pair(const PairFeature& f, const DetectionParams& params);

/// classify_pair with the trigonometric thresholds computed once.
class PairClassifier {
 public:
  explicit PairClassifier(const DetectionParams& params);
  PairClass operator()(const PairFeature& f) const;

 private:
  double sin_dn_, cos_dn_, tau_d_;
};

double point_plane_distance(const Vec3& x, const Plane& plane);

inline constexpr double kParallelEpsilon = 1e-6;

/// Throws Error{NearParallel} when |n1·n2| >= 1 - eps_parallel.
Line3D intersect_two_planes(const Plane& p1, const Plane& p2,
                            double eps_parallel = kParallelEpsilon);

/// Point where the three planes (rows of `frame`, `offsets`) meet: -frameᵀ·d.
Vec3 intersect_three_planes(const Mat3& frame, const Vec3& offsets);

/// Angle in [0, π/2] between two directions, ignoring their sign.
double unsigned_angle(const Vec3& a, const Vec3& b);

/// Unit vector with the sign convention of Plane::canonical().
Vec3 canonical_direction(const Vec3& v);

/// Two unit vectors completing `n` to a right-handed orthonormal basis.
std::pair<Vec3, Vec3> tangent_basis(const Vec3& n);

Mat3 skew(const Vec3& v);
/// Rodrigues exponential of an axis-angle vector.
Mat3 exp_so3(const Vec3& omega);
/// Rotation angle of R in [0, π].
double rotation_angle(const Mat3& R);

}  // namespace orthoplanes

namespace orthoplanes {

/// Applies x ↦ R·x + t to positions and R to normals.
PointCloud transformed(const PointCloud& cloud, const Mat3& R, const Vec3& t);
Plane transformed(const Plane& plane, const Mat3& R, const Vec3& t);

}  // namespace orthoplanes
