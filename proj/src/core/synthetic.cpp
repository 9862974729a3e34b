#include "orthoplanes/synthetic.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "orthoplanes/detection.hpp"
#include "orthoplanes/error.hpp"
#include "orthoplanes/refinement.hpp"
#include "orthoplanes/sampling.hpp"

namespace orthoplanes {

Layout parse_layout(const std::string& name) {
  if (name == "corner-room") return Layout::CornerRoom;
  if (name == "two-walls") return Layout::TwoWalls;
  if (name == "box") return Layout::Box;
  if (name == "single-plane") return Layout::SinglePlane;
  if (name == "noise-ball") return Layout::NoiseBall;
  throw Error(ErrorCode::InvalidArgument, "unknown layout '" + name + "'");
}

const char* layout_name(Layout layout) {
  switch (layout) {
    case Layout::CornerRoom: return "corner-room";
    case Layout::TwoWalls: return "two-walls";
    case Layout::Box: return "box";
    case Layout::SinglePlane: return "single-plane";
    case Layout::NoiseBall: return "noise-ball";
  }
  return "unknown";
}

void SyntheticSpec::validate() const {
  if (!(extent > 0.0 && points_per_m2 > 0.0 && noise_sigma >= 0.0 && outlier_fraction >= 0.0 &&
        outlier_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "invalid synthetic scene specification");
}

namespace {

// Rectangle origin + a·u + b·v, (a, b) ∈ [0, size_u] × [0, size_v].
struct Face {
  Plane plane;
  Vec3 origin;
  Vec3 u, v;
  double size_u, size_v;
};

Face face(const Vec3& normal, const Vec3& origin, const Vec3& u, const Vec3& v, double su, double sv) {
  return {Plane{normal, -normal.dot(origin)}, origin, u, v, su, sv};
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

}  // namespace

SyntheticScene generate_synthetic_scene(const SyntheticSpec& spec) {
  spec.validate();
  const double L = spec.extent;
  const Vec3 ex = Vec3::UnitX(), ey = Vec3::UnitY(), ez = Vec3::UnitZ(), o = Vec3::Zero();
  std::vector<Face> faces;
  std::set<Edge> edges;
  std::vector<std::array<std::size_t, 3>> corners;
  switch (spec.layout) {
    case Layout::CornerRoom:
      faces = {face(ez, o, ex, ey, L, L), face(ex, o, ey, ez, L, L), face(ey, o, ex, ez, L, L)};
      edges = {{0, 1}, {0, 2}, {1, 2}};
      corners = {{1, 2, 0}};
      break;
    case Layout::TwoWalls:
      faces = {face(ex, o, ey, ez, L, L), face(ey, o, ex, ez, L, L)};
      edges = {{0, 1}};
      break;
    case Layout::Box:
      // Top plus four sides; the bottom face is hidden.
      faces = {face(ez, Vec3(0, 0, L), ex, ey, L, L), face(ex, o, ey, ez, L, L),
               face(ex, Vec3(L, 0, 0), ey, ez, L, L), face(ey, o, ex, ez, L, L),
               face(ey, Vec3(0, L, 0), ex, ez, L, L)};
      edges = {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 3}, {1, 4}, {2, 3}, {2, 4}};
      corners = {{1, 3, 0}, {1, 4, 0}, {2, 3, 0}, {2, 4, 0}};
      break;
    case Layout::SinglePlane:
      faces = {face(ez, o, ex, ey, L, L)};
      break;
    case Layout::NoiseBall:
      break;
  }

  SyntheticScene scene;
  GroundTruth& gt = scene.truth;
  for (const Face& f : faces) gt.planes.push_back(f.plane.canonical());
  gt.edges = edges;
  for (const auto& [a, b] : edges) gt.lines.push_back(intersect_two_planes(gt.planes[a], gt.planes[b]));
  for (const auto& c : corners) {
    gt.corners.push_back(corner_from_planes(gt.planes[c[0]], gt.planes[c[1]], gt.planes[c[2]]).corner);
    gt.corner_planes.push_back(c);
  }

  std::mt19937_64 rng(mix_seed(spec.seed, 0x5c3e));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  PointCloud& cloud = scene.cloud;
  cloud.has_normals = true;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;

  if (spec.layout == Layout::NoiseBall) {
    const auto n = static_cast<std::size_t>(std::llround(spec.points_per_m2 * L * L));
    for (std::size_t i = 0; i < n; ++i) {
      OrientedPoint p;
      p.position = Vec3(noise(rng), noise(rng), noise(rng)) * (0.25 * L);
      p.normal = random_unit(rng);
      cloud.points.push_back(p);
      cloud.labels.push_back(-1);
    }
    return scene;
  }

  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    const Face& f = faces[fi];
    std::poisson_distribution<long long> count(spec.points_per_m2 * f.size_u * f.size_v);
    const long long n = count(rng);
    for (long long i = 0; i < n; ++i) {
      OrientedPoint p;
      p.position = f.origin + unit(rng) * f.size_u * f.u + unit(rng) * f.size_v * f.v;
      if (spec.noise_sigma > 0.0) p.position += spec.noise_sigma * noise(rng) * f.plane.normal;
      p.normal = unit(rng) < 0.5 ? Vec3(-f.plane.normal) : f.plane.normal;
      lo = lo.cwiseMin(p.position);
      hi = hi.cwiseMax(p.position);
      cloud.points.push_back(p);
      cloud.labels.push_back(static_cast<std::int32_t>(fi));
    }
  }

  if (spec.outlier_fraction > 0.0) {
    const double n_surface = static_cast<double>(cloud.size());
    const auto n_out = static_cast<std::size_t>(
        std::llround(n_surface * spec.outlier_fraction / (1.0 - spec.outlier_fraction)));
    for (std::size_t i = 0; i < n_out; ++i) {
      OrientedPoint p;
      p.position = lo + Vec3(unit(rng), unit(rng), unit(rng)).cwiseProduct(hi - lo);
      p.normal = random_unit(rng);
      cloud.points.push_back(p);
      cloud.labels.push_back(-1);
    }
  }

  if (spec.noise_sigma > 0.0 && cloud.size() >= kDefaultNormalNeighbors) {
    PointCloud with_normals = estimate_normals(cloud);
    with_normals.labels = std::move(cloud.labels);
    cloud = std::move(with_normals);
  }
  return scene;
}

}  // namespace orthoplanes
