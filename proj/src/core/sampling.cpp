#include "orthoplanes/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "orthoplanes/error.hpp"
#include "orthoplanes/spatial_index.hpp"
#include "orthoplanes/union_find.hpp"

namespace orthoplanes {

namespace {

double bbox_diagonal(const PointCloud& cloud) {
  if (cloud.empty()) return 0.0;
  Vec3 lo = cloud.points.front().position, hi = lo;
  for (const auto& p : cloud.points) {
    lo = lo.cwiseMin(p.position);
    hi = hi.cwiseMax(p.position);
  }
  return (hi - lo).norm();
}

// Cell hash for incremental insertion (GridIndex is build-once).
class CellHash {
 public:
  explicit CellHash(double cell) : cell_(cell) {}

  void insert(const Vec3& p, std::size_t id) { cells_[key(cell_of(p))].push_back(id); }

  template <typename Fn>
  void for_each_near(const Vec3& p, Fn&& fn) const {
    const Eigen::Vector3i c = cell_of(p);
    for (int x = -1; x <= 1; ++x)
      for (int y = -1; y <= 1; ++y)
        for (int z = -1; z <= 1; ++z) {
          const auto it = cells_.find(key(c + Eigen::Vector3i(x, y, z)));
          if (it == cells_.end()) continue;
          for (std::size_t id : it->second) fn(id);
        }
  }

 private:
  Eigen::Vector3i cell_of(const Vec3& p) const {
    return {static_cast<int>(std::floor(p.x() / cell_)), static_cast<int>(std::floor(p.y() / cell_)),
            static_cast<int>(std::floor(p.z() / cell_))};
  }
  static std::int64_t key(const Eigen::Vector3i& c) {
    constexpr std::int64_t kBias = 1 << 20;
    constexpr std::int64_t kMask = (std::int64_t{1} << 21) - 1;
    return ((c.x() + kBias) & kMask) << 42 | ((c.y() + kBias) & kMask) << 21 | ((c.z() + kBias) & kMask);
  }

  double cell_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> cells_;
};

struct Accum {
  Vec3 position_sum = Vec3::Zero();
  Vec3 normal_ref = Vec3::Zero();
  Vec3 normal_sum = Vec3::Zero();
  double count = 0.0;
  bool valid = false;

  void add(const Vec3& x, const Vec3& n, bool has_normal, bool is_valid) {
    position_sum += x;
    count += 1.0;
    valid = valid || is_valid;
    if (!has_normal) return;
    if (normal_ref.isZero()) normal_ref = n;
    normal_sum += n.dot(normal_ref) < 0.0 ? Vec3(-n) : n;
  }

  void absorb(const Accum& o) {
    position_sum += o.position_sum;
    count += o.count;
    valid = valid || o.valid;
    if (normal_ref.isZero()) normal_ref = o.normal_ref;
    normal_sum += o.normal_sum.dot(normal_ref) < 0.0 ? Vec3(-o.normal_sum) : o.normal_sum;
  }

  Vec3 position() const { return position_sum / count; }
};

}  // namespace

double adaptive_d_min(const PointCloud& cloud) {
  const double diag = bbox_diagonal(cloud);
  return diag > 0.0 ? diag / 200.0 : 1e-3;
}

PointCloud downsample(const PointCloud& cloud, double d_min) {
  if (!(d_min > 0.0)) throw Error(ErrorCode::InvalidArgument, "d_min must be positive");
  const double d2 = d_min * d_min;

  // Seeds pairwise at least d_min apart, in input order.
  std::vector<std::size_t> seeds;
  CellHash seed_hash(d_min);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& x = cloud.points[i].position;
    bool covered = false;
    seed_hash.for_each_near(x, [&](std::size_t s) {
      if (!covered && (cloud.points[seeds[s]].position - x).squaredNorm() < d2) covered = true;
    });
    if (!covered) {
      seed_hash.insert(x, seeds.size());
      seeds.push_back(i);
    }
  }

  // Every point joins its nearest seed, which is always within d_min.
  std::vector<Accum> acc(seeds.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& x = cloud.points[i].position;
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    seed_hash.for_each_near(x, [&](std::size_t s) {
      const double dd = (cloud.points[seeds[s]].position - x).squaredNorm();
      if (dd < best_d2 || (dd == best_d2 && s < best)) {
        best_d2 = dd;
        best = s;
      }
    });
    acc[best].add(x, cloud.points[i].normal, cloud.has_normals, cloud.is_valid(i));
  }

  // Averages of neighboring seeds can end up close together; merge until
  // every pair respects d_min/√3.
  const double guard = d_min / std::sqrt(3.0);
  for (bool merged = true; merged;) {
    merged = false;
    CellHash hash(guard);
    for (std::size_t s = 0; s < acc.size(); ++s) hash.insert(acc[s].position(), s);
    UnionFind uf(acc.size());
    for (std::size_t s = 0; s < acc.size(); ++s) {
      const Vec3 p = acc[s].position();
      hash.for_each_near(p, [&](std::size_t t) {
        if (t > s && (acc[t].position() - p).squaredNorm() < guard * guard) merged |= uf.unite(s, t);
      });
    }
    if (!merged) break;
    const std::vector<std::size_t> label = uf.labels();
    const std::size_t n = *std::max_element(label.begin(), label.end()) + 1;
    std::vector<Accum> next(n);
    std::vector<bool> seen(n, false);
    for (std::size_t s = 0; s < acc.size(); ++s) {
      if (!seen[label[s]]) {
        next[label[s]] = acc[s];
        seen[label[s]] = true;
      } else {
        next[label[s]].absorb(acc[s]);
      }
    }
    acc = std::move(next);
  }

  PointCloud out;
  out.has_normals = cloud.has_normals;
  out.points.reserve(acc.size());
  const bool track_valid = !cloud.valid.empty();
  for (const Accum& a : acc) {
    OrientedPoint p;
    p.position = a.position();
    if (cloud.has_normals) {
      const double nn = a.normal_sum.norm();
      p.normal = nn > 1e-12 ? Vec3(a.normal_sum / nn) : a.normal_ref;
    }
    out.points.push_back(p);
    if (track_valid) out.valid.push_back(a.valid ? 1 : 0);
  }
  return out;
}

std::vector<PointCloud> build_hierarchy(const PointCloud& cloud, const SamplingParams& params) {
  if (params.hierarchy_levels < 1) throw Error(ErrorCode::InvalidArgument, "hierarchy needs at least one level");
  const double base = params.d_min > 0.0 ? params.d_min : adaptive_d_min(cloud);
  std::vector<PointCloud> levels;
  for (int l = 0; l < params.hierarchy_levels; ++l)
    levels.push_back(downsample(cloud, base * std::ldexp(1.0, params.hierarchy_levels - 1 - l)));
  return levels;
}

namespace {

struct LocalShape {
  Vec3 normal;
  double variation;
};

std::vector<LocalShape> local_shapes(const PointCloud& cloud, std::size_t k) {
  if (k < 3 || cloud.size() < k)
    throw Error(ErrorCode::TooFewPoints, "normal estimation needs at least k >= 3 points");
  const double diag = bbox_diagonal(cloud);
  const double cell = std::max(diag * std::sqrt(static_cast<double>(k) / static_cast<double>(cloud.size())), 1e-9);
  const GridIndex index = GridIndex::from_cloud(cloud, cell);
  std::vector<LocalShape> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.k_nearest(cloud.points[i].position, k);
    Vec3 mean = Vec3::Zero();
    for (std::size_t j : nbrs) mean += index.point(j);
    mean /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (std::size_t j : nbrs) {
      const Vec3 c = index.point(j) - mean;
      cov.noalias() += c * c.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 ev = eig.eigenvalues().cwiseMax(0.0);
    const double total = ev.sum();
    out[i].normal = eig.eigenvectors().col(0);
    out[i].variation = total > 0.0 ? ev[0] / total : 0.0;
  }
  return out;
}

}  // namespace

PointCloud estimate_normals(const PointCloud& cloud, std::size_t k) {
  const auto shapes = local_shapes(cloud, k);
  PointCloud out = cloud;
  out.has_normals = true;
  for (std::size_t i = 0; i < out.size(); ++i) out.points[i].normal = shapes[i].normal;
  return out;
}

std::vector<double> surface_variation(const PointCloud& cloud, std::size_t k) {
  const auto shapes = local_shapes(cloud, k);
  std::vector<double> out;
  out.reserve(shapes.size());
  for (const auto& s : shapes) out.push_back(s.variation);
  return out;
}

void flag_nonplanar(PointCloud& cloud, std::size_t k, double max_variation) {
  const auto var = surface_variation(cloud, k);
  if (cloud.valid.empty()) cloud.valid.assign(cloud.size(), 1);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (var[i] > max_variation) cloud.valid[i] = 0;
}

}  // namespace orthoplanes
