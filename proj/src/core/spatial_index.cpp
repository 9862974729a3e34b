#include "orthoplanes/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "orthoplanes/error.hpp"

namespace orthoplanes {

GridIndex::GridIndex(std::vector<Vec3> points, double cell_size)
    : points_(std::move(points)), cell_(cell_size) {
  if (!(cell_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid cell size must be positive");
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorCode::InvalidArgument, "too many points for the grid index");
  std::vector<std::pair<Key, std::size_t>> keyed;
  keyed.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const Eigen::Vector3i c = cell_of(points_[i]);
    if (i == 0) {
      min_cell_ = max_cell_ = c;
    } else {
      min_cell_ = min_cell_.cwiseMin(c);
      max_cell_ = max_cell_.cwiseMax(c);
    }
    keyed.emplace_back(key_of(c), i);
  }
  std::sort(keyed.begin(), keyed.end());
  order_.reserve(keyed.size());
  for (std::size_t i = 0; i < keyed.size(); ++i) order_.push_back(keyed[i].second);
  if (points_.empty()) return;

  const Eigen::Vector3i extent = max_cell_ - min_cell_ + Eigen::Vector3i::Ones();
  const double total = static_cast<double>(extent.x()) * extent.y() * extent.z();
  const bool dense = total <= std::max(64.0 * static_cast<double>(points_.size()), double(1 << 21));
  if (dense) {
    dims_ = extent;
    dense_.assign(static_cast<std::size_t>(total), Span{0, 0});
  }
  for (std::size_t begin = 0; begin < keyed.size();) {
    std::size_t end = begin + 1;
    while (end < keyed.size() && keyed[end].first == keyed[begin].first) ++end;
    const Span span{static_cast<std::uint32_t>(begin), static_cast<std::uint32_t>(end)};
    if (dense) {
      const Eigen::Vector3i r = cell_of(points_[keyed[begin].second]) - min_cell_;
      dense_[(static_cast<std::size_t>(r.x()) * dims_.y() + r.y()) * dims_.z() + r.z()] = span;
    } else {
      cells_.emplace(keyed[begin].first, span);
    }
    begin = end;
  }
}

GridIndex::Span GridIndex::span_of(const Eigen::Vector3i& c) const {
  if (!dense_.empty()) {
    const Eigen::Vector3i r = c - min_cell_;
    if ((r.array() < 0).any() || (r.array() >= dims_.array()).any()) return {0, 0};
    return dense_[(static_cast<std::size_t>(r.x()) * dims_.y() + r.y()) * dims_.z() + r.z()];
  }
  const auto it = cells_.find(key_of(c));
  return it == cells_.end() ? Span{0, 0} : it->second;
}

GridIndex GridIndex::from_cloud(const PointCloud& cloud, double cell_size) {
  std::vector<Vec3> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points) pts.push_back(p.position);
  return GridIndex(std::move(pts), cell_size);
}

Eigen::Vector3i GridIndex::cell_of(const Vec3& p) const {
  return {static_cast<int>(std::floor(p.x() / cell_)), static_cast<int>(std::floor(p.y() / cell_)),
          static_cast<int>(std::floor(p.z() / cell_))};
}

GridIndex::Key GridIndex::key_of(const Eigen::Vector3i& c) {
  constexpr std::int64_t kBias = 1 << 20;
  constexpr std::int64_t kMask = (std::int64_t{1} << 21) - 1;
  return ((c.x() + kBias) & kMask) << 42 | ((c.y() + kBias) & kMask) << 21 |
         ((c.z() + kBias) & kMask);
}

template <typename Fn>
void GridIndex::for_each_in_cell(const Eigen::Vector3i& c, Fn&& fn) const {
  const Span s = span_of(c);
  for (std::size_t k = s.first; k < s.second; ++k) fn(order_[k]);
}

std::vector<std::size_t> GridIndex::within(const Vec3& center, double radius) const {
  std::vector<std::size_t> out;
  if (points_.empty() || radius <= 0.0) return out;
  const Eigen::Vector3i lo = cell_of(center - Vec3::Constant(radius)).cwiseMax(min_cell_);
  const Eigen::Vector3i hi = cell_of(center + Vec3::Constant(radius)).cwiseMin(max_cell_);
  const double r2 = radius * radius;
  for (int x = lo.x(); x <= hi.x(); ++x)
    for (int y = lo.y(); y <= hi.y(); ++y)
      for (int z = lo.z(); z <= hi.z(); ++z)
        for_each_in_cell(Eigen::Vector3i(x, y, z), [&](std::size_t i) {
          if ((points_[i] - center).squaredNorm() < r2) out.push_back(i);
        });
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> GridIndex::sample_within(const Vec3& center, double radius, std::size_t k,
                                                  std::size_t exclude, std::uint64_t seed) const {
  std::vector<std::size_t> out;
  if (points_.empty() || radius <= 0.0 || k == 0) return out;
  const Eigen::Vector3i lo = cell_of(center - Vec3::Constant(radius)).cwiseMax(min_cell_);
  const Eigen::Vector3i hi = cell_of(center + Vec3::Constant(radius)).cwiseMin(max_cell_);
  const double r2 = radius * radius;
  // Point indices of the occupied cells touching the ball, in cell order.
  thread_local std::vector<std::uint32_t> candidates;
  candidates.clear();
  for (int x = lo.x(); x <= hi.x(); ++x)
    for (int y = lo.y(); y <= hi.y(); ++y)
      for (int z = lo.z(); z <= hi.z(); ++z) {
        const Vec3 cmin = Vec3(x, y, z) * cell_;
        const Vec3 nearest_pt = center.cwiseMax(cmin).cwiseMin(cmin + Vec3::Constant(cell_));
        if ((nearest_pt - center).squaredNorm() >= r2) continue;
        const Span s = span_of(Eigen::Vector3i(x, y, z));
        for (std::uint32_t k2 = s.first; k2 < s.second; ++k2)
          candidates.push_back(static_cast<std::uint32_t>(order_[k2]));
      }
  const std::size_t total = candidates.size();
  auto point_at = [&](std::size_t pos) { return static_cast<std::size_t>(candidates[pos]); };
  auto inside = [&](std::size_t i) { return i != exclude && (points_[i] - center).squaredNorm() < r2; };
  std::mt19937_64 rng(seed);
  if (total <= 2 * k) {
    for (std::size_t pos = 0; pos < total; ++pos)
      if (const std::size_t i = point_at(pos); inside(i)) out.push_back(i);
    std::sort(out.begin(), out.end());
    if (out.size() > k) {
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, out.size() - 1);
        std::swap(out[i], out[pick(rng)]);
      }
      out.resize(k);
      std::sort(out.begin(), out.end());
    }
    return out;
  }
  // Draw candidate positions with replacement and skip repeats: the first
  // k distinct draws inside the ball form a uniform random subset. Once most
  // candidates have been drawn, finish by enumeration.
  thread_local std::vector<std::uint32_t> stamp;
  thread_local std::uint32_t generation = 0;
  if (stamp.size() < points_.size()) stamp.assign(points_.size(), 0);
  if (++generation == 0) {
    std::fill(stamp.begin(), stamp.end(), 0);
    generation = 1;
  }
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  std::size_t distinct = 0;
  while (out.size() < k && 2 * distinct < total) {
    const std::size_t i = point_at(pick(rng));
    if (stamp[i] == generation) continue;
    stamp[i] = generation;
    ++distinct;
    if (inside(i)) out.push_back(i);
  }
  if (out.size() < k) {
    std::vector<std::size_t> rest;
    for (std::size_t pos = 0; pos < total; ++pos)
      if (const std::size_t i = point_at(pos); stamp[i] != generation && inside(i)) rest.push_back(i);
    std::sort(rest.begin(), rest.end());
    for (std::size_t t = 0; t < rest.size() && out.size() < k; ++t) {
      std::uniform_int_distribution<std::size_t> take(t, rest.size() - 1);
      std::swap(rest[t], rest[take(rng)]);
      out.push_back(rest[t]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::size_t> GridIndex::nearest(const Vec3& center, double radius) const {
  std::optional<std::size_t> best;
  if (points_.empty() || radius <= 0.0) return best;
  double best_d2 = radius * radius;
  const Eigen::Vector3i home = cell_of(center);
  const Eigen::Vector3i lo = cell_of(center - Vec3::Constant(radius)).cwiseMax(min_cell_);
  const Eigen::Vector3i hi = cell_of(center + Vec3::Constant(radius)).cwiseMin(max_cell_);
  const int last_ring = std::max((hi - home).maxCoeff(), (home - lo).maxCoeff());
  for (int ring = 0; ring <= last_ring; ++ring) {
    for (int x = std::max(home.x() - ring, lo.x()); x <= std::min(home.x() + ring, hi.x()); ++x)
      for (int y = std::max(home.y() - ring, lo.y()); y <= std::min(home.y() + ring, hi.y()); ++y)
        for (int z = std::max(home.z() - ring, lo.z()); z <= std::min(home.z() + ring, hi.z()); ++z) {
          const Eigen::Vector3i c(x, y, z);
          if ((c - home).cwiseAbs().maxCoeff() != ring) continue;
          const Vec3 cmin = c.cast<double>() * cell_;
          const Vec3 gap = center.cwiseMax(cmin).cwiseMin(cmin + Vec3::Constant(cell_)) - center;
          if (gap.squaredNorm() > best_d2) continue;
          for_each_in_cell(c, [&](std::size_t i) {
            const double d2 = (points_[i] - center).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && best && i < *best)) {
              best_d2 = d2;
              best = i;
            }
          });
        }
    // Cells beyond this ring are at least ring·cell away.
    const double reach = ring * cell_;
    if (best && best_d2 < reach * reach) break;
  }
  return best;
}

std::vector<std::size_t> GridIndex::k_nearest(const Vec3& center, std::size_t k) const {
  k = std::min(k, points_.size());
  if (k == 0) return {};
  thread_local std::vector<std::pair<double, std::size_t>> found;
  found.clear();
  const Eigen::Vector3i c0 = cell_of(center);
  const int max_ring = ((max_cell_ - c0).cwiseAbs().cwiseMax((min_cell_ - c0).cwiseAbs())).maxCoeff();
  for (int ring = 0; ring <= max_ring; ++ring) {
    for (int x = -ring; x <= ring; ++x)
      for (int y = -ring; y <= ring; ++y)
        for (int z = -ring; z <= ring; ++z) {
          if (std::max({std::abs(x), std::abs(y), std::abs(z)}) != ring) continue;
          for_each_in_cell(c0 + Eigen::Vector3i(x, y, z), [&](std::size_t i) {
            found.emplace_back((points_[i] - center).squaredNorm(), i);
          });
        }
    if (found.size() >= k) {
      std::nth_element(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(k - 1), found.end());
      const double kth = found[k - 1].first;
      // Anything outside the scanned rings is at least ring * cell away.
      const double reach = ring * cell_;
      if (kth <= reach * reach) break;
    }
  }
  const std::size_t keep = std::min(k, found.size());
  std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(keep), found.end());
  found.resize(keep);
  std::vector<std::size_t> out;
  out.reserve(found.size());
  for (const auto& f : found) out.push_back(f.second);
  return out;
}

}  // namespace orthoplanes
