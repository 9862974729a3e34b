#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "orthoplanes/geometry.hpp"

namespace orthoplanes {

/// Uniform-grid hash over a fixed point set. Immutable after construction, so
/// concurrent queries are safe.
class GridIndex {
 public:
  GridIndex(std::vector<Vec3> points, double cell_size);
  static GridIndex from_cloud(const PointCloud& cloud, double cell_size);

  /// Indices with |p - center| < radius, in ascending index order.
  std::vector<std::size_t> within(const Vec3& center, double radius) const;

  /// min(k, |ball|) distinct indices drawn uniformly from the points with
  /// |p - center| < radius other than `exclude`, in ascending order. Large
  /// balls are sampled by rejection instead of being enumerated.
  std::vector<std::size_t> sample_within(const Vec3& center, double radius, std::size_t k,
                                         std::size_t exclude, std::uint64_t seed) const;

  /// Closest point with |p - center| < radius, ties to the lower index.
  /// Cells are visited ring by ring around the center's cell, so a cell
  /// size near the typical neighbor distance keeps queries cheap.
  std::optional<std::size_t> nearest(const Vec3& center, double radius) const;

  /// The k closest points (fewer if the set is smaller), nearest first.
  std::vector<std::size_t> k_nearest(const Vec3& center, std::size_t k) const;

  double cell_size() const noexcept { return cell_; }
  std::size_t size() const noexcept { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

 private:
  using Key = std::int64_t;
  Eigen::Vector3i cell_of(const Vec3& p) const;
  static Key key_of(const Eigen::Vector3i& c);
  using Span = std::pair<std::uint32_t, std::uint32_t>;  // range of order_
  /// Range of order_ holding the cell's points; empty for an empty cell.
  Span span_of(const Eigen::Vector3i& c) const;
  template <typename Fn>
  void for_each_in_cell(const Eigen::Vector3i& c, Fn&& fn) const;

  std::vector<Vec3> points_;
  double cell_;
  std::vector<std::size_t> order_;  // point indices sorted by cell key
  std::unordered_map<Key, Span> cells_;
  // Dense table over the bounding cells when it is small enough; empty
  // cells hold an empty span. Falls back to cells_ otherwise.
  std::vector<Span> dense_;
  Eigen::Vector3i dims_ = Eigen::Vector3i::Zero();
  Eigen::Vector3i min_cell_ = Eigen::Vector3i::Zero();
  Eigen::Vector3i max_cell_ = Eigen::Vector3i::Zero();
};

}  // namespace orthoplanes
