#pragma once

#include <array>
#include <set>
#include <utility>
#include <vector>

#include "orthoplanes/detection.hpp"
#include "orthoplanes/geometry.hpp"

namespace orthoplanes {

/// One plane hypothesis entering the clustering: the plane, a point that
/// produced it, and its vote weight.
struct PlaneHypothesis {
  Plane plane;
  Vec3 anchor = Vec3::Zero();
  double weight = 1.0;
};

struct ClusterParams {
  double merge_dist = 0.05;
  double merge_angle = deg_to_rad(20.0);
  /// Clusters built from fewer hypotheses are discarded (1 keeps all).
  std::size_t min_support = 1;
};

struct PlaneClustering {
  std::vector<Plane> planes;           // canonical sign
  std::vector<Vec3> anchors;           // weighted anchor centroid per plane
  std::vector<double> weights;         // summed votes
  std::vector<std::size_t> support;    // hypotheses per plane
  /// Cluster of every input hypothesis; kDropped if its cluster was filtered.
  std::vector<std::size_t> hypothesis_cluster;

  static constexpr std::size_t kDropped = static_cast<std::size_t>(-1);
};

/// Hypotheses 2i and 2i+1 are candidate i's reference plane and partner plane.
std::vector<PlaneHypothesis> hypotheses_of(const std::vector<OppCandidate>& candidates);

/// Union-find clustering: two hypotheses unite when their normals are within
/// merge_angle and each anchor lies within merge_dist of the other plane.
/// Merging is repeated on the cluster representatives until nothing changes.
PlaneClustering cluster_hypotheses(const std::vector<PlaneHypothesis>& hyps,
                                   const ClusterParams& params);
PlaneClustering cluster_candidates(const std::vector<OppCandidate>& candidates,
                                   const ClusterParams& params);

using Edge = std::pair<std::size_t, std::size_t>;  // first < second

struct PlaneGraph {
  std::vector<Plane> vertices;
  std::set<Edge> edges;

  bool has_edge(std::size_t a, std::size_t b) const {
    return edges.count(a < b ? Edge{a, b} : Edge{b, a}) != 0;
  }
  std::vector<std::vector<std::size_t>> adjacency() const;
};

PlaneGraph build_graph(const PlaneClustering& clusters, const std::vector<OppCandidate>& candidates,
                       const DetectionParams& params);

struct CornerTriangle {
  std::array<std::size_t, 3> plane_indices{};
  friend bool operator==(const CornerTriangle&, const CornerTriangle&) = default;
};

std::vector<CornerTriangle> enumerate_triangles(const PlaneGraph& g);

/// Parallel planes folded into one node: a shared normal and the sorted
/// offsets of its members against that normal.
struct ParallelBundle {
  Vec3 normal = Vec3::UnitZ();
  std::vector<double> distances;    // ascending
  std::vector<std::size_t> members; // graph vertex of each distance
  std::set<std::size_t> neighbors;  // orthogonal bundles

  Plane plane(std::size_t l) const { return {normal, distances[l]}; }
};

/// Throws ConflictingStructure when planes to be merged share an edge.
std::vector<ParallelBundle> reduce_parallel(const PlaneGraph& g, double parallel_angle);

std::set<Edge> bundle_edges(const std::vector<ParallelBundle>& bundles);

/// Re-sorts every bundle's distances (keeping members aligned).
void sort_bundle_distances(std::vector<ParallelBundle>& bundles);

/// Intersection line of every graph edge, in edge order.
std::vector<Line3D> graph_lines(const PlaneGraph& g);

}  // namespace orthoplanes
