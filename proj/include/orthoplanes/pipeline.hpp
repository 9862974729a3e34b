#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "orthoplanes/detection.hpp"
#include "orthoplanes/refinement.hpp"
#include "orthoplanes/registration.hpp"
#include "orthoplanes/relation_graph.hpp"
#include "orthoplanes/sampling.hpp"

namespace orthoplanes {

/// Every tunable of the detect/refine/register pipeline.
struct PipelineConfig {
  DetectionParams detection;
  ClusterParams clustering;
  RefinementParams refinement;
  SamplingParams sampling;
  IcpParams icp;
  std::uint64_t seed = 0;
  std::size_t normal_neighbors = kDefaultNormalNeighbors;
  double max_surface_variation = 0.03;  // references above this are skipped
  // Re-fit each corner on its ε-ball after graph refinement. Off by default:
  // the ball holds far fewer points than the whole planes, so the local fit
  // is noisier than the intersection of the refined planes.
  bool local_corners = false;
  double angle_tol = deg_to_rad(10.0);  // evaluation
  double dist_tol = 0.05;

  /// Keys match the command-line flags without dashes prefix, e.g.
  /// "delta-n" (degrees), "tau-d" (meters). Throws InvalidArgument.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  /// Flat key=value lines; '#' starts a comment. Throws Io, InvalidArgument.
  void load_file(const std::string& path);
  static const std::vector<std::string>& keys();
};

/// Everything detected in one cloud. Graph vertices are the planes.
struct Scene {
  PlaneGraph graph;
  std::vector<ParallelBundle> bundles;
  std::vector<CornerTriangle> triangles;
  std::vector<Line3D> lines;
  std::vector<Corner> corners;
  std::vector<std::array<std::size_t, 3>> corner_planes;  // graph vertices
  bool refined = false;
  bool converged = false;
  int iterations = 0;
  double max_edge_dot = 0.0;
};

/// Downsampled cloud with normals (estimated if absent) and non-planar
/// neighborhoods flagged as unusable references.
PointCloud prepare_cloud(const PointCloud& cloud, const PipelineConfig& config);

/// Derives bundles, triangles, lines and plane-intersection corners from
/// the graph. Throws ConflictingStructure.
Scene scene_from_graph(PlaneGraph graph, double parallel_angle);

/// Voting, clustering and graph assembly on a prepared cloud. Vertices
/// without an orthogonal partner are dropped.
Scene detect_scene(const PointCloud& prepared, const PipelineConfig& config);

/// Joint graph refinement; corners are the triangles of the refined planes,
/// optionally re-fit locally (PipelineConfig::local_corners).
Scene refine_scene(const PointCloud& prepared, const Scene& scene, const PipelineConfig& config);

struct RegistrationOutcome {
  IcpResult icp;
  std::size_t source_corners = 0;
  std::size_t target_corners = 0;
  double overlap = 0.0;
};

/// Matches the given corners (positions gated by the corner match radius
/// about the identity) and runs constrained ICP.
RegistrationOutcome register_with_corners(const PointCloud& src, const PointCloud& dst,
                                          const std::vector<Corner>& src_corners,
                                          const std::vector<Corner>& dst_corners,
                                          const PipelineConfig& config);

}  // namespace orthoplanes
