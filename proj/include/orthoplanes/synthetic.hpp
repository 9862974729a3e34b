#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "orthoplanes/geometry.hpp"
#include "orthoplanes/relation_graph.hpp"

namespace orthoplanes {

enum class Layout { CornerRoom, TwoWalls, Box, SinglePlane, NoiseBall };

/// Accepts "corner-room", "two-walls", "box", "single-plane", "noise-ball".
/// Throws InvalidArgument.
Layout parse_layout(const std::string& name);
const char* layout_name(Layout layout);

struct SyntheticSpec {
  Layout layout = Layout::CornerRoom;
  double extent = 2.0;           // face side length, m
  double points_per_m2 = 2500.0;
  double noise_sigma = 0.0;      // displacement along the face normal, m
  double outlier_fraction = 0.0; // of the final point count
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  std::vector<Plane> planes;
  std::set<Edge> edges;
  std::vector<Line3D> lines;     // one per edge, in edge order
  std::vector<Corner> corners;
  std::vector<std::array<std::size_t, 3>> corner_planes;
};

/// The cloud's `labels` hold the generating face of each point (-1 for
/// outliers). Normals are exact face normals with random signs when
/// σ = 0, and are re-estimated from the points otherwise.
struct SyntheticScene {
  PointCloud cloud;
  GroundTruth truth;
};

SyntheticScene generate_synthetic_scene(const SyntheticSpec& spec);

}  // namespace orthoplanes
