#pragma once

#include <vector>

#include "orthoplanes/geometry.hpp"

namespace orthoplanes {

struct SamplingParams {
  double d_min = 0.0;  // <= 0 selects adaptive_d_min(cloud)
  int hierarchy_levels = 3;
};

/// Bounding-box diagonal / 200.
double adaptive_d_min(const PointCloud& cloud);

/// Picks seed points greedily so that no two are closer than d_min, assigns
/// every input point to its nearest seed and outputs the per-seed average
/// (normals sign-aligned before averaging). Outputs closer than d_min/√3 are
/// merged, so that bound holds for every output pair.
PointCloud downsample(const PointCloud& cloud, double d_min);

/// Coarsest first; level l uses d_min·2^(levels-1-l).
std::vector<PointCloud> build_hierarchy(const PointCloud& cloud, const SamplingParams& params);

inline constexpr std::size_t kDefaultNormalNeighbors = 20;

/// Smallest-eigenvector normal of the k-nearest-neighbor covariance (the
/// point itself included). Signs are left as the eigensolver returns them.
/// Throws TooFewPoints when |cloud| < k or k < 3.
PointCloud estimate_normals(const PointCloud& cloud, std::size_t k = kDefaultNormalNeighbors);

/// λ_min / (λ0+λ1+λ2) of each point's k-neighborhood covariance.
std::vector<double> surface_variation(const PointCloud& cloud, std::size_t k = kDefaultNormalNeighbors);

/// Marks points whose neighborhood is not planar (surface variation above
/// `max_variation`) as invalid voting references. Normals are untouched.
void flag_nonplanar(PointCloud& cloud, std::size_t k, double max_variation);

}  // namespace orthoplanes
