#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "orthoplanes/geometry.hpp"

namespace orthoplanes {

class GridIndex;

/// Reference point with canonical normal sign plus the rotation taking that
/// normal onto +z.
struct LocalFrame {
  OrientedPoint reference;
  Mat3 rot_to_z = Mat3::Identity();

  static LocalFrame from_reference(const OrientedPoint& ref);
};

/// Local (θ, ρ) voting table of one reference point. ρ is kept non-negative
/// by folding (θ, ρ) ≡ (θ + π, -ρ), so θ spans the full circle.
class Accumulator2D {
 public:
  explicit Accumulator2D(const DetectionParams& params);

  std::size_t theta_bins() const noexcept { return theta_bins_; }
  std::size_t rho_bins() const noexcept { return rho_bins_; }

  /// Bin of an already folded vote (θ ∈ [0, 2π), ρ ≥ 0); nullopt if ρ falls
  /// beyond the table.
  std::optional<std::pair<std::size_t, std::size_t>> bin_of(double theta, double rho) const;
  void vote(std::size_t theta_bin, std::size_t rho_bin) { ++bins_[theta_bin * rho_bins_ + rho_bin]; }
  int count(std::size_t theta_bin, std::size_t rho_bin) const { return bins_[theta_bin * rho_bins_ + rho_bin]; }

  /// Highest bin; ties go to the lowest (θ-bin, ρ-bin).
  std::pair<std::size_t, std::size_t> argmax() const;

  int coplanar_count = 0;

 private:
  double theta_step_;
  double rho_step_;
  std::size_t theta_bins_;
  std::size_t rho_bins_;
  std::vector<int> bins_;
};

/// Folded local voting coordinates of an orthogonal partner: θ ∈ [0, 2π),
/// ρ ≥ 0. `flipped` reports whether the partner normal was negated.
struct LocalVote {
  double theta = 0.0;
  double rho = 0.0;
  bool flipped = false;
};

LocalVote local_vote(const LocalFrame& frame, const OrientedPoint& partner);

struct OppCandidate {
  Plane plane_ref;
  Plane plane_other;
  int votes = 0;
  std::size_t reference_index = 0;
  Vec3 reference_point = Vec3::Zero();
  Vec3 other_anchor = Vec3::Zero();  // centroid of the winning bin's partners
  std::size_t theta_bin = 0;
  std::size_t rho_bin = 0;
};

/// min(N, |cloud|) distinct indices of points with usable normals, sorted.
/// Throws EmptyCloud.
std::vector<std::size_t> sample_reference_points(const PointCloud& cloud,
                                                 const DetectionParams& params,
                                                 std::uint64_t seed);

/// Votes for the most likely orthogonal plane pair through one reference.
/// `index` must be built over `cloud` (any cell size).
std::optional<OppCandidate> vote_local(const PointCloud& cloud, const GridIndex& index,
                                       std::size_t ref_index, const DetectionParams& params,
                                       std::uint64_t seed);
std::optional<OppCandidate> vote_local(const PointCloud& cloud, std::size_t ref_index,
                                       const DetectionParams& params, std::uint64_t seed);

/// Fills `acc` exactly as vote_local does and returns it; exposed for tests
/// and the accumulator dump in the CLI.
Accumulator2D accumulate_votes(const PointCloud& cloud, const GridIndex& index,
                               std::size_t ref_index, const DetectionParams& params,
                               std::uint64_t seed);

std::vector<OppCandidate> detect_opps(const PointCloud& cloud, const DetectionParams& params,
                                      std::uint64_t seed);

/// Deterministic 64-bit mix used to derive per-reference seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace orthoplanes
