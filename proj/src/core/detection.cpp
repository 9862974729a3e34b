#include "orthoplanes/detection.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "orthoplanes/error.hpp"
#include "orthoplanes/spatial_index.hpp"

namespace orthoplanes {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

LocalFrame LocalFrame::from_reference(const OrientedPoint& ref) {
  LocalFrame f;
  f.reference.position = ref.position;
  f.reference.normal = canonical_direction(ref.normal.normalized());
  const Vec3& n = f.reference.normal;
  const double c = n.z();
  if (c < -1.0 + 1e-12) {
    f.rot_to_z = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
  } else {
    // Shortest arc n -> e_z (Rodrigues with v = n × e_z).
    const Vec3 v = n.cross(Vec3::UnitZ());
    const Mat3 K = skew(v);
    f.rot_to_z = Mat3::Identity() + K + K * K / (1.0 + c);
  }
  return f;
}

Accumulator2D::Accumulator2D(const DetectionParams& params)
    : theta_step_(params.theta_bin),
      rho_step_(params.rho_bin),
      theta_bins_(static_cast<std::size_t>(std::ceil(2.0 * kPi / params.theta_bin - 1e-9))),
      rho_bins_(static_cast<std::size_t>(std::ceil(params.tau_d / params.rho_bin - 1e-9))),
      bins_(theta_bins_ * rho_bins_, 0) {}

std::optional<std::pair<std::size_t, std::size_t>> Accumulator2D::bin_of(double theta,
                                                                         double rho) const {
  if (rho < 0.0 || theta < 0.0) return std::nullopt;
  const auto rb = static_cast<std::size_t>(std::floor(rho / rho_step_));
  if (rb >= rho_bins_) return std::nullopt;
  auto tb = static_cast<std::size_t>(std::floor(theta / theta_step_));
  tb = std::min(tb, theta_bins_ - 1);
  return std::make_pair(tb, rb);
}

std::pair<std::size_t, std::size_t> Accumulator2D::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < bins_.size(); ++i)
    if (bins_[i] > bins_[best]) best = i;
  return {best / rho_bins_, best % rho_bins_};
}

LocalVote local_vote(const LocalFrame& frame, const OrientedPoint& partner) {
  const Vec3 m = frame.rot_to_z * partner.normal;
  LocalVote v;
  v.theta = std::atan2(m.y(), m.x());
  v.rho = partner.normal.dot(frame.reference.position - partner.position);
  if (v.rho < 0.0) {
    v.rho = -v.rho;
    v.theta += kPi;
    v.flipped = true;
  }
  if (v.theta < 0.0) v.theta += 2.0 * kPi;
  if (v.theta >= 2.0 * kPi) v.theta -= 2.0 * kPi;
  return v;
}

std::vector<std::size_t> sample_reference_points(const PointCloud& cloud,
                                                 const DetectionParams& params,
                                                 std::uint64_t seed) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "cannot sample references from an empty cloud");
  std::vector<std::size_t> eligible;
  eligible.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (cloud.is_valid(i)) eligible.push_back(i);
  const std::size_t n = std::min(params.n_refs, eligible.size());
  std::mt19937_64 rng(mix_seed(seed, 0x5eed));
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
    std::swap(eligible[i], eligible[pick(rng)]);
  }
  eligible.resize(n);
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

namespace {

std::vector<std::size_t> pairing_partners(const PointCloud& cloud, const GridIndex& index,
                                          std::size_t ref_index, const DetectionParams& params,
                                          std::uint64_t seed) {
  return index.sample_within(cloud.points[ref_index].position, params.tau_d, params.k_pairs, ref_index,
                             mix_seed(seed, ref_index));
}

struct Voter {
  std::size_t theta_bin;
  std::size_t rho_bin;
  std::size_t index;
  bool flipped;
};

}  // namespace

namespace {

Accumulator2D fill(const PointCloud& cloud, const GridIndex& index, std::size_t ref_index,
                   const DetectionParams& params, std::uint64_t seed, std::vector<Voter>* voters) {
  Accumulator2D acc(params);
  const LocalFrame frame = LocalFrame::from_reference(cloud.points[ref_index]);
  const PairClassifier classify(params);
  for (std::size_t j : pairing_partners(cloud, index, ref_index, params, seed)) {
    const OrientedPoint& partner = cloud.points[j];
    switch (classify(compute_ppf(frame.reference, partner))) {
      case PairClass::Orthogonal: {
        const LocalVote v = local_vote(frame, partner);
        if (const auto bin = acc.bin_of(v.theta, v.rho)) {
          acc.vote(bin->first, bin->second);
          if (voters) voters->push_back({bin->first, bin->second, j, v.flipped});
        }
        break;
      }
      case PairClass::Coplanar:
        ++acc.coplanar_count;
        break;
      case PairClass::Neither:
        break;
    }
  }
  return acc;
}

}  // namespace

Accumulator2D accumulate_votes(const PointCloud& cloud, const GridIndex& index,
                               std::size_t ref_index, const DetectionParams& params,
                               std::uint64_t seed) {
  return fill(cloud, index, ref_index, params, seed, nullptr);
}

std::optional<OppCandidate> vote_local(const PointCloud& cloud, const GridIndex& index,
                                       std::size_t ref_index, const DetectionParams& params,
                                       std::uint64_t seed) {
  if (ref_index >= cloud.size() || !cloud.has_normals || !cloud.is_valid(ref_index))
    return std::nullopt;
  std::vector<Voter> voters;
  const Accumulator2D acc = fill(cloud, index, ref_index, params, seed, &voters);
  const auto [tb, rb] = acc.argmax();
  const int votes = acc.count(tb, rb);
  if (votes <= params.c_max || acc.coplanar_count <= params.c_max) return std::nullopt;

  const LocalFrame frame = LocalFrame::from_reference(cloud.points[ref_index]);
  const Vec3& x1 = frame.reference.position;
  OppCandidate cand;
  cand.reference_index = ref_index;
  cand.reference_point = x1;
  cand.votes = votes;
  cand.theta_bin = tb;
  cand.rho_bin = rb;
  cand.plane_ref = Plane{frame.reference.normal, -frame.reference.normal.dot(x1)};

  // The partner plane is the mean of the winning bin's voters (normals
  // folded to the ρ ≥ 0 side), which removes the bin quantization.
  Vec3 normal_sum = Vec3::Zero();
  Vec3 anchor = Vec3::Zero();
  for (const Voter& v : voters) {
    if (v.theta_bin != tb || v.rho_bin != rb) continue;
    const Vec3& n2 = cloud.points[v.index].normal;
    normal_sum += v.flipped ? Vec3(-n2) : n2;
    anchor += cloud.points[v.index].position;
  }
  anchor /= static_cast<double>(votes);
  Vec3 n_other = normal_sum.normalized();
  if (!(std::abs(n_other.dot(frame.reference.normal)) < std::sin(params.delta_n))) {
    const double theta = (static_cast<double>(tb) + 0.5) * params.theta_bin;
    const double rho = (static_cast<double>(rb) + 0.5) * params.rho_bin;
    n_other = frame.rot_to_z.transpose() * Vec3(std::cos(theta), std::sin(theta), 0.0);
    anchor = x1 - rho * n_other;
  }
  cand.other_anchor = anchor;
  cand.plane_other = Plane{n_other, -n_other.dot(anchor)};
  return cand;
}

std::optional<OppCandidate> vote_local(const PointCloud& cloud, std::size_t ref_index,
                                       const DetectionParams& params, std::uint64_t seed) {
  const GridIndex index = GridIndex::from_cloud(cloud, params.tau_d);
  return vote_local(cloud, index, ref_index, params, seed);
}

std::vector<OppCandidate> detect_opps(const PointCloud& cloud, const DetectionParams& params,
                                      std::uint64_t seed) {
  params.validate();
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "cannot detect in an empty cloud");
  if (!cloud.has_normals)
    throw Error(ErrorCode::InvalidArgument, "detection requires normals; estimate them first");
  const GridIndex index = GridIndex::from_cloud(cloud, 0.5 * params.tau_d);
  std::vector<OppCandidate> out;
  for (std::size_t ref : sample_reference_points(cloud, params, seed))
    if (auto cand = vote_local(cloud, index, ref, params, seed)) out.push_back(std::move(*cand));
  return out;
}

}  // namespace orthoplanes
