#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "orthoplanes/geometry.hpp"
#include "support.hpp"

namespace testing {

using orthoplanes::DetectionParams;
using orthoplanes::kPi;
using orthoplanes::PointCloud;

// Exhaustive accumulation written from the definitions: every other point
// within τd votes, the frame is Eigen's two-vector rotation of the
// canonical reference normal onto +z.
struct BruteTable {
  std::vector<int> bins;
  int coplanar = 0;
};

inline BruteTable brute_force_votes(const PointCloud& cloud, std::size_t ref, const DetectionParams& p) {
  const std::size_t nt = static_cast<std::size_t>(std::llround(2.0 * kPi / p.theta_bin));
  const std::size_t nr = static_cast<std::size_t>(std::ceil(p.tau_d / p.rho_bin - 1e-9));
  BruteTable t{std::vector<int>(nt * nr, 0), 0};
  Vec3 n1 = cloud.points[ref].normal;
  if (n1.x() < 0 || (n1.x() == 0 && (n1.y() < 0 || (n1.y() == 0 && n1.z() < 0)))) n1 = -n1;
  const Mat3 Rz = Eigen::Quaterniond::FromTwoVectors(n1, Vec3::UnitZ()).toRotationMatrix();
  const Vec3 x1 = cloud.points[ref].position;
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    if (j == ref) continue;
    const Vec3 d = x1 - cloud.points[j].position;
    if (!(d.norm() < p.tau_d)) continue;
    const Vec3 n2 = cloud.points[j].normal;
    const double f1 = n1.dot(n2), f2 = n1.dot(d), f3 = n2.dot(d), f4 = d.norm();
    if (std::abs(f1) < std::sin(p.delta_n)) {
      const Vec3 m = Rz * n2;
      double theta = std::atan2(m.y(), m.x());
      double rho = f3;
      if (rho < 0) {
        rho = -rho;
        theta += kPi;
      }
      theta = std::fmod(theta + 4.0 * kPi, 2.0 * kPi);
      const auto rb = static_cast<std::size_t>(rho / p.rho_bin);
      if (rb >= nr) continue;
      const auto tb = std::min(static_cast<std::size_t>(theta / p.theta_bin), nt - 1);
      ++t.bins[tb * nr + rb];
    } else if (std::abs(f1) > std::cos(p.delta_n) && std::abs(f2) < f4 * std::sin(p.delta_n) &&
               std::abs(f3) < f4 * std::sin(p.delta_n)) {
      ++t.coplanar;
    }
  }
  return t;
}

// Points on three random mutually orthogonal patches with jittered normals.
inline PointCloud random_structured_cloud(std::mt19937_64& rng, std::size_t n) {
  const Mat3 R = testing::random_rotation(rng);
  std::uniform_real_distribution<double> u(0.0, 0.9);
  std::normal_distribution<double> jitter(0.0, 0.02);
  PointCloud c;
  c.has_normals = true;
  for (std::size_t i = 0; i < n; ++i) {
    const int face = static_cast<int>(i % 3);
    Vec3 local(u(rng), u(rng), u(rng));
    local[face] = 0.0;
    Vec3 normal = Vec3::Zero();
    normal[face] = (i % 2 == 0) ? 1.0 : -1.0;
    normal += Vec3(jitter(rng), jitter(rng), jitter(rng));
    c.points.push_back({R * local, (R * normal).normalized()});
  }
  return c;
}

}  // namespace testing
