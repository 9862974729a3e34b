#include <random>

#include "doctest.h"
#include "orthoplanes/evaluation.hpp"
#include "orthoplanes/synthetic.hpp"
#include "support.hpp"

using namespace orthoplanes;
using testing::error_of;

namespace {

// Maximum-cardinality bipartite matching by exhaustive search.
std::size_t brute_force_max_matching(const std::vector<std::vector<double>>& score, std::size_t row,
                                     std::vector<bool>& used) {
  if (row == score.size()) return 0;
  std::size_t best = brute_force_max_matching(score, row + 1, used);
  for (std::size_t j = 0; j < score[row].size(); ++j) {
    if (used[j] || !(score[row][j] < kInfeasible)) continue;
    used[j] = true;
    best = std::max(best, 1 + brute_force_max_matching(score, row + 1, used));
    used[j] = false;
  }
  return best;
}

std::vector<ParallelBundle> truth_bundles(const GroundTruth& gt) {
  PlaneGraph g;
  g.vertices = gt.planes;
  g.edges = gt.edges;
  return reduce_parallel(g, deg_to_rad(20.0));
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("report arithmetic") {
  const DetectionReport exact = make_report(3, 3, {{0, 0}, {1, 1}, {2, 2}});
  CHECK(exact.precision == 1.0);
  CHECK(exact.recall == 1.0);

  const DetectionReport partial = make_report(3, 4, {{0, 2}, {2, 0}});
  CHECK(partial.precision == doctest::Approx(2.0 / 3.0));
  CHECK(partial.recall == doctest::Approx(0.5));
  CHECK(partial.noise == 1);
  CHECK(partial.miss == 2);
  CHECK(partial.correct + partial.noise == 3);
  CHECK(partial.correct + partial.miss == 4);

  const DetectionReport none = make_report(0, 3, {});
  CHECK_FALSE(none.precision_defined);
  CHECK(none.recall == 0.0);
}

TEST_CASE("plane evaluation") {
  const std::vector<Plane> gt = {{{0, 0, 1}, 0.0}, {{1, 0, 0}, -1.0}, {{0, 1, 0}, 2.0}, {{0, 0, 1}, -3.0}};
  CHECK(evaluate_planes(gt, gt).recall == 1.0);

  // Sign flips and small errors still match; a 15 degree tilt and a 10 cm
  // shift do not.
  const std::vector<Plane> det = {
      gt[1].flipped(),
      {testing::rotation_about(Vec3::UnitX(), deg_to_rad(3.0)) * gt[0].normal, 0.01},
      {testing::rotation_about(Vec3::UnitX(), deg_to_rad(15.0)) * gt[2].normal, 2.0},
      {{0, 0, 1}, -3.1},
  };
  const DetectionReport r = evaluate_planes(det, gt);
  CHECK(r.correct == 2);
  CHECK(r.noise == 2);
  CHECK(r.miss == 2);
  CHECK(r.matches == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});
  CHECK(evaluate_planes(det, gt, deg_to_rad(20.0), 0.2).correct == 4);
  CHECK(error_of([&] { evaluate_planes(det, gt, 0.0, 0.05); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("line evaluation") {
  std::vector<Line3D> gt;
  for (int k = 0; k < 10; ++k) gt.push_back({Vec3::UnitZ(), Vec3(k, 0, 0)});
  CHECK(evaluate_lines(gt, gt).precision == 1.0);

  std::vector<Line3D> det(gt.begin(), gt.begin() + 7);
  CHECK(evaluate_lines(det, gt).recall == doctest::Approx(0.7));

  const Line3D tilted{testing::rotation_about(Vec3::UnitX(), deg_to_rad(15.0)) * Vec3::UnitZ(), Vec3::Zero()};
  const DetectionReport r = evaluate_lines({tilted}, {gt[0]});
  CHECK(r.noise == 1);
  CHECK(r.miss == 1);
  const Line3D slight{testing::rotation_about(Vec3::UnitX(), deg_to_rad(5.0)) * Vec3::UnitZ(), Vec3::Zero()};
  CHECK(evaluate_lines({slight}, {gt[0]}).correct == 1);
  const Line3D flipped{-Vec3::UnitZ(), Vec3(0.03, 0, 0)};
  CHECK(evaluate_lines({flipped}, {gt[0]}).correct == 1);
  CHECK(evaluate_lines({flipped}, {gt[0]}, 0.02).correct == 0);
}

TEST_CASE("greedy matching against brute force") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 8);
    const std::size_t m = 1 + static_cast<std::size_t>((trial / 8) % 8);
    const double density = 0.2 + 0.6 * u(rng);
    std::vector<std::vector<double>> score(n, std::vector<double>(m, kInfeasible));
    for (auto& row : score)
      for (auto& s : row)
        if (u(rng) < density) s = u(rng);
    const auto greedy = greedy_match(score);
    std::vector<bool> used(m, false);
    const std::size_t best = brute_force_max_matching(score, 0, used);
    CHECK(greedy.size() <= best);
    CHECK(2 * greedy.size() >= best);  // any maximal matching is within 2×
    std::vector<bool> ri(n, false), cj(m, false);
    for (const auto& [i, j] : greedy) {
      CHECK(score[i][j] < kInfeasible);
      CHECK_FALSE(ri[i]);
      CHECK_FALSE(cj[j]);
      ri[i] = cj[j] = true;
    }
    // Maximal: no feasible pair is left between unmatched items.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (!ri[i] && !cj[j]) CHECK_FALSE(score[i][j] < kInfeasible);
  }
}

TEST_CASE("point labels on a noiseless corner room") {
  SyntheticSpec spec;
  spec.layout = Layout::CornerRoom;
  spec.points_per_m2 = 500.0;
  spec.seed = 4;
  SyntheticScene scene = generate_synthetic_scene(spec);
  const std::vector<ParallelBundle> bundles = truth_bundles(scene.truth);
  // An outlier one meter off every face.
  scene.cloud.points.push_back({Vec3(1, 1, 1), Vec3(1, 1, 1).normalized()});
  scene.cloud.labels.push_back(-1);
  const auto labels = label_points(scene.cloud, bundles, 0.02, deg_to_rad(30.0));
  for (std::size_t i = 0; i < labels.size(); ++i) CHECK(labels[i] == scene.cloud.labels[i]);
}

TEST_CASE("point labels under noise") {
  SyntheticSpec spec;
  spec.layout = Layout::CornerRoom;
  spec.points_per_m2 = 1000.0;
  spec.noise_sigma = 0.003;
  spec.seed = 5;
  const SyntheticScene scene = generate_synthetic_scene(spec);
  const auto labels = label_points(scene.cloud, truth_bundles(scene.truth), 0.02, deg_to_rad(30.0));
  std::size_t interior = 0, correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (scene.cloud.labels[i] < 0) continue;
    // Skip points within 10 cm of a crease: faces 0, 1, 2 have normals z, x, y.
    Vec3 x = scene.cloud.points[i].position;
    x[(scene.cloud.labels[i] + 2) % 3] = 1.0;
    if (x.minCoeff() < 0.1) continue;
    ++interior;
    correct += labels[i] == scene.cloud.labels[i];
  }
  REQUIRE(interior > 1000);
  CHECK(static_cast<double>(correct) >= 0.99 * static_cast<double>(interior));
}

}
