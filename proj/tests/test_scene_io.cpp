#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "orthoplanes/point_cloud_io.hpp"
#include "orthoplanes/sampling.hpp"
#include "orthoplanes/synthetic.hpp"
#include "support.hpp"

using namespace orthoplanes;
using testing::error_of;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed, bool normals = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<OrientedPoint> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({Vec3(u(rng), u(rng), u(rng)), testing::random_unit(rng)});
  return testing::make_cloud(std::move(pts), normals);
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool clouds_bit_equal(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size() || a.has_normals != b.has_normals || a.labels != b.labels) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      if (!bit_equal(a.points[i].position[k], b.points[i].position[k])) return false;
      if (a.has_normals && !bit_equal(a.points[i].normal[k], b.points[i].normal[k])) return false;
    }
  return true;
}

std::string to_ply(const PointCloud& cloud, PlyFormat format) {
  std::ostringstream out;
  write_ply(cloud, out, format);
  return out.str();
}

PointCloud from_ply(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_ply(in);
}

double min_pair_distance(const PointCloud& c) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j)
      best = std::min(best, (c.points[i].position - c.points[j].position).norm());
  return best;
}

}  // namespace

TEST_SUITE("scene_io") {

TEST_CASE("binary PLY round trip is bit-exact") {
  PointCloud c = random_cloud(500, 1);
  c.points[3].position.x() = 1e-300;
  c.points[4].position.y() = -0.0;
  c.labels.assign(c.size(), 7);
  c.labels[2] = -1;
  const PointCloud back = from_ply(to_ply(c, PlyFormat::BinaryLittleEndian));
  CHECK(clouds_bit_equal(c, back));
  // Writing the result again gives the same bytes.
  CHECK(to_ply(back, PlyFormat::BinaryLittleEndian) == to_ply(c, PlyFormat::BinaryLittleEndian));
}

TEST_CASE("ascii PLY round trip is exact at 17 digits") {
  const PointCloud c = random_cloud(200, 2);
  const PointCloud back = from_ply(to_ply(c, PlyFormat::Ascii));
  CHECK(clouds_bit_equal(c, back));
}

TEST_CASE("clouds without normals") {
  const PointCloud c = random_cloud(50, 3, false);
  const std::string bytes = to_ply(c, PlyFormat::BinaryLittleEndian);
  CHECK(bytes.find("property double nx") == std::string::npos);
  const PointCloud back = from_ply(bytes);
  CHECK_FALSE(back.has_normals);
  CHECK(clouds_bit_equal(c, back));
}

TEST_CASE("file round trip and I/O errors") {
  const auto dir = std::filesystem::temp_directory_path() / "orthoplanes_scene_io";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "cloud.ply").string();
  const PointCloud c = random_cloud(100, 4);
  save_point_cloud(c, path);
  CHECK(clouds_bit_equal(c, load_point_cloud(path)));
  CHECK(error_of([&] { load_point_cloud((dir / "missing.ply").string()); }) == ErrorCode::Io);
  CHECK(error_of([&] { save_point_cloud(c, (dir / "no_such_dir" / "x.ply").string()); }) == ErrorCode::Io);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed PLY input") {
  const std::string good = to_ply(random_cloud(20, 5), PlyFormat::BinaryLittleEndian);
  CHECK(error_of([&] { from_ply(good.substr(0, good.size() - 5)); }) == ErrorCode::Malformed);
  CHECK(error_of([&] { from_ply("not a ply\n"); }) == ErrorCode::Malformed);
  CHECK(error_of([&] { from_ply(""); }) == ErrorCode::Malformed);
  CHECK(error_of([&] {
    from_ply("ply\nformat ascii 1.0\nelement vertex 1\nproperty float y\nproperty float z\nend_header\n1 2\n");
  }) == ErrorCode::Malformed);
  CHECK(error_of([&] {
    from_ply("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
             "end_header\n1 2 3\n4 five 6\n");
  }) == ErrorCode::Malformed);
  CHECK(error_of([&] {
    from_ply("ply\nformat ascii 1.0\nelement vertex 1\nproperty quad x\nend_header\n1\n");
  }) == ErrorCode::Malformed);
}

TEST_CASE("unknown properties and elements are skipped") {
  const std::string text =
      "ply\nformat ascii 1.0\ncomment made by hand\n"
      "element vertex 2\nproperty float x\nproperty uchar red\nproperty float y\nproperty float z\n"
      "property int label\n"
      "element face 1\nproperty list uchar int vertex_indices\n"
      "end_header\n"
      "1 255 2 3 4\n"
      "-1 0 -2 -3 5\n"
      "3 0 1 1\n";
  const PointCloud c = from_ply(text);
  REQUIRE(c.size() == 2);
  CHECK(c.points[1].position == Vec3(-1, -2, -3));
  CHECK_FALSE(c.has_normals);
  CHECK(c.labels == std::vector<std::int32_t>{4, 5});
}

TEST_CASE("big-endian binary with float properties") {
  std::string bytes =
      "ply\nformat binary_big_endian 1.0\nelement vertex 2\n"
      "property float x\nproperty float y\nproperty float z\nproperty short label\nend_header\n";
  auto put_float = [&](float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int s = 24; s >= 0; s -= 8) bytes.push_back(static_cast<char>((u >> s) & 0xff));
  };
  auto put_short = [&](std::int16_t v) {
    bytes.push_back(static_cast<char>((static_cast<std::uint16_t>(v) >> 8) & 0xff));
    bytes.push_back(static_cast<char>(static_cast<std::uint16_t>(v) & 0xff));
  };
  put_float(1.5f); put_float(-2.25f); put_float(3.0f); put_short(-3);
  put_float(0.5f); put_float(8.0f); put_float(-1.0f); put_short(300);
  const PointCloud c = from_ply(bytes);
  REQUIRE(c.size() == 2);
  CHECK(c.points[0].position == Vec3(1.5, -2.25, 3.0));
  CHECK(c.points[1].position == Vec3(0.5, 8.0, -1.0));
  CHECK(c.labels == std::vector<std::int32_t>{-3, 300});
}

TEST_CASE("estimated normals on two walls") {
  SyntheticSpec spec;
  spec.layout = Layout::TwoWalls;
  spec.points_per_m2 = 1500.0;
  spec.seed = 2;
  const SyntheticScene scene = generate_synthetic_scene(spec);
  const PointCloud est = estimate_normals(scene.cloud);
  REQUIRE(est.size() == scene.cloud.size());
  CHECK(est.has_normals);
  const Line3D crease = scene.truth.lines.at(0);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (crease.distance_to(est.points[i].position) < 0.15) continue;
    const Vec3 truth = scene.truth.planes.at(static_cast<std::size_t>(scene.cloud.labels[i])).normal;
    CHECK(unsigned_angle(est.points[i].normal, truth) < deg_to_rad(1.0));
    ++checked;
  }
  CHECK(checked > est.size() / 2);
}

TEST_CASE("normal estimation is rotation equivariant") {
  std::mt19937_64 rng(7);
  SyntheticSpec spec;
  spec.layout = Layout::CornerRoom;
  spec.points_per_m2 = 300.0;
  spec.noise_sigma = 0.003;
  const PointCloud cloud = generate_synthetic_scene(spec).cloud;
  const Mat3 R = testing::random_rotation(rng);
  const Vec3 t(0.3, -2.0, 1.0);
  const PointCloud a = estimate_normals(transformed(cloud, R, t));
  const PointCloud b = estimate_normals(cloud);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    CHECK(unsigned_angle(a.points[i].normal, R * b.points[i].normal) < 1e-6);
}

TEST_CASE("normal estimation needs enough points") {
  const PointCloud tiny = random_cloud(5, 8, false);
  CHECK(error_of([&] { estimate_normals(tiny, 20); }) == ErrorCode::TooFewPoints);
  CHECK(error_of([&] { estimate_normals(random_cloud(50, 8), 2); }) == ErrorCode::TooFewPoints);
  CHECK_NOTHROW(estimate_normals(tiny, 5));
}

TEST_CASE("downsampling") {
  const PointCloud c = random_cloud(1500, 9);
  std::size_t previous = c.size() + 1;
  for (double d : {0.05, 0.2, 0.4, 0.8}) {
    const PointCloud s = downsample(c, d);
    CHECK(s.size() <= c.size());
    CHECK(s.size() < previous);
    previous = s.size();
    CHECK(min_pair_distance(s) >= d / std::sqrt(3.0) - 1e-12);
    for (const auto& p : s.points) CHECK(p.normal.norm() == doctest::Approx(1.0));
  }
  // Tiny spacing keeps every point where it was.
  const PointCloud same = downsample(c, 1e-6);
  REQUIRE(same.size() == c.size());
  std::vector<Vec3> a, b;
  for (const auto& p : c.points) a.push_back(p.position);
  for (const auto& p : same.points) b.push_back(p.position);
  auto lex = [](const Vec3& x, const Vec3& y) { return std::lexicographical_compare(x.data(), x.data() + 3, y.data(), y.data() + 3); };
  std::sort(a.begin(), a.end(), lex);
  std::sort(b.begin(), b.end(), lex);
  CHECK(a == b);

  // Two close points collapse onto their midpoint; opposite normals do not cancel.
  const PointCloud pair = testing::make_cloud({{Vec3(0, 0, 0), Vec3::UnitZ()}, {Vec3(0.01, 0, 0), -Vec3::UnitZ()}});
  const PointCloud merged = downsample(pair, 0.1);
  REQUIRE(merged.size() == 1);
  CHECK((merged.points[0].position - Vec3(0.005, 0, 0)).norm() < 1e-15);
  CHECK(unsigned_angle(merged.points[0].normal, Vec3::UnitZ()) < 1e-12);

  CHECK(error_of([&] { downsample(c, 0.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("sampling hierarchy") {
  const PointCloud c = random_cloud(2000, 10);
  SamplingParams p;
  p.d_min = 0.1;
  p.hierarchy_levels = 3;
  const auto levels = build_hierarchy(c, p);
  REQUIRE(levels.size() == 3);
  CHECK(levels[0].size() < levels[1].size());
  CHECK(levels[1].size() < levels[2].size());
  CHECK(levels[2].size() == downsample(c, 0.1).size());
  CHECK(levels[0].size() == downsample(c, 0.4).size());
  CHECK(adaptive_d_min(c) == doctest::Approx(
      ([&] {
        Vec3 lo = c.points[0].position, hi = lo;
        for (const auto& q : c.points) {
          lo = lo.cwiseMin(q.position);
          hi = hi.cwiseMax(q.position);
        }
        return (hi - lo).norm() / 200.0;
      })()));
  p.hierarchy_levels = 0;
  CHECK(error_of([&] { build_hierarchy(c, p); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("synthetic scenes") {
  SyntheticSpec spec;
  spec.layout = Layout::Box;
  spec.points_per_m2 = 500.0;
  spec.noise_sigma = 0.0;
  spec.outlier_fraction = 0.1;
  spec.seed = 77;
  const SyntheticScene a = generate_synthetic_scene(spec);
  const SyntheticScene b = generate_synthetic_scene(spec);
  CHECK(clouds_bit_equal(a.cloud, b.cloud));
  spec.seed = 78;
  CHECK_FALSE(clouds_bit_equal(a.cloud, generate_synthetic_scene(spec).cloud));

  // Five 2 m faces at 500 points/m² is Poisson with mean 10000.
  std::size_t surface = 0, outliers = 0;
  for (int label : a.cloud.labels) (label < 0 ? outliers : surface)++;
  CHECK(std::abs(static_cast<double>(surface) - 10000.0) < 5 * 100.0);
  CHECK(static_cast<double>(outliers) == doctest::Approx(surface * 0.1 / 0.9).epsilon(1e-3));

  const GroundTruth& gt = a.truth;
  CHECK(gt.planes.size() == 5);
  CHECK(gt.edges.size() == 8);
  CHECK(gt.lines.size() == 8);
  CHECK(gt.corners.size() == 4);
  for (std::size_t i = 0; i < a.cloud.size(); ++i) {
    if (a.cloud.labels[i] < 0) continue;
    const Plane& p = gt.planes[static_cast<std::size_t>(a.cloud.labels[i])];
    CHECK(std::abs(point_plane_distance(a.cloud.points[i].position, p)) < 1e-12);
    CHECK(unsigned_angle(a.cloud.points[i].normal, p.normal) < 1e-12);
  }
  for (const auto& [x, y] : gt.edges) CHECK(std::abs(gt.planes[x].normal.dot(gt.planes[y].normal)) < 1e-12);
  for (std::size_t k = 0; k < gt.corners.size(); ++k)
    for (std::size_t j : gt.corner_planes[k])
      CHECK(std::abs(point_plane_distance(gt.corners[k].position, gt.planes[j])) < 1e-12);

  CHECK(parse_layout("corner-room") == Layout::CornerRoom);
  CHECK(std::string(layout_name(Layout::NoiseBall)) == "noise-ball");
  CHECK(error_of([] { parse_layout("donut"); }) == ErrorCode::InvalidArgument);
  spec.outlier_fraction = 1.0;
  CHECK(error_of([&] { generate_synthetic_scene(spec); }) == ErrorCode::InvalidArgument);
}

}
