// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Oracles live in this file or in oracles.hpp.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "orthoplanes/detection.hpp"
#include "orthoplanes/evaluation.hpp"
#include "orthoplanes/pipeline.hpp"
#include "orthoplanes/point_cloud_io.hpp"
#include "orthoplanes/refinement.hpp"
#include "orthoplanes/registration.hpp"
#include "orthoplanes/serialization.hpp"
#include "orthoplanes/spatial_index.hpp"
#include "orthoplanes/synthetic.hpp"
#include "oracles.hpp"

using namespace orthoplanes;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string format(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

SyntheticScene make_scene(Layout layout, double sigma, double outliers, double density, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.layout = layout;
  spec.noise_sigma = sigma;
  spec.outlier_fraction = outliers;
  spec.points_per_m2 = density;
  spec.seed = seed;
  return generate_synthetic_scene(spec);
}

// Sampling densities (points per m²). The criteria fix noise and layout
// but not density; these keep the whole run within its time budget.
constexpr double kRoomDensity = 1000.0;
constexpr double kBoxDensity = 1000.0;
constexpr double kScanDensity = 200.0;

// ---- 1: detection end to end -------------------------------------------

struct DetectionRun {
  SyntheticScene synth;
  PointCloud prepared;
  Scene scene;
  double voting_ms = 0.0;
};

DetectionRun detect_corner_room(std::uint64_t seed) {
  DetectionRun r;
  r.synth = make_scene(Layout::CornerRoom, 0.003, 0.05, kRoomDensity, seed);
  PipelineConfig config;
  config.seed = seed;
  r.prepared = prepare_cloud(r.synth.cloud, config);
  const auto t0 = std::chrono::steady_clock::now();
  r.scene = detect_scene(r.prepared, config);
  r.voting_ms = elapsed_ms(t0);
  return r;
}

Verdict criterion_detection(const std::vector<DetectionRun>& runs) {
  int good = 0;
  double worst_normal = 0.0;
  for (const DetectionRun& r : runs) {
    const GroundTruth& gt = r.synth.truth;
    const DetectionReport planes = evaluate_planes(r.scene.graph.vertices, gt.planes);
    const DetectionReport lines = evaluate_lines(r.scene.lines, gt.lines);
    bool ok = planes.precision_defined && planes.precision == 1.0 && planes.recall == 1.0 &&
              lines.precision_defined && lines.precision == 1.0 && lines.recall == 1.0;
    for (const auto& [d, g] : planes.matches) {
      const double err = unsigned_angle(r.scene.graph.vertices[d].normal, gt.planes[g].normal);
      worst_normal = std::max(worst_normal, err);
      ok = ok && err < deg_to_rad(2.0);
    }
    good += ok;
  }
  return {good >= 18, format("%d/%zu corner-room seeds with plane and line P=R=1 (need 18), worst matched normal %.3f deg",
                             good, runs.size(), rad_to_deg(worst_normal))};
}

// ---- 2: voting oracle ---------------------------------------------------

Verdict criterion_voting_oracle() {
  std::size_t refs = 0, mismatches = 0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    std::mt19937_64 rng(2000 + trial);
    const std::size_t n = 200 + 30 * trial;
    const PointCloud cloud = testing::random_structured_cloud(rng, n);
    DetectionParams p;
    p.k_pairs = cloud.size();  // the full neighborhood
    const GridIndex index = GridIndex::from_cloud(cloud, p.tau_d / 4.0);
    for (std::size_t ref = 0; ref < cloud.size(); ++ref) {
      const Accumulator2D acc = accumulate_votes(cloud, index, ref, p, trial);
      const testing::BruteTable oracle = testing::brute_force_votes(cloud, ref, p);
      // Oracle argmax, lowest bin on ties.
      std::size_t best = 0;
      for (std::size_t b = 1; b < oracle.bins.size(); ++b)
        if (oracle.bins[b] > oracle.bins[best]) best = b;
      const auto [t, r] = acc.argmax();
      const bool same = t * acc.rho_bins() + r == best && acc.count(t, r) == oracle.bins[best] &&
                        acc.coplanar_count == oracle.coplanar;
      mismatches += !same;
      ++refs;
    }
  }
  return {mismatches == 0, format("%zu/%zu reference argmax mismatches over 10 clouds of 200-470 points",
                                  mismatches, refs)};
}

// ---- 3: refinement orthogonality ---------------------------------------

struct RefineRun {
  Scene refined;
  double ms = 0.0;
};

Verdict criterion_orthogonality(const std::vector<DetectionRun>& runs, std::vector<RefineRun>& out) {
  double worst_noisy = 0.0;
  for (const DetectionRun& r : runs) {
    PipelineConfig config;
    const auto t0 = std::chrono::steady_clock::now();
    RefineRun rr;
    rr.refined = refine_scene(r.prepared, r.scene, config);
    rr.ms = elapsed_ms(t0);
    worst_noisy = std::max(worst_noisy, rr.refined.max_edge_dot);
    out.push_back(std::move(rr));
  }

  double worst_exact = 0.0, worst_param = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (Layout layout : {Layout::CornerRoom, Layout::Box}) {
      const SyntheticScene s = make_scene(layout, 0.0, 0.0, 1000.0, seed);
      PipelineConfig config;
      config.seed = seed;
      const Scene detected = detect_scene(prepare_cloud(s.cloud, config), config);
      const GraphFit fit = refine_graph(s.cloud, detected.bundles, config.refinement);
      worst_exact = std::max(worst_exact, fit.max_edge_dot);
      for (const ParallelBundle& b : fit.bundles)
        for (std::size_t l = 0; l < b.distances.size(); ++l) {
          Plane p = b.plane(l);
          double best = 1e9;
          for (Plane g : s.truth.planes) {
            if (g.normal.dot(p.normal) < 0) g = g.flipped();
            best = std::min(best, std::max((g.normal - p.normal).cwiseAbs().maxCoeff(), std::abs(g.offset - p.offset)));
          }
          worst_param = std::max(worst_param, best);
        }
    }
  }
  const bool pass = worst_noisy < 1e-4 && worst_exact < 1e-8 && worst_param < 1e-6;
  return {pass, format("max |n.n'| %.2e on noisy scenes (need 1e-4), %.2e on exact scenes (need 1e-8), "
                       "plane parameters within %.2e of GT (need 1e-6)",
                       worst_noisy, worst_exact, worst_param)};
}

// ---- 4: gradient checks ------------------------------------------------

Verdict criterion_gradients() {
  std::mt19937_64 rng(44);
  std::normal_distribution<double> g(0.0, 1.0);
  const double h = 1e-6;
  double worst = 0.0;
  auto rel = [](double fd, double an) { return std::abs(fd - an) / std::max(1.0, std::abs(an)); };
  for (int i = 0; i < 100; ++i) {
    const Mat3 R = testing::random_rotation(rng);
    const Vec3 d(g(rng), g(rng), g(rng)), x(g(rng), g(rng), g(rng));
    const int k = i % 3;
    Eigen::Matrix<double, 1, 6> Jc;
    residuals::corner(R, d, x, k, &Jc);
    for (int p = 0; p < 6; ++p) {
      auto f = [&](double s) {
        Vec3 w = Vec3::Zero(), dd = d;
        if (p < 3) w[p] = s; else dd[p - 3] += s;
        return residuals::corner(residuals::retract_rotation(R, w), dd, x, k, nullptr);
      };
      worst = std::max(worst, rel((f(h) - f(-h)) / (2 * h), Jc[p]));
    }
    const Vec3 n = testing::random_unit(rng), m = testing::random_unit(rng);
    const double off = g(rng);
    Eigen::RowVector3d Jb;
    residuals::bundle(n, off, x, &Jb);
    for (int p = 0; p < 3; ++p) {
      auto f = [&](double s) {
        const Vec3 nn = p < 2 ? residuals::retract_normal(n, p == 0 ? s : 0, p == 1 ? s : 0) : n;
        return residuals::bundle(nn, off + (p == 2 ? s : 0), x, nullptr);
      };
      worst = std::max(worst, rel((f(h) - f(-h)) / (2 * h), Jb[p]));
    }
    Eigen::RowVector4d Je;
    residuals::orthogonality(n, m, &Je);
    for (int p = 0; p < 4; ++p) {
      auto f = [&](double s) {
        return residuals::orthogonality(residuals::retract_normal(n, p == 0 ? s : 0, p == 1 ? s : 0),
                                        residuals::retract_normal(m, p == 2 ? s : 0, p == 3 ? s : 0), nullptr);
      };
      worst = std::max(worst, rel((f(h) - f(-h)) / (2 * h), Je[p]));
    }
  }
  return {worst < 1e-5, format("worst relative Jacobian error %.2e over 100 points (need 1e-5)", worst)};
}

// ---- 5: corner accuracy ------------------------------------------------

double corner_error(const Scene& refined, const GroundTruth& gt) {
  double worst = 0.0;
  for (const Corner& truth : gt.corners) {
    double best = 1e9;
    for (const Corner& c : refined.corners) best = std::min(best, (c.position - truth.position).norm());
    worst = std::max(worst, best);
  }
  return gt.corners.empty() ? 0.0 : worst;
}

std::vector<double> box_corner_errors(double density) {
  std::vector<double> errors;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SyntheticScene s = make_scene(Layout::Box, 0.005, 0.0, density, 500 + seed);
    PipelineConfig config;
    config.seed = seed;
    const PointCloud prepared = prepare_cloud(s.cloud, config);
    const Scene refined = refine_scene(prepared, detect_scene(prepared, config), config);
    for (const Corner& truth : s.truth.corners) {
      double best = 1e9;
      for (const Corner& c : refined.corners) best = std::min(best, (c.position - truth.position).norm());
      errors.push_back(best);
    }
  }
  return errors;
}

Verdict criterion_corners() {
  const double dense = median(box_corner_errors(kBoxDensity));
  const double sparse = median(box_corner_errors(kBoxDensity / 8.0));
  const double ratio = std::max(dense, sparse) / std::min(dense, sparse);
  return {dense < 0.001 && ratio < 2.0,
          format("median corner error %.3f mm at %.0f pts/m2, %.3f mm at 1/8 density, ratio %.2f (need < 1 mm, < 2x)",
                 1e3 * dense, kBoxDensity, 1e3 * sparse, ratio)};
}

// ---- 6, 7: corner-assisted registration --------------------------------

struct ScanPair {
  PointCloud src, dst;
  std::vector<Corner> src_corners, dst_corners;
  RigidMotion truth;
};

struct ModeStats {
  std::vector<double> rpe_rot, rpe_trans;
  std::vector<double> iterations;
};

std::vector<Corner> detect_corners(const PointCloud& prepared, const PipelineConfig& config) {
  try {
    return refine_scene(prepared, detect_scene(prepared, config), config).corners;
  } catch (const Error&) {
    return {};
  }
}

ScanPair make_pair(std::uint64_t trial, double density_factor) {
  std::mt19937_64 rng(7000 + trial);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScanPair p;
  p.truth.rotation = testing::rotation_about(testing::random_unit(rng), deg_to_rad(10.0) * std::abs(u(rng)));
  Vec3 shift(u(rng), u(rng), u(rng));
  p.truth.translation = shift.normalized() * 0.2 * std::abs(u(rng));
  const double density = kScanDensity / density_factor;
  const SyntheticScene a = make_scene(Layout::Box, 0.003, 0.0, density, 2 * trial);
  const SyntheticScene b = make_scene(Layout::Box, 0.003, 0.0, density, 2 * trial + 1);
  const RigidMotion inv = p.truth.inverse();
  PipelineConfig config;
  config.seed = trial;
  p.dst = prepare_cloud(a.cloud, config);
  p.src = prepare_cloud(transformed(b.cloud, inv.rotation, inv.translation), config);
  p.dst_corners = detect_corners(p.dst, config);
  p.src_corners = detect_corners(p.src, config);
  return p;
}

// Runs every mode the corner matches allow: all matches, first two, first
// one, none.
void register_pair(const ScanPair& p, std::array<ModeStats, 4>& stats, int& multi_ok, int& multi_zero_iter) {
  const IcpParams params;
  const auto pairs = match_corners(p.src_corners, p.dst_corners, nullptr, params);
  std::vector<CornerMatch> all;
  for (const auto& [s, d] : pairs) all.push_back({p.src_corners[s].position, p.dst_corners[d].position});
  const std::array<std::size_t, 4> take = {all.size(), std::min<std::size_t>(2, all.size()),
                                           std::min<std::size_t>(1, all.size()), 0};
  for (std::size_t mode = 0; mode < 4; ++mode) {
    const std::vector<CornerMatch> use(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take[mode]));
    IcpResult r;
    try {
      r = constrained_icp(p.src, p.dst, use, params);
    } catch (const Error&) {
      r.motion = RigidMotion{};
      r.iterations = params.max_iterations;
    }
    const PoseError e = compute_rpe(r.motion, p.truth);
    const auto kind = static_cast<std::size_t>(r.constraint.kind);
    if (mode == 0 && r.constraint.kind == ConstraintKind::MultiCorner0DoF) {
      multi_ok += e.rotation < deg_to_rad(0.5) && e.translation < 0.02;
      multi_zero_iter += r.iterations == 0;
    }
    if (take[mode] != use.size() || (mode > 0 && take[mode] == take[mode - 1])) continue;
    stats[kind].rpe_rot.push_back(e.rotation);
    stats[kind].rpe_trans.push_back(e.translation);
    stats[kind].iterations.push_back(r.iterations);
  }
}

struct RegistrationSummary {
  std::array<ModeStats, 4> modes;
  std::size_t points = 0;  // summed over target scans
  std::size_t trials = 0;
  int multi_ok = 0;
  int multi_zero_iter = 0;
};

RegistrationSummary run_registration(int trials, double density_factor) {
  RegistrationSummary s;
  for (int t = 0; t < trials; ++t) {
    const ScanPair p = make_pair(static_cast<std::uint64_t>(t), density_factor);
    s.points += p.dst.size();
    ++s.trials;
    register_pair(p, s.modes, s.multi_ok, s.multi_zero_iter);
  }
  return s;
}

constexpr std::size_t kFull = static_cast<std::size_t>(ConstraintKind::Full6DoF);
constexpr std::size_t kOne = static_cast<std::size_t>(ConstraintKind::OneCorner3DoF);
constexpr std::size_t kTwo = static_cast<std::size_t>(ConstraintKind::TwoCorner1DoF);
constexpr std::size_t kMulti = static_cast<std::size_t>(ConstraintKind::MultiCorner0DoF);

Verdict criterion_registration(const RegistrationSummary& s, int trials) {
  const double full = median(s.modes[kFull].iterations);
  const double one = median(s.modes[kOne].iterations);
  const double two = median(s.modes[kTwo].iterations);
  const bool pass = s.multi_ok >= (trials * 9 + 9) / 10 && s.multi_zero_iter == static_cast<int>(s.modes[kMulti].iterations.size()) &&
                    one <= full && two <= full;
  return {pass, format("MultiCorner0DoF within 0.5 deg / 2 cm in %d/%d trials (need %d), %d with 0 iterations; "
                       "median iterations one-corner %.1f, two-corner %.1f, full %.1f",
                       s.multi_ok, trials, (trials * 9 + 9) / 10, s.multi_zero_iter, one, two, full)};
}

// RPE combines rotation (degrees) and translation (centimeters) so that
// both count on the scale of the registration thresholds.
double combined_rpe(const ModeStats& m) {
  std::vector<double> v;
  for (std::size_t i = 0; i < m.rpe_rot.size(); ++i) v.push_back(rad_to_deg(m.rpe_rot[i]) / 0.5 + m.rpe_trans[i] / 0.02);
  return median(v);
}

Verdict criterion_downsampling(const RegistrationSummary& base, const RegistrationSummary& sparse) {
  bool pass = true;
  std::string detail;
  for (std::size_t k : {kOne, kTwo, kMulti}) {
    const double a = combined_rpe(base.modes[k]), b = combined_rpe(sparse.modes[k]);
    const double growth = b / a;
    pass = pass && growth <= 2.0;
    detail += format("%s %.3f -> %.3f (x%.2f); ", to_string(static_cast<ConstraintKind>(k)), a, b, growth);
  }
  detail += format("Full6DoF %.3f -> %.3f (report only)", combined_rpe(base.modes[kFull]), combined_rpe(sparse.modes[kFull]));
  return {pass, format("median normalized RPE at 8x lower scan density (%.1fx fewer prepared points, %zu -> %zu per scan): ",
                       static_cast<double>(base.points) / static_cast<double>(sparse.points), base.points / base.trials,
                       sparse.points / sparse.trials) + detail};
}

// ---- 8: performance ----------------------------------------------------

Verdict criterion_performance(const std::vector<DetectionRun>& runs, const std::vector<RefineRun>& refined) {
  std::vector<double> voting, refine;
  for (const auto& r : runs) voting.push_back(r.voting_ms);
  for (const auto& r : refined) refine.push_back(r.ms);
  const double worst_voting = *std::max_element(voting.begin(), voting.end());
  const double worst_refine = *std::max_element(refine.begin(), refine.end());
  return {worst_voting < 200.0 && worst_refine < 3000.0,
          format("voting + extraction on 2000 references: median %.1f ms, max %.1f ms (need 200); "
                 "refinement median %.1f ms, max %.1f ms (need 3000)",
                 median(voting), worst_voting, median(refine), worst_refine)};
}

// ---- 9: I/O and determinism --------------------------------------------

Verdict criterion_determinism() {
  const SyntheticScene s = make_scene(Layout::Box, 0.003, 0.05, 800.0, 91);
  std::ostringstream a, b;
  write_ply(s.cloud, a);
  std::istringstream in(a.str());
  const PointCloud back = read_ply(in);
  write_ply(back, b);
  bool exact = back.size() == s.cloud.size() && a.str() == b.str();
  for (std::size_t i = 0; exact && i < back.size(); ++i)
    exact = std::memcmp(back.points[i].position.data(), s.cloud.points[i].position.data(), 3 * sizeof(double)) == 0 &&
            std::memcmp(back.points[i].normal.data(), s.cloud.points[i].normal.data(), 3 * sizeof(double)) == 0;

  auto run_all = [&] {
    PipelineConfig config;
    config.seed = 3;
    const SyntheticScene synth = make_scene(Layout::Box, 0.003, 0.05, 800.0, 91);
    std::ostringstream ply;
    write_ply(synth.cloud, ply);
    const PointCloud prepared = prepare_cloud(synth.cloud, config);
    const Scene detected = detect_scene(prepared, config);
    const Scene refined = refine_scene(prepared, detected, config);
    const RegistrationOutcome reg =
        register_with_corners(prepared, prepared, refined.corners, refined.corners, config);
    const DetectionReport report = evaluate_planes(refined.graph.vertices, synth.truth.planes);
    std::ostringstream out;
    out << ply.str() << ground_truth_to_json(synth.truth) << graph_to_json(detected) << primitives_to_json(detected)
        << graph_to_json(refined) << primitives_to_json(refined) << report_to_json(report, nullptr);
    out.write(reinterpret_cast<const char*>(reg.icp.motion.matrix().data()), 16 * sizeof(double));
    return out.str();
  };
  const bool same = run_all() == run_all();
  return {exact && same, format("binary PLY round trip %s; synth/detect/refine/register/eval outputs %s across runs",
                                exact ? "bit-exact" : "NOT bit-exact", same ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<Verdict> verdicts(9);
  auto lap = start;
  auto report = [&](int n) {
    std::printf("%s criterion %d: %s [%.1f s]\n", verdicts[n - 1].pass ? "PASS" : "FAIL", n, verdicts[n - 1].detail.c_str(),
                elapsed_ms(lap) / 1000.0);
    lap = std::chrono::steady_clock::now();
    std::fflush(stdout);
  };

  std::vector<DetectionRun> runs;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) runs.push_back(detect_corner_room(seed));
  verdicts[0] = criterion_detection(runs);
  report(1);
  verdicts[1] = criterion_voting_oracle();
  report(2);
  std::vector<RefineRun> refined;
  verdicts[2] = criterion_orthogonality(runs, refined);
  report(3);
  verdicts[3] = criterion_gradients();
  report(4);
  verdicts[4] = criterion_corners();
  report(5);
  constexpr int kTrials = 50;
  const RegistrationSummary base = run_registration(kTrials, 1.0);
  verdicts[5] = criterion_registration(base, kTrials);
  report(6);
  const RegistrationSummary sparse = run_registration(kTrials, 8.0);
  verdicts[6] = criterion_downsampling(base, sparse);
  report(7);
  verdicts[7] = criterion_performance(runs, refined);
  report(8);
  verdicts[8] = criterion_determinism();
  report(9);

  const int failed = static_cast<int>(std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return !v.pass; }));
  std::printf("%d/9 criteria passed in %.1f s\n", 9 - failed, elapsed_ms(start) / 1000.0);
  return failed == 0 ? 0 : 1;
}
