#include "orthoplanes/pipeline.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "orthoplanes/error.hpp"

namespace orthoplanes {

namespace {

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end)
    throw Error(ErrorCode::InvalidArgument, "bad value for " + key + ": '" + text + "'");
  return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end)
    throw Error(ErrorCode::InvalidArgument, "bad value for " + key + ": '" + text + "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

// Lengths in meters, angles in degrees.
template <class Getter>
Field real(Getter g) {
  return {[g](PipelineConfig& c, const std::string& k, const std::string& v) { g(c) = parse_double(k, v); },
          [g](const PipelineConfig& c) { return format_double(g(const_cast<PipelineConfig&>(c))); }};
}

template <class Getter>
Field angle(Getter g) {
  return {[g](PipelineConfig& c, const std::string& k, const std::string& v) { g(c) = deg_to_rad(parse_double(k, v)); },
          [g](const PipelineConfig& c) { return format_double(rad_to_deg(g(const_cast<PipelineConfig&>(c)))); }};
}

template <class Getter>
Field count(Getter g) {
  return {[g](PipelineConfig& c, const std::string& k, const std::string& v) {
            g(c) = static_cast<std::remove_reference_t<decltype(g(c))>>(parse_count(k, v));
          },
          [g](const PipelineConfig& c) { return std::to_string(g(const_cast<PipelineConfig&>(c))); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"delta-n", angle([](PipelineConfig& c) -> double& { return c.detection.delta_n; })},
      {"tau-d", real([](PipelineConfig& c) -> double& { return c.detection.tau_d; })},
      {"n-refs", count([](PipelineConfig& c) -> std::size_t& { return c.detection.n_refs; })},
      {"k-pairs", count([](PipelineConfig& c) -> std::size_t& { return c.detection.k_pairs; })},
      {"theta-bin", angle([](PipelineConfig& c) -> double& { return c.detection.theta_bin; })},
      {"rho-bin", real([](PipelineConfig& c) -> double& { return c.detection.rho_bin; })},
      {"c-max", count([](PipelineConfig& c) -> int& { return c.detection.c_max; })},
      {"epsilon", real([](PipelineConfig& c) -> double& { return c.refinement.epsilon; })},
      {"lambda", real([](PipelineConfig& c) -> double& { return c.refinement.lambda; })},
      {"eps-n", angle([](PipelineConfig& c) -> double& { return c.refinement.eps_n; })},
      {"huber", real([](PipelineConfig& c) -> double& { return c.refinement.loss.scale; })},
      {"max-iterations", count([](PipelineConfig& c) -> int& { return c.refinement.max_iterations; })},
      {"d-min", real([](PipelineConfig& c) -> double& { return c.sampling.d_min; })},
      {"levels", count([](PipelineConfig& c) -> int& { return c.sampling.hierarchy_levels; })},
      {"seed", count([](PipelineConfig& c) -> std::uint64_t& { return c.seed; })},
      {"angle-tol", angle([](PipelineConfig& c) -> double& { return c.angle_tol; })},
      {"dist-tol", real([](PipelineConfig& c) -> double& { return c.dist_tol; })},
      {"normal-k", count([](PipelineConfig& c) -> std::size_t& { return c.normal_neighbors; })},
      {"max-variation", real([](PipelineConfig& c) -> double& { return c.max_surface_variation; })},
      {"merge-dist", real([](PipelineConfig& c) -> double& { return c.clustering.merge_dist; })},
      {"merge-angle", angle([](PipelineConfig& c) -> double& { return c.clustering.merge_angle; })},
      {"min-support", count([](PipelineConfig& c) -> std::size_t& { return c.clustering.min_support; })},
      {"icp-iterations", count([](PipelineConfig& c) -> int& { return c.icp.max_iterations; })},
      {"icp-radius", real([](PipelineConfig& c) -> double& { return c.icp.correspondence_radius; })},
      {"local-corners", count([](PipelineConfig& c) -> bool& { return c.local_corners; })},
      {"corner-radius", real([](PipelineConfig& c) -> double& { return c.icp.corner_match_radius; })},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

PlaneGraph drop_isolated(const PlaneGraph& g) {
  std::vector<std::size_t> remap(g.vertices.size(), static_cast<std::size_t>(-1));
  for (const auto& [a, b] : g.edges) remap[a] = remap[b] = 0;
  PlaneGraph out;
  for (std::size_t v = 0; v < g.vertices.size(); ++v) {
    if (remap[v] != 0) continue;
    remap[v] = out.vertices.size();
    out.vertices.push_back(g.vertices[v]);
  }
  for (const auto& [a, b] : g.edges) out.edges.insert({remap[a], remap[b]});
  return out;
}

void derive_corners(Scene& s) {
  s.corners.clear();
  s.corner_planes.clear();
  for (const CornerTriangle& t : s.triangles) {
    const auto& v = s.graph.vertices;
    const auto& ids = t.plane_indices;
    try {
      const CornerInit init = corner_from_planes(v[ids[0]], v[ids[1]], v[ids[2]]);
      s.corners.push_back(init.corner);
      s.corner_planes.push_back({ids[static_cast<std::size_t>(init.plane_order[0])],
                                 ids[static_cast<std::size_t>(init.plane_order[1])],
                                 ids[static_cast<std::size_t>(init.plane_order[2])]});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Singular) throw;
    }
  }
}

}  // namespace

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return k;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw Error(ErrorCode::InvalidArgument, "unknown setting '" + key + "'");
  it->second.set(*this, key, trim(value));
}

std::string PipelineConfig::get(const std::string& key) const {
  const auto it = fields().find(key);
  if (it == fields().end()) throw Error(ErrorCode::InvalidArgument, "unknown setting '" + key + "'");
  return it->second.get(*this);
}

void PipelineConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidArgument, path + ":" + std::to_string(lineno) + ": expected key=value");
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

PointCloud prepare_cloud(const PointCloud& cloud, const PipelineConfig& config) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "empty point cloud");
  const double d_min = config.sampling.d_min > 0.0 ? config.sampling.d_min : adaptive_d_min(cloud);
  PointCloud out = downsample(cloud, d_min);
  if (!out.has_normals) out = estimate_normals(out, config.normal_neighbors);
  if (config.max_surface_variation > 0.0 && out.size() >= config.normal_neighbors)
    flag_nonplanar(out, config.normal_neighbors, config.max_surface_variation);
  return out;
}

Scene scene_from_graph(PlaneGraph graph, double parallel_angle) {
  Scene s;
  s.graph = std::move(graph);
  s.bundles = reduce_parallel(s.graph, parallel_angle);
  s.triangles = enumerate_triangles(s.graph);
  s.lines = graph_lines(s.graph);
  derive_corners(s);
  return s;
}

Scene detect_scene(const PointCloud& prepared, const PipelineConfig& config) {
  const auto candidates = detect_opps(prepared, config.detection, config.seed);
  const PlaneClustering clusters = cluster_candidates(candidates, config.clustering);
  PlaneGraph graph = drop_isolated(build_graph(clusters, candidates, config.detection));
  return scene_from_graph(std::move(graph), config.detection.delta_n);
}

Scene refine_scene(const PointCloud& prepared, const Scene& scene, const PipelineConfig& config) {
  Scene s = scene;
  if (s.bundles.empty()) return s;
  const GraphFit fit = refine_graph(prepared, s.bundles, config.refinement);
  s.bundles = fit.bundles;
  for (const ParallelBundle& b : s.bundles)
    for (std::size_t l = 0; l < b.members.size(); ++l) s.graph.vertices[b.members[l]] = b.plane(l);
  s.lines = graph_lines(s.graph);
  derive_corners(s);
  if (config.local_corners) {
    for (Corner& c : s.corners) {
      const PointCloud support = select_corner_support(prepared, c, config.refinement.epsilon);
      try {
        c = refine_corner(support, c, config.refinement).corner;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientSupport) throw;
      }
    }
  }
  s.refined = true;
  s.converged = fit.converged;
  s.iterations = fit.iterations;
  s.max_edge_dot = fit.max_edge_dot;
  return s;
}

RegistrationOutcome register_with_corners(const PointCloud& src, const PointCloud& dst,
                                          const std::vector<Corner>& src_corners,
                                          const std::vector<Corner>& dst_corners,
                                          const PipelineConfig& config) {
  RegistrationOutcome out;
  out.source_corners = src_corners.size();
  out.target_corners = dst_corners.size();
  std::vector<CornerMatch> matches;
  for (const auto& [s, d] : match_corners(src_corners, dst_corners, nullptr, config.icp))
    matches.push_back({src_corners[s].position, dst_corners[d].position});
  out.icp = constrained_icp(src, dst, matches, config.icp);
  out.overlap = overlap_fraction(src, dst, out.icp.motion, config.icp.correspondence_radius);
  return out;
}

}  // namespace orthoplanes
