#include "orthoplanes/serialization.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "orthoplanes/error.hpp"

namespace orthoplanes {

using nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json plane(const Plane& p) { return json::array({p.normal.x(), p.normal.y(), p.normal.z(), p.offset}); }

json line(const Line3D& l) { return {{"direction", vec(l.direction)}, {"anchor", vec(l.anchor)}}; }

json corner(const Corner& c) {
  json frame = json::array();
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) frame.push_back(c.frame(r, k));
  return {{"frame", frame}, {"offsets", vec(c.offsets)}, {"position", vec(c.position)}};
}

json edges(const std::set<Edge>& es) {
  json out = json::array();
  for (const auto& [a, b] : es) out.push_back(json::array({a, b}));
  return out;
}

Vec3 read_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::Malformed, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Plane read_plane(const json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::Malformed, "expected a plane [nx, ny, nz, d]");
  Plane p{{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()}, j[3].get<double>()};
  const double n = p.normal.norm();
  if (!(n > 0.0)) throw Error(ErrorCode::Malformed, "plane normal is zero");
  p.normal /= n;
  p.offset /= n;
  return p;
}

Line3D read_line(const json& j) {
  Line3D l{read_vec(j.at("direction")).normalized(), read_vec(j.at("anchor"))};
  return l;
}

Corner read_corner(const json& j) {
  const json& f = j.at("frame");
  if (!f.is_array() || f.size() != 9) throw Error(ErrorCode::Malformed, "corner frame needs 9 values");
  Corner c;
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) c.frame(r, k) = f[static_cast<std::size_t>(3 * r + k)].get<double>();
  c.offsets = read_vec(j.at("offsets"));
  c.position = j.contains("position") ? read_vec(j.at("position")) : intersect_three_planes(c.frame, c.offsets);
  return c;
}

std::set<Edge> read_edges(const json& j, std::size_t n_vertices) {
  std::set<Edge> out;
  for (const json& e : j) {
    if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::Malformed, "edge needs two vertex indices");
    const auto a = e[0].get<std::size_t>(), b = e[1].get<std::size_t>();
    if (a >= n_vertices || b >= n_vertices || a == b) throw Error(ErrorCode::Malformed, "edge index out of range");
    out.insert(a < b ? Edge{a, b} : Edge{b, a});
  }
  return out;
}

template <class F>
auto parse(const std::string& text, F body) {
  try {
    return body(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Malformed, std::string("invalid JSON document: ") + e.what());
  }
}

}  // namespace

std::string graph_to_json(const Scene& scene) {
  json j;
  j["vertices"] = json::array();
  for (const Plane& p : scene.graph.vertices) j["vertices"].push_back(plane(p));
  j["edges"] = edges(scene.graph.edges);
  j["bundles"] = json::array();
  for (const ParallelBundle& b : scene.bundles)
    j["bundles"].push_back({{"normal", vec(b.normal)}, {"distances", b.distances}, {"members", b.members}});
  j["triangles"] = json::array();
  for (const CornerTriangle& t : scene.triangles) j["triangles"].push_back(t.plane_indices);
  j["refined"] = scene.refined;
  if (scene.refined) {
    j["converged"] = scene.converged;
    j["iterations"] = scene.iterations;
    j["max_edge_dot"] = scene.max_edge_dot;
  }
  return j.dump(2) + "\n";
}

std::string primitives_to_json(const Scene& scene) {
  json j;
  j["planes"] = json::array();
  for (const Plane& p : scene.graph.vertices) j["planes"].push_back(plane(p));
  j["lines"] = json::array();
  for (const Line3D& l : scene.lines) j["lines"].push_back(line(l));
  j["corners"] = json::array();
  for (std::size_t i = 0; i < scene.corners.size(); ++i) {
    json c = corner(scene.corners[i]);
    if (i < scene.corner_planes.size()) c["planes"] = scene.corner_planes[i];
    j["corners"].push_back(c);
  }
  return j.dump(2) + "\n";
}

std::string ground_truth_to_json(const GroundTruth& truth) {
  json j;
  j["planes"] = json::array();
  for (const Plane& p : truth.planes) j["planes"].push_back(plane(p));
  j["edges"] = edges(truth.edges);
  j["lines"] = json::array();
  for (const Line3D& l : truth.lines) j["lines"].push_back(line(l));
  j["corners"] = json::array();
  for (std::size_t i = 0; i < truth.corners.size(); ++i) {
    json c = corner(truth.corners[i]);
    if (i < truth.corner_planes.size()) c["planes"] = truth.corner_planes[i];
    j["corners"].push_back(c);
  }
  return j.dump(2) + "\n";
}

std::string report_to_json(const DetectionReport& planes, const DetectionReport* lines) {
  auto one = [](const DetectionReport& r) {
    json j;
    j["precision"] = r.precision_defined ? json(r.precision) : json(nullptr);
    j["recall"] = r.recall;
    j["correct"] = r.correct;
    j["noise"] = r.noise;
    j["miss"] = r.miss;
    j["matches"] = json::array();
    for (const auto& [d, g] : r.matches) j["matches"].push_back({{"detected", d}, {"gt", g}});
    return j;
  };
  json j;
  j["planes"] = one(planes);
  if (lines) j["lines"] = one(*lines);
  return j.dump(2) + "\n";
}

PlaneGraph graph_from_json(const std::string& text) {
  return parse(text, [](const json& j) {
    PlaneGraph g;
    for (const json& v : j.at("vertices")) g.vertices.push_back(read_plane(v));
    if (j.contains("edges")) g.edges = read_edges(j.at("edges"), g.vertices.size());
    return g;
  });
}

GroundTruth ground_truth_from_json(const std::string& text) {
  return parse(text, [](const json& j) {
    GroundTruth t;
    for (const json& p : j.at("planes")) t.planes.push_back(read_plane(p));
    if (j.contains("edges")) t.edges = read_edges(j.at("edges"), t.planes.size());
    if (j.contains("lines"))
      for (const json& l : j.at("lines")) t.lines.push_back(read_line(l));
    if (j.contains("corners"))
      for (const json& c : j.at("corners")) {
        t.corners.push_back(read_corner(c));
        if (c.contains("planes")) t.corner_planes.push_back(c.at("planes").get<std::array<std::size_t, 3>>());
      }
    return t;
  });
}

Primitives primitives_from_json(const std::string& text) {
  return parse(text, [](const json& j) {
    Primitives p;
    const json& planes = j.contains("planes") ? j.at("planes") : j.at("vertices");
    for (const json& v : planes) p.planes.push_back(read_plane(v));
    if (j.contains("lines"))
      for (const json& l : j.at("lines")) p.lines.push_back(read_line(l));
    if (j.contains("corners"))
      for (const json& c : j.at("corners")) p.corners.push_back(read_corner(c));
    return p;
  });
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace orthoplanes
