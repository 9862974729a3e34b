#include "orthoplanes.h"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include "orthoplanes/error.hpp"
#include "orthoplanes/evaluation.hpp"
#include "orthoplanes/pipeline.hpp"
#include "orthoplanes/point_cloud_io.hpp"
#include "orthoplanes/serialization.hpp"
#include "orthoplanes/synthetic.hpp"

namespace op = orthoplanes;

struct op_cloud {
  op::PointCloud cloud;
};
struct op_config {
  op::PipelineConfig config;
};
struct op_scene {
  op::Scene scene;
};

namespace {

thread_local std::string last_error;

op_status status_of(op::ErrorCode code) {
  switch (code) {
    case op::ErrorCode::InvalidArgument: return OP_ERR_INVALID_ARGUMENT;
    case op::ErrorCode::Io: return OP_ERR_IO;
    case op::ErrorCode::Malformed: return OP_ERR_MALFORMED;
    case op::ErrorCode::EmptyCloud: return OP_ERR_EMPTY_CLOUD;
    case op::ErrorCode::TooFewPoints: return OP_ERR_TOO_FEW_POINTS;
    case op::ErrorCode::NearParallel: return OP_ERR_NEAR_PARALLEL;
    case op::ErrorCode::Singular: return OP_ERR_SINGULAR;
    case op::ErrorCode::ConflictingStructure: return OP_ERR_CONFLICTING_STRUCTURE;
    case op::ErrorCode::InsufficientSupport: return OP_ERR_INSUFFICIENT_SUPPORT;
    case op::ErrorCode::EmptyAssignment: return OP_ERR_EMPTY_ASSIGNMENT;
    case op::ErrorCode::Collinear: return OP_ERR_COLLINEAR;
    case op::ErrorCode::TooFewCorners: return OP_ERR_TOO_FEW_CORNERS;
    case op::ErrorCode::NoOverlap: return OP_ERR_NO_OVERLAP;
  }
  return OP_ERR_INTERNAL;
}

op_status fail(op_status s, const std::string& message) {
  last_error = message;
  return s;
}

// Runs `body` with every exception mapped onto a status code.
template <class F>
op_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return OP_OK;
  } catch (const op::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(OP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(OP_ERR_INTERNAL, e.what());
  }
}

#define OP_REQUIRE(cond)                                                      \
  do {                                                                        \
    if (!(cond)) return fail(OP_ERR_INVALID_ARGUMENT, "null or invalid argument: " #cond); \
  } while (0)

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const op::PipelineConfig& config_or_default(const op_config* c) {
  static const op::PipelineConfig defaults;
  return c ? c->config : defaults;
}

void write_corner(const op::Corner& c, double* rec) {
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) rec[3 * r + k] = c.frame(r, k);
  for (int k = 0; k < 3; ++k) {
    rec[9 + k] = c.offsets[k];
    rec[12 + k] = c.position[k];
  }
}

std::vector<op::Corner> read_corners(const double* recs, std::size_t n) {
  std::vector<op::Corner> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* rec = recs + 15 * i;
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) out[i].frame(r, k) = rec[3 * r + k];
    for (int k = 0; k < 3; ++k) {
      out[i].offsets[k] = rec[9 + k];
      out[i].position[k] = rec[12 + k];
    }
  }
  return out;
}

op_report summary(const op::DetectionReport& r) {
  return {r.precision, r.precision_defined ? 1 : 0, r.recall, r.correct, r.noise, r.miss};
}

op::SyntheticSpec synth_spec(const op_synth_spec& s) {
  op::SyntheticSpec spec;
  spec.layout = op::parse_layout(s.layout ? s.layout : "corner-room");
  spec.extent = s.extent;
  spec.points_per_m2 = s.points_per_m2;
  spec.noise_sigma = s.noise_sigma;
  spec.outlier_fraction = s.outlier_fraction;
  spec.seed = s.seed;
  return spec;
}

}  // namespace

extern "C" {

const char* op_status_name(op_status status) {
  switch (status) {
    case OP_OK: return "Ok";
    case OP_ERR_INTERNAL: return "Internal";
    default: break;
  }
  if (status > OP_OK && status < OP_ERR_INTERNAL)
    return op::to_string(static_cast<op::ErrorCode>(static_cast<int>(status) - 1));
  return "Unknown";
}

const char* op_constraint_name(op_constraint mode) {
  if (mode < OP_FULL_6DOF || mode > OP_MULTI_CORNER_0DOF) return "Unknown";
  return op::to_string(static_cast<op::ConstraintKind>(mode));
}

const char* op_last_error(void) { return last_error.c_str(); }
const char* op_version(void) { return "0.1.0"; }
void op_free(void* p) { std::free(p); }

op_status op_config_create(op_config** out) {
  OP_REQUIRE(out);
  return guarded([&] { *out = new op_config(); });
}

void op_config_destroy(op_config* config) { delete config; }

op_status op_config_set(op_config* config, const char* key, const char* value) {
  OP_REQUIRE(config && key && value);
  return guarded([&] { config->config.set(key, value); });
}

op_status op_config_get(const op_config* config, const char* key, char** value) {
  OP_REQUIRE(config && key && value);
  return guarded([&] { *value = copy_string(config->config.get(key)); });
}

op_status op_config_load_file(op_config* config, const char* path) {
  OP_REQUIRE(config && path);
  return guarded([&] { config->config.load_file(path); });
}

op_status op_config_keys(char** keys) {
  OP_REQUIRE(keys);
  return guarded([&] {
    std::string all;
    for (const auto& k : op::PipelineConfig::keys()) all += k + "\n";
    *keys = copy_string(all);
  });
}

op_status op_cloud_load(const char* path, op_cloud** out) {
  OP_REQUIRE(path && out);
  return guarded([&] { *out = new op_cloud{op::load_point_cloud(path)}; });
}

op_status op_cloud_read_memory(const void* data, size_t size, op_cloud** out) {
  OP_REQUIRE((data || size == 0) && out);
  return guarded([&] {
    std::istringstream in(std::string(static_cast<const char*>(data), size));
    *out = new op_cloud{op::read_ply(in)};
  });
}

op_status op_cloud_save(const op_cloud* cloud, const char* path, int binary) {
  OP_REQUIRE(cloud && path);
  return guarded([&] {
    op::save_point_cloud(cloud->cloud, path, binary ? op::PlyFormat::BinaryLittleEndian : op::PlyFormat::Ascii);
  });
}

op_status op_cloud_write_memory(const op_cloud* cloud, int binary, char** data, size_t* size) {
  OP_REQUIRE(cloud && data && size);
  return guarded([&] {
    std::ostringstream out;
    op::write_ply(cloud->cloud, out, binary ? op::PlyFormat::BinaryLittleEndian : op::PlyFormat::Ascii);
    const std::string s = out.str();
    *data = copy_string(s);
    *size = s.size();
  });
}

op_status op_cloud_from_arrays(const double* xyz, const double* normals, size_t n, op_cloud** out) {
  OP_REQUIRE((xyz || n == 0) && out);
  return guarded([&] {
    auto* c = new op_cloud();
    c->cloud.has_normals = normals != nullptr;
    c->cloud.points.resize(n);
    for (size_t i = 0; i < n; ++i) {
      c->cloud.points[i].position = op::Vec3(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
      if (normals) c->cloud.points[i].normal = op::Vec3(normals[3 * i], normals[3 * i + 1], normals[3 * i + 2]).normalized();
    }
    *out = c;
  });
}

void op_cloud_destroy(op_cloud* cloud) { delete cloud; }

size_t op_cloud_size(const op_cloud* cloud) { return cloud ? cloud->cloud.size() : 0; }

int op_cloud_has_normals(const op_cloud* cloud) { return cloud && cloud->cloud.has_normals ? 1 : 0; }

op_status op_cloud_get_point(const op_cloud* cloud, size_t i, double xyz[3], double normal[3]) {
  OP_REQUIRE(cloud && i < cloud->cloud.size());
  const auto& p = cloud->cloud.points[i];
  for (int k = 0; k < 3; ++k) {
    if (xyz) xyz[k] = p.position[k];
    if (normal) normal[k] = p.normal[k];
  }
  return OP_OK;
}

int32_t op_cloud_label(const op_cloud* cloud, size_t i) {
  if (!cloud || i >= cloud->cloud.labels.size()) return -1;
  return cloud->cloud.labels[i];
}

op_status op_cloud_transform(op_cloud* cloud, const double transform[16]) {
  OP_REQUIRE(cloud && transform);
  return guarded([&] {
    op::Mat3 R;
    op::Vec3 t;
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) R(r, k) = transform[4 * r + k];
      t[r] = transform[4 * r + 3];
    }
    if ((R.transpose() * R - op::Mat3::Identity()).norm() > 1e-6 || R.determinant() < 0.0)
      throw op::Error(op::ErrorCode::InvalidArgument, "transform is not a rigid motion");
    cloud->cloud = op::transformed(cloud->cloud, R, t);
  });
}

void op_synth_spec_init(op_synth_spec* spec) {
  if (!spec) return;
  const op::SyntheticSpec d;
  spec->layout = "corner-room";
  spec->extent = d.extent;
  spec->points_per_m2 = d.points_per_m2;
  spec->noise_sigma = d.noise_sigma;
  spec->outlier_fraction = d.outlier_fraction;
  spec->seed = d.seed;
}

op_status op_synth(const op_synth_spec* spec, op_cloud** cloud, char** ground_truth_json) {
  OP_REQUIRE(spec && cloud);
  return guarded([&] {
    op::SyntheticScene s = op::generate_synthetic_scene(synth_spec(*spec));
    char* gt = ground_truth_json ? copy_string(op::ground_truth_to_json(s.truth)) : nullptr;
    *cloud = new op_cloud{std::move(s.cloud)};
    if (ground_truth_json) *ground_truth_json = gt;
  });
}

op_status op_detect(const op_cloud* cloud, const op_config* config, op_scene** out) {
  OP_REQUIRE(cloud && out);
  return guarded([&] {
    const auto& cfg = config_or_default(config);
    const op::PointCloud prepared = op::prepare_cloud(cloud->cloud, cfg);
    *out = new op_scene{op::detect_scene(prepared, cfg)};
  });
}

op_status op_scene_from_graph_json(const char* json, const op_config* config, op_scene** out) {
  OP_REQUIRE(json && out);
  return guarded([&] {
    const auto& cfg = config_or_default(config);
    *out = new op_scene{op::scene_from_graph(op::graph_from_json(json), cfg.detection.delta_n)};
  });
}

op_status op_refine(const op_cloud* cloud, const op_scene* scene, const op_config* config, op_scene** out) {
  OP_REQUIRE(cloud && scene && out);
  return guarded([&] {
    const auto& cfg = config_or_default(config);
    const op::PointCloud prepared = op::prepare_cloud(cloud->cloud, cfg);
    *out = new op_scene{op::refine_scene(prepared, scene->scene, cfg)};
  });
}

void op_scene_destroy(op_scene* scene) { delete scene; }

size_t op_scene_plane_count(const op_scene* scene) { return scene ? scene->scene.graph.vertices.size() : 0; }
size_t op_scene_edge_count(const op_scene* scene) { return scene ? scene->scene.graph.edges.size() : 0; }
size_t op_scene_corner_count(const op_scene* scene) { return scene ? scene->scene.corners.size() : 0; }

op_status op_scene_get_plane(const op_scene* scene, size_t i, double plane[4]) {
  OP_REQUIRE(scene && plane && i < scene->scene.graph.vertices.size());
  const op::Plane& p = scene->scene.graph.vertices[i];
  for (int k = 0; k < 3; ++k) plane[k] = p.normal[k];
  plane[3] = p.offset;
  return OP_OK;
}

op_status op_scene_get_corner(const op_scene* scene, size_t i, double record[15]) {
  OP_REQUIRE(scene && record && i < scene->scene.corners.size());
  write_corner(scene->scene.corners[i], record);
  return OP_OK;
}

op_status op_scene_graph_json(const op_scene* scene, char** json) {
  OP_REQUIRE(scene && json);
  return guarded([&] { *json = copy_string(op::graph_to_json(scene->scene)); });
}

op_status op_scene_primitives_json(const op_scene* scene, char** json) {
  OP_REQUIRE(scene && json);
  return guarded([&] { *json = copy_string(op::primitives_to_json(scene->scene)); });
}

op_status op_scene_label_cloud(const op_scene* scene, const op_cloud* cloud, const op_config* config,
                               op_cloud** labeled) {
  OP_REQUIRE(scene && cloud && labeled);
  return guarded([&] {
    const auto& cfg = config_or_default(config);
    auto* out = new op_cloud{cloud->cloud};
    out->cloud.labels = op::label_points(cloud->cloud, scene->scene.bundles, cfg.dist_tol, cfg.refinement.eps_n);
    *labeled = out;
  });
}

op_status op_corners_from_json(const char* json, double** records, size_t* count) {
  OP_REQUIRE(json && records && count);
  return guarded([&] {
    const op::Primitives p = op::primitives_from_json(json);
    double* buf = static_cast<double*>(std::malloc(sizeof(double) * 15 * (p.corners.size() + 1)));
    if (!buf) throw std::bad_alloc();
    for (std::size_t i = 0; i < p.corners.size(); ++i) write_corner(p.corners[i], buf + 15 * i);
    *records = buf;
    *count = p.corners.size();
  });
}

op_status op_register(const op_cloud* source, const op_cloud* target, const double* source_corners,
                      size_t n_source, const double* target_corners, size_t n_target,
                      const op_config* config, op_registration* out) {
  OP_REQUIRE(source && target && out);
  OP_REQUIRE(source_corners || n_source == 0);
  OP_REQUIRE(target_corners || n_target == 0);
  return guarded([&] {
    const auto& cfg = config_or_default(config);
    const op::PointCloud src = op::prepare_cloud(source->cloud, cfg);
    const op::PointCloud dst = op::prepare_cloud(target->cloud, cfg);
    const op::RegistrationOutcome r = op::register_with_corners(
        src, dst, read_corners(source_corners, n_source), read_corners(target_corners, n_target), cfg);
    const Eigen::Matrix4d m = r.icp.motion.matrix();
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k) out->transform[4 * i + k] = m(i, k);
    out->mode = static_cast<op_constraint>(r.icp.constraint.kind);
    out->iterations = r.icp.iterations;
    out->converged = r.icp.converged ? 1 : 0;
    out->final_cost = r.icp.final_cost;
    out->matches = r.icp.constraint.anchors.size();
    out->source_corners = r.source_corners;
    out->target_corners = r.target_corners;
    out->overlap = r.overlap;
  });
}

op_status op_evaluate(const char* detected_json, const char* ground_truth_json, const op_config* config,
                      op_report* planes, op_report* lines, int* has_lines, char** report_json) {
  OP_REQUIRE(detected_json && ground_truth_json);
  return guarded([&] {
    const auto& cfg = config_or_default(config);
    const op::Primitives det = op::primitives_from_json(detected_json);
    const op::GroundTruth gt = op::ground_truth_from_json(ground_truth_json);
    const op::DetectionReport pr = op::evaluate_planes(det.planes, gt.planes, cfg.angle_tol, cfg.dist_tol);
    const bool with_lines = !gt.lines.empty();
    op::DetectionReport lr;
    if (with_lines) lr = op::evaluate_lines(det.lines, gt.lines, cfg.dist_tol);
    if (planes) *planes = summary(pr);
    if (lines && with_lines) *lines = summary(lr);
    if (has_lines) *has_lines = with_lines ? 1 : 0;
    if (report_json) *report_json = copy_string(op::report_to_json(pr, with_lines ? &lr : nullptr));
  });
}

op_status op_bench(const op_synth_spec* spec, const op_config* config, op_bench_result* out) {
  OP_REQUIRE(out);
  return guarded([&] {
    op_synth_spec s;
    op_synth_spec_init(&s);
    if (spec) s = *spec;
    const auto& cfg = config_or_default(config);
    const op::SyntheticScene scene = op::generate_synthetic_scene(synth_spec(s));
    const op::PointCloud prepared = op::prepare_cloud(scene.cloud, cfg);
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const op::Scene detected = op::detect_scene(prepared, cfg);
    const auto t1 = clock::now();
    const op::Scene refined = op::refine_scene(prepared, detected, cfg);
    const auto t2 = clock::now();
    out->points = prepared.size();
    out->references = std::min(cfg.detection.n_refs, prepared.size());
    out->planes = refined.graph.vertices.size();
    out->voting_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out->refinement_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
  });
}

}  // extern "C"
