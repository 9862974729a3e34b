/* C interface to the orthoplanes library.
 *
 * Objects are opaque handles created by op_*_create/load/... and released
 * with the matching op_*_destroy. Every fallible call returns an op_status;
 * on failure op_last_error() holds a message for the calling thread.
 * Strings and buffers returned through out-parameters are owned by the
 * caller and released with op_free. */
#ifndef ORTHOPLANES_H
#define ORTHOPLANES_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ORTHOPLANES_BUILDING_LIBRARY)
#    define OP_API __declspec(dllexport)
#  else
#    define OP_API __declspec(dllimport)
#  endif
#else
#  define OP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum op_status {
  OP_OK = 0,
  OP_ERR_INVALID_ARGUMENT,
  OP_ERR_IO,
  OP_ERR_MALFORMED,
  OP_ERR_EMPTY_CLOUD,
  OP_ERR_TOO_FEW_POINTS,
  OP_ERR_NEAR_PARALLEL,
  OP_ERR_SINGULAR,
  OP_ERR_CONFLICTING_STRUCTURE,
  OP_ERR_INSUFFICIENT_SUPPORT,
  OP_ERR_EMPTY_ASSIGNMENT,
  OP_ERR_COLLINEAR,
  OP_ERR_TOO_FEW_CORNERS,
  OP_ERR_NO_OVERLAP,
  OP_ERR_INTERNAL
} op_status;

typedef enum op_constraint {
  OP_FULL_6DOF = 0,
  OP_ONE_CORNER_3DOF,
  OP_TWO_CORNER_1DOF,
  OP_MULTI_CORNER_0DOF
} op_constraint;

typedef struct op_cloud op_cloud;
typedef struct op_config op_config;
typedef struct op_scene op_scene;

/* Short status name such as "Io" or "Malformed". */
OP_API const char* op_status_name(op_status status);
OP_API const char* op_constraint_name(op_constraint mode);
OP_API const char* op_last_error(void);
OP_API const char* op_version(void);
OP_API void op_free(void* p);

/* ---- configuration -------------------------------------------------- */

OP_API op_status op_config_create(op_config** out);
OP_API void op_config_destroy(op_config* config);
/* Keys are the command-line flag names ("delta-n", "tau-d", ...); angles
 * in degrees, lengths in meters. */
OP_API op_status op_config_set(op_config* config, const char* key, const char* value);
OP_API op_status op_config_get(const op_config* config, const char* key, char** value);
/* Flat key=value file, '#' comments. */
OP_API op_status op_config_load_file(op_config* config, const char* path);
/* Newline-separated list of accepted keys. */
OP_API op_status op_config_keys(char** keys);

/* ---- point clouds --------------------------------------------------- */

OP_API op_status op_cloud_load(const char* path, op_cloud** out);
OP_API op_status op_cloud_read_memory(const void* data, size_t size, op_cloud** out);
OP_API op_status op_cloud_save(const op_cloud* cloud, const char* path, int binary);
OP_API op_status op_cloud_write_memory(const op_cloud* cloud, int binary, char** data, size_t* size);
/* xyz (and optional normals) as n consecutive triples. */
OP_API op_status op_cloud_from_arrays(const double* xyz, const double* normals, size_t n, op_cloud** out);
OP_API void op_cloud_destroy(op_cloud* cloud);
OP_API size_t op_cloud_size(const op_cloud* cloud);
OP_API int op_cloud_has_normals(const op_cloud* cloud);
OP_API op_status op_cloud_get_point(const op_cloud* cloud, size_t i, double xyz[3], double normal[3]);
/* Label of point i, -1 when unlabeled. */
OP_API int32_t op_cloud_label(const op_cloud* cloud, size_t i);
/* Applies a row-major 4x4 rigid transform in place. */
OP_API op_status op_cloud_transform(op_cloud* cloud, const double transform[16]);

typedef struct op_synth_spec {
  const char* layout; /* "corner-room", "two-walls", "box", "single-plane", "noise-ball" */
  double extent;
  double points_per_m2;
  double noise_sigma;
  double outlier_fraction;
  uint64_t seed;
} op_synth_spec;

/* Fills the defaults: corner-room, 2 m, 2500 points/m², no noise. */
OP_API void op_synth_spec_init(op_synth_spec* spec);
/* Generated cloud (labels = face index) and ground-truth JSON. */
OP_API op_status op_synth(const op_synth_spec* spec, op_cloud** cloud, char** ground_truth_json);

/* ---- detection and refinement --------------------------------------- */

/* Downsamples, estimates missing normals and detects orthogonal planes. */
OP_API op_status op_detect(const op_cloud* cloud, const op_config* config, op_scene** out);
/* Rebuilds a scene from the "vertices"/"edges" of a graph document. */
OP_API op_status op_scene_from_graph_json(const char* json, const op_config* config, op_scene** out);
OP_API op_status op_refine(const op_cloud* cloud, const op_scene* scene, const op_config* config,
                           op_scene** out);
OP_API void op_scene_destroy(op_scene* scene);
OP_API size_t op_scene_plane_count(const op_scene* scene);
OP_API size_t op_scene_edge_count(const op_scene* scene);
OP_API size_t op_scene_corner_count(const op_scene* scene);
/* plane = {nx, ny, nz, d} */
OP_API op_status op_scene_get_plane(const op_scene* scene, size_t i, double plane[4]);
/* record = row-major frame (9), offsets (3), position (3) */
OP_API op_status op_scene_get_corner(const op_scene* scene, size_t i, double record[15]);
OP_API op_status op_scene_graph_json(const op_scene* scene, char** json);
OP_API op_status op_scene_primitives_json(const op_scene* scene, char** json);
/* Copy of `cloud` whose labels are the graph vertex each point belongs to. */
OP_API op_status op_scene_label_cloud(const op_scene* scene, const op_cloud* cloud,
                                      const op_config* config, op_cloud** labeled);
/* Corner records (15 doubles each) from a primitives or ground-truth document. */
OP_API op_status op_corners_from_json(const char* json, double** records, size_t* count);

/* ---- registration --------------------------------------------------- */

typedef struct op_registration {
  double transform[16]; /* row-major, maps source onto target */
  op_constraint mode;
  int iterations;
  int converged;
  double final_cost;
  size_t matches;
  size_t source_corners;
  size_t target_corners;
  double overlap;
} op_registration;

/* Corner arrays hold 15-double records and may be empty. Both clouds are
 * prepared as in op_detect before ICP. */
OP_API op_status op_register(const op_cloud* source, const op_cloud* target, const double* source_corners,
                             size_t n_source, const double* target_corners, size_t n_target,
                             const op_config* config, op_registration* out);

/* ---- evaluation ----------------------------------------------------- */

typedef struct op_report {
  double precision;
  int precision_defined;
  double recall;
  size_t correct;
  size_t noise;
  size_t miss;
} op_report;

/* Matches detected planes (and lines, when both documents list them)
 * against ground truth with the config's angle-tol and dist-tol. */
OP_API op_status op_evaluate(const char* detected_json, const char* ground_truth_json,
                             const op_config* config, op_report* planes, op_report* lines,
                             int* has_lines, char** report_json);

typedef struct op_bench_result {
  size_t points;
  size_t references;
  size_t planes;
  double voting_ms;
  double refinement_ms;
} op_bench_result;

/* Times voting plus candidate extraction and graph refinement on a
 * generated scene. */
OP_API op_status op_bench(const op_synth_spec* spec, const op_config* config, op_bench_result* out);

#ifdef __cplusplus
}
#endif

#endif
