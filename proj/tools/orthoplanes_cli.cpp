// Command-line front end. Talks to the library only through orthoplanes.h.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "orthoplanes.h"

namespace {

struct Failure {
  op_status status;
  std::string message;
};

void check(op_status s) {
  if (s != OP_OK) throw Failure{s, op_last_error()};
}

struct Free {
  void operator()(void* p) const { op_free(p); }
};
using CString = std::unique_ptr<char, Free>;

struct CloudDeleter {
  void operator()(op_cloud* c) const { op_cloud_destroy(c); }
};
struct SceneDeleter {
  void operator()(op_scene* s) const { op_scene_destroy(s); }
};
struct ConfigDeleter {
  void operator()(op_config* c) const { op_config_destroy(c); }
};
using Cloud = std::unique_ptr<op_cloud, CloudDeleter>;
using Scene = std::unique_ptr<op_scene, SceneDeleter>;
using Config = std::unique_ptr<op_config, ConfigDeleter>;

std::string read_all(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{OP_ERR_IO, "cannot open " + path};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::string& path, const char* data, std::size_t size) {
  if (path == "-") {
    std::cout.write(data, static_cast<std::streamsize>(size));
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{OP_ERR_IO, "cannot write " + path};
  out.write(data, static_cast<std::streamsize>(size));
  if (!out) throw Failure{OP_ERR_IO, "write failed for " + path};
}

void write_all(const std::string& path, const std::string& text) { write_all(path, text.data(), text.size()); }

Cloud load_cloud(const std::string& path) {
  op_cloud* c = nullptr;
  if (path == "-") {
    const std::string data = read_all(path);
    check(op_cloud_read_memory(data.data(), data.size(), &c));
  } else {
    check(op_cloud_load(path.c_str(), &c));
  }
  return Cloud(c);
}

void save_cloud(const op_cloud* cloud, const std::string& path, bool binary) {
  char* data = nullptr;
  std::size_t size = 0;
  check(op_cloud_write_memory(cloud, binary ? 1 : 0, &data, &size));
  CString owned(data);
  write_all(path, data, size);
}

// Pipeline flags shared by several subcommands; values stay strings and are
// handed to the library, which owns parsing and units.
struct PipelineFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "flat key=value file; flags override it");
    char* keys = nullptr;
    check(op_config_keys(&keys));
    CString owned(keys);
    std::istringstream in(keys);
    for (std::string key; std::getline(in, key);)
      if (!key.empty() && key != "seed") app->add_option("--" + key, values[key]);
    app->add_option("--seed", values["seed"], "random seed");
  }

  Config build() const {
    op_config* c = nullptr;
    check(op_config_create(&c));
    Config cfg(c);
    if (!config_file.empty()) check(op_config_load_file(c, config_file.c_str()));
    for (const auto& [k, v] : values)
      if (!v.empty()) check(op_config_set(c, k.c_str(), v.c_str()));
    return cfg;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string scene_json(const op_scene* s, bool graph) {
  char* text = nullptr;
  check(graph ? op_scene_graph_json(s, &text) : op_scene_primitives_json(s, &text));
  CString owned(text);
  return text;
}

void emit_scene(const op_scene* scene, const std::string& prefix) {
  if (prefix.empty()) {
    write_all("-", scene_json(scene, false));
    return;
  }
  write_all(prefix + "_graph.json", scene_json(scene, true));
  write_all(prefix + "_primitives.json", scene_json(scene, false));
}

std::vector<double> scene_corners(const op_scene* scene) {
  std::vector<double> recs(15 * op_scene_corner_count(scene));
  for (std::size_t i = 0; i < op_scene_corner_count(scene); ++i) check(op_scene_get_corner(scene, i, &recs[15 * i]));
  return recs;
}

std::vector<double> corners_from_file(const std::string& path) {
  const std::string text = read_all(path);
  double* recs = nullptr;
  std::size_t n = 0;
  check(op_corners_from_json(text.c_str(), &recs, &n));
  std::unique_ptr<double, Free> owned(recs);
  return std::vector<double>(recs, recs + 15 * n);
}

// Corners of a cloud via detection and refinement; an empty list when the
// cloud shows no usable structure.
std::vector<double> detect_corners(const op_cloud* cloud, const op_config* cfg, const std::string& name) {
  op_scene* raw = nullptr;
  if (op_detect(cloud, cfg, &raw) != OP_OK) {
    std::cerr << "orthoplanes: note: no structure detected in " << name << " (" << op_last_error() << ")\n";
    return {};
  }
  Scene detected(raw);
  op_scene* refined = nullptr;
  if (op_refine(cloud, detected.get(), cfg, &refined) == OP_OK) {
    Scene r(refined);
    return scene_corners(r.get());
  }
  return scene_corners(detected.get());
}

std::string report_row(const char* what, const op_report& r) {
  std::ostringstream out;
  out << what << '\t' << (r.precision_defined ? fixed(r.precision, 3) : std::string("n/a")) << '\t'
      << fixed(r.recall, 3) << '\t' << r.correct << '\t' << r.noise << '\t' << r.miss << '\n';
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orthogonal plane detection, refinement and corner-assisted registration"};
  app.require_subcommand(1);
  app.set_version_flag("--version", op_version());

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
  op_synth_spec spec;
  op_synth_spec_init(&spec);
  std::string layout = "corner-room", synth_out = "-", synth_gt;
  bool synth_ascii = false;
  synth->add_option("layout", layout, "corner-room, two-walls, box, single-plane, noise-ball")->required();
  synth->add_option("--extent", spec.extent, "face size in meters");
  synth->add_option("--density", spec.points_per_m2, "points per square meter");
  synth->add_option("--sigma", spec.noise_sigma, "noise along the face normal, meters");
  synth->add_option("--outliers", spec.outlier_fraction, "fraction of uniform outliers");
  synth->add_option("--seed", spec.seed, "random seed");
  synth->add_option("-o,--out", synth_out, "output PLY ('-' for stdout)");
  synth->add_option("--gt", synth_gt, "ground-truth JSON output");
  synth->add_flag("--ascii", synth_ascii, "write ascii PLY");

  // detect
  auto* detect = app.add_subcommand("detect", "detect orthogonal planes, lines and corners");
  PipelineFlags detect_flags;
  std::string detect_in, detect_prefix;
  detect->add_option("input", detect_in, "input PLY ('-' for stdin)")->required();
  detect->add_option("-o,--out-prefix", detect_prefix,
                     "write <prefix>_graph.json, <prefix>_primitives.json, <prefix>_labels.ply; "
                     "without it the primitives JSON goes to stdout");
  detect_flags.attach(detect);

  // refine
  auto* refine = app.add_subcommand("refine", "refine a detected relation graph");
  PipelineFlags refine_flags;
  std::string refine_in, refine_graph, refine_prefix;
  refine->add_option("input", refine_in, "input PLY")->required();
  refine->add_option("graph", refine_graph, "graph JSON from detect")->required();
  refine->add_option("-o,--out-prefix", refine_prefix, "write <prefix>_graph.json and <prefix>_primitives.json");
  refine_flags.attach(refine);

  // register
  auto* reg = app.add_subcommand("register", "register source onto target");
  PipelineFlags reg_flags;
  std::string reg_src, reg_dst, reg_corners_src, reg_corners_dst, reg_out = "-";
  bool reg_no_corners = false;
  reg->add_option("source", reg_src, "source PLY")->required();
  reg->add_option("target", reg_dst, "target PLY")->required();
  reg->add_option("--corners-src", reg_corners_src, "source corners (primitives JSON)");
  reg->add_option("--corners-dst", reg_corners_dst, "target corners (primitives JSON)");
  reg->add_flag("--no-corners", reg_no_corners, "plain point-to-plane ICP");
  reg->add_option("-o,--out", reg_out, "transform output ('-' for stdout)");
  reg_flags.attach(reg);

  // eval
  auto* eval = app.add_subcommand("eval", "score detections against ground truth");
  PipelineFlags eval_flags;
  std::string eval_det, eval_gt, eval_report;
  bool eval_json = false;
  eval->add_option("detected", eval_det, "primitives or graph JSON ('-' for stdin)")->required();
  eval->add_option("gt", eval_gt, "ground-truth JSON")->required();
  eval->add_option("-o,--report", eval_report, "write the report JSON here");
  eval->add_flag("--json", eval_json, "print the report JSON instead of the table");
  eval_flags.attach(eval);

  // bench
  auto* bench = app.add_subcommand("bench", "time voting and refinement");
  PipelineFlags bench_flags;
  op_synth_spec bench_spec;
  op_synth_spec_init(&bench_spec);
  std::string bench_layout = "corner-room";
  int bench_repeat = 1;
  bench->add_option("--layout", bench_layout, "synthetic layout");
  bench->add_option("--extent", bench_spec.extent, "face size in meters");
  bench->add_option("--density", bench_spec.points_per_m2, "points per square meter");
  bench->add_option("--sigma", bench_spec.noise_sigma, "noise, meters");
  bench->add_option("--outliers", bench_spec.outlier_fraction, "outlier fraction");
  bench->add_option("--repeat", bench_repeat, "runs")->check(CLI::PositiveNumber);
  bench_flags.attach(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) {
      spec.layout = layout.c_str();
      op_cloud* raw = nullptr;
      char* gt = nullptr;
      check(op_synth(&spec, &raw, &gt));
      Cloud cloud(raw);
      CString gt_owned(gt);
      save_cloud(cloud.get(), synth_out, !synth_ascii);
      if (!synth_gt.empty()) write_all(synth_gt, std::string(gt));
    } else if (*detect) {
      const Config cfg = detect_flags.build();
      const Cloud cloud = load_cloud(detect_in);
      op_scene* raw = nullptr;
      check(op_detect(cloud.get(), cfg.get(), &raw));
      const Scene scene(raw);
      emit_scene(scene.get(), detect_prefix);
      if (!detect_prefix.empty()) {
        op_cloud* labeled = nullptr;
        check(op_scene_label_cloud(scene.get(), cloud.get(), cfg.get(), &labeled));
        const Cloud owned(labeled);
        save_cloud(labeled, detect_prefix + "_labels.ply", true);
      }
    } else if (*refine) {
      const Config cfg = refine_flags.build();
      const Cloud cloud = load_cloud(refine_in);
      const std::string graph = read_all(refine_graph);
      op_scene* raw = nullptr;
      check(op_scene_from_graph_json(graph.c_str(), cfg.get(), &raw));
      const Scene initial(raw);
      op_scene* refined = nullptr;
      check(op_refine(cloud.get(), initial.get(), cfg.get(), &refined));
      const Scene scene(refined);
      emit_scene(scene.get(), refine_prefix);
    } else if (*reg) {
      const Config cfg = reg_flags.build();
      const Cloud src = load_cloud(reg_src);
      const Cloud dst = load_cloud(reg_dst);
      std::vector<double> cs, cd;
      if (!reg_no_corners) {
        cs = reg_corners_src.empty() ? detect_corners(src.get(), cfg.get(), reg_src) : corners_from_file(reg_corners_src);
        cd = reg_corners_dst.empty() ? detect_corners(dst.get(), cfg.get(), reg_dst) : corners_from_file(reg_corners_dst);
      }
      op_registration r{};
      check(op_register(src.get(), dst.get(), cs.data(), cs.size() / 15, cd.data(), cd.size() / 15, cfg.get(), &r));
      std::ostringstream out;
      for (int i = 0; i < 4; ++i) {
        for (int k = 0; k < 4; ++k) out << (k ? " " : "") << fmt(r.transform[4 * i + k]);
        out << '\n';
      }
      out << "# mode=" << op_constraint_name(r.mode) << " iterations=" << r.iterations
          << " converged=" << r.converged << " cost=" << fmt(r.final_cost) << " matches=" << r.matches
          << " corners=" << r.source_corners << "/" << r.target_corners << " overlap=" << fixed(r.overlap, 4)
          << '\n';
      write_all(reg_out, out.str());
      if (r.overlap < 0.3) std::cerr << "orthoplanes: warning: low overlap " << fixed(r.overlap, 3) << '\n';
    } else if (*eval) {
      const Config cfg = eval_flags.build();
      const std::string det = read_all(eval_det);
      const std::string gt = read_all(eval_gt);
      op_report planes{}, lines{};
      int has_lines = 0;
      char* json = nullptr;
      check(op_evaluate(det.c_str(), gt.c_str(), cfg.get(), &planes, &lines, &has_lines, &json));
      CString owned(json);
      if (!eval_report.empty()) write_all(eval_report, std::string(json));
      if (eval_json) {
        write_all("-", std::string(json));
      } else {
        std::string table = "\tPr\tRec\t#Cor\tNoise\tMiss\n" + report_row("planes", planes);
        if (has_lines) table += report_row("lines", lines);
        write_all("-", table);
      }
    } else if (*bench) {
      const Config cfg = bench_flags.build();
      bench_spec.layout = bench_layout.c_str();
      char* seed = nullptr;
      check(op_config_get(cfg.get(), "seed", &seed));
      bench_spec.seed = std::stoull(seed);
      op_free(seed);
      std::string table = "run\tpoints\treferences\tplanes\tvoting_ms\trefinement_ms\n";
      for (int run = 0; run < bench_repeat; ++run) {
        op_bench_result b{};
        check(op_bench(&bench_spec, cfg.get(), &b));
        table += std::to_string(run) + '\t' + std::to_string(b.points) + '\t' + std::to_string(b.references) +
                 '\t' + std::to_string(b.planes) + '\t' + fixed(b.voting_ms, 3) + '\t' +
                 fixed(b.refinement_ms, 3) + '\n';
      }
      write_all("-", table);
    }
  } catch (const Failure& f) {
    std::cerr << "orthoplanes: " << op_status_name(f.status) << ": " << f.message << '\n';
    return 1;
  }
  return 0;
}
