#pragma once

#include <string>
#include <vector>

#include "orthoplanes/evaluation.hpp"
#include "orthoplanes/pipeline.hpp"
#include "orthoplanes/synthetic.hpp"

// JSON exchange. Planes are [nx, ny, nz, d]; corners carry a row-major
// 9-float frame, 3 offsets and a 3-float position.
namespace orthoplanes {

/// {"vertices", "edges", "bundles", "triangles"}.
std::string graph_to_json(const Scene& scene);
/// {"planes", "lines", "corners"}.
std::string primitives_to_json(const Scene& scene);
std::string ground_truth_to_json(const GroundTruth& truth);
std::string report_to_json(const DetectionReport& planes, const DetectionReport* lines);

/// Reads the "vertices" and "edges" of a graph document. Throws Malformed.
PlaneGraph graph_from_json(const std::string& text);
GroundTruth ground_truth_from_json(const std::string& text);

/// Planes, lines and corners from any of the documents above: "planes" or
/// "vertices" for planes; lines and corners when present.
struct Primitives {
  std::vector<Plane> planes;
  std::vector<Line3D> lines;
  std::vector<Corner> corners;
};
Primitives primitives_from_json(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace orthoplanes
