#pragma once

#include <iosfwd>
#include <string>

#include "orthoplanes/geometry.hpp"

namespace orthoplanes {

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// Reads the `vertex` element of a PLY file (ascii, binary little- or
/// big-endian). x, y, z are required; nx, ny, nz and an integer `label` are
/// picked up when present; other properties and elements are skipped.
/// Throws Io or Malformed.
PointCloud load_point_cloud(const std::string& path);
PointCloud read_ply(std::istream& in);

/// Writes doubles so binary round trips are bit-exact; ascii uses 17
/// significant digits. Throws Io.
void save_point_cloud(const PointCloud& cloud, const std::string& path,
                      PlyFormat format = PlyFormat::BinaryLittleEndian);
void write_ply(const PointCloud& cloud, std::ostream& out,
               PlyFormat format = PlyFormat::BinaryLittleEndian);

}  // namespace orthoplanes
