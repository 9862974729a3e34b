#include "orthoplanes/point_cloud_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "orthoplanes/error.hpp"

namespace orthoplanes {

namespace {

enum class Encoding { Ascii, Little, Big };

enum class Scalar { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

Scalar parse_scalar(const std::string& t) {
  if (t == "char" || t == "int8") return Scalar::Int8;
  if (t == "uchar" || t == "uint8") return Scalar::UInt8;
  if (t == "short" || t == "int16") return Scalar::Int16;
  if (t == "ushort" || t == "uint16") return Scalar::UInt16;
  if (t == "int" || t == "int32") return Scalar::Int32;
  if (t == "uint" || t == "uint32") return Scalar::UInt32;
  if (t == "float" || t == "float32") return Scalar::Float32;
  if (t == "double" || t == "float64") return Scalar::Float64;
  throw Error(ErrorCode::Malformed, "unknown PLY scalar type '" + t + "'");
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::Int8:
    case Scalar::UInt8: return 1;
    case Scalar::Int16:
    case Scalar::UInt16: return 2;
    case Scalar::Int32:
    case Scalar::UInt32:
    case Scalar::Float32: return 4;
    case Scalar::Float64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::Float32;
  bool is_list = false;
  Scalar count_type = Scalar::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

struct Header {
  Encoding encoding = Encoding::Ascii;
  std::vector<Element> elements;
};

Header read_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    throw Error(ErrorCode::Malformed, "missing 'ply' magic");
  Header h;
  bool have_format = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word.empty() || word == "comment" || word == "obj_info") continue;
    if (word == "end_header") {
      if (!have_format) throw Error(ErrorCode::Malformed, "PLY header lacks a format line");
      return h;
    }
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii") h.encoding = Encoding::Ascii;
      else if (fmt == "binary_little_endian") h.encoding = Encoding::Little;
      else if (fmt == "binary_big_endian") h.encoding = Encoding::Big;
      else throw Error(ErrorCode::Malformed, "unknown PLY format '" + fmt + "'");
      have_format = true;
    } else if (word == "element") {
      Element e;
      long long count = -1;
      ss >> e.name >> count;
      if (!ss || count < 0) throw Error(ErrorCode::Malformed, "bad element line: " + line);
      e.count = static_cast<std::size_t>(count);
      h.elements.push_back(std::move(e));
    } else if (word == "property") {
      if (h.elements.empty()) throw Error(ErrorCode::Malformed, "property before any element");
      Property p;
      std::string type;
      ss >> type;
      if (type == "list") {
        std::string ct, it;
        ss >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar(ct);
        p.type = parse_scalar(it);
      } else {
        p.type = parse_scalar(type);
        ss >> p.name;
      }
      if (p.name.empty()) throw Error(ErrorCode::Malformed, "property without a name");
      h.elements.back().properties.push_back(p);
    } else {
      throw Error(ErrorCode::Malformed, "unexpected header line: " + line);
    }
  }
  throw Error(ErrorCode::Malformed, "PLY header is not terminated");
}

class BinaryReader {
 public:
  BinaryReader(std::istream& in, bool big_endian) : in_(in), swap_(big_endian != (std::endian::native == std::endian::big)) {}

  double read(Scalar s) {
    unsigned char buf[8];
    const std::size_t n = scalar_size(s);
    if (!in_.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n)))
      throw Error(ErrorCode::Malformed, "PLY body is truncated");
    if (swap_) std::reverse(buf, buf + n);
    switch (s) {
      case Scalar::Int8: { std::int8_t v; std::memcpy(&v, buf, 1); return v; }
      case Scalar::UInt8: return buf[0];
      case Scalar::Int16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
      case Scalar::UInt16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
      case Scalar::Int32: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
      case Scalar::UInt32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
      case Scalar::Float32: { float v; std::memcpy(&v, buf, 4); return v; }
      case Scalar::Float64: { double v; std::memcpy(&v, buf, 8); return v; }
    }
    return 0.0;
  }

 private:
  std::istream& in_;
  bool swap_;
};

class AsciiReader {
 public:
  explicit AsciiReader(std::istream& in) : in_(in) {}

  double read(Scalar) {
    std::string tok;
    if (!(in_ >> tok)) throw Error(ErrorCode::Malformed, "PLY body is truncated");
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::Malformed, "bad PLY number '" + tok + "'");
    }
  }

 private:
  std::istream& in_;
};

template <typename Reader>
PointCloud read_body(const Header& h, Reader& reader) {
  PointCloud cloud;
  for (const Element& e : h.elements) {
    const bool is_vertex = e.name == "vertex";
    int ix[3] = {-1, -1, -1}, in[3] = {-1, -1, -1}, il = -1;
    if (is_vertex) {
      for (int k = 0; k < static_cast<int>(e.properties.size()); ++k) {
        const Property& p = e.properties[static_cast<std::size_t>(k)];
        if (p.is_list) continue;
        static const char* kPos[3] = {"x", "y", "z"};
        static const char* kNrm[3] = {"nx", "ny", "nz"};
        for (int a = 0; a < 3; ++a) {
          if (p.name == kPos[a]) ix[a] = k;
          if (p.name == kNrm[a]) in[a] = k;
        }
        if (p.name == "label") il = k;
      }
      if (ix[0] < 0 || ix[1] < 0 || ix[2] < 0)
        throw Error(ErrorCode::Malformed, "vertex element lacks x, y or z");
      cloud.has_normals = in[0] >= 0 && in[1] >= 0 && in[2] >= 0;
      cloud.points.resize(e.count);
      if (il >= 0) cloud.labels.resize(e.count);
    }
    std::vector<double> values(e.properties.size());
    for (std::size_t i = 0; i < e.count; ++i) {
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const Property& p = e.properties[k];
        if (p.is_list) {
          const double n = reader.read(p.count_type);
          if (n < 0 || n > 1e7) throw Error(ErrorCode::Malformed, "bad PLY list length");
          for (long j = 0; j < static_cast<long>(n); ++j) reader.read(p.type);
          values[k] = 0.0;
        } else {
          values[k] = reader.read(p.type);
        }
      }
      if (!is_vertex) continue;
      OrientedPoint& pt = cloud.points[i];
      pt.position = Vec3(values[static_cast<std::size_t>(ix[0])], values[static_cast<std::size_t>(ix[1])],
                         values[static_cast<std::size_t>(ix[2])]);
      if (cloud.has_normals)
        pt.normal = Vec3(values[static_cast<std::size_t>(in[0])], values[static_cast<std::size_t>(in[1])],
                         values[static_cast<std::size_t>(in[2])]);
      if (il >= 0) cloud.labels[i] = static_cast<std::int32_t>(values[static_cast<std::size_t>(il)]);
    }
  }
  return cloud;
}

}  // namespace

PointCloud read_ply(std::istream& in) {
  const Header h = read_header(in);
  if (h.encoding == Encoding::Ascii) {
    AsciiReader r(in);
    return read_body(h, r);
  }
  BinaryReader r(in, h.encoding == Encoding::Big);
  return read_body(h, r);
}

PointCloud load_point_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "' for reading");
  return read_ply(in);
}

void write_ply(const PointCloud& cloud, std::ostream& out, PlyFormat format) {
  const bool labels = cloud.labels.size() == cloud.size() && !cloud.labels.empty();
  out << "ply\n"
      << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (labels) out << "property int label\n";
  out << "end_header\n";
  if (format == PlyFormat::Ascii) {
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.points[i];
      out << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z();
      if (cloud.has_normals) out << ' ' << p.normal.x() << ' ' << p.normal.y() << ' ' << p.normal.z();
      if (labels) out << ' ' << cloud.labels[i];
      out << '\n';
    }
  } else {
    auto put = [&](auto v) {
      char buf[sizeof(v)];
      std::memcpy(buf, &v, sizeof(v));
      if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(v));
      out.write(buf, sizeof(v));
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.points[i];
      for (int a = 0; a < 3; ++a) put(p.position[a]);
      if (cloud.has_normals)
        for (int a = 0; a < 3; ++a) put(p.normal[a]);
      if (labels) put(static_cast<std::int32_t>(cloud.labels[i]));
    }
  }
  if (!out) throw Error(ErrorCode::Io, "failed to write PLY data");
}

void save_point_cloud(const PointCloud& cloud, const std::string& path, PlyFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_ply(cloud, out, format);
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "failed to write '" + path + "'");
}

}  // namespace orthoplanes
