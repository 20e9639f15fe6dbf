// Polygon file format readers and writers for meshes and labeled clouds.

#include <cstring>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "dopose/bop.hpp"
#include "dopose/fileio.hpp"
#include "dopose/renderer.hpp"

namespace dopose {

namespace fs = std::filesystem;

namespace {

enum class PlyType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::size_t type_size(PlyType t) {
  switch (t) {
    case PlyType::kInt8:
    case PlyType::kUInt8: return 1;
    case PlyType::kInt16:
    case PlyType::kUInt16: return 2;
    case PlyType::kInt32:
    case PlyType::kUInt32:
    case PlyType::kFloat32: return 4;
    case PlyType::kFloat64: return 8;
  }
  return 0;
}

PlyType parse_type(const std::string &name, const std::string &file) {
  if (name == "char" || name == "int8") return PlyType::kInt8;
  if (name == "uchar" || name == "uint8") return PlyType::kUInt8;
  if (name == "short" || name == "int16") return PlyType::kInt16;
  if (name == "ushort" || name == "uint16") return PlyType::kUInt16;
  if (name == "int" || name == "int32") return PlyType::kInt32;
  if (name == "uint" || name == "uint32") return PlyType::kUInt32;
  if (name == "float" || name == "float32") return PlyType::kFloat32;
  if (name == "double" || name == "float64") return PlyType::kFloat64;
  fail(ErrorCode::kMalformedFile, file + ": unknown property type '" + name + "'");
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat32;
  bool is_list = false;
  PlyType count_type = PlyType::kUInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
  std::size_t body_offset = 0;
};

PlyHeader parse_header(const std::string &data, const std::string &file) {
  PlyHeader header;
  std::size_t pos = 0;
  bool first = true;
  bool saw_format = false;
  while (true) {
    const std::size_t eol = data.find('\n', pos);
    if (eol == std::string::npos) fail(ErrorCode::kMalformedFile, file + ": missing end_header");
    std::string line = data.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream in(line);
    std::string keyword;
    in >> keyword;
    if (first) {
      if (keyword != "ply") fail(ErrorCode::kMalformedFile, file + ": not a PLY file");
      first = false;
      continue;
    }
    if (keyword == "format") {
      std::string format;
      in >> format;
      if (format == "ascii") {
        header.binary = false;
      } else if (format == "binary_little_endian") {
        header.binary = true;
      } else {
        fail(ErrorCode::kMalformedFile, file + ": unsupported PLY format '" + format + "'");
      }
      saw_format = true;
    } else if (keyword == "element") {
      PlyElement element;
      in >> element.name >> element.count;
      if (!in) fail(ErrorCode::kMalformedFile, file + ": bad element line '" + line + "'");
      header.elements.push_back(element);
    } else if (keyword == "property") {
      if (header.elements.empty())
        fail(ErrorCode::kMalformedFile, file + ": property before any element");
      PlyProperty prop;
      std::string type;
      in >> type;
      if (type == "list") {
        std::string count_type, item_type;
        in >> count_type >> item_type >> prop.name;
        prop.is_list = true;
        prop.count_type = parse_type(count_type, file);
        prop.type = parse_type(item_type, file);
      } else {
        prop.type = parse_type(type, file);
        in >> prop.name;
      }
      header.elements.back().properties.push_back(prop);
    } else if (keyword == "end_header") {
      break;
    }
    // comment / obj_info lines are ignored
  }
  if (!saw_format) fail(ErrorCode::kMalformedFile, file + ": missing format line");
  header.body_offset = pos;
  return header;
}

// Sequential reader over either encoding.
class BodyReader {
 public:
  BodyReader(const std::string &data, std::size_t offset, bool binary, std::string file)
      : data_(data), pos_(offset), binary_(binary), file_(std::move(file)) {
    if (!binary_) text_.str(data_.substr(offset));
  }

  double read(PlyType type) {
    if (!binary_) {
      double value = 0.0;
      if (!(text_ >> value)) fail(ErrorCode::kMalformedFile, file_ + ": truncated ASCII body");
      return value;
    }
    const std::size_t n = type_size(type);
    if (pos_ + n > data_.size()) fail(ErrorCode::kMalformedFile, file_ + ": truncated binary body");
    const char *p = data_.data() + pos_;
    pos_ += n;
    switch (type) {
      case PlyType::kInt8: return load<std::int8_t>(p);
      case PlyType::kUInt8: return load<std::uint8_t>(p);
      case PlyType::kInt16: return load<std::int16_t>(p);
      case PlyType::kUInt16: return load<std::uint16_t>(p);
      case PlyType::kInt32: return load<std::int32_t>(p);
      case PlyType::kUInt32: return load<std::uint32_t>(p);
      case PlyType::kFloat32: return load<float>(p);
      case PlyType::kFloat64: return load<double>(p);
    }
    return 0.0;
  }

 private:
  // Assumes a little-endian host, as does the rest of the toolchain here.
  template <typename T>
  static double load(const char *p) {
    T value;
    std::memcpy(&value, p, sizeof(T));
    return static_cast<double>(value);
  }

  const std::string &data_;
  std::size_t pos_;
  bool binary_;
  std::string file_;
  std::istringstream text_;
};

// Reads all elements; `visit` receives the element and its per-row values.
template <typename Visit>
void read_body(const std::string &data, const PlyHeader &header, const std::string &file,
               Visit visit) {
  BodyReader reader(data, header.body_offset, header.binary, file);
  for (const auto &element : header.elements) {
    std::vector<double> scalars;
    std::vector<std::vector<double>> lists;
    for (std::size_t row = 0; row < element.count; ++row) {
      scalars.clear();
      lists.clear();
      for (const auto &prop : element.properties) {
        if (prop.is_list) {
          const auto n = static_cast<std::size_t>(reader.read(prop.count_type));
          std::vector<double> items(n);
          for (auto &item : items) item = reader.read(prop.type);
          lists.push_back(std::move(items));
        } else {
          scalars.push_back(reader.read(prop.type));
        }
      }
      visit(element, row, scalars, lists);
    }
  }
}

int scalar_index(const PlyElement &element, const std::string &name) {
  int idx = 0;
  for (const auto &p : element.properties) {
    if (p.is_list) continue;
    if (p.name == name) return idx;
    ++idx;
  }
  return -1;
}

int list_index(const PlyElement &element) {
  int idx = 0;
  for (const auto &p : element.properties) {
    if (!p.is_list) continue;
    if (p.name == "vertex_indices" || p.name == "vertex_index") return idx;
    ++idx;
  }
  return -1;
}

}  // namespace

TriangleMesh read_ply_mesh(const fs::path &path) {
  const std::string file = path.string();
  const std::string data = read_text_file(path);
  const PlyHeader header = parse_header(data, file);

  TriangleMesh mesh;
  int ix = -1, iy = -1, iz = -1, iface = -1;
  for (const auto &e : header.elements) {
    if (e.name == "vertex") {
      ix = scalar_index(e, "x");
      iy = scalar_index(e, "y");
      iz = scalar_index(e, "z");
      if (ix < 0 || iy < 0 || iz < 0)
        fail(ErrorCode::kMalformedFile, file + ": vertex element lacks x/y/z");
      mesh.vertices.reserve(e.count);
    } else if (e.name == "face") {
      iface = list_index(e);
      if (iface < 0) fail(ErrorCode::kMalformedFile, file + ": face element lacks vertex_indices");
    }
  }
  read_body(data, header, file,
            [&](const PlyElement &e, std::size_t, const std::vector<double> &scalars,
                const std::vector<std::vector<double>> &lists) {
              if (e.name == "vertex") {
                mesh.vertices.emplace_back(scalars[static_cast<std::size_t>(ix)],
                                           scalars[static_cast<std::size_t>(iy)],
                                           scalars[static_cast<std::size_t>(iz)]);
              } else if (e.name == "face") {
                const auto &idx = lists[static_cast<std::size_t>(iface)];
                for (std::size_t i = 1; i + 1 < idx.size(); ++i)
                  mesh.triangles.push_back({static_cast<int>(idx[0]), static_cast<int>(idx[i]),
                                            static_cast<int>(idx[i + 1])});
              }
            });
  try {
    mesh.validate();
  } catch (const Error &e) {
    fail(ErrorCode::kMalformedFile, file + ": " + e.what());
  }
  return mesh;
}

void write_ply_mesh(const fs::path &path, const TriangleMesh &mesh) {
  std::ostringstream out;
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const auto &v : mesh.vertices) {
    for (int i = 0; i < 3; ++i) {
      const auto f = static_cast<float>(v[i]);
      out.write(reinterpret_cast<const char *>(&f), sizeof f);
    }
  }
  for (const auto &t : mesh.triangles) {
    const std::uint8_t n = 3;
    out.write(reinterpret_cast<const char *>(&n), 1);
    for (int idx : t) {
      const std::int32_t i = idx;
      out.write(reinterpret_cast<const char *>(&i), sizeof i);
    }
  }
  write_file_atomic(path, out.str());
}

void write_ply_cloud(const fs::path &path, const PointCloud &cloud) {
  cloud.validate();
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "property int label\nend_header\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto &p = cloud.points[i];
    const Rgb c = cloud.has_colors() ? cloud.colors[i] : Rgb{};
    const int label = cloud.has_labels() ? cloud.labels[i] : 0;
    out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << int{c.r} << ' ' << int{c.g} << ' '
        << int{c.b} << ' ' << label << '\n';
  }
  write_file_atomic(path, out.str());
}

PointCloud read_ply_cloud(const fs::path &path) {
  const std::string file = path.string();
  const std::string data = read_text_file(path);
  const PlyHeader header = parse_header(data, file);
  PointCloud cloud;
  read_body(data, header, file,
            [&](const PlyElement &e, std::size_t, const std::vector<double> &s,
                const std::vector<std::vector<double>> &) {
              if (e.name != "vertex") return;
              const auto get = [&](const char *name) {
                const int i = scalar_index(e, name);
                return i < 0 ? 0.0 : s[static_cast<std::size_t>(i)];
              };
              cloud.points.emplace_back(get("x"), get("y"), get("z"));
              if (scalar_index(e, "red") >= 0)
                cloud.colors.push_back(Rgb{static_cast<std::uint8_t>(get("red")),
                                           static_cast<std::uint8_t>(get("green")),
                                           static_cast<std::uint8_t>(get("blue"))});
              if (scalar_index(e, "label") >= 0) cloud.labels.push_back(static_cast<int>(get("label")));
            });
  return cloud;
}

}  // namespace dopose
