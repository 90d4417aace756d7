#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "delight/error.hpp"
#include "delight/scene.hpp"

namespace delight {

namespace {

int parse_obj_index(const std::string& token, std::size_t count, const std::string& where) {
  long idx = 0;
  try {
    idx = std::stol(token);
  } catch (const std::exception&) {
    throw IoError(where + ": bad index '" + token + "'");
  }
  if (idx < 0) idx += static_cast<long>(count) + 1;  // relative indices
  if (idx < 1 || static_cast<std::size_t>(idx) > count) {
    throw IoError(where + ": index out of range");
  }
  return static_cast<int>(idx - 1);
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TriangleMesh mesh;
  std::vector<Vec3> normals;
  std::vector<int> normal_of_vertex;
  bool has_normals = true;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw IoError(where + ": bad vertex");
      mesh.vertices.push_back(p);
      normal_of_vertex.push_back(-1);
    } else if (tag == "vn") {
      Vec3 n;
      if (!(ls >> n.x() >> n.y() >> n.z())) throw IoError(where + ": bad normal");
      normals.push_back(n);
    } else if (tag == "f") {
      std::vector<std::string> corners;
      std::string c;
      while (ls >> c) corners.push_back(c);
      if (corners.size() != 3) throw IoError(where + ": only triangle faces are supported");
      std::array<std::uint32_t, 3> tri{};
      for (int k = 0; k < 3; ++k) {
        const std::string& corner = corners[k];
        const auto slash = corner.find('/');
        const int v = parse_obj_index(corner.substr(0, slash), mesh.vertices.size(), where);
        tri[k] = static_cast<std::uint32_t>(v);
        const auto last = corner.rfind('/');
        if (slash != std::string::npos && corner.find('/', slash + 1) != std::string::npos &&
            last + 1 < corner.size()) {
          normal_of_vertex[v] = parse_obj_index(corner.substr(last + 1), normals.size(), where);
        } else {
          has_normals = false;
        }
      }
      mesh.faces.push_back(tri);
    }
  }
  if (has_normals && !normals.empty()) {
    mesh.vertex_normals.resize(mesh.vertices.size(), Vec3::UnitZ());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      if (normal_of_vertex[i] < 0) {
        has_normals = false;
        break;
      }
      mesh.vertex_normals[i] = normals[normal_of_vertex[i]].normalized();
    }
  }
  if (!has_normals || normals.empty()) mesh.vertex_normals.clear();
  return mesh;
}

struct PlyProperty {
  std::string name;
  std::string type;        // scalar type, or list item type
  std::string count_type;  // non-empty for list properties
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" ||
      t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  throw IoError("ply: unknown property type '" + t + "'");
}

double ply_read_binary(std::istream& in, const std::string& t) {
  unsigned char buf[8];
  const std::size_t n = ply_type_size(t);
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
  if (!in) throw IoError("ply: truncated binary data");
  auto get = [&](auto v) {
    std::memcpy(&v, buf, sizeof v);
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return get(std::int8_t{});
  if (t == "uchar" || t == "uint8") return get(std::uint8_t{});
  if (t == "short" || t == "int16") return get(std::int16_t{});
  if (t == "ushort" || t == "uint16") return get(std::uint16_t{});
  if (t == "int" || t == "int32") return get(std::int32_t{});
  if (t == "uint" || t == "uint32") return get(std::uint32_t{});
  if (t == "float" || t == "float32") return get(float{});
  return get(double{});
}

TriangleMesh load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw IoError(path.string() + ": not a PLY file");
  std::string format;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      ls >> format;
    } else if (tag == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw IoError(path.string() + ": property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = type;
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (tag == "end_header") {
      break;
    }
  }
  const bool ascii = format == "ascii";
  if (!ascii && format != "binary_little_endian") {
    throw IoError(path.string() + ": unsupported PLY format '" + format + "'");
  }
  TriangleMesh mesh;
  bool has_normals = false;
  for (const auto& e : elements) {
    for (std::size_t i = 0; i < e.count; ++i) {
      Vec3 p = Vec3::Zero(), n = Vec3::Zero();
      for (const auto& prop : e.properties) {
        if (!prop.count_type.empty()) {
          const auto count = static_cast<std::size_t>(
              ascii ? [&] { double v; in >> v; return v; }() : ply_read_binary(in, prop.count_type));
          std::vector<std::uint32_t> idx(count);
          for (auto& v : idx) {
            const double d = ascii ? [&] { double x; in >> x; return x; }()
                                   : ply_read_binary(in, prop.type);
            v = static_cast<std::uint32_t>(d);
          }
          if (e.name == "face" && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
            if (count != 3) throw IoError(path.string() + ": only triangle faces are supported");
            mesh.faces.push_back({idx[0], idx[1], idx[2]});
          }
          continue;
        }
        double v = 0.0;
        if (ascii) {
          if (!(in >> v)) throw IoError(path.string() + ": truncated ASCII data");
        } else {
          v = ply_read_binary(in, prop.type);
        }
        if (e.name != "vertex") continue;
        if (prop.name == "x") p.x() = v;
        else if (prop.name == "y") p.y() = v;
        else if (prop.name == "z") p.z() = v;
        else if (prop.name == "nx") { n.x() = v; has_normals = true; }
        else if (prop.name == "ny") n.y() = v;
        else if (prop.name == "nz") n.z() = v;
      }
      if (e.name == "vertex") {
        mesh.vertices.push_back(p);
        mesh.vertex_normals.push_back(n);
      }
    }
  }
  if (has_normals) {
    for (auto& n : mesh.vertex_normals) {
      if (n.norm() == 0.0) {
        has_normals = false;
        break;
      }
      n.normalize();
    }
  }
  if (!has_normals) mesh.vertex_normals.clear();
  return mesh;
}

}  // namespace

TriangleMesh load_mesh(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  TriangleMesh mesh;
  if (ext == ".obj") {
    mesh = load_obj(path);
  } else if (ext == ".ply") {
    mesh = load_ply(path);
  } else {
    throw IoError(path.string() + ": unsupported mesh format");
  }
  if (mesh.faces.empty()) throw IoError(path.string() + ": mesh has no faces");
  try {
    mesh.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (mesh.vertex_normals.empty()) compute_vertex_normals(mesh);
  return mesh;
}

void write_mesh_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  const bool normals = mesh.vertex_normals.size() == mesh.vertices.size();
  if (normals) {
    for (const auto& n : mesh.vertex_normals)
      out << "vn " << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
  }
  for (const auto& f : mesh.faces) {
    out << 'f';
    for (auto idx : f) {
      out << ' ' << idx + 1;
      if (normals) out << "//" << idx + 1;
    }
    out << '\n';
  }
}

void write_mesh_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const bool normals = mesh.vertex_normals.size() == mesh.vertices.size();
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "element face " << mesh.faces.size() << "\n"
      << "property list uchar uint vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    out.write(reinterpret_cast<const char*>(mesh.vertices[i].data()), 3 * sizeof(double));
    if (normals) {
      out.write(reinterpret_cast<const char*>(mesh.vertex_normals[i].data()), 3 * sizeof(double));
    }
  }
  for (const auto& f : mesh.faces) {
    const std::uint8_t n = 3;
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(f.data()), 3 * sizeof(std::uint32_t));
  }
}

}  // namespace delight
