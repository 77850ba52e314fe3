#include "hamspec/mesh.h"

#include <Eigen/Geometry>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <queue>
#include <random>
#include <set>
#include <sstream>

namespace hamspec {

namespace {

Eigen::Vector3d tri_normal(const TriMesh& m, int t) {
  Eigen::Vector3d a = m.vertices.row(m.triangles(t, 0));
  Eigen::Vector3d b = m.vertices.row(m.triangles(t, 1));
  Eigen::Vector3d c = m.vertices.row(m.triangles(t, 2));
  return (b - a).cross(c - a);
}

} // namespace

double TriMesh::triangle_area(int t) const {
  return 0.5 * tri_normal(*this, t).norm();
}

double TriMesh::total_area() const {
  double a = 0.0;
  for (int t = 0; t < num_triangles(); ++t) a += triangle_area(t);
  return a;
}

double TriMesh::mean_edge_length() const {
  if (edges.empty()) {
    // fall back to triangle sides when adjacency was not built
    double sum = 0.0;
    int count = 0;
    for (int t = 0; t < num_triangles(); ++t) {
      for (int e = 0; e < 3; ++e) {
        Eigen::Vector3d p = vertices.row(triangles(t, e));
        Eigen::Vector3d q = vertices.row(triangles(t, (e + 1) % 3));
        sum += (p - q).norm();
        ++count;
      }
    }
    return count ? sum / count : 0.0;
  }
  double sum = 0.0;
  for (const auto& e : edges) {
    Eigen::Vector3d p = vertices.row(e[0]);
    Eigen::Vector3d q = vertices.row(e[1]);
    sum += (p - q).norm();
  }
  return sum / static_cast<double>(edges.size());
}

double TriMesh::bbox_diagonal() const {
  if (vertices.rows() == 0) return 0.0;
  Eigen::Vector3d lo = vertices.colwise().minCoeff();
  Eigen::Vector3d hi = vertices.colwise().maxCoeff();
  return (hi - lo).norm();
}

ValidationReport validate(TriMesh& mesh, ValidatePolicy policy) {
  ValidationReport report;
  const int n = mesh.num_vertices();
  auto fail = [&](const std::string& msg) {
    report.ok = false;
    report.message = msg;
    if (policy == ValidatePolicy::Throw) throw MeshError(msg);
  };

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (int e = 0; e < 3; ++e) {
      int v = mesh.triangles(t, e);
      if (v < 0 || v >= n) {
        fail("triangle " + std::to_string(t) + " references vertex " + std::to_string(v) +
             " outside [0," + std::to_string(n) + ")");
        return report;
      }
    }
    if (mesh.triangles(t, 0) == mesh.triangles(t, 1) ||
        mesh.triangles(t, 1) == mesh.triangles(t, 2) ||
        mesh.triangles(t, 0) == mesh.triangles(t, 2)) {
      fail("triangle " + std::to_string(t) + " repeats a vertex index");
      return report;
    }
  }

  const double diag = mesh.bbox_diagonal();
  const double area_tol = 1e-12 * diag * diag;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (!(mesh.triangle_area(t) > area_tol)) {
      ++report.degenerate_triangles;
      if (policy == ValidatePolicy::Throw) {
        fail("triangle " + std::to_string(t) + " is degenerate (area below tolerance)");
        return report;
      }
    }
  }

  // Edge table; interior edges must have exactly 2 incident triangles.
  std::map<std::pair<int, int>, std::vector<int>> edge_map;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (int e = 0; e < 3; ++e) {
      int a = mesh.triangles(t, e), b = mesh.triangles(t, (e + 1) % 3);
      if (a > b) std::swap(a, b);
      edge_map[{a, b}].push_back(t);
    }
  }
  mesh.edges.clear();
  mesh.edge_triangles.clear();
  mesh.edges.reserve(edge_map.size());
  mesh.edge_triangles.reserve(edge_map.size());
  for (const auto& [key, tris] : edge_map) {
    if (tris.size() > 2) {
      fail("edge (" + std::to_string(key.first) + "," + std::to_string(key.second) +
           ") is shared by " + std::to_string(tris.size()) + " triangles");
      return report;
    }
    mesh.edges.push_back({key.first, key.second});
    mesh.edge_triangles.push_back(tris);
  }

  mesh.vertex_neighbors.assign(n, {});
  for (const auto& e : mesh.edges) {
    mesh.vertex_neighbors[e[0]].push_back(e[1]);
    mesh.vertex_neighbors[e[1]].push_back(e[0]);
  }
  for (auto& nbrs : mesh.vertex_neighbors) std::sort(nbrs.begin(), nbrs.end());
  return report;
}

// ---------------------------------------------------------------------------
// Loaders / writers
// ---------------------------------------------------------------------------

namespace {

std::string lower_ext(const std::string& path) {
  auto pos = path.find_last_of('.');
  if (pos == std::string::npos) return "";
  std::string ext = path.substr(pos + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Next non-empty, non-comment line of an OFF file.
bool next_off_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    return true;
  }
  return false;
}

TriMesh load_off(std::istream& in, const std::string& path) {
  std::string line;
  if (!next_off_line(in, line)) throw MeshError(path + ": empty OFF file");
  {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag != "OFF") throw MeshError(path + ": missing OFF header");
  }
  if (!next_off_line(in, line)) throw MeshError(path + ": truncated OFF header");
  int nv = 0, nf = 0, ne = 0;
  {
    std::istringstream ls(line);
    if (!(ls >> nv >> nf >> ne)) throw MeshError(path + ": malformed OFF counts");
  }
  TriMesh mesh;
  mesh.vertices.resize(nv, 3);
  for (int i = 0; i < nv; ++i) {
    if (!next_off_line(in, line)) throw MeshError(path + ": truncated vertex list");
    std::istringstream ls(line);
    if (!(ls >> mesh.vertices(i, 0) >> mesh.vertices(i, 1) >> mesh.vertices(i, 2)))
      throw MeshError(path + ": malformed vertex line " + std::to_string(i));
  }
  std::vector<std::array<int, 3>> tris;
  tris.reserve(nf);
  for (int f = 0; f < nf; ++f) {
    if (!next_off_line(in, line)) throw MeshError(path + ": truncated face list");
    std::istringstream ls(line);
    int count = 0;
    if (!(ls >> count)) throw MeshError(path + ": malformed face line " + std::to_string(f));
    std::vector<int> idx(count);
    for (int j = 0; j < count; ++j)
      if (!(ls >> idx[j])) throw MeshError(path + ": malformed face line " + std::to_string(f));
    if (count < 3) throw MeshError(path + ": face with fewer than 3 vertices");
    for (int j = 1; j + 1 < count; ++j) // fan-triangulate polygons
      tris.push_back({idx[0], idx[j], idx[j + 1]});
  }
  mesh.triangles.resize(static_cast<int>(tris.size()), 3);
  for (size_t t = 0; t < tris.size(); ++t)
    for (int e = 0; e < 3; ++e) mesh.triangles(static_cast<int>(t), e) = tris[t][e];
  return mesh;
}

void save_off(const TriMesh& mesh, std::ostream& out) {
  out << "OFF\n" << mesh.num_vertices() << " " << mesh.num_triangles() << " 0\n";
  char buf[96];
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", mesh.vertices(i, 0),
                  mesh.vertices(i, 1), mesh.vertices(i, 2));
    out << buf;
  }
  for (int t = 0; t < mesh.num_triangles(); ++t)
    out << "3 " << mesh.triangles(t, 0) << " " << mesh.triangles(t, 1) << " "
        << mesh.triangles(t, 2) << "\n";
}

TriMesh load_obj(std::istream& in, const std::string& path) {
  TriMesh mesh;
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> tris;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p[0] >> p[1] >> p[2]))
        throw MeshError(path + ": malformed vertex at line " + std::to_string(line_no));
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string token;
      while (ls >> token) {
        // take the vertex index before any '/': "v", "v/vt", "v/vt/vn"
        auto slash = token.find('/');
        std::string head = slash == std::string::npos ? token : token.substr(0, slash);
        int v = 0;
        auto [p, ec] = std::from_chars(head.data(), head.data() + head.size(), v);
        if (ec != std::errc() || p != head.data() + head.size())
          throw MeshError(path + ": malformed face token at line " + std::to_string(line_no));
        if (v < 0) v = static_cast<int>(verts.size()) + v + 1; // negative = relative
        idx.push_back(v - 1);
      }
      if (idx.size() < 3)
        throw MeshError(path + ": face with fewer than 3 vertices at line " +
                        std::to_string(line_no));
      for (size_t j = 1; j + 1 < idx.size(); ++j)
        tris.push_back({idx[0], static_cast<int>(idx[j]), static_cast<int>(idx[j + 1])});
    }
  }
  mesh.vertices.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<int>(i)) = verts[i];
  mesh.triangles.resize(static_cast<int>(tris.size()), 3);
  for (size_t t = 0; t < tris.size(); ++t)
    for (int e = 0; e < 3; ++e) mesh.triangles(static_cast<int>(t), e) = tris[t][e];
  return mesh;
}

void save_obj(const TriMesh& mesh, std::ostream& out) {
  char buf[96];
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", mesh.vertices(i, 0),
                  mesh.vertices(i, 1), mesh.vertices(i, 2));
    out << buf;
  }
  for (int t = 0; t < mesh.num_triangles(); ++t)
    out << "f " << mesh.triangles(t, 0) + 1 << " " << mesh.triangles(t, 1) + 1 << " "
        << mesh.triangles(t, 2) + 1 << "\n";
}

struct PlyProperty {
  std::string name;
  std::string type;        // scalar type, or list count type
  std::string list_type;   // element type when list
  bool is_list = false;
};

size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
      t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  throw MeshError("unknown PLY type " + t);
}

double ply_read_scalar(std::istream& in, const std::string& type, bool binary) {
  if (!binary) {
    double v;
    if (!(in >> v)) throw MeshError("truncated PLY ascii payload");
    return v;
  }
  unsigned char raw[8];
  size_t sz = ply_type_size(type);
  if (!in.read(reinterpret_cast<char*>(raw), static_cast<std::streamsize>(sz)))
    throw MeshError("truncated PLY binary payload");
  if (type == "char" || type == "int8") return *reinterpret_cast<int8_t*>(raw);
  if (type == "uchar" || type == "uint8") return *reinterpret_cast<uint8_t*>(raw);
  if (type == "short" || type == "int16") return *reinterpret_cast<int16_t*>(raw);
  if (type == "ushort" || type == "uint16") return *reinterpret_cast<uint16_t*>(raw);
  if (type == "int" || type == "int32") return *reinterpret_cast<int32_t*>(raw);
  if (type == "uint" || type == "uint32") return *reinterpret_cast<uint32_t*>(raw);
  if (type == "float" || type == "float32") {
    float f;
    std::memcpy(&f, raw, 4);
    return f;
  }
  double d;
  std::memcpy(&d, raw, 8);
  return d;
}

TriMesh load_ply(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    throw MeshError(path + ": missing ply header");
  bool binary = false;
  struct Element {
    std::string name;
    int count = 0;
    std::vector<PlyProperty> props;
  };
  std::vector<Element> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "comment" || tag == "obj_info") continue;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii")
        binary = false;
      else if (fmt == "binary_little_endian")
        binary = true;
      else
        throw MeshError(path + ": unsupported PLY format " + fmt);
    } else if (tag == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw MeshError(path + ": property before element");
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        p.is_list = true;
        ls >> p.type >> p.list_type >> p.name;
      } else {
        p.type = t;
        ls >> p.name;
      }
      elements.back().props.push_back(p);
    } else if (tag == "end_header") {
      break;
    }
  }

  TriMesh mesh;
  std::vector<std::array<int, 3>> tris;
  for (const auto& elem : elements) {
    if (elem.name == "vertex") {
      mesh.vertices.resize(elem.count, 3);
      std::vector<std::string> scalar_names;
      for (const auto& p : elem.props)
        if (!p.is_list && p.name != "x" && p.name != "y" && p.name != "z")
          scalar_names.push_back(p.name);
      for (const auto& name : scalar_names) mesh.channels[name] = Vec::Zero(elem.count);
      for (int i = 0; i < elem.count; ++i) {
        for (const auto& p : elem.props) {
          if (p.is_list) throw MeshError(path + ": list property on vertex element");
          double v = ply_read_scalar(in, p.type, binary);
          if (p.name == "x")
            mesh.vertices(i, 0) = v;
          else if (p.name == "y")
            mesh.vertices(i, 1) = v;
          else if (p.name == "z")
            mesh.vertices(i, 2) = v;
          else
            mesh.channels[p.name][i] = v;
        }
      }
    } else if (elem.name == "face") {
      for (int f = 0; f < elem.count; ++f) {
        for (const auto& p : elem.props) {
          if (p.is_list) {
            int count = static_cast<int>(ply_read_scalar(in, p.type, binary));
            std::vector<int> idx(count);
            for (int j = 0; j < count; ++j)
              idx[j] = static_cast<int>(ply_read_scalar(in, p.list_type, binary));
            if (p.name == "vertex_indices" || p.name == "vertex_index") {
              if (count < 3) throw MeshError(path + ": face with fewer than 3 vertices");
              for (int j = 1; j + 1 < count; ++j) tris.push_back({idx[0], idx[j], idx[j + 1]});
            }
          } else {
            ply_read_scalar(in, p.type, binary);
          }
        }
      }
    } else {
      // skip unknown elements
      for (int i = 0; i < elem.count; ++i)
        for (const auto& p : elem.props) {
          if (p.is_list) {
            int count = static_cast<int>(ply_read_scalar(in, p.type, binary));
            for (int j = 0; j < count; ++j) ply_read_scalar(in, p.list_type, binary);
          } else {
            ply_read_scalar(in, p.type, binary);
          }
        }
    }
  }
  mesh.triangles.resize(static_cast<int>(tris.size()), 3);
  for (size_t t = 0; t < tris.size(); ++t)
    for (int e = 0; e < 3; ++e) mesh.triangles(static_cast<int>(t), e) = tris[t][e];
  return mesh;
}

void save_ply(const TriMesh& mesh, std::ostream& out, bool binary) {
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  out << "element vertex " << mesh.num_vertices() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  for (const auto& [name, values] : mesh.channels)
    out << "property double " << name << "\n";
  out << "element face " << mesh.num_triangles() << "\n";
  out << "property list uchar int vertex_indices\n";
  out << "end_header\n";
  if (binary) {
    for (int i = 0; i < mesh.num_vertices(); ++i) {
      double xyz[3] = {mesh.vertices(i, 0), mesh.vertices(i, 1), mesh.vertices(i, 2)};
      out.write(reinterpret_cast<const char*>(xyz), 24);
      for (const auto& [name, values] : mesh.channels) {
        double v = values[i];
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      unsigned char count = 3;
      out.write(reinterpret_cast<const char*>(&count), 1);
      int32_t idx[3] = {mesh.triangles(t, 0), mesh.triangles(t, 1), mesh.triangles(t, 2)};
      out.write(reinterpret_cast<const char*>(idx), 12);
    }
  } else {
    char buf[128];
    for (int i = 0; i < mesh.num_vertices(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g", mesh.vertices(i, 0),
                    mesh.vertices(i, 1), mesh.vertices(i, 2));
      out << buf;
      for (const auto& [name, values] : mesh.channels) {
        std::snprintf(buf, sizeof(buf), " %.17g", values[i]);
        out << buf;
      }
      out << "\n";
    }
    for (int t = 0; t < mesh.num_triangles(); ++t)
      out << "3 " << mesh.triangles(t, 0) << " " << mesh.triangles(t, 1) << " "
          << mesh.triangles(t, 2) << "\n";
  }
}

} // namespace

MeshFormat format_from_path(const std::string& path) {
  std::string ext = lower_ext(path);
  if (ext == "off") return MeshFormat::Off;
  if (ext == "obj") return MeshFormat::Obj;
  if (ext == "ply") return MeshFormat::Ply;
  throw MeshError("cannot infer mesh format from path: " + path);
}

TriMesh load_mesh(const std::string& path) { return load_mesh(path, format_from_path(path)); }

TriMesh load_mesh(const std::string& path, MeshFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MeshError("cannot open " + path);
  TriMesh mesh;
  switch (format) {
    case MeshFormat::Off: mesh = load_off(in, path); break;
    case MeshFormat::Obj: mesh = load_obj(in, path); break;
    case MeshFormat::Ply: mesh = load_ply(in, path); break;
  }
  validate(mesh);
  return mesh;
}

void save_mesh(const TriMesh& mesh, const std::string& path) {
  save_mesh(mesh, path, format_from_path(path));
}

void save_mesh(const TriMesh& mesh, const std::string& path, MeshFormat format, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MeshError("cannot open " + path + " for writing");
  switch (format) {
    case MeshFormat::Off: save_off(mesh, out); break;
    case MeshFormat::Obj: save_obj(mesh, out); break;
    case MeshFormat::Ply: save_ply(mesh, out, binary); break;
  }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

TriMesh make_grid(int m) {
  if (m < 2) throw MeshError("make_grid requires m >= 2");
  TriMesh mesh = make_grid_rect(m, m, 1.0, 1.0);
  return mesh;
}

TriMesh make_grid_rect(int nx, int ny, double w, double h) {
  if (nx < 2 || ny < 2) throw MeshError("grid requires at least 2 samples per side");
  TriMesh mesh;
  mesh.vertices.resize(nx * ny, 3);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int v = j * nx + i;
      mesh.vertices(v, 0) = w * i / static_cast<double>(nx - 1);
      mesh.vertices(v, 1) = h * j / static_cast<double>(ny - 1);
      mesh.vertices(v, 2) = 0.0;
    }
  mesh.triangles.resize(2 * (nx - 1) * (ny - 1), 3);
  int t = 0;
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      int v00 = j * nx + i, v10 = v00 + 1, v01 = v00 + nx, v11 = v01 + 1;
      if ((i + j) % 2 == 0) { // alternate the cell diagonal
        mesh.triangles.row(t++) << v00, v10, v11;
        mesh.triangles.row(t++) << v00, v11, v01;
      } else {
        mesh.triangles.row(t++) << v00, v10, v01;
        mesh.triangles.row(t++) << v10, v11, v01;
      }
    }
  validate(mesh);
  return mesh;
}

TriMesh make_icosphere(int subdivisions, double radius) {
  if (subdivisions < 0) throw MeshError("subdivisions must be >= 0");
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& v : verts) v.normalize();

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Eigen::Vector3d m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      int idx = static_cast<int>(verts.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }

  TriMesh mesh;
  mesh.vertices.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<int>(i)) = radius * verts[i];
  mesh.triangles.resize(static_cast<int>(faces.size()), 3);
  for (size_t t = 0; t < faces.size(); ++t)
    for (int e = 0; e < 3; ++e) mesh.triangles(static_cast<int>(t), e) = faces[t][e];
  validate(mesh);
  return mesh;
}

TriMesh make_box(double lx, double ly, double lz, int cells) {
  if (cells < 1) throw MeshError("cells_per_edge must be >= 1");
  const int m = cells + 1;
  std::map<std::array<int64_t, 3>, int> index; // lattice point -> vertex id
  TriMesh mesh;
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> tris;
  double d[3] = {lx, ly, lz};

  auto vertex_at = [&](int64_t i, int64_t j, int64_t k) {
    auto key = std::array<int64_t, 3>{i, j, k};
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    Eigen::Vector3d p(d[0] * i / cells, d[1] * j / cells, d[2] * k / cells);
    verts.push_back(p);
    int id = static_cast<int>(verts.size()) - 1;
    index[key] = id;
    return id;
  };

  // axis = fixed coordinate, side = 0 or cells; (u,v) run over the face grid
  auto add_face = [&](int axis, int64_t side, bool flip) {
    for (int u = 0; u < cells; ++u)
      for (int v = 0; v < cells; ++v) {
        auto corner = [&](int du, int dv) {
          int64_t c[3];
          c[axis] = side;
          c[(axis + 1) % 3] = u + du;
          c[(axis + 2) % 3] = v + dv;
          return vertex_at(c[0], c[1], c[2]);
        };
        int v00 = corner(0, 0), v10 = corner(1, 0), v01 = corner(0, 1), v11 = corner(1, 1);
        if (!flip) {
          tris.push_back({v00, v10, v11});
          tris.push_back({v00, v11, v01});
        } else {
          tris.push_back({v00, v11, v10});
          tris.push_back({v00, v01, v11});
        }
      }
  };
  for (int axis = 0; axis < 3; ++axis) {
    add_face(axis, 0, true);
    add_face(axis, cells, false);
  }

  mesh.vertices.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<int>(i)) = verts[i];
  mesh.triangles.resize(static_cast<int>(tris.size()), 3);
  for (size_t t = 0; t < tris.size(); ++t)
    for (int e = 0; e < 3; ++e) mesh.triangles(static_cast<int>(t), e) = tris[t][e];
  validate(mesh);
  return mesh;
}

IntervalMesh make_interval(int n) {
  if (n < 2) throw MeshError("make_interval requires n >= 2");
  IntervalMesh m;
  m.points = Vec::LinSpaced(n, 0.0, 1.0);
  return m;
}

// ---------------------------------------------------------------------------
// Geodesics
// ---------------------------------------------------------------------------

DistanceField graph_geodesics(const TriMesh& mesh, const std::vector<int>& sources) {
  const int n = mesh.num_vertices();
  if (sources.empty()) throw MeshError("graph_geodesics: empty source set");
  for (int s : sources)
    if (s < 0 || s >= n) throw MeshError("graph_geodesics: source index out of range");
  if (mesh.edges.empty() && mesh.num_triangles() > 0)
    throw MeshError("graph_geodesics: mesh not validated (no edge table)");

  // adjacency with Euclidean edge lengths
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const auto& e : mesh.edges) {
    double len = (mesh.vertices.row(e[0]) - mesh.vertices.row(e[1])).norm();
    adj[e[0]].push_back({e[1], len});
    adj[e[1]].push_back({e[0], len});
  }

  DistanceField field;
  field.sources = sources;
  field.distance = Vec::Constant(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
  for (int s : sources) {
    field.distance[s] = 0.0;
    queue.push({0.0, s});
  }
  while (!queue.empty()) {
    auto [d, v] = queue.top();
    queue.pop();
    if (d > field.distance[v]) continue;
    for (const auto& [u, len] : adj[v]) {
      double nd = d + len;
      if (nd < field.distance[u]) {
        field.distance[u] = nd;
        queue.push({nd, u});
      }
    }
  }
  for (int v = 0; v < n; ++v)
    if (std::isinf(field.distance[v])) field.unreachable.push_back(v);
  return field;
}

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

TriMesh perturb_vertices(const TriMesh& mesh, double sigma_fraction, uint64_t seed,
                         ValidationReport* report) {
  if (sigma_fraction < 0) throw MeshError("perturb_vertices: sigma_fraction must be >= 0");
  TriMesh out = mesh;
  if (sigma_fraction > 0) {
    const double sigma = sigma_fraction * mesh.mean_edge_length();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (int i = 0; i < out.num_vertices(); ++i)
      for (int c = 0; c < 3; ++c) out.vertices(i, c) += gauss(rng);
  }
  ValidationReport r = validate(out, ValidatePolicy::Report);
  if (report) *report = r;
  return out;
}

PunctureResult puncture_mesh(const TriMesh& mesh, double area_fraction, uint64_t seed) {
  if (area_fraction < 0 || area_fraction >= 1)
    throw MeshError("puncture_mesh: area_fraction must be in [0,1)");
  const int nt = mesh.num_triangles();
  const int n = mesh.num_vertices();

  PunctureResult result;
  if (area_fraction == 0) {
    result.mesh = mesh;
    result.old_to_new.resize(n);
    result.new_to_old.resize(n);
    for (int i = 0; i < n; ++i) result.old_to_new[i] = result.new_to_old[i] = i;
    return result;
  }

  const double total = mesh.total_area();
  const double target = area_fraction * total;

  // triangle adjacency across edges
  std::vector<std::vector<int>> tri_adj(nt);
  for (size_t e = 0; e < mesh.edges.size(); ++e) {
    const auto& tris = mesh.edge_triangles[e];
    if (tris.size() == 2) {
      tri_adj[tris[0]].push_back(tris[1]);
      tri_adj[tris[1]].push_back(tris[0]);
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<char> removed(nt, 0);
  double removed_area = 0.0;
  std::uniform_int_distribution<int> pick(0, nt - 1);
  // grow small clusters (a few rings) around random seed triangles
  while (removed_area < target) {
    int s = pick(rng);
    if (removed[s]) continue;
    std::vector<int> cluster = {s};
    std::uniform_int_distribution<int> ring_count(1, 3);
    int rings = ring_count(rng);
    std::vector<int> frontier = {s};
    removed[s] = 1;
    removed_area += mesh.triangle_area(s);
    for (int r = 0; r < rings && removed_area < target; ++r) {
      std::vector<int> next;
      for (int t : frontier)
        for (int u : tri_adj[t]) {
          if (removed[u] || removed_area >= target) continue;
          removed[u] = 1;
          removed_area += mesh.triangle_area(u);
          next.push_back(u);
        }
      frontier = std::move(next);
      if (frontier.empty()) break;
    }
  }

  // rebuild mesh from surviving triangles; drop isolated vertices
  std::vector<char> keep_vertex(n, 0);
  std::vector<std::array<int, 3>> kept;
  for (int t = 0; t < nt; ++t)
    if (!removed[t]) {
      kept.push_back({mesh.triangles(t, 0), mesh.triangles(t, 1), mesh.triangles(t, 2)});
      for (int e = 0; e < 3; ++e) keep_vertex[mesh.triangles(t, e)] = 1;
    }
  if (kept.empty()) throw MeshError("puncture_mesh: removal fraction left no triangles");

  result.old_to_new.assign(n, -1);
  for (int i = 0; i < n; ++i)
    if (keep_vertex[i]) {
      result.old_to_new[i] = static_cast<int>(result.new_to_old.size());
      result.new_to_old.push_back(i);
    }
  result.mesh.vertices.resize(static_cast<int>(result.new_to_old.size()), 3);
  for (size_t i = 0; i < result.new_to_old.size(); ++i)
    result.mesh.vertices.row(static_cast<int>(i)) = mesh.vertices.row(result.new_to_old[i]);
  for (const auto& [name, values] : mesh.channels) {
    Vec v(static_cast<int>(result.new_to_old.size()));
    for (size_t i = 0; i < result.new_to_old.size(); ++i) v[static_cast<int>(i)] = values[result.new_to_old[i]];
    result.mesh.channels[name] = v;
  }
  result.mesh.triangles.resize(static_cast<int>(kept.size()), 3);
  for (size_t t = 0; t < kept.size(); ++t)
    for (int e = 0; e < 3; ++e)
      result.mesh.triangles(static_cast<int>(t), e) = result.old_to_new[kept[t][e]];
  result.removed_area_fraction = removed_area / total;

  validate(result.mesh);

  // fully disconnected check: every vertex reachable from vertex 0
  DistanceField df = graph_geodesics(result.mesh, {0});
  if (static_cast<int>(df.unreachable.size()) == result.mesh.num_vertices() - 1)
    throw MeshError("puncture_mesh: mesh fully disconnected");
  return result;
}

} // namespace hamspec
