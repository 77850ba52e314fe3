#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace hamspec {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Triangles = Eigen::Matrix<int, Eigen::Dynamic, 3>;

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Triangle mesh with optional named per-vertex scalar channels.
/// Connectivity tables (edges, adjacency) are filled by validate() and the
/// mesh is treated as immutable afterwards.
struct TriMesh {
  Points vertices;
  Triangles triangles;
  std::map<std::string, Vec> channels;

  // Derived by validate():
  std::vector<std::array<int, 2>> edges;          // undirected, a < b
  std::vector<std::vector<int>> edge_triangles;   // triangles touching each edge
  std::vector<std::vector<int>> vertex_neighbors; // one-ring vertex sets

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_triangles() const { return static_cast<int>(triangles.rows()); }

  double triangle_area(int t) const;
  double total_area() const;
  double mean_edge_length() const;
  double bbox_diagonal() const;
};

enum class ValidatePolicy { Throw, Report };

struct ValidationReport {
  int degenerate_triangles = 0;
  bool ok = true;
  std::string message;
};

// Checks index bounds, repeated indices, degenerate areas (relative to the
// bounding-box diagonal) and edge manifoldness; fills the adjacency tables.
ValidationReport validate(TriMesh& mesh, ValidatePolicy policy = ValidatePolicy::Throw);

// --- File formats (OFF, OBJ geometry-only, ASCII/binary little-endian PLY) ---

enum class MeshFormat { Off, Obj, Ply };

MeshFormat format_from_path(const std::string& path);
TriMesh load_mesh(const std::string& path);
TriMesh load_mesh(const std::string& path, MeshFormat format);
void save_mesh(const TriMesh& mesh, const std::string& path);
void save_mesh(const TriMesh& mesh, const std::string& path, MeshFormat format,
               bool binary = false);

// --- Generators ---

// Unit-square grid with m*m vertices and 2(m-1)^2 triangles; cell diagonals
// alternate so that the triangulation is mirror symmetric for even m.
TriMesh make_grid(int m);

// Rectangular grid on [0,w] x [0,h] with nx*ny vertices.
TriMesh make_grid_rect(int nx, int ny, double w, double h);

// Icosphere of given radius centered at the origin.
TriMesh make_icosphere(int subdivisions, double radius = 1.0);

// Axis-aligned box surface with per-face grid refinement (sharp edges).
TriMesh make_box(double lx, double ly, double lz, int cells_per_edge);

/// Uniform 1-D chain on [0,1] with n samples, spacing 1/(n-1).
struct IntervalMesh {
  Vec points;
  int n() const { return static_cast<int>(points.size()); }
  double spacing() const { return points.size() > 1 ? points[1] - points[0] : 0.0; }
};

IntervalMesh make_interval(int n);

// --- Graph geodesics (Dijkstra over the edge graph; an approximation of
// exact polyhedral geodesics, sufficient for potentials and error curves) ---

struct DistanceField {
  std::vector<int> sources;
  Vec distance;                 // +inf on unreachable vertices
  std::vector<int> unreachable; // flagged disconnected vertices
};

DistanceField graph_geodesics(const TriMesh& mesh, const std::vector<int>& sources);

// --- Controlled perturbations for robustness experiments ---

// Displaces vertices by i.i.d. Gaussian noise with per-axis standard
// deviation sigma_fraction * mean edge length. Connectivity is unchanged;
// triangles that become degenerate are counted in the report.
TriMesh perturb_vertices(const TriMesh& mesh, double sigma_fraction, uint64_t seed,
                         ValidationReport* report = nullptr);

struct PunctureResult {
  TriMesh mesh;
  std::vector<int> old_to_new; // -1 for dropped vertices
  std::vector<int> new_to_old;
  double removed_area_fraction = 0.0;
};

// Removes triangles in small clusters grown around random seed triangles
// until at least area_fraction of the surface area is gone.
PunctureResult puncture_mesh(const TriMesh& mesh, double area_fraction, uint64_t seed);

} // namespace hamspec
