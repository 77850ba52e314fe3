#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hamspec/mesh.h"
#include "test_support.h"

using namespace hamspec;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("minimal OFF file loads") {
  std::string path = temp_path("hamspec_tri.off");
  {
    std::ofstream out(path);
    out << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
  }
  TriMesh mesh = load_mesh(path);
  CHECK(mesh.num_vertices() == 3);
  CHECK(mesh.num_triangles() == 1);
  CHECK(mesh.triangle_area(0) == doctest::Approx(0.5));
}

TEST_CASE("out-of-range face index is rejected") {
  std::string path = temp_path("hamspec_bad.obj");
  {
    std::ofstream out(path);
    for (int i = 0; i < 8; ++i) out << "v " << i << " 0 " << i * i << "\n";
    out << "f 1 2 10\n"; // references vertex 9 of an 8-vertex file
  }
  CHECK_THROWS_AS(load_mesh(path), MeshError);
}

TEST_CASE("repeated index in a face is rejected") {
  TriMesh mesh;
  mesh.vertices.resize(3, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  mesh.triangles.resize(1, 3);
  mesh.triangles << 0, 1, 1;
  CHECK_THROWS_AS(validate(mesh), MeshError);
}

TEST_CASE("grid generator counts") {
  TriMesh g2 = make_grid(2);
  CHECK(g2.num_vertices() == 4);
  CHECK(g2.num_triangles() == 2);

  for (int m : {3, 5, 8, 16}) {
    TriMesh g = make_grid(m);
    CHECK(g.num_vertices() == m * m);
    CHECK(g.num_triangles() == 2 * (m - 1) * (m - 1));
    CHECK(g.total_area() == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(make_grid(1), MeshError);
}

TEST_CASE("interval generator") {
  IntervalMesh two = make_interval(2);
  CHECK(two.n() == 2);
  CHECK(two.spacing() == doctest::Approx(1.0));
  IntervalMesh m = make_interval(11);
  CHECK(m.spacing() == doctest::Approx(0.1));
  CHECK(m.points[10] == doctest::Approx(1.0));
  CHECK_THROWS_AS(make_interval(1), MeshError);
}

TEST_CASE("loader round-trip is bit exact") {
  TriMesh mesh = testing::bumpy_grid(6, 5, 0.3, 11);
  mesh.channels["potential"] = testing::random_vector(mesh.num_vertices(), 3);

  for (auto [fmt, binary, name] : {std::tuple{MeshFormat::Off, false, "rt.off"},
                                   std::tuple{MeshFormat::Obj, false, "rt.obj"},
                                   std::tuple{MeshFormat::Ply, false, "rt_ascii.ply"},
                                   std::tuple{MeshFormat::Ply, true, "rt_bin.ply"}}) {
    std::string path = temp_path(name);
    save_mesh(mesh, path, fmt, binary);
    TriMesh loaded = load_mesh(path, fmt);
    REQUIRE(loaded.num_vertices() == mesh.num_vertices());
    REQUIRE(loaded.num_triangles() == mesh.num_triangles());
    CHECK(loaded.vertices == mesh.vertices); // bit exact
    CHECK(loaded.triangles == mesh.triangles);
    if (fmt == MeshFormat::Ply) {
      REQUIRE(loaded.channels.count("potential") == 1);
      CHECK(loaded.channels.at("potential") == mesh.channels.at("potential"));
    }
  }
}

TEST_CASE("geodesics: source distance and chain sums") {
  // straight chain of 3 collinear unit edges folded into thin triangles
  TriMesh mesh;
  mesh.vertices.resize(5, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 2, 0, 0, 3, 0, 0, 1.5, 10, 0;
  mesh.triangles.resize(3, 3);
  mesh.triangles << 0, 1, 4, 1, 2, 4, 2, 3, 4;
  validate(mesh);
  DistanceField df = graph_geodesics(mesh, {0});
  CHECK(df.distance[0] == 0.0);
  CHECK(df.distance[1] == doctest::Approx(1.0));
  CHECK(df.distance[2] == doctest::Approx(2.0));
  CHECK(df.distance[3] == doctest::Approx(3.0));
}

TEST_CASE("geodesics match Floyd-Warshall on a small mesh") {
  TriMesh mesh = testing::bumpy_grid(7, 7, 0.4, 21); // 49 vertices
  Mat oracle = testing::floyd_warshall(mesh);
  for (int s : {0, 17, 48}) {
    DistanceField df = graph_geodesics(mesh, {s});
    for (int v = 0; v < mesh.num_vertices(); ++v)
      CHECK(df.distance[v] == doctest::Approx(oracle(s, v)).epsilon(1e-12));
  }
  // multi-source equals the min over sources
  DistanceField multi = graph_geodesics(mesh, {3, 40});
  for (int v = 0; v < mesh.num_vertices(); ++v)
    CHECK(multi.distance[v] == doctest::Approx(std::min(oracle(3, v), oracle(40, v))));
}

TEST_CASE("perturb_vertices basics") {
  TriMesh mesh = make_grid(10);
  TriMesh same = perturb_vertices(mesh, 0.0, 5);
  CHECK(same.vertices == mesh.vertices);

  TriMesh a = perturb_vertices(mesh, 0.2, 99);
  TriMesh b = perturb_vertices(mesh, 0.2, 99);
  CHECK(a.vertices == b.vertices); // deterministic
  CHECK(a.triangles == mesh.triangles);
  TriMesh c = perturb_vertices(mesh, 0.2, 100);
  CHECK(a.vertices != c.vertices);
}

TEST_CASE("perturb_vertices Monte Carlo displacement statistic") {
  // mean norm of an isotropic 3-D Gaussian displacement is sigma*sqrt(8/pi)
  TriMesh mesh = make_grid(40);
  const double sigma = 0.2 * mesh.mean_edge_length();
  double sum = 0.0;
  int count = 0;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    TriMesh noisy = perturb_vertices(mesh, 0.2, seed);
    for (int i = 0; i < mesh.num_vertices(); ++i) {
      sum += (noisy.vertices.row(i) - mesh.vertices.row(i)).norm();
      ++count;
    }
  }
  double expected = sigma * std::sqrt(8.0 / M_PI);
  CHECK(sum / count == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("puncture_mesh removes the requested area") {
  TriMesh mesh = make_grid(20);
  PunctureResult zero = puncture_mesh(mesh, 0.0, 7);
  CHECK(zero.mesh.num_triangles() == mesh.num_triangles());

  double largest = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    largest = std::max(largest, mesh.triangle_area(t));

  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    PunctureResult r = puncture_mesh(mesh, 0.3, seed);
    CHECK(r.removed_area_fraction >= 0.3);
    CHECK(r.removed_area_fraction <= 0.3 + largest / mesh.total_area() + 1e-12);

    // remap composed with inverse remap is the identity on survivors
    for (size_t nv = 0; nv < r.new_to_old.size(); ++nv)
      CHECK(r.old_to_new[r.new_to_old[nv]] == static_cast<int>(nv));
    for (int ov = 0; ov < mesh.num_vertices(); ++ov)
      if (r.old_to_new[ov] >= 0) CHECK(r.new_to_old[r.old_to_new[ov]] == ov);
  }
}

TEST_CASE("degenerate triangles are rejected at validation") {
  TriMesh mesh;
  mesh.vertices.resize(4, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 2, 0, 0, 0, 1, 0; // first three collinear
  mesh.triangles.resize(2, 3);
  mesh.triangles << 0, 1, 2, 0, 1, 3;
  CHECK_THROWS_AS(validate(mesh), MeshError);
  ValidationReport report = validate(mesh, ValidatePolicy::Report);
  CHECK(report.degenerate_triangles == 1);
}

TEST_CASE("non-manifold edges are rejected") {
  TriMesh mesh;
  mesh.vertices.resize(5, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, -1, 0;
  mesh.triangles.resize(3, 3);
  mesh.triangles << 0, 1, 2, 0, 1, 3, 0, 1, 4; // edge (0,1) in three triangles
  CHECK_THROWS_AS(validate(mesh), MeshError);
}
