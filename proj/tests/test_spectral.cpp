#include <doctest.h>

#include <random>

#include "hamspec/spectral.h"
#include "test_support.h"

using namespace hamspec;

namespace {

struct Setup {
  TriMesh mesh;
  SparseMat W;
  Vec A;
  Spectrum lbo;
};

Setup grid_setup(int m, int k) {
  Setup s;
  s.mesh = make_grid(m);
  s.W = assemble_stiffness(s.mesh);
  s.A = assemble_mass(s.mesh);
  EigOptions opts;
  opts.k = k;
  s.lbo = solve_generalized(s.W, s.A, opts);
  return s;
}

// mirror map of the unit-square grid: (i, j) -> (m-1-i, j)
std::vector<int> grid_mirror(int m) {
  std::vector<int> map(m * m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) map[j * m + i] = j * m + (m - 1 - i);
  return map;
}

} // namespace

TEST_CASE("diffusion basics") {
  Setup s = grid_setup(12, 20);
  const int n = s.mesh.num_vertices();

  SUBCASE("t = 0 projects onto the truncated span") {
    Vec u0 = testing::random_vector(n, 3, -1.0, 1.0);
    Vec proj = diffuse(s.lbo, u0, 0.0);
    Vec in_span = s.lbo.eigenvectors * (s.lbo.eigenvectors.transpose() * (s.A.asDiagonal() * u0));
    CHECK((proj - in_span).cwiseAbs().maxCoeff() < 1e-12);
    Vec twice = diffuse(s.lbo, proj, 0.0); // already in span: exact
    CHECK((twice - proj).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("long-time limit is the A-weighted mean") {
    Vec u0 = testing::random_vector(n, 4, 0.0, 2.0);
    double t = 50.0 / s.lbo.eigenvalues[1];
    Vec u = diffuse(s.lbo, u0, t);
    double mean = u0.dot(s.A) / s.A.sum();
    CHECK((u.array() - mean).abs().maxCoeff() < 1e-8);
  }

  SUBCASE("semigroup composition") {
    Vec u0 = testing::random_vector(n, 5, -1.0, 1.0);
    Vec one_step = diffuse(s.lbo, u0, 0.7);
    Vec two_step = diffuse(s.lbo, diffuse(s.lbo, u0, 0.3), 0.4);
    CHECK((one_step - two_step).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("negative time is rejected") {
    CHECK_THROWS_AS(diffuse(s.lbo, Vec::Zero(n), -1.0), SolveError);
  }
}

TEST_CASE("heat kernel symmetry and limits") {
  Setup s = grid_setup(11, 15);
  SUBCASE("row symmetry K(x,y,t) = K(y,x,t)") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> pick(0, s.mesh.num_vertices() - 1);
    for (int trial = 0; trial < 20; ++trial) {
      int x = pick(rng), y = pick(rng);
      Vec row_x = heat_kernel_row(s.lbo, x, 0.05);
      Vec row_y = heat_kernel_row(s.lbo, y, 0.05);
      CHECK(row_x[y] == doctest::Approx(row_y[x]).epsilon(1e-12));
    }
  }
  SUBCASE("long-time limit 1/area") {
    double t = 60.0 / s.lbo.eigenvalues[1];
    Vec row = heat_kernel_row(s.lbo, 7, t);
    CHECK((row.array() - 1.0 / s.A.sum()).abs().maxCoeff() < 1e-8);
  }
  SUBCASE("truncated kernel is positive semidefinite") {
    const int n = s.mesh.num_vertices();
    Mat K(n, n);
    for (int x = 0; x < n; ++x) K.row(x) = heat_kernel_row(s.lbo, x, 0.1).transpose();
    Mat Ks = 0.5 * (K + K.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(Ks);
    CHECK(es.eigenvalues().minCoeff() > -1e-10 * es.eigenvalues().maxCoeff());
  }
}

TEST_CASE("asymmetric potential breaks kernel symmetry across the mirror") {
  // even-m grid with alternating diagonals: the x-mirror is an automorphism
  const int m = 12;
  Setup s = grid_setup(m, 9); // k = 9 ends on a closed eigenvalue cluster
  std::vector<int> mirror = grid_mirror(m);

  int src = 3 * m + 2; // off-axis vertex
  int mirrored_src = mirror[src];
  REQUIRE(src != mirrored_src);

  SUBCASE("zero potential: kernel rows match under the mirror map") {
    Vec row_a = heat_kernel_row(s.lbo, src, 0.02);
    Vec row_b = heat_kernel_row(s.lbo, mirrored_src, 0.02);
    double worst = 0.0;
    for (int v = 0; v < s.mesh.num_vertices(); ++v)
      worst = std::max(worst, std::abs(row_a[v] - row_b[mirror[v]]));
    CHECK(worst < 1e-6 * row_a.cwiseAbs().maxCoeff());
  }

  SUBCASE("geodesic potential from an off-axis source separates the pair") {
    DistanceField df = graph_geodesics(s.mesh, {1});
    PotentialField V{10.0 * df.distance, 1.0, true};
    SparseMat H = assemble_hamiltonian(s.W, s.A, V);
    EigOptions opts;
    opts.k = 9;
    Spectrum ham = solve_generalized(H, s.A, opts);
    Vec row_a = heat_kernel_row(ham, src, 0.02);
    Vec row_b = heat_kernel_row(ham, mirrored_src, 0.02);
    double worst = 0.0;
    for (int v = 0; v < s.mesh.num_vertices(); ++v)
      worst = std::max(worst, std::abs(row_a[v] - row_b[mirror[v]]));
    CHECK(worst > 1e-3 * row_a.cwiseAbs().maxCoeff()); // strictly broken
  }
}

TEST_CASE("hks properties") {
  // irregular surface: simple spectrum, so no truncation cut can split a
  // degenerate cluster between the two solves
  Setup s;
  s.mesh = testing::bumpy_grid(10, 9, 0.5, 77);
  s.W = assemble_stiffness(s.mesh);
  s.A = assemble_mass(s.mesh);
  EigOptions setup_opts;
  setup_opts.k = 18;
  s.lbo = solve_generalized(s.W, s.A, setup_opts);

  Vec times = default_hks_times(s.lbo, 24);
  DescriptorField d = hks(s.lbo, times);

  SUBCASE("positivity") { CHECK(d.values.minCoeff() > 0); }

  SUBCASE("permutation equivariance on an isometric copy") {
    const int n = s.mesh.num_vertices();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(17);
    std::shuffle(perm.begin(), perm.end(), rng);
    TriMesh copy;
    copy.vertices.resize(n, 3);
    for (int i = 0; i < n; ++i) copy.vertices.row(perm[i]) = s.mesh.vertices.row(i);
    copy.triangles = s.mesh.triangles;
    for (int t = 0; t < copy.num_triangles(); ++t)
      for (int e = 0; e < 3; ++e) copy.triangles(t, e) = perm[s.mesh.triangles(t, e)];
    validate(copy);
    SparseMat W2 = assemble_stiffness(copy);
    Vec A2 = assemble_mass(copy);
    EigOptions opts;
    opts.k = 18;
    Spectrum lbo2 = solve_generalized(W2, A2, opts);
    DescriptorField d2 = hks(lbo2, times);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, (d2.values.row(perm[i]) - d.values.row(i)).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-8 * d.values.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("step potential increases descriptor separation between regions") {
  Setup s = grid_setup(12, 24);
  const int n = s.mesh.num_vertices();
  Vec V = Vec::Zero(n);
  std::vector<int> low, high;
  for (int i = 0; i < n; ++i) {
    if (s.mesh.vertices(i, 0) > 0.5 + 1e-9) {
      V[i] = 220.0;
      high.push_back(i);
    } else if (s.mesh.vertices(i, 0) < 0.5 - 1e-9) {
      low.push_back(i);
    }
  }
  PotentialField field{V, 1.0, true};
  SparseMat H = assemble_hamiltonian(s.W, s.A, field);
  EigOptions opts;
  opts.k = 24;
  Spectrum ham = solve_generalized(H, s.A, opts);

  auto fisher = [&](const Spectrum& spec) {
    Vec times = default_hks_times(spec, 12);
    DescriptorField d = hks(spec, times);
    double score = 0.0;
    for (int j = 0; j < d.values.cols(); ++j) {
      double mean_low = 0, mean_high = 0, var = 0;
      for (int i : low) mean_low += d.values(i, j);
      for (int i : high) mean_high += d.values(i, j);
      mean_low /= static_cast<double>(low.size());
      mean_high /= static_cast<double>(high.size());
      for (int i : low) var += std::pow(d.values(i, j) - mean_low, 2);
      for (int i : high) var += std::pow(d.values(i, j) - mean_high, 2);
      var /= static_cast<double>(low.size() + high.size());
      score += (mean_low - mean_high) * (mean_low - mean_high) / (var + 1e-30);
    }
    return score / static_cast<double>(d.values.cols());
  };
  CHECK(fisher(ham) > fisher(s.lbo));
}

TEST_CASE("wks schedule and descriptor") {
  Setup s = grid_setup(10, 20);
  WksSchedule sched = default_wks_schedule(s.lbo, 40);
  CHECK(sched.sigma > 0);
  DescriptorField d = wks(s.lbo, sched.energies, sched.sigma);
  CHECK(d.values.allFinite());
  CHECK(d.values.minCoeff() >= 0);
  SUBCASE("all eigenvalues excluded") {
    Spectrum tiny = s.lbo;
    tiny.eigenvalues = Vec::Zero(3);
    tiny.eigenvectors = s.lbo.eigenvectors.leftCols(3);
    CHECK_THROWS_AS(wks(tiny, sched.energies, sched.sigma), SolveError);
  }
}

TEST_CASE("nodal domains") {
  Setup s = grid_setup(13, 20);

  SUBCASE("constant first eigenfunction gives one domain") {
    NodalDecomposition d = nodal_domains(s.mesh, s.lbo.eigenvectors.col(0));
    CHECK(d.domain_count == 1);
  }
  SUBCASE("second eigenfunction gives exactly two domains") {
    // rectangle with an even vertex count across the long side: the nodal
    // line of cos(pi x) falls between grid columns, away from vertices
    TriMesh rect = make_grid_rect(12, 9, 1.0, 0.7);
    SparseMat W = assemble_stiffness(rect);
    Vec A = assemble_mass(rect);
    EigOptions opts;
    opts.k = 2;
    Spectrum lbo = solve_generalized(W, A, opts);
    NodalDecomposition d = nodal_domains(rect, lbo.eigenvectors.col(1));
    CHECK(d.domain_count == 2);
  }
  SUBCASE("courant-type bound over random potentials") {
    for (uint64_t seed = 0; seed < 6; ++seed) {
      Vec v = testing::random_vector(s.mesh.num_vertices(), seed, 0.0, 60.0);
      PotentialField V{v, 1.0, true};
      EigOptions opts;
      opts.k = 20;
      Spectrum ham = solve_generalized(assemble_hamiltonian(s.W, s.A, V), s.A, opts);
      for (int i = 0; i < 20; ++i) {
        NodalDecomposition d = nodal_domains(s.mesh, ham.eigenvectors.col(i));
        CHECK(d.domain_count <= i + 1);
      }
    }
  }
  SUBCASE("components agree across compatible-sign edges") {
    NodalDecomposition d = nodal_domains(s.mesh, s.lbo.eigenvectors.col(5));
    for (const auto& e : s.mesh.edges)
      if (d.sign[e[0]] * d.sign[e[1]] >= 0) CHECK(d.component[e[0]] == d.component[e[1]]);
  }
}

TEST_CASE("residual bound") {
  Setup s = grid_setup(11, 30);
  const int n = s.mesh.num_vertices();
  Vec v = testing::random_vector(n, 2, 0.0, 8.0);
  PotentialField V{v, 1.0, true};
  SparseMat H = assemble_hamiltonian(s.W, s.A, V);
  EigOptions opts;
  opts.k = 30;
  Spectrum ham = solve_generalized(H, s.A, opts);

  SUBCASE("projection of an eigenfunction has zero residual") {
    ResidualBound r = residual_bound_check(ham, H, ham.eigenvectors.col(0), 5);
    CHECK(r.residual_sq < 1e-12);
    CHECK(r.holds);
  }
  SUBCASE("random smooth functions never violate the bound") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
      Vec f = diffuse(ham, testing::random_vector(n, seed, -1.0, 1.0), 0.01);
      ResidualBound r = residual_bound_check(ham, H, f, 10);
      CHECK(r.bound_defined);
      CHECK(r.holds);
    }
  }
  SUBCASE("equality direction at f = psi_{n+1}") {
    const int trunc = 12;
    Vec f = ham.eigenvectors.col(trunc);
    ResidualBound r = residual_bound_check(ham, H, f, trunc);
    CHECK(r.residual_sq == doctest::Approx(1.0).epsilon(1e-8));
    double ratio = r.residual_sq / r.bound;
    CHECK(ratio > 0.99);
    CHECK(ratio < 1.01);
  }
}
