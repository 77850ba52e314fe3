#include <doctest.h>

#include <filesystem>

#include "hamspec/eigensolver.h"
#include "hamspec/operators.h"
#include "test_support.h"

using namespace hamspec;

TEST_CASE("cotangent weights of the right isoceles triangle") {
  TriMesh mesh;
  mesh.vertices.resize(3, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  mesh.triangles.resize(1, 3);
  mesh.triangles << 0, 1, 2;
  validate(mesh);
  SparseMat W = assemble_stiffness(mesh);
  Mat Wd = Mat(W);
  // hypotenuse (1,2): opposite angle 90 deg, cot = 0
  CHECK(Wd(1, 2) == doctest::Approx(0.0).epsilon(1e-14));
  // legs: opposite angles 45 deg, weight -cot(45)/2 = -0.5
  CHECK(Wd(0, 1) == doctest::Approx(-0.5));
  CHECK(Wd(0, 2) == doctest::Approx(-0.5));
  CHECK(Wd(0, 0) == doctest::Approx(1.0));
  CHECK(Wd(1, 1) == doctest::Approx(0.5));
  CHECK(Wd(2, 2) == doctest::Approx(0.5));
}

TEST_CASE("stiffness annihilates constants and is PSD") {
  TriMesh mesh = testing::bumpy_grid(9, 8, 0.5, 4);
  SparseMat W = assemble_stiffness(mesh);
  Vec ones = Vec::Ones(mesh.num_vertices());
  CHECK((W * ones).cwiseAbs().maxCoeff() < 1e-12);

  // random quadratic forms stay nonnegative
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Vec f = testing::random_vector(mesh.num_vertices(), seed, -1.0, 1.0);
    CHECK(f.dot(W * f) >= -1e-12 * f.squaredNorm());
  }
  // smallest eigenvalue >= -1e-10 * ||W||
  Mat Wd = Mat(W);
  Eigen::SelfAdjointEigenSolver<Mat> es(Wd);
  double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(es.eigenvalues()[0] >= -1e-10 * scale);
}

TEST_CASE("mass lumping: single right triangle") {
  TriMesh mesh;
  mesh.vertices.resize(3, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  mesh.triangles.resize(1, 3);
  mesh.triangles << 0, 1, 2;
  validate(mesh);
  Vec bary = assemble_mass(mesh, MassScheme::Barycentric);
  for (int i = 0; i < 3; ++i) CHECK(bary[i] == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("mass sums to surface area under both schemes") {
  for (uint64_t seed : {1ull, 5ull}) {
    TriMesh mesh = testing::bumpy_grid(8, 7, 0.6, seed);
    double area = mesh.total_area();
    CHECK(assemble_mass(mesh, MassScheme::Barycentric).sum() ==
          doctest::Approx(area).epsilon(1e-10));
    CHECK(assemble_mass(mesh, MassScheme::MixedVoronoi).sum() ==
          doctest::Approx(area).epsilon(1e-10));
  }
}

TEST_CASE("mixed-voronoi stays positive on an obtuse fan") {
  // center vertex surrounded by very flat (obtuse) triangles
  TriMesh mesh;
  const int spokes = 8;
  mesh.vertices.resize(spokes + 1, 3);
  mesh.vertices.row(0) << 0, 0, 0.02;
  for (int s = 0; s < spokes; ++s) {
    double angle = 2 * M_PI * s / spokes;
    mesh.vertices.row(s + 1) << std::cos(angle), std::sin(angle), 0.0;
  }
  mesh.triangles.resize(spokes, 3);
  for (int s = 0; s < spokes; ++s) {
    int a = s + 1, b = (s + 1) % spokes + 1;
    mesh.triangles.row(s) << 0, a, b;
  }
  validate(mesh);
  Vec mass = assemble_mass(mesh, MassScheme::MixedVoronoi);
  CHECK(mass.minCoeff() > 0);
  CHECK(mass.sum() == doctest::Approx(mesh.total_area()).epsilon(1e-10));
}

TEST_CASE("hamiltonian assembly") {
  TriMesh mesh = testing::bumpy_grid(7, 7, 0.4, 9);
  const int n = mesh.num_vertices();
  SparseMat W = assemble_stiffness(mesh);
  Vec A = assemble_mass(mesh);

  SUBCASE("zero potential is the LBO") {
    PotentialField V{Vec::Zero(n), 1.0, true};
    SparseMat H = assemble_hamiltonian(W, A, V);
    CHECK((Mat(H) - Mat(W)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("same sparsity pattern as W") {
    PotentialField V{testing::random_vector(n, 2, 0.0, 5.0), 1.0, true};
    SparseMat H = assemble_hamiltonian(W, A, V);
    CHECK(H.nonZeros() == W.nonZeros());
  }
  SUBCASE("constant potential shifts the spectrum exactly") {
    const double c = 2.5;
    PotentialField V{Vec::Constant(n, c), 1.0, true};
    SparseMat H = assemble_hamiltonian(W, A, V);
    EigOptions opts;
    opts.k = 8;
    Spectrum lbo = solve_generalized(W, A, opts);
    Spectrum ham = solve_generalized(H, A, opts);
    for (int i = 0; i < opts.k; ++i)
      CHECK(ham.eigenvalues[i] - lbo.eigenvalues[i] == doctest::Approx(c).epsilon(1e-9));
  }
  SUBCASE("dimension mismatch") {
    PotentialField V{Vec::Zero(n - 1), 1.0, false};
    CHECK_THROWS_AS(assemble_hamiltonian(W, A, V), OperatorError);
  }
}

TEST_CASE("interval operator approximates the Neumann spectrum") {
  // analytic eigenvalues (k pi)^2 with cos(k pi x) eigenfunctions
  const int n = 240;
  IntervalOperators ops = assemble_interval(n);
  EigOptions opts;
  opts.k = 6;
  Spectrum s = solve_generalized(ops.H, ops.A, opts);
  CHECK(std::abs(s.eigenvalues[0]) < 1e-8);
  for (int k = 1; k < 6; ++k) {
    double exact = (k * M_PI) * (k * M_PI);
    CHECK(s.eigenvalues[k] == doctest::Approx(exact).epsilon(5e-4));
    // eigenfunction close to cos(k pi x) after A-normalization
    Vec x = Vec::LinSpaced(n, 0.0, 1.0);
    Vec expected = (k * M_PI * x.array()).cos();
    expected /= std::sqrt(expected.dot(ops.A.asDiagonal() * expected));
    Vec got = s.eigenvectors.col(k);
    testing::align_sign(got, expected);
    CHECK((got - expected).cwiseAbs().maxCoeff() < 2e-2);
  }

  // refinement halves the eigenvalue error roughly by 4 (second order)
  IntervalOperators coarse = assemble_interval(n / 2);
  EigOptions o2 = opts;
  Spectrum sc = solve_generalized(coarse.H, coarse.A, o2);
  for (int k = 2; k < 5; ++k) {
    double exact = (k * M_PI) * (k * M_PI);
    double err_fine = std::abs(s.eigenvalues[k] - exact);
    double err_coarse = std::abs(sc.eigenvalues[k] - exact);
    CHECK(err_coarse / err_fine > 3.0);
    CHECK(err_coarse / err_fine < 5.0);
  }
}

TEST_CASE("interval constant potential shifts exactly") {
  const int n = 60;
  IntervalOperators base = assemble_interval(n);
  IntervalOperators shifted = assemble_interval(n, Vec::Constant(n, 3.25));
  EigOptions opts;
  opts.k = 10;
  Spectrum sb = solve_generalized(base.H, base.A, opts);
  Spectrum ss = solve_generalized(shifted.H, shifted.A, opts);
  for (int i = 0; i < opts.k; ++i)
    CHECK(ss.eigenvalues[i] - sb.eigenvalues[i] == doctest::Approx(3.25).epsilon(1e-10));
}

TEST_CASE("step potential confines low-energy interval modes") {
  // Heaviside step of height V0 on the right half; modes with E < V0 carry
  // almost no A-norm mass there, and some mode above V0 oscillates across.
  // V0 sits in a gap of the confined-mode ladder: modes lurking just below
  // the barrier top have long evanescent tails, so the barrier height is
  // placed where the nearest confined level keeps a healthy decay rate.
  const int n = 400;
  const double v0 = 2.06e5;
  Vec V = Vec::Zero(n);
  for (int i = 0; i < n; ++i)
    if (i >= n / 2) V[i] = v0;
  IntervalOperators ops = assemble_interval(n, V);
  EigOptions opts;
  opts.k = n; // full spectrum reaches past the barrier top
  Spectrum s = solve_generalized(ops.H, ops.A, opts);

  bool saw_confined = false, saw_crossing = false;
  for (int i = 0; i < opts.k; ++i) {
    double high_mass = 0.0;
    for (int x = n / 2; x < n; ++x)
      high_mass += ops.A[x] * s.eigenvectors(x, i) * s.eigenvectors(x, i);
    if (s.eigenvalues[i] < v0) {
      CHECK(high_mass < 0.05);
      saw_confined = true;
    } else if (high_mass > 0.20) {
      saw_crossing = true;
    }
  }
  CHECK(saw_confined);
  CHECK(saw_crossing);
}

TEST_CASE("mu_upper_bound") {
  const int n = 120;
  IntervalOperators ops = assemble_interval(n);
  EigOptions opts;
  opts.k = 8;
  Spectrum lbo = solve_generalized(ops.H, ops.A, opts);

  SUBCASE("direct substitution") {
    // lambda_i = 10, max V = 2, bracket = 1 -> bound 10 (constructed case)
    Spectrum fake = lbo;
    fake.eigenvalues[3] = 10.0;
    Vec V = Vec::Constant(n, 1.0);
    // raise max(V) to 2 on a vertex where psi_3 is (nearly) zero so the
    // A-weighted bracket stays at ~1
    int zero_idx = 0;
    lbo.eigenvectors.col(3).cwiseAbs().minCoeff(&zero_idx);
    V[zero_idx] = 2.0;
    double bracket = (fake.mass.array() * V.array() *
                      fake.eigenvectors.col(3).array().square()).sum();
    double bound = mu_upper_bound(fake, V, 3);
    CHECK(bound == doctest::Approx(10.0 / (2.0 - bracket)));
  }
  SUBCASE("constant potential never confines") {
    Vec V = Vec::Constant(n, 4.0);
    CHECK(std::isinf(mu_upper_bound(lbo, V, 2)));
  }
  SUBCASE("bound separates confined from oscillating step modes") {
    Vec V = Vec::Zero(n);
    for (int i = n / 2; i < n; ++i) V[i] = 1.0;
    const int mode = 4;
    double bound = mu_upper_bound(lbo, V, mode);
    REQUIRE(std::isfinite(bound));

    auto high_mass_fraction = [&](double mu) {
      IntervalOperators ham = assemble_interval(n, V, mu);
      EigOptions o;
      o.k = mode + 1;
      Spectrum s = solve_generalized(ham.H, ham.A, o);
      double m = 0.0;
      for (int x = n / 2; x < n; ++x)
        m += ham.A[x] * s.eigenvectors(x, mode) * s.eigenvectors(x, mode);
      return m;
    };
    // well below the bound the mode still oscillates past the step;
    // far above it the mode is confined to the zero-potential half
    CHECK(high_mass_fraction(0.2 * bound) > 0.2);
    CHECK(high_mass_fraction(50.0 * bound) < 0.05);
  }
}

TEST_CASE("theorem-style eigenvalue bounds hold for random potentials") {
  TriMesh mesh = testing::bumpy_grid(8, 8, 0.4, 13);
  SparseMat W = assemble_stiffness(mesh);
  Vec A = assemble_mass(mesh);
  EigOptions opts;
  opts.k = 12;
  Spectrum lbo = solve_generalized(W, A, opts);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Vec v = testing::random_vector(mesh.num_vertices(), seed, 0.0, 5.0);
    PotentialField V{v, 1.0, true};
    Spectrum ham = solve_generalized(assemble_hamiltonian(W, A, V), A, opts);
    BoundsReport report = check_bounds(lbo, ham, v);
    CHECK(report.all_ok);
  }
}

TEST_CASE("assembly determinism") {
  TriMesh mesh = testing::bumpy_grid(9, 6, 0.5, 17);
  SparseMat W1 = assemble_stiffness(mesh);
  SparseMat W2 = assemble_stiffness(mesh);
  CHECK((Mat(W1) - Mat(W2)).cwiseAbs().maxCoeff() == 0.0);
  Vec A1 = assemble_mass(mesh), A2 = assemble_mass(mesh);
  CHECK(A1 == A2);
}

TEST_CASE("operator triplet export round-trips") {
  TriMesh mesh = testing::bumpy_grid(5, 5, 0.3, 23);
  SparseMat W = assemble_stiffness(mesh);
  std::string path = (std::filesystem::temp_directory_path() / "hamspec_w.txt").string();
  save_operator(W, path);
  SparseMat back = load_operator(path);
  CHECK((Mat(W) - Mat(back)).cwiseAbs().maxCoeff() == 0.0);
}
