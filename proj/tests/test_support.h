#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "hamspec/eigensolver.h"
#include "hamspec/mesh.h"
#include "hamspec/operators.h"

namespace hamspec::testing {

// Grid with smooth z-relief and mild jitter: an irregular but deterministic
// surface with simple spectrum, handy for property tests.
inline TriMesh bumpy_grid(int nx, int ny, double amplitude, uint64_t seed) {
  TriMesh mesh = make_grid_rect(nx, ny, 1.0, 0.8);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.15, 0.15);
  double hx = 1.0 / (nx - 1), hy = 0.8 / (ny - 1);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    double x = mesh.vertices(i, 0), y = mesh.vertices(i, 1);
    mesh.vertices(i, 2) = amplitude * (std::sin(3.1 * x + 0.3) * std::cos(2.7 * y - 0.8));
    // interior-only jitter keeps the boundary rectangular
    if (x > 1e-9 && x < 1 - 1e-9) mesh.vertices(i, 0) += jitter(rng) * hx;
    if (y > 1e-9 && y < 0.8 - 1e-9) mesh.vertices(i, 1) += jitter(rng) * hy;
  }
  validate(mesh);
  return mesh;
}

inline Vec random_vector(int n, uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

// Brute-force all-pairs shortest paths over the edge graph.
inline Mat floyd_warshall(const TriMesh& mesh) {
  const int n = mesh.num_vertices();
  Mat d = Mat::Constant(n, n, std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i) d(i, i) = 0.0;
  for (const auto& e : mesh.edges) {
    double len = (mesh.vertices.row(e[0]) - mesh.vertices.row(e[1])).norm();
    d(e[0], e[1]) = d(e[1], e[0]) = len;
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (d(i, k) + d(k, j) < d(i, j)) d(i, j) = d(i, k) + d(k, j);
  return d;
}

// Independent dense oracle for the generalized symmetric eigenproblem.
inline Mat dense_pencil_eig(const SparseMat& H, const Vec& A, int k, Vec* eigenvalues) {
  Mat Hd = Mat(H);
  Mat Ad = Vec(A).asDiagonal();
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(0.5 * (Hd + Hd.transpose()), Ad);
  if (eigenvalues) *eigenvalues = es.eigenvalues().head(k);
  return es.eigenvectors().leftCols(k);
}

inline double align_sign(Vec& candidate, const Vec& reference) {
  double dot = candidate.dot(reference);
  if (dot < 0) candidate = -candidate;
  return std::abs(dot);
}

} // namespace hamspec::testing
