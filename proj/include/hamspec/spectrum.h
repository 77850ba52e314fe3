#pragma once

#include <string>

#include <Eigen/Core>

#include "hamspec/mesh.h"

namespace hamspec {

/// k smallest eigenpairs of a generalized pencil (H, A) with diagonal mass A.
/// Eigenvalues ascend, columns are A-orthonormal, and each column is signed so
/// that its entry of largest magnitude is positive.
struct Spectrum {
  Vec eigenvalues;  // k, ascending
  Mat eigenvectors; // n x k
  Vec mass;         // diagonal of A
  double tol = 0.0; // residual tolerance the solve met
  int iterations = 0;

  int n() const { return static_cast<int>(eigenvectors.rows()); }
  int k() const { return static_cast<int>(eigenvalues.size()); }

  double a_dot(const Vec& f, const Vec& g) const { return f.dot(mass.asDiagonal() * g); }
  double a_norm(const Vec& f) const { return std::sqrt(a_dot(f, f)); }
};

// JSON header line (n, k, tol, eigenvalues) followed by a little-endian
// float64 column-major eigenvector block.
void save_spectrum(const Spectrum& s, const std::string& path);
Spectrum load_spectrum(const std::string& path);

} // namespace hamspec
