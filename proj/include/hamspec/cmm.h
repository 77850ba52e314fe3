#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hamspec/eigensolver.h"
#include "hamspec/mesh.h"
#include "hamspec/operators.h"

namespace hamspec {

// Compressed manifold modes through iteratively reweighted potentials: each
// mode is the smallest generalized eigenvector of (W + mu A V_i + Z_i, A)
// where V_i reweights by 1/(2|phi_i|) and the low-rank Z_i keeps the mode
// A-orthogonal to its predecessors.
struct CmmOptions {
  double mu = 1.0;
  double beta = 0.0;       // <= 0: 1e3 x largest warm-start eigenvalue
  double delta_rel = 1e-6; // reweighting guard, relative to max|phi|
  double mtol = 1e-6;      // A-norm mode change stopping threshold
  int max_irls = 100;
  bool dense_reference = false; // slow oracle path: dense penalty + dense solve
  EigOptions eig;
};

struct ModeTrace {
  std::vector<double> objective; // L1 objective after each IRLS iterate
  int iterations = 0;
  bool converged = false;
  bool oscillated = false;
};

struct CompressedModes {
  Mat modes; // n x k
  Vec mass;
  double mu = 0.0, beta = 0.0;
  std::vector<ModeTrace> traces;
  double l1_objective = 0.0;    // trace(Phi^T W Phi) + mu ||Phi||_{1,A}
  double orthogonality = 0.0;   // max off-diagonal |Phi^T A Phi|
};

// delta-smoothed reweighting potential V(x) = 1 / (2 (|phi(x)| + delta)).
PotentialField irls_potential(const Vec& mode, double delta);

std::pair<Vec, ModeTrace> solve_mode(const SparseMat& W, const Vec& A, double mu,
                                     const Mat& prior_modes, double beta, const CmmOptions& opts,
                                     const Vec* warm_start = nullptr);

CompressedModes cmm_basis(const SparseMat& W, const Vec& A, int k, const CmmOptions& opts);
CompressedModes cmm_basis(const TriMesh& mesh, int k, const CmmOptions& opts);

// Dense oracle: smallest generalized eigenvector of (H + U U^T, A).
Vec smallest_eig_dense(const SparseMat& H, const Vec& A, const Mat& U);

// Fraction of vertices carrying |phi| > threshold_rel * max|phi|.
double support_fraction(const Vec& mode, double threshold_rel = 0.01);

} // namespace hamspec
