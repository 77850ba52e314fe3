#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "hamspec/operators.h"
#include "hamspec/spectrum.h"

namespace hamspec {

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EigOptions {
  int k = 10;
  double tol = 1e-9;        // column residual: ||H psi - E A psi|| <= tol ||H|| ||psi||
  int dense_threshold = 600; // n at or below this solves densely
  int max_subspace = 0;      // 0 = automatic
  uint64_t seed = 0x9e3779b97f4a7c15ull; // start vectors of the iterative path
};

// k algebraically smallest eigenpairs of H psi = E A psi, A positive diagonal.
// Dense transform below the threshold, shift-invert Lanczos above it.
Spectrum solve_generalized(const SparseMat& H, const Vec& A, const EigOptions& opts);

// Spectrum of (H + U U^T, A). Inner solves expand (H + UU^T - sigma A)^{-1}
// through the Woodbury identity around a cached factorization of H - sigma A.
Spectrum solve_lowrank_updated(const SparseMat& H, const Vec& A, const Mat& U,
                               const EigOptions& opts);

/// Applies (H + U U^T)^{-1} as a cascade of one sparse factorization of H and
/// a small dense system: H^{-1} - H^{-1} U (I + U^T H^{-1} U)^{-1} U^T H^{-1}.
/// H must be invertible (shift it beforehand when singular).
class WoodburySolver {
 public:
  WoodburySolver(const SparseMat& H, const Mat& U);
  ~WoodburySolver();
  WoodburySolver(WoodburySolver&&) noexcept;
  Vec solve(const Vec& x) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Theorem-style sandwich check: lambda_i + min V <= E_i <= lambda_i + max V.
struct BoundsReport {
  std::vector<bool> lower_ok, upper_ok;
  double worst_violation = 0.0; // positive = amount beyond the bound
  bool all_ok = true;
};

BoundsReport check_bounds(const Spectrum& lbo, const Spectrum& ham, const Vec& v_effective,
                          double rel_slack = 1e-8);

/// First-order eigenvector prediction under perturbations (deltaW, deltaA).
struct PerturbedPrediction {
  Mat vectors; // n x k
  std::vector<std::pair<int, int>> skipped; // near-degenerate pairs left out
};

PerturbedPrediction predict_perturbed(const Spectrum& s, const SparseMat& deltaW,
                                      const Vec& deltaA, double degeneracy_guard = 1e-8);

} // namespace hamspec
