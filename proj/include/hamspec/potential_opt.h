#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hamspec/eigensolver.h"
#include "hamspec/operators.h"

namespace hamspec {

/// Data-representation problem: choose V so that the first k Hamiltonian
/// eigenvectors represent the columns of X with minimal residual.
struct OptimizationProblem {
  Mat X;                 // n x d
  int k = 10;            // basis size of the representation
  int m = 0;             // spectral dimension for the gradient; 0 -> min(n, 150)
  double epsilon = 0.0;  // gap stabilizer; 0 -> 1e-6 (E_k - E_1)/k at the start
  bool squared = false;  // optimize v with V = v^2 (nonnegative potentials)
  bool geometric = true; // A-weighted data norm; plain Frobenius otherwise
  double mu = 1.0;
  int projection_m = 0;  // > 0: optimize inside the m-dim LBO-projected pencil
  int max_iterations = 200;
  double gtol = 1e-8;
  double ftol = 1e-12;
  int lbfgs_memory = 8;
  EigOptions eig;
};

struct OptimizationTrace {
  std::vector<double> loss;      // objective at each accepted iterate
  std::vector<double> grad_norm;
  int iterations = 0;
  bool converged = false;
  bool solver_failure = false;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// trace(X^T X) - trace(Psi_k Psi_k^T X X^T) in the active norm; equals the
// direct Frobenius residual of the rank-k reconstruction.
double reconstruction_loss(const Spectrum& s, const Mat& X, int k, bool geometric);

// Gradient of the reconstruction loss with respect to the potential using the
// first-order eigenvector differential over m spectrum columns; near-equal
// eigenvalue gaps are stabilized by epsilon.
Vec loss_gradient(const Spectrum& s_m, const Mat& X, int k, double epsilon, bool geometric,
                  double mu = 1.0);

/// Problem projected onto an m-column LBO basis: the per-iterate eigensolve
/// becomes m x m regardless of mesh size; gradients map back to vertex space.
struct ReducedProblem {
  Mat basis;       // n x m, A-orthonormal LBO eigenvectors
  Vec lambda;      // m LBO eigenvalues
  Mat basis_tilde; // sqrt(A)-weighted basis (orthonormal columns)
  Mat Xhat;        // m x d data coefficients in the active norm
  double data_energy = 0.0; // ||X||^2 in the active norm (complement included)
};

ReducedProblem project_problem_to_lbo(const Spectrum& lbo_m, const Mat& X, bool geometric);

// Loss/gradient of the full (assemble + solve) objective at parameter vector v.
void eval_loss_grad(const SparseMat& W, const Vec& A, const OptimizationProblem& problem,
                    const Vec& v, double* loss, Vec* grad);

// Same contract evaluated inside the reduced pencil.
void eval_loss_grad(const ReducedProblem& reduced, const OptimizationProblem& problem,
                    const Vec& v, double* loss, Vec* grad);

// Limited-memory quasi-Newton descent from V = 0; returns the best-seen
// potential and the trace of accepted iterates.
std::pair<PotentialField, OptimizationTrace> optimize_potential(const SparseMat& W, const Vec& A,
                                                                const OptimizationProblem& problem);

} // namespace hamspec
