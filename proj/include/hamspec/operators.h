#pragma once

#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "hamspec/mesh.h"
#include "hamspec/spectrum.h"

namespace hamspec {

using SparseMat = Eigen::SparseMatrix<double>;

class OperatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-vertex scalar potential with strength scale mu. When `physical` is set
/// the values must be nonnegative.
struct PotentialField {
  Vec values;
  double mu = 1.0;
  bool physical = false;

  Vec effective() const { return mu * values; }
};

// Cotangent stiffness matrix: off-diagonal -(cot a + cot b)/2 (one term on
// boundary edges), diagonal the negated row sum. Positive semidefinite with
// the constant vector in its kernel; natural Neumann boundary conditions.
SparseMat assemble_stiffness(const TriMesh& mesh);

enum class MassScheme { MixedVoronoi, Barycentric };

// Diagonal lumped mass; entries sum to the surface area under both schemes.
// MixedVoronoi follows the obtuse-corner correction (half/quarter area split).
Vec assemble_mass(const TriMesh& mesh, MassScheme scheme = MassScheme::MixedVoronoi);

// H = W + A diag(mu V); same sparsity pattern as W.
SparseMat assemble_hamiltonian(const SparseMat& W, const Vec& A, const PotentialField& V);

/// 1-D linear FEM pencil on [0,1] with Neumann ends; the potential is lumped
/// on the mass diagonal.
struct IntervalOperators {
  SparseMat W;
  Vec A;
  SparseMat H;
};

IntervalOperators assemble_interval(int n, const Vec& V, double mu = 1.0);
IntervalOperators assemble_interval(int n); // zero potential

// Similarity transform A^{-1/2} W A^{-1/2}: the pencil (W, A) becomes an
// identity-mass problem with the same eigenvalues.
SparseMat symmetrize_pencil(const SparseMat& W, const Vec& A);

// Largest mu keeping mode i confined: lambda_i / (max V - <phi_i, V phi_i>_A),
// with the bracket evaluated on the LBO eigenfunction. +infinity when the
// denominator is not positive (a constant potential never confines).
double mu_upper_bound(const Spectrum& lbo, const Vec& V, int i);

// Coordinate-triplet text export (row col value per line) for cross-checks.
void save_operator(const SparseMat& op, const std::string& path);
SparseMat load_operator(const std::string& path);

} // namespace hamspec
