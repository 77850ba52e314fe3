#include "hamspec/cmm.h"

#include <cmath>

#include <Eigen/Dense>

namespace hamspec {

PotentialField irls_potential(const Vec& mode, double delta) {
  if (!(delta > 0)) throw SolveError("irls_potential: delta must be positive");
  PotentialField field;
  field.values = (2.0 * (mode.cwiseAbs().array() + delta)).inverse();
  field.physical = true;
  return field;
}

Vec smallest_eig_dense(const SparseMat& H, const Vec& A, const Mat& U) {
  const int n = static_cast<int>(H.rows());
  Vec isqrt = A.cwiseSqrt().cwiseInverse();
  Mat B = Mat(H);
  if (U.size() > 0) B += U * U.transpose();
  B = isqrt.asDiagonal() * B * isqrt.asDiagonal();
  B = 0.5 * (B + B.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(B);
  if (es.info() != Eigen::Success) throw SolveError("dense reference eigensolver failed");
  Vec phi = isqrt.asDiagonal() * es.eigenvectors().col(0);
  phi /= std::sqrt(phi.dot(A.asDiagonal() * phi));
  int idx = 0;
  phi.cwiseAbs().maxCoeff(&idx);
  if (phi[idx] < 0) phi = -phi;
  return phi;
}

namespace {

double l1_mode_objective(const SparseMat& W, const Vec& A, double mu, const Mat& prior,
                         double beta, const Vec& phi) {
  double obj = phi.dot(W * phi) + mu * (A.array() * phi.array().abs()).sum();
  if (prior.cols() > 0) {
    Vec overlaps = prior.transpose() * (A.asDiagonal() * phi);
    obj += beta * overlaps.squaredNorm();
  }
  return obj;
}

} // namespace

std::pair<Vec, ModeTrace> solve_mode(const SparseMat& W, const Vec& A, double mu,
                                     const Mat& prior_modes, double beta, const CmmOptions& opts,
                                     const Vec* warm_start) {
  const int n = static_cast<int>(W.rows());
  const int r = static_cast<int>(prior_modes.cols());

  Vec phi;
  if (warm_start) {
    phi = *warm_start;
  } else {
    EigOptions eo = opts.eig;
    eo.k = r + 1;
    Spectrum lbo = solve_generalized(W, A, eo);
    phi = lbo.eigenvectors.col(r);
  }
  phi /= std::sqrt(phi.dot(A.asDiagonal() * phi));

  Mat U;
  if (r > 0 && beta > 0) U = std::sqrt(beta) * (A.asDiagonal() * prior_modes);

  ModeTrace trace;
  trace.objective.push_back(l1_mode_objective(W, A, mu, prior_modes, beta, phi));
  Vec best_phi = phi;
  double best_obj = trace.objective.back();
  int rises = 0;

  for (int it = 0; it < opts.max_irls; ++it) {
    double delta = opts.delta_rel * std::max(phi.cwiseAbs().maxCoeff(), 1e-300);
    PotentialField V = irls_potential(phi, delta);
    V.mu = mu;
    SparseMat H = assemble_hamiltonian(W, A, V);

    Vec phi_new;
    if (opts.dense_reference) {
      phi_new = smallest_eig_dense(H, A, U);
    } else {
      EigOptions eo = opts.eig;
      eo.k = 1;
      Spectrum s = solve_lowrank_updated(H, A, U, eo);
      phi_new = s.eigenvectors.col(0);
    }
    if (phi_new.dot(A.asDiagonal() * phi) < 0) phi_new = -phi_new; // sign align

    double change = std::sqrt((phi_new - phi).dot(A.asDiagonal() * (phi_new - phi)));
    phi = phi_new;
    ++trace.iterations;
    double obj = l1_mode_objective(W, A, mu, prior_modes, beta, phi);
    trace.objective.push_back(obj);
    if (obj < best_obj) {
      best_obj = obj;
      best_phi = phi;
      rises = 0;
    } else if (obj > best_obj * (1.0 + 1e-9) + 1e-300) {
      if (++rises >= 3) {
        trace.oscillated = true;
        break;
      }
    }
    if (change < opts.mtol) {
      trace.converged = true;
      break;
    }
  }
  return {trace.oscillated ? best_phi : phi, trace};
}

CompressedModes cmm_basis(const SparseMat& W, const Vec& A, int k, const CmmOptions& opts) {
  if (k < 1) throw SolveError("cmm_basis: k must be >= 1");
  const int n = static_cast<int>(W.rows());

  // warm starts from the zero-potential spectrum; its top eigenvalue also
  // calibrates the default orthogonality penalty
  EigOptions eo = opts.eig;
  eo.k = k;
  Spectrum lbo = solve_generalized(W, A, eo);
  double beta = opts.beta > 0 ? opts.beta
                              : 1e3 * std::max(lbo.eigenvalues[k - 1], 1e-6);

  CompressedModes out;
  out.mu = opts.mu;
  out.beta = beta;
  out.mass = A;
  out.modes.resize(n, k);
  for (int i = 0; i < k; ++i) {
    Vec warm = lbo.eigenvectors.col(i);
    auto [phi, trace] = solve_mode(W, A, opts.mu, out.modes.leftCols(i), beta, opts, &warm);
    out.modes.col(i) = phi;
    out.traces.push_back(std::move(trace));
  }

  out.l1_objective = (out.modes.transpose() * (W * out.modes)).trace() +
                     opts.mu * (out.modes.cwiseAbs().transpose() * A).sum();
  Mat gram = out.modes.transpose() * (A.asDiagonal() * out.modes);
  gram.diagonal().setZero();
  out.orthogonality = gram.cwiseAbs().maxCoeff();
  return out;
}

CompressedModes cmm_basis(const TriMesh& mesh, int k, const CmmOptions& opts) {
  SparseMat W = assemble_stiffness(mesh);
  Vec A = assemble_mass(mesh);
  return cmm_basis(W, A, k, opts);
}

double support_fraction(const Vec& mode, double threshold_rel) {
  double cap = threshold_rel * mode.cwiseAbs().maxCoeff();
  int count = 0;
  for (int i = 0; i < mode.size(); ++i)
    if (std::abs(mode[i]) > cap) ++count;
  return static_cast<double>(count) / static_cast<double>(mode.size());
}

} // namespace hamspec
