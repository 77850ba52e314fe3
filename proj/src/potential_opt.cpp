#include "hamspec/potential_opt.h"

#include <cmath>
#include <deque>

#include <Eigen/Dense>

namespace hamspec {

namespace {

double stabilized_gap(double gap, double epsilon) {
  double sign = gap >= 0 ? 1.0 : -1.0; // sign(0) = +1
  return (std::abs(gap) + epsilon) * sign;
}

// Shared gradient core on an orthonormal basis `tilde` (columns), its
// eigenvalues and the active-norm data. Rows of the returned vector follow
// the rows of `tilde`.
Vec gradient_core(const Mat& tilde, const Vec& lambda, const Mat& x_active, int k,
                  double epsilon, double mu) {
  const int m = static_cast<int>(tilde.cols());
  Mat g = tilde.leftCols(k).transpose() * x_active;             // k x d
  Mat t = g * (x_active.transpose() * tilde);                   // k x m
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < m; ++j) {
      if (j == i) {
        t(i, j) = 0.0;
        continue;
      }
      t(i, j) /= stabilized_gap(lambda[i] - lambda[j], epsilon);
    }
  }
  Mat right = tilde * t.transpose();                            // n x k
  return -2.0 * mu * (tilde.leftCols(k).cwiseProduct(right)).rowwise().sum();
}

struct Evaluated {
  double loss = 0.0;
  Vec grad;
};

class Objective {
 public:
  virtual ~Objective() = default;
  virtual Evaluated operator()(const Vec& v) const = 0;
  virtual int dim() const = 0;
};

Vec effective_potential(const Vec& v, bool squared) {
  return squared ? Vec(v.array().square()) : v;
}

class FullObjective : public Objective {
 public:
  FullObjective(const SparseMat& W, const Vec& A, const OptimizationProblem& p)
      : W_(W), A_(A), p_(p) {}

  Evaluated operator()(const Vec& v) const override {
    PotentialField field{effective_potential(v, p_.squared), p_.mu, false};
    SparseMat H = assemble_hamiltonian(W_, A_, field);
    EigOptions eo = p_.eig;
    eo.k = p_.m;
    Spectrum s = solve_generalized(H, A_, eo);
    Evaluated e;
    e.loss = reconstruction_loss(s, p_.X, p_.k, p_.geometric);
    e.grad = loss_gradient(s, p_.X, p_.k, p_.epsilon, p_.geometric, p_.mu);
    if (p_.squared) e.grad = 2.0 * v.cwiseProduct(e.grad);
    return e;
  }
  int dim() const override { return static_cast<int>(A_.size()); }

 private:
  const SparseMat& W_;
  const Vec& A_;
  const OptimizationProblem& p_;
};

class ReducedObjective : public Objective {
 public:
  ReducedObjective(const ReducedProblem& r, const OptimizationProblem& p) : r_(r), p_(p) {}

  Evaluated operator()(const Vec& v) const override {
    Evaluated e;
    eval_loss_grad(r_, p_, v, &e.loss, &e.grad);
    return e;
  }
  int dim() const override { return static_cast<int>(r_.basis.rows()); }

 private:
  const ReducedProblem& r_;
  const OptimizationProblem& p_;
};

} // namespace

double reconstruction_loss(const Spectrum& s, const Mat& X, int k, bool geometric) {
  if (X.rows() != s.n()) throw SolveError("reconstruction_loss: dimension mismatch");
  if (k > s.k()) throw SolveError("reconstruction_loss: k exceeds spectrum");
  Vec sqrt_mass = s.mass.cwiseSqrt();
  Mat tilde_k = sqrt_mass.asDiagonal() * s.eigenvectors.leftCols(k);
  Mat x_active = geometric ? Mat(sqrt_mass.asDiagonal() * X) : X;
  double total = x_active.squaredNorm();
  double captured = (tilde_k.transpose() * x_active).squaredNorm();
  return total - captured;
}

Vec loss_gradient(const Spectrum& s_m, const Mat& X, int k, double epsilon, bool geometric,
                  double mu) {
  if (X.rows() != s_m.n()) throw SolveError("loss_gradient: dimension mismatch");
  if (k > s_m.k()) throw SolveError("loss_gradient: k exceeds spectrum (need m >= k)");
  if (!(epsilon > 0)) throw SolveError("loss_gradient: epsilon must be positive");
  Vec sqrt_mass = s_m.mass.cwiseSqrt();
  Mat tilde = sqrt_mass.asDiagonal() * s_m.eigenvectors;
  Mat x_active = geometric ? Mat(sqrt_mass.asDiagonal() * X) : X;
  return gradient_core(tilde, s_m.eigenvalues, x_active, k, epsilon, mu);
}

ReducedProblem project_problem_to_lbo(const Spectrum& lbo_m, const Mat& X, bool geometric) {
  if (X.rows() != lbo_m.n()) throw SolveError("project_problem_to_lbo: dimension mismatch");
  ReducedProblem r;
  r.basis = lbo_m.eigenvectors;
  r.lambda = lbo_m.eigenvalues;
  Vec sqrt_mass = lbo_m.mass.cwiseSqrt();
  r.basis_tilde = sqrt_mass.asDiagonal() * r.basis;
  Mat x_active = geometric ? Mat(sqrt_mass.asDiagonal() * X) : X;
  r.Xhat = r.basis_tilde.transpose() * x_active;
  r.data_energy = x_active.squaredNorm();
  return r;
}

void eval_loss_grad(const ReducedProblem& reduced, const OptimizationProblem& problem,
                    const Vec& v, double* loss, Vec* grad) {
  const int m = static_cast<int>(reduced.basis.cols());
  const int k = problem.k;
  if (k > m) throw SolveError("reduced evaluation: k exceeds projection dimension");
  Vec v_eff = effective_potential(v, problem.squared);

  // m x m projected Hamiltonian: diag(lambda) + mu * Phi~^T diag(V) Phi~
  Mat H_red = (problem.mu * reduced.basis_tilde.transpose()) *
              (v_eff.asDiagonal() * reduced.basis_tilde);
  H_red.diagonal() += reduced.lambda;
  H_red = 0.5 * (H_red + H_red.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(H_red);
  if (es.info() != Eigen::Success) throw SolveError("reduced eigensolver failed");
  const Mat& Y = es.eigenvectors();
  const Vec& lam = es.eigenvalues();

  if (loss) {
    double captured = (Y.leftCols(k).transpose() * reduced.Xhat).squaredNorm();
    *loss = reduced.data_energy - captured;
  }
  if (grad) {
    // gradient in the reduced frame, pulled back through the basis rows
    Mat g = Y.leftCols(k).transpose() * reduced.Xhat; // k x d
    Mat t = g * (reduced.Xhat.transpose() * Y);       // k x m
    double eps = problem.epsilon;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < m; ++j)
        t(i, j) = (j == i) ? 0.0 : t(i, j) / stabilized_gap(lam[i] - lam[j], eps);
    Mat c = Mat::Zero(m, m);
    c.topRows(k) = t;
    Mat sym = -1.0 * (c + c.transpose()); // -2 * sym(T .* B)
    Mat g_hat = Y * sym * Y.transpose();  // dL/dH_red
    Mat half = reduced.basis_tilde * g_hat; // n x m
    *grad = problem.mu * (half.cwiseProduct(reduced.basis_tilde)).rowwise().sum();
    if (problem.squared) *grad = 2.0 * v.cwiseProduct(*grad);
  }
}

void eval_loss_grad(const SparseMat& W, const Vec& A, const OptimizationProblem& problem,
                    const Vec& v, double* loss, Vec* grad) {
  FullObjective obj(W, A, problem);
  Evaluated e = obj(v);
  if (loss) *loss = e.loss;
  if (grad) *grad = e.grad;
}

namespace {

// Limited-memory BFGS with Armijo backtracking.
OptimizationTrace run_lbfgs(const Objective& objective, const OptimizationProblem& p, Vec& v) {
  OptimizationTrace trace;
  const int n = objective.dim();
  v = Vec::Zero(n);

  Evaluated cur;
  try {
    cur = objective(v);
  } catch (const std::exception&) {
    trace.solver_failure = true;
    return trace;
  }
  trace.initial_loss = cur.loss;
  trace.loss.push_back(cur.loss);
  trace.grad_norm.push_back(cur.grad.norm());

  Vec best_v = v;
  double best_loss = cur.loss;

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int it = 0; it < p.max_iterations; ++it) {
    double gnorm = cur.grad.norm();
    if (gnorm < p.gtol) {
      trace.converged = true;
      break;
    }

    // two-loop recursion
    Vec q = cur.grad;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const Vec& s = s_hist.back();
      const Vec& y = y_hist.back();
      double gamma = s.dot(y) / y.dot(y);
      q *= gamma;
    }
    for (size_t i = 0; i < s_hist.size(); ++i) {
      double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Vec direction = -q;
    double slope = cur.grad.dot(direction);
    if (slope >= 0) { // not a descent direction; reset to steepest descent
      direction = -cur.grad;
      slope = -gnorm * gnorm;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = s_hist.empty() ? 1.0 / std::max(gnorm, 1.0) : 1.0;
    const double c1 = 1e-4;
    Evaluated next;
    Vec v_next;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      v_next = v + step * direction;
      bool ok = true;
      try {
        next = objective(v_next);
      } catch (const std::exception&) {
        ok = false;
      }
      if (ok && next.loss <= cur.loss + c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break; // line search failed; keep best-seen iterate

    Vec s_vec = v_next - v;
    Vec y_vec = next.grad - cur.grad;
    double sy = s_vec.dot(y_vec);
    if (sy > 1e-12 * s_vec.norm() * y_vec.norm()) {
      s_hist.push_back(s_vec);
      y_hist.push_back(y_vec);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > p.lbfgs_memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    double decrease = cur.loss - next.loss;
    v = v_next;
    cur = next;
    trace.loss.push_back(cur.loss);
    trace.grad_norm.push_back(cur.grad.norm());
    ++trace.iterations;
    if (cur.loss < best_loss) {
      best_loss = cur.loss;
      best_v = v;
    }
    if (decrease >= 0 && decrease < p.ftol * (1.0 + std::abs(cur.loss))) {
      trace.converged = true;
      break;
    }
  }

  v = best_v;
  trace.final_loss = best_loss;
  return trace;
}

} // namespace

std::pair<PotentialField, OptimizationTrace> optimize_potential(const SparseMat& W, const Vec& A,
                                                                const OptimizationProblem& problem) {
  OptimizationProblem p = problem;
  const int n = static_cast<int>(A.size());
  if (p.m <= 0) p.m = std::min(n, 150);
  if (p.m < p.k) throw SolveError("optimize_potential: m must be >= k");
  if (p.X.rows() != n) throw SolveError("optimize_potential: data dimension mismatch");

  // scale-aware default stabilizer from the initial (zero-potential) spectrum
  EigOptions eo = p.eig;
  eo.k = std::max(p.m, p.projection_m);
  Spectrum lbo = solve_generalized(W, A, eo);
  if (p.epsilon <= 0) {
    double spread = lbo.eigenvalues[p.k - 1] - lbo.eigenvalues[0];
    p.epsilon = std::max(1e-6 * spread / std::max(1, p.k), 1e-12);
  }

  Vec v;
  OptimizationTrace trace;
  if (p.projection_m > 0) {
    if (p.projection_m < p.k) throw SolveError("optimize_potential: projection_m must be >= k");
    Spectrum lbo_m = lbo; // first projection_m columns
    if (lbo.k() != p.projection_m) {
      lbo_m.eigenvalues = lbo.eigenvalues.head(p.projection_m);
      lbo_m.eigenvectors = lbo.eigenvectors.leftCols(p.projection_m);
    }
    ReducedProblem reduced = project_problem_to_lbo(lbo_m, p.X, p.geometric);
    ReducedObjective obj(reduced, p);
    trace = run_lbfgs(obj, p, v);
  } else {
    FullObjective obj(W, A, p);
    trace = run_lbfgs(obj, p, v);
  }

  PotentialField field;
  field.values = effective_potential(v, p.squared);
  field.mu = p.mu;
  field.physical = p.squared;
  return {field, trace};
}

} // namespace hamspec
