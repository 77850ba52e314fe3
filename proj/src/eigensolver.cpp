#include "hamspec/eigensolver.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <json.hpp>

namespace hamspec {

namespace {

double operator_scale(const SparseMat& H) {
  // infinity norm (max absolute row sum)
  Vec rowsum = Vec::Zero(H.rows());
  for (int o = 0; o < H.outerSize(); ++o)
    for (SparseMat::InnerIterator it(H, o); it; ++it) rowsum[it.row()] += std::abs(it.value());
  double s = rowsum.size() ? rowsum.maxCoeff() : 0.0;
  return s > 0 ? s : 1.0;
}

// Lower bound on the smallest pencil eigenvalue via Gershgorin rows of
// (H, diag(A)); H - sigma A is strictly diagonally dominant for sigma below it.
double pencil_lower_bound(const SparseMat& H, const Vec& A) {
  const int n = static_cast<int>(H.rows());
  Vec diag = Vec::Zero(n), radius = Vec::Zero(n);
  for (int o = 0; o < H.outerSize(); ++o)
    for (SparseMat::InnerIterator it(H, o); it; ++it) {
      if (it.row() == it.col())
        diag[it.row()] = it.value();
      else
        radius[it.row()] += std::abs(it.value());
    }
  double lo = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) lo = std::min(lo, (diag[i] - radius[i]) / A[i]);
  return lo;
}

void apply_sign_rule(Mat& vectors) {
  for (int c = 0; c < vectors.cols(); ++c) {
    int idx = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&idx);
    if (vectors(idx, c) < 0) vectors.col(c) = -vectors.col(c);
  }
}

// Modified Gram-Schmidt in the A inner product; tightens orthonormality of
// nearly orthonormal columns.
void a_orthonormalize(Mat& V, const Vec& A) {
  for (int c = 0; c < V.cols(); ++c) {
    for (int p = 0; p < c; ++p) {
      double proj = V.col(p).dot(A.asDiagonal() * V.col(c));
      V.col(c) -= proj * V.col(p);
    }
    double norm = std::sqrt(V.col(c).dot(A.asDiagonal() * V.col(c)));
    if (norm <= 0) throw SolveError("orthonormalization breakdown");
    V.col(c) /= norm;
  }
}

struct PencilResidual {
  double worst = 0.0;
};

PencilResidual pencil_residual(const SparseMat& H, const Vec& A, const Vec& E, const Mat& Psi,
                               double scale) {
  PencilResidual r;
  for (int c = 0; c < Psi.cols(); ++c) {
    Vec res = H * Psi.col(c) - E[c] * (A.asDiagonal() * Psi.col(c));
    r.worst = std::max(r.worst, res.norm() / (scale * Psi.col(c).norm()));
  }
  return r;
}

Spectrum finalize(Vec E, Mat Psi, const Vec& A, double achieved, int iterations) {
  // ascending order
  std::vector<int> order(E.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return E[a] < E[b]; });
  Spectrum s;
  s.eigenvalues.resize(E.size());
  s.eigenvectors.resize(Psi.rows(), Psi.cols());
  for (size_t i = 0; i < order.size(); ++i) {
    s.eigenvalues[static_cast<int>(i)] = E[order[i]];
    s.eigenvectors.col(static_cast<int>(i)) = Psi.col(order[i]);
  }
  s.mass = A;
  s.tol = achieved;
  s.iterations = iterations;
  a_orthonormalize(s.eigenvectors, A);
  apply_sign_rule(s.eigenvectors);
  return s;
}

Spectrum solve_dense(const SparseMat& H, const Vec& A, const EigOptions& opts) {
  Vec isqrt = A.cwiseSqrt().cwiseInverse();
  Mat B = Mat(H);
  B = isqrt.asDiagonal() * B * isqrt.asDiagonal();
  B = 0.5 * (B + B.transpose()); // exact symmetry for the solver
  Eigen::SelfAdjointEigenSolver<Mat> es(B);
  if (es.info() != Eigen::Success) throw SolveError("dense eigensolver failed");
  Vec E = es.eigenvalues().head(opts.k);
  Mat Psi = isqrt.asDiagonal() * es.eigenvectors().leftCols(opts.k);
  double achieved = pencil_residual(H, A, E, Psi, operator_scale(H)).worst;
  return finalize(std::move(E), std::move(Psi), A, achieved, 1);
}

// Shift-invert Lanczos with full reorthogonalization. `apply_inv` must apply
// (M - sigma A)^{-1} for the target operator M; the map back is
// E = sigma + 1/theta.
Spectrum solve_shift_invert(const std::function<Vec(const Vec&)>& apply_inv, double sigma,
                            const SparseMat& H_for_residual, const Vec& A, const EigOptions& opts,
                            const std::function<Vec(const Vec&)>& residual_extra = {}) {
  const int n = static_cast<int>(A.size());
  const int k = opts.k;
  const double scale = operator_scale(H_for_residual);
  Vec sqrtA = A.cwiseSqrt();
  Vec isqrtA = sqrtA.cwiseInverse();

  auto op = [&](const Vec& x) -> Vec { return sqrtA.asDiagonal() * apply_inv(sqrtA.asDiagonal() * x); };

  int max_m = opts.max_subspace > 0 ? std::min(opts.max_subspace, n) : n;
  int m = std::min(n, std::max(2 * k + 30, 60));

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_unit = [&]() {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
  };

  Mat V(n, m);
  Vec alpha(m), beta(m); // beta[j] links v_j and v_{j+1}
  int built = 0;
  Vec v = random_unit();
  v.normalize();
  int iterations = 0;
  bool exhausted = false;

  while (true) {
    if (static_cast<int>(V.cols()) < m) {
      Mat Vn(n, m);
      Vn.leftCols(built) = V.leftCols(built);
      V = std::move(Vn);
      alpha.conservativeResize(m);
      beta.conservativeResize(m);
    }
    while (built < m && !exhausted) {
      V.col(built) = v;
      Vec w = op(v);
      ++iterations;
      alpha[built] = v.dot(w);
      w -= alpha[built] * v;
      if (built > 0) w -= beta[built - 1] * V.col(built - 1);
      // full reorthogonalization, twice for safety
      for (int pass = 0; pass < 2; ++pass)
        w -= V.leftCols(built + 1) * (V.leftCols(built + 1).transpose() * w);
      double b = w.norm();
      if (b < 1e-13) {
        // invariant subspace; restart with a fresh orthogonal direction
        Vec r = random_unit();
        r -= V.leftCols(built + 1) * (V.leftCols(built + 1).transpose() * r);
        double rn = r.norm();
        ++built;
        if (rn < 1e-13) {
          exhausted = true; // Krylov space covers the whole domain
          break;
        }
        beta[built - 1] = 0.0;
        v = r / rn;
        continue;
      }
      w /= b;
      beta[built] = b;
      v = w;
      ++built;
    }
    int mm = built;

    // Ritz pairs of the tridiagonal operator
    Mat T = Mat::Zero(mm, mm);
    for (int i = 0; i < mm; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < mm) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(T);
    if (es.info() != Eigen::Success) throw SolveError("tridiagonal eigensolver failed");

    // largest theta of the inverted operator <-> smallest pencil eigenvalues
    int take = std::min(k, mm);
    Mat S(mm, take);
    Vec theta(take);
    for (int i = 0; i < take; ++i) {
      theta[i] = es.eigenvalues()[mm - 1 - i];
      S.col(i) = es.eigenvectors().col(mm - 1 - i);
    }
    if (theta.minCoeff() <= 0) {
      if (mm >= max_m || exhausted)
        throw SolveError("shift-invert operator lost definiteness");
      m = std::min(max_m, static_cast<int>(std::ceil(m * 1.6)) + 8);
      continue;
    }
    Vec E(take);
    for (int i = 0; i < take; ++i) E[i] = sigma + 1.0 / theta[i];
    Mat Y = V.leftCols(mm) * S;
    Mat Psi = isqrtA.asDiagonal() * Y;

    double worst = 0.0;
    for (int c = 0; c < take; ++c) {
      Vec res = H_for_residual * Psi.col(c) - E[c] * (A.asDiagonal() * Psi.col(c));
      if (residual_extra) res += residual_extra(Psi.col(c));
      worst = std::max(worst, res.norm() / (scale * Psi.col(c).norm()));
    }
    if ((worst <= opts.tol && take == k) || mm >= max_m || exhausted) {
      if (worst > opts.tol || take < k)
        throw SolveError("eigensolver did not converge: residual " + std::to_string(worst) +
                         " after subspace " + std::to_string(mm));
      return finalize(std::move(E), std::move(Psi), A, worst, iterations);
    }
    m = std::min(max_m, static_cast<int>(std::ceil(m * 1.6)) + 8);
  }
}

} // namespace

Spectrum solve_generalized(const SparseMat& H, const Vec& A, const EigOptions& opts) {
  const int n = static_cast<int>(H.rows());
  if (H.cols() != n || A.size() != n) throw SolveError("solve_generalized: dimension mismatch");
  if (opts.k < 1 || opts.k > n) throw SolveError("solve_generalized: k must be in [1, n]");
  if (A.minCoeff() <= 0) throw SolveError("solve_generalized: mass must be positive");

  if (n <= opts.dense_threshold) return solve_dense(H, A, opts);

  double lo = pencil_lower_bound(H, A);
  double margin = 1e-8 * (std::abs(lo) + operator_scale(H) / A.maxCoeff()) + 1e-12;
  double sigma = lo - margin;
  SparseMat K = H - SparseMat(Vec(sigma * A).asDiagonal());
  Eigen::SimplicialLDLT<SparseMat> factor(K);
  if (factor.info() != Eigen::Success)
    throw SolveError("factorization of shifted operator failed");
  auto apply_inv = [&](const Vec& x) -> Vec { return factor.solve(x); };
  return solve_shift_invert(apply_inv, sigma, H, A, opts);
}

Spectrum solve_lowrank_updated(const SparseMat& H, const Vec& A, const Mat& U,
                               const EigOptions& opts) {
  const int n = static_cast<int>(H.rows());
  if (A.size() != n || (U.size() > 0 && U.rows() != n))
    throw SolveError("solve_lowrank_updated: dimension mismatch");
  const int r = static_cast<int>(U.cols());

  // Gershgorin bound of H alone also bounds H + UU^T from below.
  double lo = pencil_lower_bound(H, A);
  double margin = 1e-8 * (std::abs(lo) + operator_scale(H) / A.maxCoeff()) + 1e-12;
  double sigma = lo - margin;
  SparseMat K = H - SparseMat(Vec(sigma * A).asDiagonal());
  Eigen::SimplicialLDLT<SparseMat> factor(K);
  if (factor.info() != Eigen::Success)
    throw SolveError("factorization of shifted operator failed");

  Mat Y; // K^{-1} U
  Eigen::LDLT<Mat> capacitance;
  if (r > 0) {
    Y.resize(n, r);
    for (int c = 0; c < r; ++c) Y.col(c) = factor.solve(U.col(c));
    Mat S = Mat::Identity(r, r) + U.transpose() * Y;
    capacitance.compute(S);
    if (capacitance.info() != Eigen::Success || !capacitance.isPositive())
      throw SolveError("singular inner low-rank system");
  }

  auto apply_inv = [&](const Vec& x) -> Vec {
    Vec y0 = factor.solve(x);
    if (r == 0) return y0;
    return y0 - Y * capacitance.solve(U.transpose() * y0);
  };
  auto residual_extra = [&](const Vec& psi) -> Vec {
    if (r == 0) return Vec::Zero(n);
    return U * (U.transpose() * psi);
  };

  // residual is checked against H + UU^T
  EigOptions o = opts;
  if (o.max_subspace == 0) o.max_subspace = n;
  return solve_shift_invert(apply_inv, sigma, H, A, o, residual_extra);
}

struct WoodburySolver::Impl {
  Eigen::SimplicialLDLT<SparseMat> factor;
  Mat U;
  Mat Y; // H^{-1} U
  Eigen::LDLT<Mat> capacitance;
};

WoodburySolver::WoodburySolver(const SparseMat& H, const Mat& U) : impl_(new Impl) {
  impl_->factor.compute(H);
  if (impl_->factor.info() != Eigen::Success)
    throw SolveError("WoodburySolver: factorization failed (singular operator?)");
  impl_->U = U;
  const int r = static_cast<int>(U.cols());
  if (r > 0) {
    impl_->Y.resize(H.rows(), r);
    for (int c = 0; c < r; ++c) impl_->Y.col(c) = impl_->factor.solve(U.col(c));
    Mat S = Mat::Identity(r, r) + U.transpose() * impl_->Y;
    impl_->capacitance.compute(S);
    if (impl_->capacitance.info() != Eigen::Success)
      throw SolveError("WoodburySolver: singular inner low-rank system");
  }
}

WoodburySolver::~WoodburySolver() = default;
WoodburySolver::WoodburySolver(WoodburySolver&&) noexcept = default;

Vec WoodburySolver::solve(const Vec& x) const {
  Vec y0 = impl_->factor.solve(x);
  if (impl_->U.cols() == 0) return y0;
  return y0 - impl_->Y * impl_->capacitance.solve(impl_->U.transpose() * y0);
}

BoundsReport check_bounds(const Spectrum& lbo, const Spectrum& ham, const Vec& v_effective,
                          double rel_slack) {
  if (lbo.k() != ham.k()) throw SolveError("check_bounds: mismatched spectrum sizes");
  const double vmin = v_effective.minCoeff(), vmax = v_effective.maxCoeff();
  BoundsReport report;
  report.lower_ok.resize(lbo.k());
  report.upper_ok.resize(lbo.k());
  for (int i = 0; i < lbo.k(); ++i) {
    double lam = lbo.eigenvalues[i], e = ham.eigenvalues[i];
    double slack = rel_slack * (1.0 + std::abs(lam) + std::max(std::abs(vmin), std::abs(vmax)));
    double low_gap = (lam + vmin) - e; // positive = violated
    double up_gap = e - (lam + vmax);
    report.lower_ok[i] = low_gap <= slack;
    report.upper_ok[i] = up_gap <= slack;
    report.worst_violation = std::max({report.worst_violation, low_gap, up_gap});
    if (!report.lower_ok[i] || !report.upper_ok[i]) report.all_ok = false;
  }
  return report;
}

PerturbedPrediction predict_perturbed(const Spectrum& s, const SparseMat& deltaW,
                                      const Vec& deltaA, double degeneracy_guard) {
  const int n = s.n(), k = s.k();
  if (deltaW.rows() != n || deltaA.size() != n)
    throw SolveError("predict_perturbed: dimension mismatch");
  const Mat& Psi = s.eigenvectors;
  Mat G = Psi.transpose() * (deltaW * Psi);           // k x k
  Mat D = Psi.transpose() * (deltaA.asDiagonal() * Psi);

  PerturbedPrediction out;
  out.vectors.resize(n, k);
  for (int i = 0; i < k; ++i) {
    Vec coeff = Vec::Zero(k);
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      double gap = s.eigenvalues[i] - s.eigenvalues[j];
      if (std::abs(gap) < degeneracy_guard * (1.0 + std::abs(s.eigenvalues[i]))) {
        out.skipped.push_back({i, j});
        continue;
      }
      coeff[j] = (G(j, i) - s.eigenvalues[i] * D(j, i)) / gap;
    }
    out.vectors.col(i) = Psi.col(i) * (1.0 - 0.5 * D(i, i)) + Psi * coeff;
  }
  return out;
}

void save_spectrum(const Spectrum& s, const std::string& path) {
  nlohmann::json header;
  header["n"] = s.n();
  header["k"] = s.k();
  header["tol"] = s.tol;
  header["iterations"] = s.iterations;
  header["eigenvalues"] = std::vector<double>(s.eigenvalues.data(), s.eigenvalues.data() + s.k());
  header["mass"] = std::vector<double>(s.mass.data(), s.mass.data() + s.n());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SolveError("cannot open " + path + " for writing");
  out << header.dump() << "\n";
  out.write(reinterpret_cast<const char*>(s.eigenvectors.data()),
            static_cast<std::streamsize>(sizeof(double) * s.n() * s.k()));
}

Spectrum load_spectrum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SolveError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw SolveError(path + ": missing spectrum header");
  nlohmann::json header = nlohmann::json::parse(line);
  Spectrum s;
  int n = header.at("n"), k = header.at("k");
  s.tol = header.value("tol", 0.0);
  s.iterations = header.value("iterations", 0);
  auto ev = header.at("eigenvalues").get<std::vector<double>>();
  auto mv = header.at("mass").get<std::vector<double>>();
  if (static_cast<int>(ev.size()) != k || static_cast<int>(mv.size()) != n)
    throw SolveError(path + ": inconsistent spectrum header");
  s.eigenvalues = Eigen::Map<Vec>(ev.data(), k);
  s.mass = Eigen::Map<Vec>(mv.data(), n);
  s.eigenvectors.resize(n, k);
  if (!in.read(reinterpret_cast<char*>(s.eigenvectors.data()),
               static_cast<std::streamsize>(sizeof(double) * n * k)))
    throw SolveError(path + ": truncated eigenvector block");
  return s;
}

} // namespace hamspec
