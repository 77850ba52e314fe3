#include "hamspec/operators.h"

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

namespace hamspec {

namespace {

// cot of the angle at corner c of triangle (a, b, c)
double corner_cot(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                  const Eigen::Vector3d& c) {
  Eigen::Vector3d u = a - c, v = b - c;
  double cross = u.cross(v).norm();
  if (!(cross > 0)) throw OperatorError("degenerate triangle: non-finite cotangent");
  return u.dot(v) / cross;
}

} // namespace

SparseMat assemble_stiffness(const TriMesh& mesh) {
  const int n = mesh.num_vertices();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.num_triangles() * 12);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    int idx[3] = {mesh.triangles(t, 0), mesh.triangles(t, 1), mesh.triangles(t, 2)};
    Eigen::Vector3d p[3];
    for (int e = 0; e < 3; ++e) p[e] = mesh.vertices.row(idx[e]);
    for (int e = 0; e < 3; ++e) {
      int i = idx[(e + 1) % 3], j = idx[(e + 2) % 3];
      double w = 0.5 * corner_cot(p[(e + 1) % 3], p[(e + 2) % 3], p[e]);
      if (!std::isfinite(w)) throw OperatorError("non-finite cotangent weight");
      trip.emplace_back(i, j, -w);
      trip.emplace_back(j, i, -w);
      trip.emplace_back(i, i, w);
      trip.emplace_back(j, j, w);
    }
  }
  SparseMat W(n, n);
  W.setFromTriplets(trip.begin(), trip.end());
  W.makeCompressed();
  return W;
}

Vec assemble_mass(const TriMesh& mesh, MassScheme scheme) {
  const int n = mesh.num_vertices();
  Vec mass = Vec::Zero(n);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    int idx[3] = {mesh.triangles(t, 0), mesh.triangles(t, 1), mesh.triangles(t, 2)};
    Eigen::Vector3d p[3];
    for (int e = 0; e < 3; ++e) p[e] = mesh.vertices.row(idx[e]);
    double area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();

    if (scheme == MassScheme::Barycentric) {
      for (int e = 0; e < 3; ++e) mass[idx[e]] += area / 3.0;
      continue;
    }

    double cot[3], sq[3]; // cot at corner e; squared length of edge opposite e
    bool obtuse = false;
    int obtuse_corner = -1;
    for (int e = 0; e < 3; ++e) {
      cot[e] = corner_cot(p[(e + 1) % 3], p[(e + 2) % 3], p[e]);
      sq[e] = (p[(e + 1) % 3] - p[(e + 2) % 3]).squaredNorm();
      if (cot[e] < 0) {
        obtuse = true;
        obtuse_corner = e;
      }
    }
    if (!obtuse) {
      // Voronoi area at corner e: (|e_ab|^2 cot_c + |e_ac|^2 cot_b) / 8
      for (int e = 0; e < 3; ++e)
        mass[idx[e]] += (sq[(e + 1) % 3] * cot[(e + 1) % 3] + sq[(e + 2) % 3] * cot[(e + 2) % 3]) / 8.0;
    } else {
      for (int e = 0; e < 3; ++e)
        mass[idx[e]] += (e == obtuse_corner) ? area / 2.0 : area / 4.0;
    }
  }
  for (int i = 0; i < n; ++i)
    if (!(mass[i] > 0))
      throw OperatorError("mass entry " + std::to_string(i) + " is not positive (isolated vertex?)");
  return mass;
}

SparseMat assemble_hamiltonian(const SparseMat& W, const Vec& A, const PotentialField& V) {
  const int n = static_cast<int>(W.rows());
  if (A.size() != n || V.values.size() != n)
    throw OperatorError("assemble_hamiltonian: dimension mismatch");
  if (!V.values.allFinite()) throw OperatorError("assemble_hamiltonian: non-finite potential");
  if (V.physical && V.values.minCoeff() < 0)
    throw OperatorError("assemble_hamiltonian: physical potential must be nonnegative");
  SparseMat H = W;
  for (int i = 0; i < n; ++i) H.coeffRef(i, i) += A[i] * V.mu * V.values[i];
  H.makeCompressed();
  return H;
}

IntervalOperators assemble_interval(int n) { return assemble_interval(n, Vec::Zero(n), 1.0); }

IntervalOperators assemble_interval(int n, const Vec& V, double mu) {
  if (n < 2) throw OperatorError("assemble_interval requires n >= 2");
  if (V.size() != n) throw OperatorError("assemble_interval: potential size mismatch");
  const double h = 1.0 / (n - 1);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(3 * n);
  for (int i = 0; i + 1 < n; ++i) {
    trip.emplace_back(i, i + 1, -1.0 / h);
    trip.emplace_back(i + 1, i, -1.0 / h);
    trip.emplace_back(i, i, 1.0 / h);
    trip.emplace_back(i + 1, i + 1, 1.0 / h);
  }
  IntervalOperators ops;
  ops.W.resize(n, n);
  ops.W.setFromTriplets(trip.begin(), trip.end());
  ops.W.makeCompressed();
  ops.A = Vec::Constant(n, h);
  ops.A[0] = ops.A[n - 1] = h / 2.0;
  PotentialField pf{V, mu, false};
  ops.H = assemble_hamiltonian(ops.W, ops.A, pf);
  return ops;
}

SparseMat symmetrize_pencil(const SparseMat& W, const Vec& A) {
  if (A.size() != W.rows()) throw OperatorError("symmetrize_pencil: dimension mismatch");
  if (A.minCoeff() <= 0) throw OperatorError("symmetrize_pencil: mass must be positive");
  Vec isqrt = A.cwiseSqrt().cwiseInverse();
  SparseMat S = isqrt.asDiagonal() * W * isqrt.asDiagonal();
  S.makeCompressed();
  return S;
}

double mu_upper_bound(const Spectrum& lbo, const Vec& V, int i) {
  if (i < 0 || i >= lbo.k()) throw OperatorError("mu_upper_bound: index outside spectrum");
  if (V.size() != lbo.n()) throw OperatorError("mu_upper_bound: potential size mismatch");
  const Vec psi = lbo.eigenvectors.col(i);
  const double bracket = (lbo.mass.array() * V.array() * psi.array().square()).sum();
  const double vmax = V.maxCoeff();
  const double denom = vmax - bracket;
  // constant potentials land at denom == 0 up to roundoff; report +inf
  if (denom <= 1e-12 * (std::abs(vmax) + std::abs(bracket) + 1.0))
    return std::numeric_limits<double>::infinity();
  return lbo.eigenvalues[i] / denom;
}

void save_operator(const SparseMat& op, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw OperatorError("cannot open " + path + " for writing");
  char buf[96];
  for (int o = 0; o < op.outerSize(); ++o)
    for (SparseMat::InnerIterator it(op, o); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%ld %ld %.17g\n", static_cast<long>(it.row()),
                    static_cast<long>(it.col()), it.value());
      out << buf;
    }
}

SparseMat load_operator(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw OperatorError("cannot open " + path);
  std::vector<Eigen::Triplet<double>> trip;
  long r, c;
  double v;
  long max_index = -1;
  while (in >> r >> c >> v) {
    trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
    max_index = std::max({max_index, r, c});
  }
  SparseMat op(static_cast<int>(max_index + 1), static_cast<int>(max_index + 1));
  op.setFromTriplets(trip.begin(), trip.end());
  op.makeCompressed();
  return op;
}

} // namespace hamspec
