#include "hamspec/spectral.h"

#include <cmath>
#include <fstream>
#include <numeric>

namespace hamspec {

Vec diffuse(const Spectrum& s, const Vec& u0, double t) {
  if (t < 0) throw SolveError("diffuse: negative time");
  if (u0.size() != s.n()) throw SolveError("diffuse: dimension mismatch");
  Vec coeff = s.eigenvectors.transpose() * (s.mass.asDiagonal() * u0);
  coeff.array() *= (-t * s.eigenvalues.array()).exp();
  return s.eigenvectors * coeff;
}

Vec heat_kernel_row(const Spectrum& s, int x, double t) {
  if (x < 0 || x >= s.n()) throw SolveError("heat_kernel_row: invalid vertex");
  if (t < 0) throw SolveError("heat_kernel_row: negative time");
  Vec weights = (-t * s.eigenvalues.array()).exp() * s.eigenvectors.row(x).transpose().array();
  return s.eigenvectors * weights;
}

DescriptorField hks(const Spectrum& s, const Vec& times) {
  if (times.size() == 0) throw SolveError("hks: empty schedule");
  if (s.k() < 2) throw SolveError("hks: spectrum needs k >= 2");
  DescriptorField d;
  d.schedule = times;
  d.values.resize(s.n(), times.size());
  Mat sq = s.eigenvectors.array().square();
  for (int j = 0; j < times.size(); ++j) {
    Vec w = (-times[j] * s.eigenvalues.array()).exp();
    d.values.col(j) = sq * w;
  }
  return d;
}

Vec default_hks_times(const Spectrum& s, int count) {
  double emin = 0, emax = 0;
  for (int i = 0; i < s.k(); ++i) {
    double e = s.eigenvalues[i];
    if (e > 1e-12) {
      if (emin == 0) emin = e;
      emax = e;
    }
  }
  if (emax <= 0) throw SolveError("default_hks_times: no positive eigenvalues");
  double tmin = 4.0 * std::log(10.0) / emax;
  double tmax = 4.0 * std::log(10.0) / emin;
  Vec t(count);
  for (int i = 0; i < count; ++i)
    t[i] = std::exp(std::log(tmin) + (std::log(tmax) - std::log(tmin)) * i / std::max(1, count - 1));
  return t;
}

DescriptorField wks(const Spectrum& s, const Vec& energies, double sigma) {
  if (energies.size() == 0) throw SolveError("wks: empty schedule");
  if (!(sigma > 0)) throw SolveError("wks: sigma must be positive");
  std::vector<int> used;
  for (int i = 0; i < s.k(); ++i)
    if (s.eigenvalues[i] > 1e-12) used.push_back(i);
  if (used.empty()) throw SolveError("wks: all eigenvalues excluded");

  DescriptorField d;
  d.schedule = energies;
  d.values = Mat::Zero(s.n(), energies.size());
  Vec logE(static_cast<int>(used.size()));
  Mat sq(s.n(), static_cast<int>(used.size()));
  for (size_t u = 0; u < used.size(); ++u) {
    logE[static_cast<int>(u)] = std::log(s.eigenvalues[used[u]]);
    sq.col(static_cast<int>(u)) = s.eigenvectors.col(used[u]).array().square();
  }
  for (int j = 0; j < energies.size(); ++j) {
    Vec w = (-(energies[j] - logE.array()).square() / (2.0 * sigma * sigma)).exp();
    double norm = w.sum();
    if (norm <= 0) norm = 1.0;
    d.values.col(j) = sq * (w / norm);
  }
  return d;
}

WksSchedule default_wks_schedule(const Spectrum& s, int count) {
  double e2 = 0, ek = 0;
  for (int i = 0; i < s.k(); ++i) {
    double e = s.eigenvalues[i];
    if (e > 1e-12) {
      if (e2 == 0) e2 = e;
      ek = e;
    }
  }
  if (ek <= 0 || e2 == ek) throw SolveError("default_wks_schedule: spectrum too small");
  WksSchedule sched;
  sched.energies = Vec::LinSpaced(count, std::log(e2), std::log(ek));
  sched.sigma = 7.0 * (std::log(ek) - std::log(e2)) / std::max(1, count - 1);
  return sched;
}

void save_descriptors(const DescriptorField& d, const std::string& path,
                      const std::string& metadata_json) {
  std::ofstream out(path);
  if (!out) throw SolveError("cannot open " + path + " for writing");
  if (!metadata_json.empty()) out << "# " << metadata_json << "\n";
  out << "vertex";
  for (int j = 0; j < d.schedule.size(); ++j) out << ",s" << j;
  out << "\n";
  char buf[32];
  for (int i = 0; i < d.values.rows(); ++i) {
    out << i;
    for (int j = 0; j < d.values.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), ",%.12g", d.values(i, j));
      out << buf;
    }
    out << "\n";
  }
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace

NodalDecomposition nodal_domains(const TriMesh& mesh, const Vec& f, double zero_band_rel) {
  const int n = mesh.num_vertices();
  if (f.size() != n) throw SolveError("nodal_domains: dimension mismatch");
  NodalDecomposition d;
  d.sign.resize(n);
  const double band = zero_band_rel * f.cwiseAbs().maxCoeff();
  for (int i = 0; i < n; ++i)
    d.sign[i] = std::abs(f[i]) <= band ? 0 : (f[i] > 0 ? 1 : -1);

  UnionFind uf(n);
  for (const auto& e : mesh.edges) {
    // merge unless the endpoints have strictly opposite signs
    if (d.sign[e[0]] * d.sign[e[1]] >= 0) uf.unite(e[0], e[1]);
  }
  d.component.resize(n);
  std::map<int, int> ids;
  for (int i = 0; i < n; ++i) {
    int root = uf.find(i);
    auto [it, inserted] = ids.insert({root, static_cast<int>(ids.size())});
    d.component[i] = it->second;
  }
  d.domain_count = static_cast<int>(ids.size());
  return d;
}

ResidualBound residual_bound_check(const Spectrum& s, const SparseMat& H, const Vec& f,
                                   int n_trunc) {
  if (f.size() != s.n()) throw SolveError("residual_bound_check: dimension mismatch");
  if (n_trunc < 0 || n_trunc >= s.k())
    throw SolveError("residual_bound_check: n_trunc must leave E_{n+1} available");
  if (!f.allFinite()) throw SolveError("residual_bound_check: non-finite input");

  Vec coeff = s.eigenvectors.leftCols(n_trunc).transpose() * (s.mass.asDiagonal() * f);
  Vec residual = f - s.eigenvectors.leftCols(n_trunc) * coeff;
  ResidualBound out;
  out.residual_sq = residual.dot(s.mass.asDiagonal() * residual);

  double next = s.eigenvalues[n_trunc];
  if (next <= 0) {
    out.bound_defined = false;
    out.holds = true;
    return out;
  }
  out.bound = f.dot(H * f) / next;
  out.holds = out.residual_sq <= out.bound * (1.0 + 1e-9) + 1e-12;
  return out;
}

} // namespace hamspec
