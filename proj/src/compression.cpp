#include "hamspec/compression.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include "hamspec/potential_opt.h"

namespace hamspec {

namespace {

constexpr int64_t header_bits = 8 * (4 + 1 + 1 + 4 + 4 + 8);

int64_t coefficient_bits(int k, double qstep) { return static_cast<int64_t>(k) * 3 * (qstep > 0 ? 32 : 64); }

Vec optimize_graph_potential(const TriMesh& mesh, int k, const EncodeOptions& opts) {
  const int n = mesh.num_vertices();
  SparseMat L = graph_laplacian(mesh.triangles, n);
  OptimizationProblem problem;
  problem.X = mesh.vertices;
  problem.k = k;
  problem.geometric = false; // identity mass on the decoder pencil
  problem.mu = opts.mu;
  problem.projection_m = std::min(n, std::max(opts.opt_projection, k + 10));
  problem.m = problem.projection_m;
  problem.max_iterations = opts.opt_iterations;
  problem.eig = opts.eig;
  auto [field, trace] = optimize_potential(L, Vec::Ones(n), problem);
  if (trace.solver_failure) throw SolveError("encode: potential optimization failed");
  return field.values;
}

} // namespace

SparseMat graph_laplacian(const Triangles& connectivity, int n) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(connectivity.rows() * 12);
  std::set<std::pair<int, int>> seen;
  for (int t = 0; t < connectivity.rows(); ++t)
    for (int e = 0; e < 3; ++e) {
      int a = connectivity(t, e), b = connectivity(t, (e + 1) % 3);
      if (a > b) std::swap(a, b);
      if (!seen.insert({a, b}).second) continue;
      trip.emplace_back(a, b, -1.0);
      trip.emplace_back(b, a, -1.0);
      trip.emplace_back(a, a, 1.0);
      trip.emplace_back(b, b, 1.0);
    }
  SparseMat L(n, n);
  L.setFromTriplets(trip.begin(), trip.end());
  L.makeCompressed();
  return L;
}

Mat decoder_basis(const Triangles& connectivity, int n, BasisMode mode, const Vec& potential,
                  double alpha, double beta, int k, const EigOptions& eig) {
  SparseMat H = graph_laplacian(connectivity, n);
  switch (mode) {
    case BasisMode::MHB:
      break;
    case BasisMode::HOpt: {
      if (potential.size() != n) throw SolveError("decoder_basis: potential size mismatch");
      PotentialField field{potential, 1.0, false};
      H = assemble_hamiltonian(H, Vec::Ones(n), field);
      break;
    }
    case BasisMode::HReordered: {
      Vec fixed(n);
      for (int i = 0; i < n; ++i) fixed[i] = alpha * (i + 1) + beta;
      PotentialField field{fixed, 1.0, false};
      H = assemble_hamiltonian(H, Vec::Ones(n), field);
      break;
    }
  }
  EigOptions eo = eig;
  eo.k = k;
  Spectrum s = solve_generalized(H, Vec::Ones(n), eo);
  return s.eigenvectors;
}

CompressedMesh encode(const TriMesh& mesh, BasisMode mode, int k, double qstep,
                      const EncodeOptions& opts) {
  const int n = mesh.num_vertices();
  if (k < 1 || k > n) throw SolveError("encode: k must be in [1, n]");
  if (qstep < 0) throw SolveError("encode: qstep must be >= 0");

  CompressedMesh cm;
  cm.mode = mode;
  cm.n = n;
  cm.k = k;
  cm.qstep = qstep;

  Points coords = mesh.vertices;
  Triangles connectivity = mesh.triangles;

  if (mode == BasisMode::HOpt) {
    cm.potential = opts.potential ? *opts.potential : optimize_graph_potential(mesh, k, opts);
    if (!cm.potential.allFinite()) throw SolveError("encode: non-finite potential");
  } else if (mode == BasisMode::HReordered) {
    Vec v = opts.potential ? *opts.potential : optimize_graph_potential(mesh, k, opts);
    if (!v.allFinite()) throw SolveError("encode: non-finite potential");
    // ascending potential order; ties keep the original index order
    cm.new_to_old.resize(n);
    std::iota(cm.new_to_old.begin(), cm.new_to_old.end(), 0);
    std::stable_sort(cm.new_to_old.begin(), cm.new_to_old.end(),
                     [&](int a, int b) { return v[a] < v[b]; });
    std::vector<int> old_to_new(n);
    for (int i = 0; i < n; ++i) old_to_new[cm.new_to_old[i]] = i;
    Points permuted(n, 3);
    Vec sorted(n);
    for (int i = 0; i < n; ++i) {
      permuted.row(i) = mesh.vertices.row(cm.new_to_old[i]);
      sorted[i] = v[cm.new_to_old[i]];
    }
    coords = permuted;
    for (int t = 0; t < connectivity.rows(); ++t)
      for (int e = 0; e < 3; ++e) connectivity(t, e) = old_to_new[mesh.triangles(t, e)];
    // least-squares fit of alpha*(1..n) + beta to the sorted potential
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
      double x = i + 1;
      sx += x;
      sy += sorted[i];
      sxx += x * x;
      sxy += x * sorted[i];
    }
    double denom = n * sxx - sx * sx;
    cm.alpha = denom != 0 ? (n * sxy - sx * sy) / denom : 0.0;
    cm.beta = (sy - cm.alpha * sx) / n;
  }

  Mat basis = decoder_basis(connectivity, n, mode, cm.potential, cm.alpha, cm.beta, k, opts.eig);
  Mat c = basis.transpose() * Mat(coords); // identity mass on the decoder pencil

  if (qstep > 0) {
    cm.qcoeffs.resize(k, 3);
    cm.coeffs.resize(k, 3);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < 3; ++j) {
        double q = std::round(c(i, j) / qstep);
        if (std::abs(q) > 2e9) throw SolveError("encode: coefficient overflows quantizer");
        cm.qcoeffs(i, j) = static_cast<int32_t>(q);
        cm.coeffs(i, j) = q * qstep;
      }
  } else {
    cm.coeffs = c;
  }

  cm.payload_bits = header_bits + coefficient_bits(k, qstep);
  if (mode == BasisMode::HOpt) cm.payload_bits += static_cast<int64_t>(n) * 64;
  if (mode == BasisMode::HReordered) cm.payload_bits += 2 * 64;
  return cm;
}

TriMesh decode(const CompressedMesh& cm, const Triangles& connectivity) {
  Mat basis = decoder_basis(connectivity, cm.n, cm.mode, cm.potential, cm.alpha, cm.beta, cm.k);
  if (basis.cols() < cm.k) throw SolveError("decode: basis rebuild mismatch");
  Mat coords = basis * cm.coeffs;
  TriMesh mesh;
  mesh.vertices = coords;
  mesh.triangles = connectivity;
  validate(mesh, ValidatePolicy::Report); // decoded geometry may be degenerate at tiny k
  return mesh;
}

std::vector<RdRow> rd_curve(const TriMesh& mesh, BasisMode mode, const std::vector<int>& ks,
                            double qstep, const EncodeOptions& opts,
                            bool include_potential_bits) {
  Vec area = assemble_mass(mesh, MassScheme::MixedVoronoi);
  const double total_area = area.sum();
  std::vector<RdRow> rows;
  for (int k : ks) {
    CompressedMesh cm = encode(mesh, mode, k, qstep, opts);
    Triangles connectivity = mesh.triangles;
    if (mode == BasisMode::HReordered) {
      std::vector<int> old_to_new(cm.n);
      for (int i = 0; i < cm.n; ++i) old_to_new[cm.new_to_old[i]] = i;
      for (int r = 0; r < connectivity.rows(); ++r)
        for (int e = 0; e < 3; ++e) connectivity(r, e) = old_to_new[connectivity(r, e)];
    }
    TriMesh decoded = decode(cm, connectivity);
    RdRow row;
    row.k = k;
    row.bits = cm.payload_bits;
    if (!include_potential_bits && mode == BasisMode::HOpt)
      row.bits -= static_cast<int64_t>(cm.n) * 64;
    double err = 0.0;
    for (int i = 0; i < cm.n; ++i) {
      int original = cm.mode == BasisMode::HReordered ? cm.new_to_old[i] : i;
      err += area[original] *
             (decoded.vertices.row(i) - mesh.vertices.row(original)).squaredNorm();
    }
    row.error = err / total_area;
    rows.push_back(row);
  }
  return rows;
}

void save_compressed(const CompressedMesh& cm, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SolveError("cannot open " + path + " for writing");
  out.write("HSPC", 4);
  uint8_t version = 1, mode = static_cast<uint8_t>(cm.mode);
  out.write(reinterpret_cast<const char*>(&version), 1);
  out.write(reinterpret_cast<const char*>(&mode), 1);
  uint32_t k = static_cast<uint32_t>(cm.k), n = static_cast<uint32_t>(cm.n);
  out.write(reinterpret_cast<const char*>(&k), 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&cm.qstep), 8);
  if (cm.qstep > 0) {
    out.write(reinterpret_cast<const char*>(cm.qcoeffs.data()),
              static_cast<std::streamsize>(4 * cm.qcoeffs.size()));
  } else {
    out.write(reinterpret_cast<const char*>(cm.coeffs.data()),
              static_cast<std::streamsize>(8 * cm.coeffs.size()));
  }
  if (cm.mode == BasisMode::HOpt)
    out.write(reinterpret_cast<const char*>(cm.potential.data()),
              static_cast<std::streamsize>(8 * cm.potential.size()));
  if (cm.mode == BasisMode::HReordered) {
    out.write(reinterpret_cast<const char*>(&cm.alpha), 8);
    out.write(reinterpret_cast<const char*>(&cm.beta), 8);
  }
}

CompressedMesh load_compressed(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SolveError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "HSPC", 4) != 0)
    throw SolveError(path + ": not a HSPC container");
  uint8_t version = 0, mode = 0;
  in.read(reinterpret_cast<char*>(&version), 1);
  in.read(reinterpret_cast<char*>(&mode), 1);
  if (version != 1) throw SolveError(path + ": unsupported container version");
  if (mode > 2) throw SolveError(path + ": corrupt stream (bad mode)");
  CompressedMesh cm;
  cm.mode = static_cast<BasisMode>(mode);
  uint32_t k = 0, n = 0;
  in.read(reinterpret_cast<char*>(&k), 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&cm.qstep), 8);
  if (!in || k == 0 || n == 0 || k > n) throw SolveError(path + ": corrupt stream");
  cm.k = static_cast<int>(k);
  cm.n = static_cast<int>(n);
  cm.coeffs.resize(cm.k, 3);
  if (cm.qstep > 0) {
    cm.qcoeffs.resize(cm.k, 3);
    if (!in.read(reinterpret_cast<char*>(cm.qcoeffs.data()),
                 static_cast<std::streamsize>(4 * cm.qcoeffs.size())))
      throw SolveError(path + ": truncated coefficient block");
    cm.coeffs = cm.qcoeffs.cast<double>() * cm.qstep;
  } else {
    if (!in.read(reinterpret_cast<char*>(cm.coeffs.data()),
                 static_cast<std::streamsize>(8 * cm.coeffs.size())))
      throw SolveError(path + ": truncated coefficient block");
  }
  if (cm.mode == BasisMode::HOpt) {
    cm.potential.resize(cm.n);
    if (!in.read(reinterpret_cast<char*>(cm.potential.data()),
                 static_cast<std::streamsize>(8 * cm.potential.size())))
      throw SolveError(path + ": truncated potential block");
  }
  if (cm.mode == BasisMode::HReordered) {
    in.read(reinterpret_cast<char*>(&cm.alpha), 8);
    if (!in.read(reinterpret_cast<char*>(&cm.beta), 8))
      throw SolveError(path + ": truncated affine block");
  }
  cm.payload_bits = header_bits + coefficient_bits(cm.k, cm.qstep);
  if (cm.mode == BasisMode::HOpt) cm.payload_bits += static_cast<int64_t>(cm.n) * 64;
  if (cm.mode == BasisMode::HReordered) cm.payload_bits += 2 * 64;
  return cm;
}

} // namespace hamspec
