#include "hamspec/matching.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace hamspec {

PotentialField area_distortion_potential(const TriMesh& meshM, const TriMesh& meshN,
                                         const std::vector<int>& gt_map) {
  return area_distortion_potential(assemble_mass(meshM), assemble_mass(meshN), gt_map);
}

PotentialField area_distortion_potential(const Vec& massM, const Vec& massN,
                                         const std::vector<int>& gt_map) {
  if (static_cast<int>(gt_map.size()) != massM.size())
    throw SolveError("area_distortion_potential: map must cover every vertex of M");
  PotentialField field;
  field.values.resize(massM.size());
  field.physical = true;
  for (int i = 0; i < massM.size(); ++i) {
    int j = gt_map[i];
    if (j < 0 || j >= massN.size())
      throw SolveError("area_distortion_potential: map target out of range");
    double am = massM[i], an = massN[j];
    if (!(am > 0) || !(an > 0)) throw SolveError("area_distortion_potential: zero vertex area");
    field.values[i] = std::max(am / an, an / am);
  }
  return field;
}

PotentialField intrinsic_potential(const Spectrum& lbo) {
  if (lbo.k() < 5) throw SolveError("intrinsic_potential: spectrum needs at least 5 columns");
  Vec sum = lbo.eigenvectors.col(1) + lbo.eigenvectors.col(2) + lbo.eigenvectors.col(3) +
            lbo.eigenvectors.col(4);
  double norm = std::sqrt(sum.dot(lbo.mass.asDiagonal() * sum));
  if (norm > 0) sum /= norm;
  PotentialField field;
  field.values = sum.array() - sum.minCoeff();
  field.physical = true;
  return field;
}

PotentialField landmark_potential(const TriMesh& mesh, const std::vector<int>& landmarks,
                                  bool normalize) {
  DistanceField df = graph_geodesics(mesh, landmarks);
  if (!df.unreachable.empty())
    throw SolveError("landmark_potential: mesh has vertices unreachable from the landmarks");
  PotentialField field;
  field.values = df.distance;
  if (normalize) {
    double max = field.values.maxCoeff();
    if (max > 0) field.values /= max;
  }
  field.physical = true;
  return field;
}

Correspondence match_descriptors(const Mat& descM, const Mat& descN) {
  if (descM.cols() != descN.cols()) throw SolveError("match_descriptors: dimension mismatch");
  Correspondence corr;
  corr.map.resize(descM.rows());
  // squared distances via the norm expansion, one query block at a time
  Vec nN = descN.rowwise().squaredNorm();
  const int block = 256;
  for (int start = 0; start < descM.rows(); start += block) {
    int count = std::min<int>(block, static_cast<int>(descM.rows()) - start);
    Mat cross = descM.middleRows(start, count) * descN.transpose(); // count x nN
    for (int i = 0; i < count; ++i) {
      int best = 0;
      double best_d = nN[0] - 2.0 * cross(i, 0);
      for (int j = 1; j < descN.rows(); ++j) {
        double d = nN[j] - 2.0 * cross(i, j);
        if (d < best_d - 1e-15 * (1.0 + std::abs(best_d))) { // ties keep the lower index
          best_d = d;
          best = j;
        }
      }
      corr.map[start + i] = best;
    }
  }
  return corr;
}

double estimate_diameter(const TriMesh& mesh, int sample_count, uint64_t seed) {
  const int n = mesh.num_vertices();
  std::vector<int> sample;
  if (n <= sample_count) {
    sample.resize(n);
    for (int i = 0; i < n; ++i) sample[i] = i;
  } else {
    std::mt19937_64 rng(seed);
    std::set<int> chosen;
    std::uniform_int_distribution<int> pick(0, n - 1);
    while (static_cast<int>(chosen.size()) < sample_count) chosen.insert(pick(rng));
    sample.assign(chosen.begin(), chosen.end());
  }
  double diameter = 0.0;
  for (int s : sample) {
    DistanceField df = graph_geodesics(mesh, {s});
    for (int v = 0; v < n; ++v)
      if (std::isfinite(df.distance[v])) diameter = std::max(diameter, df.distance[v]);
  }
  return diameter;
}

ErrorCurve geodesic_error_curve(const Correspondence& corr, const std::vector<int>& gt_map,
                                const TriMesh& meshN, double diameter, int threshold_steps,
                                double threshold_max) {
  const int n = static_cast<int>(corr.map.size());
  if (static_cast<int>(gt_map.size()) != n)
    throw SolveError("geodesic_error_curve: ground truth does not cover the correspondence");
  if (diameter <= 0) diameter = estimate_diameter(meshN);
  if (!(diameter > 0)) throw SolveError("geodesic_error_curve: diameter must be positive");

  // one Dijkstra per distinct ground-truth target
  std::map<int, Vec> rows;
  for (int v = 0; v < n; ++v) {
    int g = gt_map[v];
    if (g < 0 || g >= meshN.num_vertices())
      throw SolveError("geodesic_error_curve: ground-truth entry out of range");
    if (!rows.count(g)) rows[g] = graph_geodesics(meshN, {g}).distance;
  }
  Vec err(n);
  for (int v = 0; v < n; ++v) err[v] = rows[gt_map[v]][corr.map[v]] / diameter;

  ErrorCurve curve;
  curve.diameter = diameter;
  curve.thresholds = Vec::LinSpaced(threshold_steps, 0.0, threshold_max);
  curve.fraction.resize(threshold_steps);
  for (int t = 0; t < threshold_steps; ++t) {
    int hits = 0;
    for (int v = 0; v < n; ++v)
      if (err[v] <= curve.thresholds[t]) ++hits;
    curve.fraction[t] = static_cast<double>(hits) / n;
  }
  return curve;
}

FunctionalMapMatrix functional_map(const Spectrum& spectrumM, const Spectrum& spectrumN,
                                   const std::vector<int>& gt_map, int k) {
  if (k > spectrumM.k() || k > spectrumN.k())
    throw SolveError("functional_map: k exceeds a spectrum");
  if (static_cast<int>(gt_map.size()) != spectrumM.n())
    throw SolveError("functional_map: map must be total on M");
  // Pi scatters functions on M to N along the map
  Mat mapped = Mat::Zero(spectrumN.n(), k);
  for (int m = 0; m < spectrumM.n(); ++m) {
    int target = gt_map[m];
    if (target < 0 || target >= spectrumN.n())
      throw SolveError("functional_map: map target out of range");
    mapped.row(target) += spectrumM.eigenvectors.row(m).head(k);
  }
  FunctionalMapMatrix out;
  out.C = spectrumN.eigenvectors.leftCols(k).transpose() *
          (spectrumN.mass.asDiagonal() * mapped);
  double diag_sq = out.C.diagonal().squaredNorm();
  double total_sq = out.C.squaredNorm();
  out.diagonality = total_sq > 0 ? diag_sq / total_sq : 0.0;
  return out;
}

std::vector<int> load_index_map(const std::string& path, bool one_based) {
  std::ifstream in(path);
  if (!in) throw SolveError("cannot open " + path);
  std::vector<std::pair<int, int>> pairs;
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    long a, b;
    if (!(ls >> a >> b)) throw SolveError(path + ": malformed map line");
    pairs.push_back({static_cast<int>(a), static_cast<int>(b)});
  }
  int max_src = -1;
  for (auto& [a, b] : pairs) {
    if (one_based) {
      --a;
      --b;
    }
    max_src = std::max(max_src, a);
  }
  std::vector<int> map(max_src + 1, -1);
  for (const auto& [a, b] : pairs) map[a] = b;
  for (size_t i = 0; i < map.size(); ++i)
    if (map[i] < 0) throw SolveError(path + ": map is not total (missing source " +
                                     std::to_string(i) + ")");
  return map;
}

void save_index_map(const std::vector<int>& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SolveError("cannot open " + path + " for writing");
  for (size_t i = 0; i < map.size(); ++i) out << i << " " << map[i] << "\n";
}

} // namespace hamspec
