#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "hamspec/mesh.h"
#include "hamspec/operators.h"
#include "hamspec/spectral.h"
#include "hamspec/spectrum.h"

namespace hamspec {

/// Total per-vertex map from mesh M to mesh N.
struct Correspondence {
  std::vector<int> map;
  Vec confidence; // optional, empty when unused
};

// Local area-distortion potential under a ground-truth bijection:
// V(m) = max(A_M(m)/A_N(tau(m)), A_N(tau(m))/A_M(m)) >= 1.
PotentialField area_distortion_potential(const TriMesh& meshM, const TriMesh& meshN,
                                         const std::vector<int>& gt_map);
PotentialField area_distortion_potential(const Vec& massM, const Vec& massN,
                                         const std::vector<int>& gt_map);

// Normalized sum of the four first nontrivial LBO eigenfunctions, shifted so
// its minimum is zero. Inputs must be sign-resolved.
PotentialField intrinsic_potential(const Spectrum& lbo);

// Multi-source graph-geodesic distance from the landmark set, optionally
// normalized to [0, 1].
PotentialField landmark_potential(const TriMesh& mesh, const std::vector<int>& landmarks,
                                  bool normalize = true);

// Per-vertex nearest neighbor in descriptor space (Euclidean); ties resolve
// to the lower index.
Correspondence match_descriptors(const Mat& descM, const Mat& descN);

/// Fraction of vertices within a relative geodesic error, per threshold.
struct ErrorCurve {
  Vec thresholds;
  Vec fraction;
  double diameter = 0.0;
};

// Max pairwise graph-geodesic distance over a vertex sample (the exact
// diameter is quadratic); recorded in curve metadata.
double estimate_diameter(const TriMesh& mesh, int sample_count = 100, uint64_t seed = 7);

ErrorCurve geodesic_error_curve(const Correspondence& corr, const std::vector<int>& gt_map,
                                const TriMesh& meshN, double diameter = 0.0,
                                int threshold_steps = 200, double threshold_max = 0.5);

/// k x k functional-map matrix under a ground-truth map, with the fraction of
/// its squared mass on the diagonal.
struct FunctionalMapMatrix {
  Mat C;
  double diagonality = 0.0;
};

FunctionalMapMatrix functional_map(const Spectrum& spectrumM, const Spectrum& spectrumN,
                                   const std::vector<int>& gt_map, int k);

// Two-column vertex index files (ground-truth maps, correspondences).
std::vector<int> load_index_map(const std::string& path, bool one_based = false);
void save_index_map(const std::vector<int>& map, const std::string& path);

} // namespace hamspec
