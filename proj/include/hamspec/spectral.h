#pragma once

#include <Eigen/Core>

#include "hamspec/eigensolver.h"
#include "hamspec/mesh.h"
#include "hamspec/operators.h"
#include "hamspec/spectrum.h"

namespace hamspec {

// Truncated-basis heat solution u(t) = Psi exp(-E t) Psi^T A u0.
Vec diffuse(const Spectrum& s, const Vec& u0, double t);

// Row x of the truncated heat kernel K(x, y, t) = sum_i e^{-E_i t} psi_i(x) psi_i(y).
Vec heat_kernel_row(const Spectrum& s, int x, double t);

/// Per-vertex descriptors sampled over a time/energy schedule.
struct DescriptorField {
  Mat values;   // n x samples
  Vec schedule; // times (HKS) or log-energies (WKS)
};

DescriptorField hks(const Spectrum& s, const Vec& times);
Vec default_hks_times(const Spectrum& s, int count = 100);

DescriptorField wks(const Spectrum& s, const Vec& energies, double sigma);

struct WksSchedule {
  Vec energies;
  double sigma = 0.0;
};
// 100 uniform samples of log-energy spanning [log E_2, log E_k], sigma from
// 7x the schedule spacing; eigenvalues <= 1e-12 are excluded from the log.
WksSchedule default_wks_schedule(const Spectrum& s, int count = 100);

void save_descriptors(const DescriptorField& d, const std::string& path,
                      const std::string& metadata_json = "");

/// Sign labels and connected components of an eigenfunction's complement of
/// its nodal set. Near-zero vertices join adjacent components, so counts are
/// conservative.
struct NodalDecomposition {
  Eigen::VectorXi sign;      // -1, 0, +1
  Eigen::VectorXi component; // component id per vertex
  int domain_count = 0;
};

NodalDecomposition nodal_domains(const TriMesh& mesh, const Vec& eigenfunction,
                                 double zero_band_rel = 1e-9);

/// Spectral truncation residual against the variational bound
/// ||f - P_n f||_A^2 <= (f^T H f) / E_{n+1}.
struct ResidualBound {
  double residual_sq = 0.0;
  double bound = 0.0;
  bool bound_defined = true; // false when E_{n+1} <= 0
  bool holds = true;
};

ResidualBound residual_bound_check(const Spectrum& s, const SparseMat& H, const Vec& f,
                                   int n_trunc);

} // namespace hamspec
