#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hamspec/eigensolver.h"
#include "hamspec/mesh.h"
#include "hamspec/operators.h"

namespace hamspec {

// Spectral geometry compression: project coordinates on the first k basis
// vectors of a connectivity-only operator, quantize, transmit. Connectivity
// travels separately (sidecar OFF); the decoder rebuilds the basis from it.
enum class BasisMode : uint8_t { MHB = 0, HOpt = 1, HReordered = 2 };

struct EncodeOptions {
  int opt_projection = 120; // LBO projection dimension for the potential search
  int opt_iterations = 150;
  double mu = 1.0;
  EigOptions eig;
  const Vec* potential = nullptr; // reuse a precomputed potential (HOpt/HReordered)
};

struct CompressedMesh {
  BasisMode mode = BasisMode::MHB;
  int n = 0;
  int k = 0;
  double qstep = 0.0; // 0 = no quantization
  Mat coeffs;         // k x 3, dequantized
  Eigen::Matrix<int32_t, Eigen::Dynamic, 3> qcoeffs; // raw quanta when qstep > 0
  Vec potential;              // HOpt payload (raw, counted in the bitrate)
  double alpha = 0.0, beta = 0.0; // HReordered affine fit of the sorted potential
  std::vector<int> new_to_old;    // HReordered permutation (implied by vertex order)
  int64_t payload_bits = 0;       // exact fixed-width accounting, no entropy coding
};

// Combinatorial graph Laplacian (degree minus adjacency) of the connectivity.
SparseMat graph_laplacian(const Triangles& connectivity, int n);

// Basis both sides derive from transmitted data only; identical inputs give
// column-wise identical bases thanks to the deterministic solver and sign rule.
Mat decoder_basis(const Triangles& connectivity, int n, BasisMode mode, const Vec& potential,
                  double alpha, double beta, int k, const EigOptions& eig = {});

CompressedMesh encode(const TriMesh& mesh, BasisMode mode, int k, double qstep,
                      const EncodeOptions& opts = {});

TriMesh decode(const CompressedMesh& cm, const Triangles& connectivity);

struct RdRow {
  int k = 0;
  int64_t bits = 0;
  double error = 0.0; // A-weighted mean squared coordinate error
};

std::vector<RdRow> rd_curve(const TriMesh& mesh, BasisMode mode, const std::vector<int>& ks,
                            double qstep, const EncodeOptions& opts = {},
                            bool include_potential_bits = true);

// Binary container: magic "HSPC", version, mode, k, n, qstep, payload blocks.
void save_compressed(const CompressedMesh& cm, const std::string& path);
CompressedMesh load_compressed(const std::string& path);

} // namespace hamspec
