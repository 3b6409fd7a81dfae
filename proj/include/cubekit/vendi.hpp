#pragma once

#include <span>
#include <string>
#include <vector>

#include "cubekit/kernels.hpp"

namespace cubekit {

/// Eigenvalues of a kernel matrix and their sum-normalized counterparts.
struct EigenSpectrum {
  std::vector<double> raw;         // ascending, as returned by the solver
  std::vector<double> normalized;  // clamped, rank-truncated, sums to 1
};

struct DiversityResult {
  double vs = 1.0;            // VS_q, in [1, n]
  double mean_quality = 0.0;  // average s(x_i)
  double qvs = 0.0;           // mean_quality * vs
  double cd = 0.0;            // mean_quality * vs / n, in [0, 1]
  std::size_t n = 0;
  double order_q = 1.0;
};

namespace vendi {
/// |q - 1| at or below this uses the Shannon form.
inline constexpr double kShannonBand = 1e-8;
/// Normalized eigenvalues at or below this are treated as zero for every q.
inline constexpr double kRankEpsilon = 1e-10;
/// Nonzero normalized eigenvalues this close (relative) count as a flat
/// spectrum, whose score is the support size.
inline constexpr double kFlatTolerance = 1e-12;
/// Eigenvalues below -kPsdSlack * n are rejected as non-PSD.
inline constexpr double kPsdSlack = 1e-9;
}  // namespace vendi

/// Self-adjoint eigendecomposition. Throws NonPsdError when an eigenvalue is
/// below -1e-9 * n; smaller negative values are clamped to zero.
EigenSpectrum normalized_spectrum(const KernelMatrix& k);

/// exp of the Renyi entropy of order q of the normalized spectrum, using
/// 0 log 0 = 0. Throws ConfigError for q < 0.
double vendi_score(const EigenSpectrum& spectrum, double q);

/// Quality-weighted, size-normalized diversity of a collection. Qualities
/// come from the items themselves.
DiversityResult cultural_diversity(Collection items, const KernelConfig& cfg);

/// Same, with qualities supplied separately. Throws InputError when the
/// lengths differ or any quality lies outside [0, 1].
DiversityResult cultural_diversity(Collection items, const KernelConfig& cfg,
                                   std::span<const double> qualities);

/// exp(Shannon entropy of label block proportions): the closed form of VS_1
/// for a pure indicator kernel.
double partition_vendi_oracle(std::span<const std::string> labels);

}  // namespace cubekit
