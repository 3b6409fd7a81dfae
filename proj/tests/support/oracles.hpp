#pragma once

#include <random>
#include <string>
#include <vector>

#include "cubekit/kernels.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

// Cyclic Jacobi rotations; returns eigenvalues ascending.
std::vector<double> jacobi_eigenvalues(Matrix a, double tol = 1e-14, int max_sweeps = 100);

// Renyi-order Vendi score from raw eigenvalues, written out longhand.
double vendi_from_eigenvalues(const std::vector<double>& eig, double q);

// Krippendorff's ordinal alpha from pairwise value enumeration:
// alpha = 1 - D_o / D_e with both disagreements summed over explicit pairs.
double krippendorff_ordinal(const std::vector<std::vector<int>>& units);

Matrix to_matrix(const cubekit::KernelMatrix& k);

// Random collection over small pools so that collisions at every level happen.
std::vector<cubekit::MappedItem> random_collection(std::mt19937_64& rng, std::size_t n,
                                                   bool random_quality = true);

}  // namespace oracle
