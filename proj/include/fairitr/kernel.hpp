#pragma once

#include "fairitr/common.hpp"

namespace fairitr {

enum class KernelKind { Linear, Gaussian };

struct KernelSpec {
    KernelKind kind = KernelKind::Linear;
    double sigma = 1.0;  // Gaussian bandwidth; ignored for Linear
};

// Linear: Z1 Z2^T. Gaussian: exp(-||z1-z2||^2 / (2 sigma^2)).
// Symmetrized when Z1 and Z2 are the same matrix.
MatrixXd gram(const KernelSpec& spec, const MatrixXd& Z1, const MatrixXd& Z2);

// median pairwise distance over a deterministic subsample of <= 1000 rows
double median_heuristic_sigma(const MatrixXd& Z);

}  // namespace fairitr
