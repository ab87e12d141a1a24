#pragma once

#include <vector>

#include "fairitr/common.hpp"

namespace fairitr {

enum class ProxyKind { None, Linear, Nonlinear };

struct ProxyWeights {
    ProxyKind kind = ProxyKind::Linear;
    MatrixXd W;  // n x K, every column sums to zero
    std::vector<int> constant_columns;  // vacuous constraints, kept as warnings
};

// w_ik = S_ik - mean(S_.k)
ProxyWeights linear_proxy_weights(const MatrixXd& S);

// w_ik = (1/n) sum_l [ I(S_ik < S_lk) - (1/n) sum_m I(S_mk < S_lk) ],
// strict '<'; O(n log n) via sorted ranks
ProxyWeights nonlinear_proxy_weights(const MatrixXd& S);

// O(n^2) literal evaluation of the same formula, for tests
ProxyWeights nonlinear_proxy_weights_direct(const MatrixXd& S);

// component k = (1/n) sum_i w_ik f_i
VectorXd estimate_proxy(const ProxyWeights& w, const VectorXd& f_values);

// finite discrete joint distribution of (S_k, f); used only in tests
struct JointDistribution {
    std::vector<double> s;
    std::vector<double> f;
    std::vector<double> prob;
};

// omega_k = E[ Omega_k(S_k, f) ]; strict selects '<' vs '<=' in the indicator
double omega_population_oracle(const JointDistribution& joint, bool strict);

double cov_population_oracle(const JointDistribution& joint);

}  // namespace fairitr
