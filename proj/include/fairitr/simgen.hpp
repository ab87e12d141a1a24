#pragma once

#include <cstdint>
#include <vector>

#include "fairitr/dataset.hpp"
#include "fairitr/policy.hpp"

namespace fairitr {

struct ExperimentConfig {
    int experiment_id = 1;  // 1..4
    Eigen::Index n = 500;
    Eigen::Index p = 3;
    Eigen::Index n_test = 500;
    std::uint64_t seed = 0;
    int reps = 1;
};

// X ~ U(-5,5)^p, A ~ +-1, pi = 0.5, R ~ N(T,1); S per design.
// Rewards are shifted nonnegative, shift recorded.
Dataset generate(const ExperimentConfig& cfg);

struct MethodSpec {
    KernelSpec kernel;
    bool sigma_median = false;  // bandwidth from the median heuristic per replicate
    ProxyKind proxy_kind = ProxyKind::Nonlinear;
    double kappa = 1.0;
    std::vector<double> c_grid;  // empty means OWL only
    Centering centering = Centering::Ols;
};

struct ReplicateRow {
    double c = 0.0;  // negative marks the unconstrained (OWL) row
    double value_mean = 0.0, value_sd = 0.0;
    double ufm_mean = 0.0, ufm_sd = 0.0;
    VectorXd proxy_mean;
    int n_reps = 0;
};

struct ReplicateResult {
    std::vector<ReplicateRow> rows;
    int rep_failures = 0;
    // per replicate, per c index: the raw statistics, for paired analyses
    std::vector<std::vector<double>> values;  // [rep][c]
    std::vector<std::vector<double>> ufms;
    std::vector<std::vector<VectorXd>> proxies;
    std::vector<std::vector<VectorXd>> train_proxies;
    std::vector<std::vector<bool>> converged;
};

// fresh train/test pair per replicate, seed stream cfg.seed + rep index
ReplicateResult replicate(const ExperimentConfig& cfg, const MethodSpec& method, int parallelism = 1);

}  // namespace fairitr
