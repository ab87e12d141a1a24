#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairitr/dataset.hpp"
#include "fairitr/policy.hpp"

namespace fairitr {

struct SweepPoint {
    double c = 0.0;
    double value_mean = 0.0, value_sd = 0.0;
    double ufm_mean = 0.0, ufm_sd = 0.0;
    VectorXd proxy_mean;
    int n_reps = 0;
};

struct SweepCurve {
    std::vector<SweepPoint> points;      // ascending by c
    std::optional<SweepPoint> owl;       // unconstrained reference fit
    int rep_failures = 0;
    // raw per-replicate statistics, [rep][c index], for paired analyses
    std::vector<std::vector<double>> values, ufms;
    std::vector<std::vector<VectorXd>> proxies, train_proxies;
    std::vector<std::vector<bool>> converged;
    std::vector<double> owl_values, owl_ufms;
    std::vector<VectorXd> owl_proxies;
};

struct SweepOptions {
    KernelSpec kernel;
    bool sigma_median = false;  // per-replicate bandwidth from the median heuristic
    ProxyKind proxy_kind = ProxyKind::Nonlinear;
    double kappa = 1.0;
    std::vector<double> c_grid;
    Centering centering = Centering::Ols;
    bool include_owl = true;
    int parallelism = 1;
};

// source(rep) yields the train/test pair for one replicate
using DataSource = std::function<std::pair<Dataset, Dataset>(int)>;

SweepCurve sweep_c(const DataSource& source, const SweepOptions& opts, int reps);

// bootstrap mode: resamples d_train per replicate, d_test fixed
SweepCurve sweep_c(const Dataset& d_train, const Dataset& d_test, const SweepOptions& opts,
                   int reps, std::uint64_t seed);

void save_sweep_csv(const SweepCurve& curve, const std::string& path);

struct CvChoice {
    double kappa = 1.0;
    double sigma = 1.0;
    double value = 0.0;
};

// twofold split, empirical value on the held-out half, argmax over the grid;
// ties broken by smaller kappa then smaller sigma
CvChoice cross_validate(const Dataset& d, const KernelSpec& kernel_kind, ProxyKind proxy_kind,
                        const VectorXd& c, const std::vector<std::pair<double, double>>& grid,
                        Centering centering = Centering::Ols, std::uint64_t seed = 0x7F0D5u);

struct CostEffective {
    double c0 = 0.0;
    bool not_found = false;
};

// smallest c where U'(c) - V'(c) > 0 after min-max normalizing both series
CostEffective most_cost_effective_c(const SweepCurve& curve, int degree = 3);

// largest grid c whose evaluation passes the four-fifths rule
double select_c_four_fifths(const std::function<FourFifths(double)>& check,
                            const std::vector<double>& c_grid);

}  // namespace fairitr
