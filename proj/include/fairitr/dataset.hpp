#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairitr/common.hpp"

namespace fairitr {

// Immutable after preparation; operations return new values.
struct Dataset {
    MatrixXd X;           // n x p covariates
    MatrixXd S;           // n x K sensitive attributes
    VectorXi A;           // n, entries in {-1,+1}
    VectorXd R;           // n, rewards (nonnegative after shift_rewards)
    VectorXd pi;          // n, propensity of the observed treatment, in (0,1)
    double reward_shift = 0.0;

    Eigen::Index n() const { return A.size(); }
    Eigen::Index p() const { return X.cols(); }
    Eigen::Index K() const { return S.cols(); }

    // joined feature rows (X,S), the kernel's input space
    MatrixXd features() const;
};

struct PropensityModel {
    VectorXd coefficients;  // intercept first, then X then S slopes
    double penalty = 0.0;
    int iterations = 0;
    double grad_norm = 0.0;
};

struct CsvSchema {
    std::string treatment;
    std::string reward;
    std::vector<std::string> sensitive;
    std::vector<std::string> covariates;  // empty means "rest"
    std::optional<std::string> positive_level;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);

// writes x1..xp, s1..sK, a, r[, pi] with 17 significant digits
void save_csv(const Dataset& d, const std::string& path, bool with_pi);

// pi_hat = #{A=+1}/n; errors when all treatments are identical
Dataset set_constant_propensity(const Dataset& d);

PropensityModel fit_penalized_logistic(const Dataset& d, double penalty);

// fills pi with the fitted probability of the observed treatment,
// clipped to [1e-6, 1-1e-6]
Dataset apply_propensity(const Dataset& d, const PropensityModel& m);

// min(R) < 0: R_i -= min(R), reward_shift = -min(R); otherwise unchanged
Dataset shift_rewards(const Dataset& d);

// enforces the Dataset invariants; throws ConfigError on violation
void validate(const Dataset& d, bool require_pi);

}  // namespace fairitr
