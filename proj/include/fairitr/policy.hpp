#pragma once

#include <map>
#include <string>
#include <vector>

#include "fairitr/dataset.hpp"
#include "fairitr/kernel.hpp"
#include "fairitr/proxy.hpp"
#include "fairitr/qp.hpp"

namespace fairitr {

// "ols" residualizes rewards against [X, S, 1] and folds the residual sign
// into the labels before the hinge fit; "none" uses rewards as stored
enum class Centering { Ols, None };

struct PolicyDiagnostics {
    double objective = 0.0;
    int n_support = 0;
    VectorXd train_proxy;
    bool converged = false;
    int iterations = 0;
    double psd_min_eig = 0.0;
};

struct PolicyModel {
    MatrixXd train_Z;       // n x (p+K) joined training features
    VectorXd u;             // representer coefficients
    double b0 = 0.0;
    KernelSpec kernel;
    ProxyKind proxy_kind = ProxyKind::None;
    VectorXd c;
    double kappa = 1.0;
    Centering centering = Centering::Ols;
    PolicyDiagnostics diagnostics;
};

struct EvalReport {
    double value = 0.0;          // IPW value on raw (unshifted) rewards
    double value_shifted = 0.0;  // same statistic on stored rewards
    double ufm = 0.0;
    VectorXd proxy_test;
    std::map<std::string, double> accept_rates;
    std::vector<std::string> small_groups;  // groups with < 5 members
    Eigen::Index n_test = 0;
};

struct FourFifths {
    bool pass = false;
    double ratio = 0.0;
};

PolicyModel fit_dpa_itr(const Dataset& d, const KernelSpec& kernel, ProxyKind proxy_kind,
                        double kappa, const VectorXd& c, Centering centering = Centering::Ols);

PolicyModel fit_owl(const Dataset& d, const KernelSpec& kernel, double kappa,
                    Centering centering = Centering::Ols);

VectorXd decision_values(const PolicyModel& m, const MatrixXd& Xnew, const MatrixXd& Snew);

// Sgn: f > 0 -> +1, f <= 0 -> -1
VectorXi assign(const PolicyModel& m, const MatrixXd& Xnew, const MatrixXd& Snew);

double estimate_value(const Dataset& d_test, const PolicyModel& m);

EvalReport evaluate(const Dataset& d_test, const PolicyModel& m, ProxyKind proxy_kind);

FourFifths four_fifths_check(const EvalReport& report);

void save_model(const PolicyModel& m, const std::string& path);
PolicyModel load_model(const std::string& path);

// hinge labels and weights after reward preparation; exposed for tests
struct HingeData {
    VectorXi labels;     // A_i * sgn(residual)
    VectorXd rewards;    // |residual|, the effective reward for the dual box
};
HingeData prepare_hinge(const Dataset& d, Centering centering);

}  // namespace fairitr
