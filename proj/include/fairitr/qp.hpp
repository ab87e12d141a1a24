#pragma once

#include <string>

#include "fairitr/common.hpp"
#include "fairitr/dataset.hpp"
#include "fairitr/proxy.hpp"

namespace fairitr {

// maximize e^T z - (1/2) z^T D z  s.t. lower <= z <= upper, eq^T z = 0.
// Variable order: (alpha_1..alpha_n, gamma_1, eta_1, ..., gamma_K, eta_K).
struct QPProblem {
    MatrixXd D;
    VectorXd e;
    VectorXd lower;
    VectorXd upper;   // +inf sentinel allowed
    VectorXd eq;      // all-zero means no equality constraint
    Eigen::Index n_alpha = -1;  // size of the alpha block; -1 means all of z
};

struct DualSolution {
    VectorXd z;        // full variable vector
    VectorXd alpha;    // first n entries
    VectorXd gamma;    // K entries
    VectorXd eta;      // K entries
    double objective = 0.0;
    double stationarity = 0.0;
    double primal_eq = 0.0;
    double bound_violation = 0.0;
    int iterations = 0;
    bool converged = false;
};

// column for alpha_i is A_i e_i; for gamma_k, w_.k/n; for eta_k, -w_.k/n
MatrixXd dual_coefficient_map(const VectorXi& A, const ProxyWeights& W);

// D = M^T gram M (symmetrized); e = (1..1, -c_1, -c_1, ..., -c_K, -c_K);
// box 0 <= alpha_i <= kappa R_i / pi_i, gamma/eta >= 0; eq = (A, 0..0)
QPProblem assemble_dual(const Dataset& d, const ProxyWeights& w, const MatrixXd& gramK,
                        double kappa, const VectorXd& c);

// operator splitting (proximal step + exact projection onto box and hyperplane)
DualSolution solve_qp(const QPProblem& p, double tol = -1.0, int max_iter = 200000);

// projected gradient with diminishing steps, corner + center starts; m <= 12
DualSolution brute_force_qp(const QPProblem& p);

// minimum eigenvalue; throws on asymmetry beyond 1e-8 relative
double check_psd(const MatrixXd& D);

// margin-point KKT average; golden-section fallback on the hinge objective
double recover_intercept(const DualSolution& sol, const VectorXi& A, const VectorXd& hinge_weight,
                         const MatrixXd& gramK, const MatrixXd& M, double kappa);

// dimension header, then row-major values with 17 significant digits
void dump_qp(const QPProblem& p, const std::string& path);

// exact projection of v onto {lower <= x <= upper, eq^T x = 0}; exposed for tests
VectorXd project_box_hyperplane(const VectorXd& v, const VectorXd& lower, const VectorXd& upper,
                                const VectorXd& eq);

}  // namespace fairitr
