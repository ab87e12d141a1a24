#include "fairitr/proxy.hpp"

#include <algorithm>
#include <cmath>

namespace fairitr {

ProxyWeights linear_proxy_weights(const MatrixXd& S) {
    if (S.rows() < 2) throw ConfigError("proxy weights need n >= 2");
    ProxyWeights out;
    out.kind = ProxyKind::Linear;
    out.W = S.rowwise() - S.colwise().mean();
    for (Eigen::Index k = 0; k < S.cols(); ++k)
        if (out.W.col(k).cwiseAbs().maxCoeff() == 0.0) out.constant_columns.push_back(static_cast<int>(k));
    return out;
}

namespace {

// G_i = #{l : col_i < col_l}; weights (G_i - mean(G))/n
void nonlinear_column(const VectorXd& col, Eigen::Ref<Eigen::VectorXd> w) {
    Eigen::Index n = col.size();
    std::vector<double> sorted(col.data(), col.data() + n);
    std::sort(sorted.begin(), sorted.end());
    VectorXd G(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), col(i));
        G(i) = static_cast<double>(above);
    }
    w = (G.array() - G.mean()) / static_cast<double>(n);
}

}  // namespace

ProxyWeights nonlinear_proxy_weights(const MatrixXd& S) {
    if (S.rows() < 2) throw ConfigError("proxy weights need n >= 2");
    ProxyWeights out;
    out.kind = ProxyKind::Nonlinear;
    out.W.resize(S.rows(), S.cols());
    for (Eigen::Index k = 0; k < S.cols(); ++k) {
        nonlinear_column(S.col(k), out.W.col(k));
        if (out.W.col(k).cwiseAbs().maxCoeff() == 0.0) out.constant_columns.push_back(static_cast<int>(k));
    }
    return out;
}

ProxyWeights nonlinear_proxy_weights_direct(const MatrixXd& S) {
    if (S.rows() < 2) throw ConfigError("proxy weights need n >= 2");
    Eigen::Index n = S.rows();
    ProxyWeights out;
    out.kind = ProxyKind::Nonlinear;
    out.W.resize(n, S.cols());
    for (Eigen::Index k = 0; k < S.cols(); ++k) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double acc = 0.0;
            for (Eigen::Index l = 0; l < n; ++l) {
                double below_l = 0.0;
                for (Eigen::Index m = 0; m < n; ++m)
                    if (S(m, k) < S(l, k)) below_l += 1.0;
                acc += (S(i, k) < S(l, k) ? 1.0 : 0.0) - below_l / static_cast<double>(n);
            }
            out.W(i, k) = acc / static_cast<double>(n);
        }
    }
    return out;
}

VectorXd estimate_proxy(const ProxyWeights& w, const VectorXd& f_values) {
    if (w.W.rows() != f_values.size()) throw ConfigError("proxy weight/f length mismatch");
    return w.W.transpose() * f_values / static_cast<double>(f_values.size());
}

namespace {

void check_joint(const JointDistribution& joint) {
    if (joint.s.size() != joint.f.size() || joint.s.size() != joint.prob.size())
        throw ConfigError("joint distribution arrays have unequal lengths");
    double total = 0.0;
    for (double p : joint.prob) total += p;
    if (std::abs(total - 1.0) > 1e-12)
        throw ConfigError("joint probabilities sum to " + format_digits17(total) + ", not 1");
}

}  // namespace

double omega_population_oracle(const JointDistribution& joint, bool strict) {
    check_joint(joint);
    std::size_t m = joint.s.size();
    double ef = 0.0;
    for (std::size_t j = 0; j < m; ++j) ef += joint.prob[j] * joint.f[j];
    double omega = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        // Omega(s) = Cov(I(S < s), f), the centered-indicator covariance
        double e_ind = 0.0, e_ind_f = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            bool in = strict ? (joint.s[j] < joint.s[t]) : (joint.s[j] <= joint.s[t]);
            if (in) {
                e_ind += joint.prob[j];
                e_ind_f += joint.prob[j] * joint.f[j];
            }
        }
        omega += joint.prob[t] * (e_ind_f - e_ind * ef);
    }
    return omega;
}

double cov_population_oracle(const JointDistribution& joint) {
    check_joint(joint);
    std::size_t m = joint.s.size();
    double es = 0.0, ef = 0.0, esf = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        es += joint.prob[j] * joint.s[j];
        ef += joint.prob[j] * joint.f[j];
        esf += joint.prob[j] * joint.s[j] * joint.f[j];
    }
    return esf - es * ef;
}

}  // namespace fairitr
