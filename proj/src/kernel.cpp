#include "fairitr/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace fairitr {

MatrixXd gram(const KernelSpec& spec, const MatrixXd& Z1, const MatrixXd& Z2) {
    if (Z1.cols() != Z2.cols()) throw ConfigError("kernel inputs have different column counts");
    bool same = Z1.rows() == Z2.rows() && Z1.data() == Z2.data();
    MatrixXd G;
    if (spec.kind == KernelKind::Linear) {
        G = Z1 * Z2.transpose();
    } else {
        if (!(spec.sigma > 0.0)) throw ConfigError("Gaussian kernel needs sigma > 0");
        VectorXd n1 = Z1.rowwise().squaredNorm(), n2 = Z2.rowwise().squaredNorm();
        MatrixXd d2 = (-2.0 * Z1 * Z2.transpose()).colwise() + n1;
        d2.rowwise() += n2.transpose();
        G = (d2.array().max(0.0) * (-0.5 / (spec.sigma * spec.sigma))).exp();
    }
    if (same) G = 0.5 * (G + G.transpose()).eval();
    return G;
}

double median_heuristic_sigma(const MatrixXd& Z) {
    Eigen::Index m = Z.rows();
    if (m < 2) throw ConfigError("median heuristic needs at least 2 rows");
    // deterministic stride subsample caps the O(m^2) pair count
    std::vector<Eigen::Index> idx;
    Eigen::Index cap = 1000;
    if (m <= cap) {
        idx.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) idx[i] = i;
    } else {
        Rng rng(0x5EEDu);
        std::vector<Eigen::Index> all(m);
        for (Eigen::Index i = 0; i < m; ++i) all[i] = i;
        for (Eigen::Index i = 0; i < cap; ++i) {
            std::swap(all[i], all[i + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(m - i)))]);
            idx.push_back(all[i]);
        }
    }
    std::vector<double> dist;
    dist.reserve(idx.size() * (idx.size() - 1) / 2);
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b)
            dist.push_back((Z.row(idx[a]) - Z.row(idx[b])).norm());
    std::sort(dist.begin(), dist.end());
    std::size_t half = dist.size() / 2;
    double med = (dist.size() % 2 == 1) ? dist[half] : 0.5 * (dist[half - 1] + dist[half]);
    if (med == 0.0) throw ConfigError("median pairwise distance is zero: all rows identical");
    return med;
}

}  // namespace fairitr
