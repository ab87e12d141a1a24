#include "fairitr/simgen.hpp"

#include <cmath>

#include "fairitr/tuning.hpp"

namespace fairitr {

Dataset generate(const ExperimentConfig& cfg) {
    if (cfg.experiment_id < 1 || cfg.experiment_id > 4)
        throw ConfigError("experiment_id must be 1..4");
    if (cfg.p < 3) throw ConfigError("designs reference X1..X3, need p >= 3");
    if (cfg.n < 10) throw ConfigError("need n >= 10");

    Rng rng(cfg.seed);
    Eigen::Index n = cfg.n, p = cfg.p;
    Dataset d;
    d.X.resize(n, p);
    d.S.resize(n, 1);
    d.A.resize(n);
    d.R.resize(n);
    d.pi = VectorXd::Constant(n, 0.5);

    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) d.X(i, j) = rng.uniform(-5.0, 5.0);
    for (Eigen::Index i = 0; i < n; ++i) d.A(i) = rng.sign();
    for (Eigen::Index i = 0; i < n; ++i) {
        switch (cfg.experiment_id) {
            case 1: {
                double logit = d.X(i, 0) + d.X(i, 1);
                double prob = 1.0 / (1.0 + std::exp(-logit));
                d.S(i, 0) = rng.bernoulli(prob) ? 1.0 : 0.0;
                break;
            }
            case 2:
                d.S(i, 0) = rng.bernoulli(0.5) ? 1.0 : 0.0;
                break;
            default: {
                double roll = rng.uniform();
                d.S(i, 0) = roll < 0.25 ? -1.0 : (roll < 0.75 ? 0.0 : 1.0);
                break;
            }
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        double x1 = d.X(i, 0), x2 = d.X(i, 1), x3 = d.X(i, 2), s = d.S(i, 0);
        double a = static_cast<double>(d.A(i));
        double ind = d.A(i) == 1 ? 1.0 : 0.0;
        double t;
        switch (cfg.experiment_id) {
            case 1:
            case 2:
                t = 10.0 + x1 + x2 + 0.25 * x3 + (x1 + x2 - 10.0 * s * ind) * a;
                break;
            case 3:
                t = 10.0 + (0.1 * x1 * x1 - x2 - 10.0 * s * ind) * a;
                break;
            default:
                t = 10.0 + x1 + x2 + 0.25 * x3 + (x1 + x2 + 10.0 * (s - 1.0) * (s - 1.0)) * a;
                break;
        }
        d.R(i) = t + rng.normal();
    }
    return shift_rewards(d);
}

ReplicateResult replicate(const ExperimentConfig& cfg, const MethodSpec& method, int parallelism) {
    if (cfg.reps < 1) throw ConfigError("reps must be >= 1");

    SweepOptions opts;
    opts.kernel = method.kernel;
    opts.sigma_median = method.sigma_median;
    opts.proxy_kind = method.proxy_kind;
    opts.kappa = method.kappa;
    opts.c_grid = method.c_grid;
    opts.centering = method.centering;
    opts.include_owl = true;
    opts.parallelism = parallelism;

    DataSource source = [cfg](int rep) {
        ExperimentConfig train_cfg = cfg;
        train_cfg.n = cfg.n;
        train_cfg.seed = cfg.seed + 2ull * static_cast<std::uint64_t>(rep);
        ExperimentConfig test_cfg = cfg;
        test_cfg.n = cfg.n_test;
        test_cfg.seed = cfg.seed + 2ull * static_cast<std::uint64_t>(rep) + 1ull;
        return std::make_pair(generate(train_cfg), generate(test_cfg));
    };
    SweepCurve curve = sweep_c(source, opts, cfg.reps);

    ReplicateResult res;
    res.rep_failures = curve.rep_failures;
    if (curve.owl) {
        ReplicateRow row;
        row.c = -1.0;
        row.value_mean = curve.owl->value_mean;
        row.value_sd = curve.owl->value_sd;
        row.ufm_mean = curve.owl->ufm_mean;
        row.ufm_sd = curve.owl->ufm_sd;
        row.proxy_mean = curve.owl->proxy_mean;
        row.n_reps = curve.owl->n_reps;
        res.rows.push_back(row);
    }
    for (const auto& pt : curve.points) {
        ReplicateRow row;
        row.c = pt.c;
        row.value_mean = pt.value_mean;
        row.value_sd = pt.value_sd;
        row.ufm_mean = pt.ufm_mean;
        row.ufm_sd = pt.ufm_sd;
        row.proxy_mean = pt.proxy_mean;
        row.n_reps = pt.n_reps;
        res.rows.push_back(row);
    }
    res.values = curve.values;
    res.ufms = curve.ufms;
    res.proxies = curve.proxies;
    res.train_proxies = curve.train_proxies;
    res.converged = curve.converged;
    return res;
}

}  // namespace fairitr
