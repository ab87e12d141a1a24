#include "fairitr/tuning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "fairitr/kernel.hpp"

namespace fairitr {

namespace {

struct RepOutcome {
    bool failed = false;
    std::string error;
    double owl_value = 0.0, owl_ufm = 0.0;
    VectorXd owl_proxy;
    std::vector<double> values, ufms;
    std::vector<VectorXd> proxies, train_proxies;
    std::vector<bool> converged;
};

// fixed-size pool; results land in a rep-indexed vector so reduction
// order never depends on scheduling
void run_pool(int reps, int parallelism, const std::function<void(int)>& task) {
    int workers = std::max(1, parallelism);
    if (workers == 1) {
        for (int r = 0; r < reps; ++r) task(r);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error = nullptr;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                int r = next.fetch_add(1);
                if (r >= reps) return;
                try {
                    task(r);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v), s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

VectorXd mean_vectors(const std::vector<VectorXd>& vs) {
    if (vs.empty()) return VectorXd(0);
    VectorXd m = VectorXd::Zero(vs.front().size());
    for (const auto& v : vs) m += v;
    return m / static_cast<double>(vs.size());
}

}  // namespace

SweepCurve sweep_c(const DataSource& source, const SweepOptions& opts, int reps) {
    if (reps < 1) throw ConfigError("reps must be >= 1");
    if (!std::is_sorted(opts.c_grid.begin(), opts.c_grid.end()))
        throw ConfigError("c grid must be ascending");

    std::vector<RepOutcome> outcomes(reps);
    run_pool(reps, opts.parallelism, [&](int rep) {
        RepOutcome& out = outcomes[rep];
        try {
            auto [train, test] = source(rep);
            KernelSpec kern = opts.kernel;
            if (kern.kind == KernelKind::Gaussian && opts.sigma_median)
                kern.sigma = median_heuristic_sigma(train.features());
            if (opts.include_owl) {
                PolicyModel m = fit_owl(train, kern, opts.kappa, opts.centering);
                EvalReport rep_owl = evaluate(test, m, opts.proxy_kind);
                out.owl_value = rep_owl.value;
                out.owl_ufm = rep_owl.ufm;
                out.owl_proxy = rep_owl.proxy_test;
            }
            for (double c : opts.c_grid) {
                VectorXd cvec = VectorXd::Constant(train.K(), c);
                PolicyModel m = fit_dpa_itr(train, kern, opts.proxy_kind, opts.kappa, cvec,
                                            opts.centering);
                EvalReport er = evaluate(test, m, opts.proxy_kind);
                out.values.push_back(er.value);
                out.ufms.push_back(er.ufm);
                out.proxies.push_back(er.proxy_test);
                out.train_proxies.push_back(m.diagnostics.train_proxy);
                out.converged.push_back(m.diagnostics.converged);
            }
        } catch (const NumericError& e) {
            out.failed = true;
            out.error = e.what();
        }
    });

    SweepCurve curve;
    std::vector<double> owl_vals, owl_ufms;
    std::vector<VectorXd> owl_proxies;
    for (const auto& out : outcomes) {
        if (out.failed) {
            ++curve.rep_failures;
            continue;
        }
        curve.values.push_back(out.values);
        curve.ufms.push_back(out.ufms);
        curve.proxies.push_back(out.proxies);
        curve.train_proxies.push_back(out.train_proxies);
        curve.converged.push_back(out.converged);
        if (opts.include_owl) {
            owl_vals.push_back(out.owl_value);
            owl_ufms.push_back(out.owl_ufm);
            owl_proxies.push_back(out.owl_proxy);
        }
    }
    if (curve.values.empty()) throw NumericError("every sweep replicate failed");

    int kept = static_cast<int>(curve.values.size());
    for (std::size_t ci = 0; ci < opts.c_grid.size(); ++ci) {
        SweepPoint pt;
        pt.c = opts.c_grid[ci];
        std::vector<double> vs, us;
        std::vector<VectorXd> ps;
        for (int r = 0; r < kept; ++r) {
            vs.push_back(curve.values[r][ci]);
            us.push_back(curve.ufms[r][ci]);
            ps.push_back(curve.proxies[r][ci]);
        }
        pt.value_mean = mean_of(vs);
        pt.value_sd = sd_of(vs);
        pt.ufm_mean = mean_of(us);
        pt.ufm_sd = sd_of(us);
        pt.proxy_mean = mean_vectors(ps);
        pt.n_reps = kept;
        curve.points.push_back(pt);
    }
    if (opts.include_owl) {
        SweepPoint pt;
        pt.c = -1.0;
        pt.value_mean = mean_of(owl_vals);
        pt.value_sd = sd_of(owl_vals);
        pt.ufm_mean = mean_of(owl_ufms);
        pt.ufm_sd = sd_of(owl_ufms);
        pt.proxy_mean = mean_vectors(owl_proxies);
        pt.n_reps = kept;
        curve.owl = pt;
        curve.owl_values = owl_vals;
        curve.owl_ufms = owl_ufms;
        curve.owl_proxies = owl_proxies;
    }
    return curve;
}

namespace {

Dataset take_rows(const Dataset& d, const std::vector<Eigen::Index>& idx) {
    Dataset out;
    Eigen::Index n = static_cast<Eigen::Index>(idx.size());
    out.X.resize(n, d.p());
    out.S.resize(n, d.K());
    out.A.resize(n);
    out.R.resize(n);
    out.pi.resize(n);
    out.reward_shift = d.reward_shift;
    for (Eigen::Index i = 0; i < n; ++i) {
        out.X.row(i) = d.X.row(idx[i]);
        out.S.row(i) = d.S.row(idx[i]);
        out.A(i) = d.A(idx[i]);
        out.R(i) = d.R(idx[i]);
        out.pi(i) = d.pi(idx[i]);
    }
    return out;
}

}  // namespace

SweepCurve sweep_c(const Dataset& d_train, const Dataset& d_test, const SweepOptions& opts,
                   int reps, std::uint64_t seed) {
    DataSource source = [&d_train, &d_test, seed](int rep) {
        Rng rng(seed + static_cast<std::uint64_t>(rep));
        std::vector<Eigen::Index> idx(d_train.n());
        for (auto& i : idx) i = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(d_train.n())));
        return std::make_pair(take_rows(d_train, idx), d_test);
    };
    return sweep_c(source, opts, reps);
}

void save_sweep_csv(const SweepCurve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    Eigen::Index K = curve.points.empty()
                         ? (curve.owl ? curve.owl->proxy_mean.size() : 0)
                         : curve.points.front().proxy_mean.size();
    out << "c,value_mean,value_sd,ufm_mean,ufm_sd";
    for (Eigen::Index k = 1; k <= K; ++k) out << ",proxy_mean_" << k;
    out << ",n_reps\n";
    auto row = [&](const SweepPoint& pt) {
        out << format_digits17(pt.c) << "," << format_digits17(pt.value_mean) << ","
            << format_digits17(pt.value_sd) << "," << format_digits17(pt.ufm_mean) << ","
            << format_digits17(pt.ufm_sd);
        for (Eigen::Index k = 0; k < pt.proxy_mean.size(); ++k)
            out << "," << format_digits17(pt.proxy_mean(k));
        out << "," << pt.n_reps << "\n";
    };
    for (const auto& pt : curve.points) row(pt);
}

CvChoice cross_validate(const Dataset& d, const KernelSpec& kernel_kind, ProxyKind proxy_kind,
                        const VectorXd& c, const std::vector<std::pair<double, double>>& grid,
                        Centering centering, std::uint64_t seed) {
    if (grid.empty()) throw ConfigError("cross-validation grid is empty");
    validate(d, true);
    Rng rng(seed);
    std::vector<Eigen::Index> perm(d.n());
    for (Eigen::Index i = 0; i < d.n(); ++i) perm[i] = i;
    for (Eigen::Index i = d.n() - 1; i > 0; --i)
        std::swap(perm[i], perm[static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(i + 1)))]);
    std::vector<Eigen::Index> half1(perm.begin(), perm.begin() + d.n() / 2);
    std::vector<Eigen::Index> half2(perm.begin() + d.n() / 2, perm.end());
    Dataset d1 = take_rows(d, half1), d2 = take_rows(d, half2);

    CvChoice best;
    bool have_best = false, any_converged = false;
    std::string diag;
    for (const auto& [kappa, sigma] : grid) {
        KernelSpec kern = kernel_kind;
        kern.sigma = sigma;
        double total = 0.0;
        bool ok = true;
        for (const auto& [tr, te] : {std::pair<const Dataset&, const Dataset&>(d1, d2),
                                     std::pair<const Dataset&, const Dataset&>(d2, d1)}) {
            PolicyModel m = (proxy_kind == ProxyKind::None)
                                ? fit_owl(tr, kern, kappa, centering)
                                : fit_dpa_itr(tr, kern, proxy_kind, kappa, c, centering);
            if (!m.diagnostics.converged) ok = false;
            total += estimate_value(te, m);
        }
        double value = total / 2.0;
        if (!ok) {
            diag += "  (kappa=" + format_digits17(kappa) + ", sigma=" + format_digits17(sigma) +
                    "): non-converged\n";
            continue;
        }
        any_converged = true;
        bool better = !have_best || value > best.value ||
                      (value == best.value &&
                       (kappa < best.kappa || (kappa == best.kappa && sigma < best.sigma)));
        if (better) {
            best = {kappa, sigma, value};
            have_best = true;
        }
    }
    if (!any_converged)
        throw NumericError("no cross-validation fit converged:\n" + diag);
    return best;
}

CostEffective most_cost_effective_c(const SweepCurve& curve, int degree) {
    std::size_t npts = curve.points.size();
    if (degree < 1) throw ConfigError("polynomial degree must be >= 1");
    if (npts < static_cast<std::size_t>(degree + 1))
        throw ConfigError("need at least degree+1 sweep points");

    VectorXd c(npts), v(npts), u(npts);
    for (std::size_t i = 0; i < npts; ++i) {
        c(i) = curve.points[i].c;
        v(i) = curve.points[i].value_mean;
        u(i) = curve.points[i].ufm_mean;
    }
    double c_lo = c.minCoeff(), c_hi = c.maxCoeff();
    if (c_hi <= c_lo) throw ConfigError("sweep grid is degenerate");
    auto normalize = [](VectorXd x) {
        double lo = x.minCoeff(), hi = x.maxCoeff();
        if (hi > lo) return VectorXd(((x.array() - lo) / (hi - lo)).matrix());
        return VectorXd(VectorXd::Zero(x.size()));
    };
    VectorXd vn = normalize(v), un = normalize(u);
    VectorXd t = (c.array() - c_lo) / (c_hi - c_lo);

    MatrixXd vand(npts, degree + 1);
    for (std::size_t i = 0; i < npts; ++i) {
        double acc = 1.0;
        for (int j = 0; j <= degree; ++j) {
            vand(i, j) = acc;
            acc *= t(i);
        }
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(vand);
    if (qr.rank() < degree + 1) throw NumericError("polynomial fit is singular");
    VectorXd pv = qr.solve(vn), pu = qr.solve(un);

    auto deriv = [degree](const VectorXd& poly, double x) {
        double acc = 0.0, xp = 1.0;
        for (int j = 1; j <= degree; ++j) {
            acc += static_cast<double>(j) * poly(j) * xp;
            xp *= x;
        }
        return acc;
    };
    // "> 0" needs a noise floor: the least-squares fit perturbs an exact
    // tangency (U' - V' touching zero) by ~1e-15, which a strict sign test
    // would misread as the crossing; genuine crossings clear this floor
    // within a vanishing fraction of one grid step
    constexpr int kDense = 10000;
    double gmax = 0.0;
    for (int i = 0; i < kDense; ++i) {
        double x = static_cast<double>(i) / (kDense - 1);
        gmax = std::max(gmax, std::abs(deriv(pu, x) - deriv(pv, x)));
    }
    double tol = 1e-9 * (1.0 + gmax);
    for (int i = 0; i < kDense; ++i) {
        double x = static_cast<double>(i) / (kDense - 1);
        if (deriv(pu, x) - deriv(pv, x) > tol)
            return {c_lo + x * (c_hi - c_lo), false};
    }
    return {c_hi, true};
}

double select_c_four_fifths(const std::function<FourFifths(double)>& check,
                            const std::vector<double>& c_grid) {
    if (c_grid.empty()) throw ConfigError("c grid is empty");
    std::vector<double> sorted = c_grid;
    std::sort(sorted.begin(), sorted.end());
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it)
        if (check(*it).pass) return *it;
    throw ConfigError("no c in the grid passes the four-fifths rule; try smaller values");
}

}  // namespace fairitr
