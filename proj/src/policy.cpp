#include "fairitr/policy.hpp"

#include <fstream>

#include "json.hpp"

namespace fairitr {

using nlohmann::json;

HingeData prepare_hinge(const Dataset& d, Centering centering) {
    HingeData h;
    if (centering == Centering::None) {
        h.labels = d.A;
        h.rewards = d.R;
        return h;
    }
    // residual of R on [X, S, 1]; its sign carries the benefit direction,
    // its magnitude the case weight
    Eigen::Index n = d.n();
    MatrixXd F(n, d.p() + d.K() + 1);
    F.leftCols(d.p()) = d.X;
    F.middleCols(d.p(), d.K()) = d.S;
    F.col(F.cols() - 1).setOnes();
    VectorXd resid = d.R - F * F.colPivHouseholderQr().solve(d.R);
    // residuals at rounding scale are zeros: keep the observed label,
    // carry no weight
    double zero_tol = 1e-12 * (1.0 + d.R.cwiseAbs().maxCoeff());
    h.labels.resize(n);
    h.rewards.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(resid(i)) <= zero_tol) {
            h.labels(i) = d.A(i);
            h.rewards(i) = 0.0;
        } else {
            h.labels(i) = resid(i) < 0.0 ? -d.A(i) : d.A(i);
            h.rewards(i) = std::abs(resid(i));
        }
    }
    return h;
}

namespace {

ProxyWeights make_weights(ProxyKind kind, const MatrixXd& S) {
    switch (kind) {
        case ProxyKind::Linear:
            return linear_proxy_weights(S);
        case ProxyKind::Nonlinear:
            return nonlinear_proxy_weights(S);
        case ProxyKind::None:
        default: {
            ProxyWeights w;
            w.kind = ProxyKind::None;
            w.W.resize(S.rows(), 0);
            return w;
        }
    }
}

PolicyModel fit_impl(const Dataset& d, const KernelSpec& kernel, ProxyKind proxy_kind,
                     double kappa, const VectorXd& c, Centering centering) {
    validate(d, true);
    if (proxy_kind != ProxyKind::None && c.size() != d.K())
        throw ConfigError("c length must equal the number of sensitive attributes");

    MatrixXd Z = d.features();
    MatrixXd G = gram(kernel, Z, Z);
    ProxyWeights W = make_weights(proxy_kind, d.S);
    HingeData hinge = prepare_hinge(d, centering);

    Dataset d_eff = d;
    d_eff.A = hinge.labels;
    d_eff.R = hinge.rewards;
    VectorXd c_eff = (proxy_kind == ProxyKind::None) ? VectorXd(0) : c;

    QPProblem prob = assemble_dual(d_eff, W, G, kappa, c_eff);
    double min_eig = check_psd(prob.D);
    if (min_eig < -1e-8 * prob.D.norm()) {
        // one-shot diagonal jitter repairs Gram rounding
        G.diagonal().array() += 1e-10 * G.trace() / static_cast<double>(G.rows());
        prob = assemble_dual(d_eff, W, G, kappa, c_eff);
        min_eig = check_psd(prob.D);
    }

    // fixed tolerance: the alpha block of e is identically 1, so the default
    // scale 1e-8*(1+max|e|) would loosen with c and ruin fits at huge budgets
    DualSolution sol = solve_qp(prob, 2e-8);
    MatrixXd M = dual_coefficient_map(hinge.labels, W);
    VectorXd u = M * sol.z;
    VectorXd hinge_weight = hinge.rewards.cwiseQuotient(d.pi);
    double b0 = recover_intercept(sol, hinge.labels, hinge_weight, G, M, kappa);

    PolicyModel m;
    m.train_Z = Z;
    m.u = u;
    m.b0 = b0;
    m.kernel = kernel;
    m.proxy_kind = proxy_kind;
    m.c = c_eff;
    m.kappa = kappa;
    m.centering = centering;
    m.diagnostics.objective = sol.objective;
    m.diagnostics.converged = sol.converged;
    m.diagnostics.iterations = sol.iterations;
    m.diagnostics.psd_min_eig = min_eig;
    double max_ub = kappa * hinge_weight.maxCoeff();
    for (Eigen::Index i = 0; i < sol.alpha.size(); ++i)
        if (std::abs(sol.alpha(i)) > 1e-9 * max_ub) ++m.diagnostics.n_support;
    if (proxy_kind != ProxyKind::None) {
        VectorXd f_train = G * u;
        f_train.array() += b0;
        m.diagnostics.train_proxy = estimate_proxy(W, f_train);
    }
    return m;
}

}  // namespace

PolicyModel fit_dpa_itr(const Dataset& d, const KernelSpec& kernel, ProxyKind proxy_kind,
                        double kappa, const VectorXd& c, Centering centering) {
    return fit_impl(d, kernel, proxy_kind, kappa, c, centering);
}

PolicyModel fit_owl(const Dataset& d, const KernelSpec& kernel, double kappa, Centering centering) {
    return fit_impl(d, kernel, ProxyKind::None, kappa, VectorXd(0), centering);
}

VectorXd decision_values(const PolicyModel& m, const MatrixXd& Xnew, const MatrixXd& Snew) {
    if (Xnew.rows() != Snew.rows()) throw ConfigError("X and S row counts differ");
    MatrixXd Z(Xnew.rows(), Xnew.cols() + Snew.cols());
    Z.leftCols(Xnew.cols()) = Xnew;
    Z.rightCols(Snew.cols()) = Snew;
    if (Z.cols() != m.train_Z.cols()) throw ConfigError("feature dimension differs from training");
    VectorXd f = gram(m.kernel, Z, m.train_Z) * m.u;
    f.array() += m.b0;
    return f;
}

VectorXi assign(const PolicyModel& m, const MatrixXd& Xnew, const MatrixXd& Snew) {
    VectorXd f = decision_values(m, Xnew, Snew);
    VectorXi out(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) out(i) = f(i) > 0.0 ? 1 : -1;
    return out;
}

double estimate_value(const Dataset& d_test, const PolicyModel& m) {
    validate(d_test, true);
    VectorXi dec = assign(m, d_test.X, d_test.S);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d_test.n(); ++i)
        if (dec(i) == d_test.A(i)) acc += (d_test.R(i) - d_test.reward_shift) / d_test.pi(i);
    return acc / static_cast<double>(d_test.n());
}

namespace {

std::string group_key(const MatrixXd& S, Eigen::Index row) {
    std::string key;
    for (Eigen::Index k = 0; k < S.cols(); ++k) {
        if (k) key += ",";
        key += format_digits17(S(row, k));
    }
    return key;
}

}  // namespace

EvalReport evaluate(const Dataset& d_test, const PolicyModel& m, ProxyKind proxy_kind) {
    validate(d_test, true);
    EvalReport rep;
    rep.n_test = d_test.n();
    VectorXd f = decision_values(m, d_test.X, d_test.S);
    VectorXi dec(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) dec(i) = f(i) > 0.0 ? 1 : -1;

    double acc_raw = 0.0, acc_shifted = 0.0;
    for (Eigen::Index i = 0; i < d_test.n(); ++i) {
        if (dec(i) == d_test.A(i)) {
            acc_raw += (d_test.R(i) - d_test.reward_shift) / d_test.pi(i);
            acc_shifted += d_test.R(i) / d_test.pi(i);
        }
    }
    rep.value = acc_raw / static_cast<double>(d_test.n());
    rep.value_shifted = acc_shifted / static_cast<double>(d_test.n());

    std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> groups;  // key -> (count, accepted)
    for (Eigen::Index i = 0; i < d_test.n(); ++i) {
        auto& g = groups[group_key(d_test.S, i)];
        g.first += 1;
        if (dec(i) == 1) g.second += 1;
    }
    if (groups.size() > 50)
        throw ConfigError("sensitive attributes have " + std::to_string(groups.size()) +
                          " distinct rows; the unfairness measure needs discrete groups");
    double lo = 1.0, hi = 0.0;
    for (const auto& [key, g] : groups) {
        double rate = static_cast<double>(g.second) / static_cast<double>(g.first);
        rep.accept_rates[key] = rate;
        if (g.first < 5) rep.small_groups.push_back(key);
        lo = std::min(lo, rate);
        hi = std::max(hi, rate);
    }
    rep.ufm = hi - lo;

    if (proxy_kind != ProxyKind::None) {
        ProxyWeights w_test = make_weights(proxy_kind, d_test.S);
        rep.proxy_test = estimate_proxy(w_test, f);
    }
    return rep;
}

FourFifths four_fifths_check(const EvalReport& report) {
    FourFifths out;
    double lo = 1.0, hi = 0.0;
    for (const auto& [key, rate] : report.accept_rates) {
        lo = std::min(lo, rate);
        hi = std::max(hi, rate);
    }
    out.ratio = (hi == 0.0) ? 1.0 : lo / hi;
    out.pass = out.ratio >= 0.8;
    return out;
}

namespace {

json vector_to_json(const VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

VectorXd vector_from_json(const json& arr) {
    VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    return v;
}

std::string proxy_kind_name(ProxyKind k) {
    switch (k) {
        case ProxyKind::Linear: return "linear";
        case ProxyKind::Nonlinear: return "nonlinear";
        default: return "none";
    }
}

ProxyKind proxy_kind_from(const std::string& s) {
    if (s == "linear") return ProxyKind::Linear;
    if (s == "nonlinear") return ProxyKind::Nonlinear;
    if (s == "none") return ProxyKind::None;
    throw ConfigError("unknown proxy kind '" + s + "'");
}

}  // namespace

void save_model(const PolicyModel& m, const std::string& path) {
    json doc;
    doc["format"] = 1;
    doc["kernel"] = m.kernel.kind == KernelKind::Linear ? "linear" : "gaussian";
    doc["sigma"] = m.kernel.sigma;
    doc["proxy_kind"] = proxy_kind_name(m.proxy_kind);
    doc["c"] = vector_to_json(m.c);
    doc["kappa"] = m.kappa;
    doc["b0"] = m.b0;
    doc["u"] = vector_to_json(m.u);
    doc["centering"] = m.centering == Centering::Ols ? "ols" : "none";
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.train_Z.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.train_Z.cols(); ++j) row.push_back(m.train_Z(i, j));
        rows.push_back(row);
    }
    doc["train_Z"] = rows;
    doc["diagnostics"] = {{"objective", m.diagnostics.objective},
                          {"n_support", m.diagnostics.n_support},
                          {"train_proxy", vector_to_json(m.diagnostics.train_proxy)},
                          {"converged", m.diagnostics.converged},
                          {"iterations", m.diagnostics.iterations},
                          {"psd_min_eig", m.diagnostics.psd_min_eig}};
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << doc.dump(2) << "\n";
}

PolicyModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid model JSON: " + e.what());
    }
    if (!doc.contains("format") || doc["format"].get<int>() != 1)
        throw ConfigError(path + ": unsupported model format");
    PolicyModel m;
    m.kernel.kind = doc["kernel"].get<std::string>() == "linear" ? KernelKind::Linear : KernelKind::Gaussian;
    m.kernel.sigma = doc["sigma"].get<double>();
    m.proxy_kind = proxy_kind_from(doc["proxy_kind"].get<std::string>());
    m.c = vector_from_json(doc["c"]);
    m.kappa = doc["kappa"].get<double>();
    m.b0 = doc["b0"].get<double>();
    m.u = vector_from_json(doc["u"]);
    m.centering = doc.value("centering", "ols") == std::string("none") ? Centering::None : Centering::Ols;
    const auto& rows = doc["train_Z"];
    Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    Eigen::Index dcols = n ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    m.train_Z.resize(n, dcols);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < dcols; ++j) m.train_Z(i, j) = rows[i][j].get<double>();
    const auto& diag = doc["diagnostics"];
    m.diagnostics.objective = diag["objective"].get<double>();
    m.diagnostics.n_support = diag["n_support"].get<int>();
    m.diagnostics.train_proxy = vector_from_json(diag["train_proxy"]);
    m.diagnostics.converged = diag["converged"].get<bool>();
    m.diagnostics.iterations = diag["iterations"].get<int>();
    m.diagnostics.psd_min_eig = diag["psd_min_eig"].get<double>();
    return m;
}

}  // namespace fairitr
