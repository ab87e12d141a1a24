#include "fairitr/commands.hpp"

#include <filesystem>
#include <fstream>

#include "fairitr/dataset.hpp"
#include "fairitr/kernel.hpp"
#include "fairitr/policy.hpp"
#include "fairitr/simgen.hpp"
#include "fairitr/tuning.hpp"

namespace fairitr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json parse_override_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);
    }
}

void set_path(json& doc, const std::string& dotted, const json& value) {
    json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        std::size_t dot = dotted.find('.', start);
        std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ConfigError("bad --set path '" + dotted + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

const json& require(const json& doc, const std::string& key, const std::string& where) {
    if (!doc.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    return doc.at(key);
}

CsvSchema schema_from(const json& j) {
    CsvSchema s;
    s.treatment = require(j, "treatment", "schema").get<std::string>();
    s.reward = require(j, "reward", "schema").get<std::string>();
    for (const auto& name : require(j, "sensitive", "schema")) s.sensitive.push_back(name.get<std::string>());
    if (j.contains("covariates") && j["covariates"].is_array())
        for (const auto& name : j["covariates"]) s.covariates.push_back(name.get<std::string>());
    if (j.contains("positive_level")) s.positive_level = j["positive_level"].get<std::string>();
    return s;
}

ExperimentConfig experiment_from(const json& j, const json& root) {
    ExperimentConfig cfg;
    cfg.experiment_id = require(j, "id", "data.experiment").get<int>();
    cfg.n = j.value("n", 500);
    cfg.p = j.value("p", 3);
    cfg.n_test = j.value("n_test", 500);
    cfg.seed = j.contains("seed") ? j["seed"].get<std::uint64_t>()
                                  : root.value("seed", std::uint64_t(0));
    cfg.reps = root.value("reps", 1);
    return cfg;
}

// CSV path: constant or logistic propensity, then the nonnegativity shift
Dataset load_prepared_csv(const json& data, const json& root) {
    const json& csv = data.at("csv");
    Dataset d = load_csv(require(csv, "path", "data.csv").get<std::string>(),
                         schema_from(require(csv, "schema", "data.csv")));
    json prop = csv.value("propensity", json("constant"));
    if (prop.is_string() && prop.get<std::string>() == "constant") {
        d = set_constant_propensity(d);
    } else if (prop.is_object() && prop.contains("logistic")) {
        double penalty = prop["logistic"].value("penalty", 1e-4);
        d = apply_propensity(d, fit_penalized_logistic(d, penalty));
    } else {
        throw ConfigError("data.csv.propensity must be \"constant\" or {\"logistic\": {...}}");
    }
    (void)root;
    return shift_rewards(d);
}

Dataset load_dataset(const json& cfg, const json& root, bool* is_experiment = nullptr) {
    const json& data = require(cfg, "data", "config");
    bool has_csv = data.contains("csv"), has_exp = data.contains("experiment");
    if (has_csv == has_exp)
        throw ConfigError("config needs exactly one data source: data.csv or data.experiment");
    if (is_experiment) *is_experiment = has_exp;
    if (has_csv) return load_prepared_csv(data, root);
    return generate(experiment_from(data["experiment"], root));
}

struct MethodConfig {
    KernelSpec kernel;
    bool sigma_median = false;
    ProxyKind proxy = ProxyKind::Nonlinear;
    double kappa = 1.0;
    std::vector<double> c;
    Centering centering = Centering::Ols;
};

MethodConfig method_from(const json& cfg) {
    const json& m = require(cfg, "method", "config");
    MethodConfig mc;
    std::string kern = m.value("kernel", "linear");
    if (kern == "linear")
        mc.kernel.kind = KernelKind::Linear;
    else if (kern == "gaussian")
        mc.kernel.kind = KernelKind::Gaussian;
    else
        throw ConfigError("method.kernel must be \"linear\" or \"gaussian\", got \"" + kern + "\"");
    if (m.contains("sigma")) {
        if (m["sigma"].is_string()) {
            if (m["sigma"].get<std::string>() != "median")
                throw ConfigError("method.sigma must be a number or \"median\"");
            mc.sigma_median = true;
        } else {
            mc.kernel.sigma = m["sigma"].get<double>();
        }
    } else if (mc.kernel.kind == KernelKind::Gaussian) {
        mc.sigma_median = true;
    }
    std::string proxy = m.value("proxy", "nonlinear");
    if (proxy == "none")
        mc.proxy = ProxyKind::None;
    else if (proxy == "linear")
        mc.proxy = ProxyKind::Linear;
    else if (proxy == "nonlinear")
        mc.proxy = ProxyKind::Nonlinear;
    else
        throw ConfigError("method.proxy must be none|linear|nonlinear, got \"" + proxy + "\"");
    mc.kappa = m.value("kappa", 1.0);
    if (!(mc.kappa > 0.0)) throw ConfigError("method.kappa must be positive");
    if (m.contains("c")) {
        if (m["c"].is_array())
            for (const auto& v : m["c"]) mc.c.push_back(v.get<double>());
        else
            mc.c.push_back(m["c"].get<double>());
    }
    std::string centering = m.value("centering", "ols");
    if (centering == "ols")
        mc.centering = Centering::Ols;
    else if (centering == "none")
        mc.centering = Centering::None;
    else
        throw ConfigError("method.centering must be \"ols\" or \"none\"");
    return mc;
}

VectorXd broadcast_c(const std::vector<double>& c, Eigen::Index K, const std::string& where) {
    if (c.size() == 1) return VectorXd::Constant(K, c[0]);
    if (static_cast<Eigen::Index>(c.size()) == K) {
        VectorXd out(K);
        for (Eigen::Index k = 0; k < K; ++k) out(k) = c[static_cast<std::size_t>(k)];
        return out;
    }
    throw ConfigError(where + ": c must have length 1 or K=" + std::to_string(K));
}

KernelSpec resolve_kernel(const MethodConfig& mc, const Dataset& d) {
    KernelSpec kern = mc.kernel;
    if (kern.kind == KernelKind::Gaussian && mc.sigma_median)
        kern.sigma = median_heuristic_sigma(d.features());
    return kern;
}

std::string out_path(const std::string& out_dir, const std::string& name) {
    fs::create_directories(out_dir.empty() ? "." : out_dir);
    return (fs::path(out_dir.empty() ? "." : out_dir) / name).string();
}

json vec_json(const VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

json report_from(const PolicyModel& m, const Dataset& d) {
    return json{{"converged", m.diagnostics.converged},
                {"objective", m.diagnostics.objective},
                {"iterations", m.diagnostics.iterations},
                {"n_support", m.diagnostics.n_support},
                {"train_proxy", vec_json(m.diagnostics.train_proxy)},
                {"psd_min_eig", m.diagnostics.psd_min_eig},
                {"reward_shift", d.reward_shift},
                {"b0", m.b0},
                {"kappa", m.kappa},
                {"sigma", m.kernel.sigma},
                {"n_train", d.n()}};
}

json cmd_train(const json& cfg, const std::string& out_dir) {
    Dataset d = load_dataset(cfg, cfg);
    MethodConfig mc = method_from(cfg);
    KernelSpec kern = resolve_kernel(mc, d);
    PolicyModel model;
    if (mc.proxy == ProxyKind::None) {
        model = fit_owl(d, kern, mc.kappa, mc.centering);
    } else {
        if (mc.c.empty()) throw ConfigError("method.c is required for a constrained fit");
        model = fit_dpa_itr(d, kern, mc.proxy, mc.kappa, broadcast_c(mc.c, d.K(), "method"),
                            mc.centering);
    }
    std::string model_path = out_path(out_dir, cfg.value("output", json::object()).value("model", "model.json"));
    save_model(model, model_path);

    if (cfg.contains("output") && cfg["output"].contains("dump_qp")) {
        ProxyWeights w = mc.proxy == ProxyKind::Linear    ? linear_proxy_weights(d.S)
                         : mc.proxy == ProxyKind::Nonlinear ? nonlinear_proxy_weights(d.S)
                                                            : ProxyWeights{ProxyKind::None, MatrixXd(d.n(), 0), {}};
        HingeData hinge = prepare_hinge(d, mc.centering);
        Dataset d_eff = d;
        d_eff.A = hinge.labels;
        d_eff.R = hinge.rewards;
        VectorXd c_eff = mc.proxy == ProxyKind::None ? VectorXd(0) : broadcast_c(mc.c, d.K(), "method");
        dump_qp(assemble_dual(d_eff, w, gram(kern, d.features(), d.features()), mc.kappa, c_eff),
                out_path(out_dir, cfg["output"]["dump_qp"].get<std::string>()));
    }

    json report = report_from(model, d);
    report["model"] = model_path;
    std::string report_path = out_path(out_dir, cfg.value("output", json::object()).value("report", "report.json"));
    std::ofstream(report_path) << report.dump(2) << "\n";
    return report;
}

json eval_to_json(const EvalReport& er) {
    json rates = json::object();
    for (const auto& [key, rate] : er.accept_rates) rates[key] = rate;
    FourFifths ff = four_fifths_check(er);
    return json{{"value", er.value},
                {"value_shifted", er.value_shifted},
                {"ufm", er.ufm},
                {"proxy_test", vec_json(er.proxy_test)},
                {"accept_rates", rates},
                {"small_groups", er.small_groups},
                {"n_test", er.n_test},
                {"four_fifths", json{{"pass", ff.pass}, {"ratio", ff.ratio}}}};
}

json cmd_evaluate(const json& cfg, const std::string& out_dir) {
    PolicyModel model = load_model(require(cfg, "model", "config").get<std::string>());
    Dataset d = load_dataset(cfg, cfg);
    EvalReport er = evaluate(d, model, model.proxy_kind == ProxyKind::None
                                            ? ProxyKind::Nonlinear
                                            : model.proxy_kind);
    json doc = eval_to_json(er);
    std::ofstream(out_path(out_dir, cfg.value("output", json::object()).value("report", "eval.json")))
        << doc.dump(2) << "\n";
    return doc;
}

json cmd_predict(const json& cfg, const std::string& out_dir) {
    PolicyModel model = load_model(require(cfg, "model", "config").get<std::string>());
    Dataset d = load_dataset(cfg, cfg);
    VectorXd f = decision_values(model, d.X, d.S);
    VectorXi dec(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) dec(i) = f(i) > 0.0 ? 1 : -1;
    std::string path = out_path(out_dir, cfg.value("output", json::object()).value("csv", "predictions.csv"));
    std::ofstream out(path);
    out << "decision_value,assignment\n";
    Eigen::Index n_plus = 0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        out << format_digits17(f(i)) << "," << dec(i) << "\n";
        if (dec(i) == 1) ++n_plus;
    }
    return json{{"csv", path}, {"n", f.size()}, {"n_treat", n_plus}};
}

json cmd_simulate(const json& cfg, const std::string& out_dir) {
    const json& data = require(cfg, "data", "config");
    if (!data.contains("experiment")) throw ConfigError("simulate needs data.experiment");
    Dataset d = generate(experiment_from(data["experiment"], cfg));
    std::string path = out_path(out_dir, cfg.value("output", json::object()).value("csv", "dataset.csv"));
    save_csv(d, path, true);
    return json{{"csv", path}, {"rows", d.n()}, {"reward_shift", d.reward_shift}};
}

SweepOptions sweep_options(const json& cfg, const MethodConfig& mc) {
    SweepOptions opts;
    opts.kernel = mc.kernel;
    opts.sigma_median = mc.sigma_median;
    opts.proxy_kind = mc.proxy == ProxyKind::None ? ProxyKind::Nonlinear : mc.proxy;
    opts.kappa = mc.kappa;
    opts.centering = mc.centering;
    opts.parallelism = cfg.value("parallelism", 1);
    const json& tun = cfg.value("tuning", json::object());
    if (tun.contains("c_grid"))
        for (const auto& v : tun["c_grid"]) opts.c_grid.push_back(v.get<double>());
    else if (!mc.c.empty())
        opts.c_grid = mc.c;
    if (opts.c_grid.empty()) throw ConfigError("sweep needs tuning.c_grid or method.c");
    return opts;
}

json curve_rows(const SweepCurve& curve) {
    json rows = json::array();
    for (const auto& pt : curve.points)
        rows.push_back(json{{"c", pt.c},
                            {"value_mean", pt.value_mean},
                            {"value_sd", pt.value_sd},
                            {"ufm_mean", pt.ufm_mean},
                            {"ufm_sd", pt.ufm_sd},
                            {"proxy_mean", vec_json(pt.proxy_mean)},
                            {"n_reps", pt.n_reps}});
    return rows;
}

json cmd_sweep(const json& cfg, const std::string& out_dir) {
    MethodConfig mc = method_from(cfg);
    SweepOptions opts = sweep_options(cfg, mc);
    int reps = cfg.value("reps", 1);
    const json& data = require(cfg, "data", "config");

    SweepCurve curve;
    if (data.contains("experiment")) {
        ExperimentConfig ecfg = experiment_from(data["experiment"], cfg);
        DataSource source = [ecfg](int rep) {
            ExperimentConfig tr = ecfg, te = ecfg;
            tr.seed = ecfg.seed + 2ull * static_cast<std::uint64_t>(rep);
            te.seed = ecfg.seed + 2ull * static_cast<std::uint64_t>(rep) + 1ull;
            te.n = ecfg.n_test;
            return std::make_pair(generate(tr), generate(te));
        };
        curve = sweep_c(source, opts, reps);
    } else {
        Dataset train = load_prepared_csv(data, cfg);
        Dataset test = train;
        if (data.contains("test_csv")) {
            json test_data = data;
            test_data["csv"] = data["test_csv"];
            test = load_prepared_csv(test_data, cfg);
        }
        curve = sweep_c(train, test, opts, reps, cfg.value("seed", std::uint64_t(0)));
    }

    std::string path = out_path(out_dir, cfg.value("output", json::object()).value("csv", "sweep.csv"));
    save_sweep_csv(curve, path);
    json doc{{"csv", path}, {"rep_failures", curve.rep_failures}, {"points", curve_rows(curve)}};
    if (curve.owl)
        doc["owl"] = json{{"value_mean", curve.owl->value_mean}, {"ufm_mean", curve.owl->ufm_mean}};
    int degree = cfg.value("tuning", json::object()).value("degree", 3);
    if (static_cast<int>(curve.points.size()) >= degree + 1) {
        CostEffective ce = most_cost_effective_c(curve, degree);
        doc["most_cost_effective_c"] = ce.c0;
        doc["crossing_found"] = !ce.not_found;
    }
    return doc;
}

json cmd_tune(const json& cfg, const std::string& out_dir) {
    (void)out_dir;
    Dataset d = load_dataset(cfg, cfg);
    MethodConfig mc = method_from(cfg);
    const json& tun = require(cfg, "tuning", "config");
    std::vector<double> kappas, sigmas;
    for (const auto& v : require(tun, "kappa_grid", "tuning")) kappas.push_back(v.get<double>());
    if (tun.contains("sigma_grid"))
        for (const auto& v : tun["sigma_grid"]) sigmas.push_back(v.get<double>());
    if (sigmas.empty()) {
        if (mc.kernel.kind == KernelKind::Gaussian)
            sigmas.push_back(median_heuristic_sigma(d.features()));
        else
            sigmas.push_back(1.0);
    }
    std::vector<std::pair<double, double>> grid;
    for (double k : kappas)
        for (double s : sigmas) grid.emplace_back(k, s);
    VectorXd c = mc.proxy == ProxyKind::None ? VectorXd(0)
                                             : broadcast_c(mc.c.empty() ? std::vector<double>{0.1} : mc.c,
                                                           d.K(), "method");
    CvChoice best = cross_validate(d, mc.kernel, mc.proxy, c, grid, mc.centering,
                                   cfg.value("seed", std::uint64_t(0x7F0D5u)));
    return json{{"kappa", best.kappa}, {"sigma", best.sigma}, {"value", best.value}};
}

}  // namespace

json load_config(const std::string& path, const std::vector<std::string>& overrides,
                 long long seed_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    for (const auto& kv : overrides) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_path(cfg, kv.substr(0, eq), parse_override_value(kv.substr(eq + 1)));
    }
    if (seed_override >= 0) cfg["seed"] = static_cast<std::uint64_t>(seed_override);
    return cfg;
}

json run_command(const std::string& name, const json& cfg, const std::string& out_dir) {
    try {
        if (name == "train") return cmd_train(cfg, out_dir);
        if (name == "predict") return cmd_predict(cfg, out_dir);
        if (name == "evaluate") return cmd_evaluate(cfg, out_dir);
        if (name == "simulate") return cmd_simulate(cfg, out_dir);
        if (name == "sweep") return cmd_sweep(cfg, out_dir);
        if (name == "tune") return cmd_tune(cfg, out_dir);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    throw ConfigError("unknown command '" + name + "'");
}

}  // namespace fairitr
