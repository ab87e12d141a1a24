#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "fairitr/kernel.hpp"
#include "fairitr/proxy.hpp"
#include "fairitr/qp.hpp"

using namespace fairitr;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Dataset tiny_dataset(const std::vector<int>& A, const std::vector<double>& R) {
    Dataset d;
    Eigen::Index n = static_cast<Eigen::Index>(A.size());
    d.X = MatrixXd::Zero(n, 1);
    d.S = MatrixXd::Zero(n, 1);
    d.A.resize(n);
    d.R.resize(n);
    d.pi = VectorXd::Constant(n, 0.5);
    for (Eigen::Index i = 0; i < n; ++i) {
        d.A(i) = A[static_cast<std::size_t>(i)];
        d.R(i) = R[static_cast<std::size_t>(i)];
        d.X(i, 0) = static_cast<double>(i) - 0.3 * static_cast<double>(i * i);
        d.S(i, 0) = (i % 2 == 0) ? 0.0 : 1.0;
    }
    return d;
}

Dataset random_dataset(Rng& rng, int n, int K) {
    Dataset d;
    d.X.resize(n, 2);
    d.S.resize(n, K);
    d.A.resize(n);
    d.R.resize(n);
    d.pi.resize(n);
    bool pos = false, neg = false;
    for (int i = 0; i < n; ++i) {
        d.X(i, 0) = rng.uniform(-5, 5);
        d.X(i, 1) = rng.normal();
        for (int k = 0; k < K; ++k) d.S(i, k) = std::floor(rng.uniform(0, 3));
        d.A(i) = rng.uniform() < 0.5 ? 1 : -1;
        d.R(i) = std::abs(rng.normal()) + 0.1;
        d.pi(i) = rng.uniform(0.2, 0.8);
    }
    if (!pos) d.A(0) = 1;
    if (!neg) d.A(n - 1) = -1;
    return d;
}

QPProblem assemble_random(Rng& rng, int n, int K, ProxyKind kind, KernelKind kern, double c_val) {
    Dataset d = random_dataset(rng, n, K);
    ProxyWeights w = kind == ProxyKind::Linear ? linear_proxy_weights(d.S)
                                               : nonlinear_proxy_weights(d.S);
    KernelSpec spec{kern, 2.0};
    MatrixXd G = gram(spec, d.features(), d.features());
    return assemble_dual(d, w, G, 0.5 + rng.uniform(), VectorXd::Constant(K, c_val));
}

}  // namespace

TEST_CASE("dual_coefficient_map example") {
    VectorXi A(2);
    A << 1, -1;
    ProxyWeights w;
    w.kind = ProxyKind::Linear;
    w.W.resize(2, 1);
    w.W << -0.5, 0.5;
    MatrixXd M = dual_coefficient_map(A, w);
    REQUIRE(M.rows() == 2);
    REQUIRE(M.cols() == 4);
    // gamma=1, eta=0, alpha=0
    VectorXd z(4);
    z << 0, 0, 1, 0;
    VectorXd u = M * z;
    CHECK(u(0) == doctest::Approx(-0.25));
    CHECK(u(1) == doctest::Approx(0.25));
    // gamma = eta cancels
    z << 0.3, 0.4, 2.0, 2.0;
    u = M * z;
    CHECK(u(0) == doctest::Approx(0.3));
    CHECK(u(1) == doctest::Approx(-0.4));
    // zero maps to zero
    CHECK((M * VectorXd::Zero(4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assembled D matches hand-computed 4x4 fixture") {
    Dataset d = tiny_dataset({1, -1}, {1.0, 1.0});
    ProxyWeights w;
    w.kind = ProxyKind::Linear;
    w.W.resize(2, 1);
    w.W << -0.5, 0.5;
    MatrixXd G = MatrixXd::Identity(2, 2);
    QPProblem p = assemble_dual(d, w, G, 1.0, VectorXd::Constant(1, 0.1));
    MatrixXd expected(4, 4);
    expected << 1, 0, -0.25, 0.25,
                0, 1, -0.25, 0.25,
                -0.25, -0.25, 0.125, -0.125,
                0.25, 0.25, -0.125, 0.125;
    CHECK((p.D - expected).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(p.e(0) == 1.0);
    CHECK(p.e(2) == -0.1);
    CHECK(p.e(3) == -0.1);
    CHECK(p.upper(0) == doctest::Approx(2.0));  // kappa R / pi = 1*1/0.5
    CHECK(p.upper(2) == kInf);
    CHECK(p.eq(0) == 1.0);
    CHECK(p.eq(1) == -1.0);
    CHECK(p.eq(2) == 0.0);
}

TEST_CASE("assembled D equals generic formula expansion on random data") {
    Rng rng(21);
    Dataset d = random_dataset(rng, 6, 2);
    ProxyWeights w = nonlinear_proxy_weights(d.S);
    KernelSpec spec{KernelKind::Gaussian, 1.5};
    MatrixXd G = gram(spec, d.features(), d.features());
    QPProblem p = assemble_dual(d, w, G, 0.7, VectorXd::Constant(2, 0.05));

    // direct expansion: D_ab = sum_ij M_ia G_ij M_jb
    Eigen::Index n = 6, m = n + 4;
    MatrixXd M = dual_coefficient_map(d.A, w);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) {
            double v = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) v += M(i, a) * G(i, j) * M(j, b);
            CHECK(p.D(a, b) == doctest::Approx(v).epsilon(1e-12));
        }
}

TEST_CASE("assemble_dual rejects bad kappa and negative c") {
    Dataset d = tiny_dataset({1, -1}, {1.0, 1.0});
    ProxyWeights w = linear_proxy_weights(d.S);
    MatrixXd G = MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(assemble_dual(d, w, G, 0.0, VectorXd::Constant(1, 0.1)), ConfigError);
    CHECK_THROWS_AS(assemble_dual(d, w, G, 1.0, VectorXd::Constant(1, -0.1)), ConfigError);
}

TEST_CASE("solve_qp separable example") {
    QPProblem p;
    p.D = MatrixXd::Identity(2, 2);
    p.e.resize(2);
    p.e << 1, 1;
    p.lower = VectorXd::Zero(2);
    p.upper = VectorXd::Constant(2, 10.0);
    p.eq = VectorXd::Zero(2);
    DualSolution sol = solve_qp(p);
    CHECK(sol.converged);
    CHECK(sol.z(0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.z(1) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("solve_qp linear corner example") {
    QPProblem p;
    p.D = MatrixXd::Zero(2, 2);
    p.e.resize(2);
    p.e << 1, -1;
    p.lower = VectorXd::Zero(2);
    p.upper = VectorXd::Ones(2);
    p.eq = VectorXd::Zero(2);
    DualSolution sol = solve_qp(p);
    CHECK(sol.converged);
    CHECK(sol.z(0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.z(1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
    CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("brute force matches closed form on strictly convex interior optimum") {
    QPProblem p;
    p.D.resize(2, 2);
    p.D << 2, 0.5, 0.5, 1;
    p.e.resize(2);
    p.e << 1, 0.5;
    p.lower = VectorXd::Constant(2, -10.0);
    p.upper = VectorXd::Constant(2, 10.0);
    p.eq = VectorXd::Zero(2);
    DualSolution sol = brute_force_qp(p);
    VectorXd closed = p.D.ldlt().solve(p.e);
    CHECK(sol.z(0) == doctest::Approx(closed(0)).epsilon(1e-5));
    CHECK(sol.z(1) == doctest::Approx(closed(1)).epsilon(1e-5));
}

TEST_CASE("brute force and solver agree on trivial instances") {
    QPProblem p;
    p.D = MatrixXd::Identity(2, 2);
    p.e.resize(2);
    p.e << 1, 1;
    p.lower = VectorXd::Zero(2);
    p.upper = VectorXd::Constant(2, 10.0);
    p.eq = VectorXd::Zero(2);
    CHECK(brute_force_qp(p).objective == doctest::Approx(solve_qp(p).objective).epsilon(1e-8));

    p.D = MatrixXd::Zero(2, 2);
    p.e << 1, -1;
    p.upper = VectorXd::Ones(2);
    CHECK(brute_force_qp(p).objective == doctest::Approx(solve_qp(p).objective).epsilon(1e-8));
}

TEST_CASE("rank-1 degenerate D keeps oracle and solver consistent") {
    VectorXd b(3);
    b << 1, -2, 0.5;
    QPProblem p;
    p.D = b * b.transpose();
    p.e.resize(3);
    p.e << 0.5, 1, -0.25;
    p.lower = VectorXd::Zero(3);
    p.upper = VectorXd::Constant(3, 2.0);
    p.eq = VectorXd::Zero(3);
    DualSolution a = solve_qp(p), o = brute_force_qp(p);
    CHECK(std::abs(a.objective - o.objective) <= 1e-6 * (1.0 + std::abs(o.objective)));
}

TEST_CASE("solver matches brute force on random assembled duals") {
    Rng rng(55);
    for (int rep = 0; rep < 12; ++rep) {
        int n = 3 + static_cast<int>(rng.index(6));   // m = n + 2K <= 12
        int K = 1 + static_cast<int>(rng.index(2));
        if (n + 2 * K > 12) n = 12 - 2 * K;
        ProxyKind kind = rep % 2 ? ProxyKind::Linear : ProxyKind::Nonlinear;
        KernelKind kern = rep % 3 ? KernelKind::Linear : KernelKind::Gaussian;
        QPProblem p = assemble_random(rng, n, K, kind, kern, 0.02 + rng.uniform() * 0.2);
        DualSolution fast = solve_qp(p);
        DualSolution oracle = brute_force_qp(p);
        CHECK(std::abs(fast.objective - oracle.objective) <=
              1e-6 * (1.0 + std::abs(oracle.objective)));
        // feasibility of the returned point
        double scale = 1.0 + fast.z.cwiseAbs().maxCoeff();
        CHECK(fast.bound_violation <= 1e-9 * scale);
        CHECK(fast.primal_eq <= 1e-8 * scale);
    }
}

TEST_CASE("projection onto box and hyperplane") {
    VectorXd lo = VectorXd::Zero(2), hi = VectorXd::Ones(2);
    VectorXd eq(2);

    eq << 1, 1;
    VectorXd v(2);
    v << 2, 2;
    VectorXd x = project_box_hyperplane(v, lo, hi, eq);
    CHECK(x(0) == doctest::Approx(0.0).scale(1.0));
    CHECK(x(1) == doctest::Approx(0.0).scale(1.0));

    eq << 1, -1;
    v << 1, 0;
    x = project_box_hyperplane(v, lo, hi, eq);
    CHECK(x(0) == doctest::Approx(0.5));
    CHECK(x(1) == doctest::Approx(0.5));

    // infinite bounds
    VectorXd lo2 = VectorXd::Zero(2);
    VectorXd hi2 = VectorXd::Constant(2, kInf);
    VectorXd eq2(2);
    eq2 << 1, -2;
    VectorXd v2(2);
    v2 << 3, 3;
    VectorXd x2 = project_box_hyperplane(v2, lo2, hi2, eq2);
    CHECK(eq2.dot(x2) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(x2(0) == doctest::Approx(3.6));
    CHECK(x2(1) == doctest::Approx(1.8));

    // infeasible: box forces positive sum
    VectorXd lo3 = VectorXd::Ones(2), hi3 = VectorXd::Constant(2, 2.0);
    VectorXd eq3(2);
    eq3 << 1, 1;
    CHECK_THROWS_AS(project_box_hyperplane(v, lo3, hi3, eq3), NumericError);
}

TEST_CASE("zero rewards pin alpha and give zero objective") {
    Dataset d = tiny_dataset({1, -1, 1, -1}, {0.0, 0.0, 0.0, 0.0});
    ProxyWeights w = linear_proxy_weights(d.S);
    MatrixXd G = gram(KernelSpec{KernelKind::Linear, 1.0}, d.features(), d.features());
    QPProblem p = assemble_dual(d, w, G, 1.0, VectorXd::Constant(1, 0.1));
    CHECK(p.upper.head(4).cwiseAbs().maxCoeff() == 0.0);
    DualSolution sol = solve_qp(p);
    CHECK(sol.converged);
    CHECK(sol.alpha.cwiseAbs().maxCoeff() == 0.0);
    CHECK(sol.objective == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(sol.gamma.cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(sol.eta.cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("OWL reduction at huge c") {
    Rng rng(66);
    Dataset d = random_dataset(rng, 8, 1);
    ProxyWeights w = nonlinear_proxy_weights(d.S);
    ProxyWeights none{ProxyKind::None, MatrixXd(d.n(), 0), {}};
    MatrixXd M_c = dual_coefficient_map(d.A, w);
    MatrixXd M_u = dual_coefficient_map(d.A, none);

    // full-rank Gram makes u unique, so the coefficients themselves match
    MatrixXd Gg = gram(KernelSpec{KernelKind::Gaussian, 2.0}, d.features(), d.features());
    // explicit tol: the default scales with max|e| and c=1e6 sits in e
    DualSolution sol = solve_qp(assemble_dual(d, w, Gg, 1.0, VectorXd::Constant(1, 1e6)), 2e-8);
    CHECK(sol.gamma.cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(sol.eta.cwiseAbs().maxCoeff() <= 1e-6);
    DualSolution ref = solve_qp(assemble_dual(d, none, Gg, 1.0, VectorXd(0)), 2e-8);
    VectorXd u_c = M_c * sol.z, u_u = M_u * ref.z;
    double scale = 1.0 + u_u.cwiseAbs().maxCoeff();
    CHECK((u_c - u_u).cwiseAbs().maxCoeff() <= 1e-6 * scale);

    // rank-deficient linear Gram leaves u non-unique; the fitted values G*u
    // are still unique and must agree
    MatrixXd Gl = gram(KernelSpec{KernelKind::Linear, 1.0}, d.features(), d.features());
    DualSolution sol_l = solve_qp(assemble_dual(d, w, Gl, 1.0, VectorXd::Constant(1, 1e6)), 2e-8);
    CHECK(sol_l.gamma.cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(sol_l.eta.cwiseAbs().maxCoeff() <= 1e-6);
    DualSolution ref_l = solve_qp(assemble_dual(d, none, Gl, 1.0, VectorXd(0)), 2e-8);
    VectorXd f_c = Gl * (M_c * sol_l.z), f_u = Gl * (M_u * ref_l.z);
    double fscale = 1.0 + f_u.cwiseAbs().maxCoeff();
    CHECK((f_c - f_u).cwiseAbs().maxCoeff() <= 1e-5 * fscale);
}

TEST_CASE("primal objective is nonincreasing in c") {
    Rng rng(88);
    std::vector<double> cs = {0.01, 0.05, 0.1, 1.0, 100.0};
    for (int rep = 0; rep < 20; ++rep) {
        int n = 4 + static_cast<int>(rng.index(5));
        Dataset d = random_dataset(rng, n, 1);
        ProxyWeights w = rep % 2 ? linear_proxy_weights(d.S) : nonlinear_proxy_weights(d.S);
        MatrixXd G = gram(KernelSpec{KernelKind::Linear, 1.0}, d.features(), d.features());
        double kappa = 1.0;
        MatrixXd M = dual_coefficient_map(d.A, w);
        double prev = kInf;
        for (double c : cs) {
            QPProblem p = assemble_dual(d, w, G, kappa, VectorXd::Constant(1, c));
            DualSolution sol = solve_qp(p, 2e-8);
            VectorXd u = M * sol.z;
            VectorXd hw = d.R.array() / d.pi.array();
            VectorXd f = G * u;
            // evaluate at the intercept minimizing the hinge, removing
            // recovery noise from the comparison
            auto hinge_at = [&](double b) {
                double h = 0.0;
                for (Eigen::Index i = 0; i < n; ++i)
                    h += hw(i) * std::max(0.0, 1.0 - static_cast<double>(d.A(i)) * (f(i) + b));
                return h;
            };
            double B = 1.0 + f.cwiseAbs().maxCoeff();
            double lo = -B, hi = B;
            const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
            double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
            double f1 = hinge_at(x1), f2 = hinge_at(x2);
            for (int it = 0; it < 200; ++it) {
                if (f1 <= f2) {
                    hi = x2; x2 = x1; f2 = f1;
                    x1 = hi - gr * (hi - lo); f1 = hinge_at(x1);
                } else {
                    lo = x1; x1 = x2; f1 = f2;
                    x2 = lo + gr * (hi - lo); f2 = hinge_at(x2);
                }
            }
            double primal = 0.5 * u.dot(f) + kappa * hinge_at(0.5 * (lo + hi));
            CHECK(primal <= prev + 1e-6 * (1.0 + std::abs(prev)));
            prev = primal;
        }
    }
}

TEST_CASE("check_psd examples") {
    CHECK(check_psd(MatrixXd::Identity(3, 3)) == doctest::Approx(1.0));
    MatrixXd d2 = MatrixXd::Zero(2, 2);
    d2(1, 1) = 2.0;
    CHECK(check_psd(d2) == doctest::Approx(0.0).scale(1.0));
    MatrixXd asym(2, 2);
    asym << 1, 0.5, -0.5, 1;
    CHECK_THROWS_AS(check_psd(asym), ConfigError);
}

TEST_CASE("assembled duals are PSD") {
    Rng rng(5150);
    for (int rep = 0; rep < 20; ++rep) {
        int n = 5 + static_cast<int>(rng.index(20));
        int K = 1 + static_cast<int>(rng.index(3));
        QPProblem p = assemble_random(rng, n, K, rep % 2 ? ProxyKind::Linear : ProxyKind::Nonlinear,
                                      rep % 3 ? KernelKind::Linear : KernelKind::Gaussian, 0.1);
        double min_eig = check_psd(p.D);
        CHECK(min_eig >= -1e-8 * p.D.norm());
    }
}

TEST_CASE("intercept from a single margin point") {
    DualSolution sol;
    sol.z.resize(2);
    sol.z << 5.0, 0.0;
    sol.alpha = sol.z;
    VectorXi A(2);
    A << 1, 1;
    VectorXd hw = VectorXd::Constant(2, 10.0);
    MatrixXd M = MatrixXd::Identity(2, 2);
    MatrixXd G = MatrixXd::Zero(2, 2);
    G(0, 0) = 0.06;  // q(0) = 0.3, alpha_0 = 5 strictly inside (0, 10)
    double b0 = recover_intercept(sol, A, hw, G, M, 1.0);
    CHECK(b0 == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("intercept averages two margin points") {
    DualSolution sol;
    sol.z.resize(2);
    sol.z << 5.0, 5.0;
    sol.alpha = sol.z;
    VectorXi A(2);
    A << 1, 1;
    VectorXd hw = VectorXd::Constant(2, 10.0);
    MatrixXd M = MatrixXd::Identity(2, 2);
    MatrixXd G = MatrixXd::Zero(2, 2);
    G(0, 0) = 0.06;  // q = (0.3, 0.1) -> b0 candidates 0.7 and 0.9
    G(1, 1) = 0.02;
    double b0 = recover_intercept(sol, A, hw, G, M, 1.0);
    CHECK(b0 == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("empty margin set falls back to the 1-D hinge minimizer") {
    DualSolution sol;
    sol.z = VectorXd::Zero(3);
    sol.alpha = sol.z;
    VectorXi A(3);
    A << 1, -1, 1;
    VectorXd hw(3);
    hw << 2.0, 1.0, 3.0;
    MatrixXd M = MatrixXd::Identity(3, 3);
    MatrixXd G = MatrixXd::Identity(3, 3);
    double kappa = 0.8;
    double b0 = recover_intercept(sol, A, hw, G, M, kappa);

    // grid-scan oracle over the same bracket
    VectorXd q = G * (M * sol.z);
    double B = 1.0 + q.cwiseAbs().maxCoeff();
    auto hinge = [&](double b) {
        double h = 0.0;
        for (int i = 0; i < 3; ++i)
            h += hw(i) * std::max(0.0, 1.0 - A(i) * (q(i) + b));
        return kappa * h;
    };
    double best_b = -B, best_v = kInf;
    for (int g = 0; g <= 200000; ++g) {
        double b = -B + 2.0 * B * g / 200000.0;
        double v = hinge(b);
        if (v < best_v) {
            best_v = v;
            best_b = b;
        }
    }
    CHECK(hinge(b0) <= best_v + 1e-9 * (1.0 + std::abs(best_v)));
    CHECK(std::abs(b0 - best_b) <= 2e-3 * (1.0 + std::abs(best_b)));
}

TEST_CASE("dump_qp writes a parseable matrix file") {
    QPProblem p;
    p.D = MatrixXd::Identity(2, 2) * 0.5;
    p.e.resize(2);
    p.e << 1.0, -0.25;
    p.lower = VectorXd::Zero(2);
    p.upper.resize(2);
    p.upper << 3.0, kInf;
    p.eq.resize(2);
    p.eq << 1.0, -1.0;
    std::string path = "qp_dump_test.txt";
    dump_qp(p, path);
    std::ifstream in(path);
    int m = 0;
    in >> m;
    REQUIRE(m == 2);
    double d00, d01, d10, d11;
    in >> d00 >> d01 >> d10 >> d11;
    CHECK(d00 == 0.5);
    CHECK(d11 == 0.5);
    double e0, e1;
    in >> e0 >> e1;
    CHECK(e1 == -0.25);
    double l0, l1;
    in >> l0 >> l1;
    std::string u0, u1;
    in >> u0 >> u1;
    CHECK(u0 == "3");
    CHECK(u1 == "inf");
    std::remove(path.c_str());
}

TEST_CASE("solve_qp rejects malformed problems") {
    QPProblem p;
    p.D = MatrixXd::Identity(2, 2);
    p.e = VectorXd::Ones(2);
    p.lower = VectorXd::Ones(2);
    p.upper = VectorXd::Zero(2);  // lower > upper
    p.eq = VectorXd::Zero(2);
    CHECK_THROWS_AS(solve_qp(p), ConfigError);
}
