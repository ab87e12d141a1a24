#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "fairitr/kernel.hpp"

using namespace fairitr;

TEST_CASE("linear gram is the dot product") {
    MatrixXd z(1, 2);
    z << 1, 2;
    KernelSpec spec{KernelKind::Linear, 1.0};
    MatrixXd g = gram(spec, z, z);
    CHECK(g(0, 0) == 5.0);

    Rng rng(3);
    MatrixXd a(4, 3), b(6, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 3; ++j) b(i, j) = rng.normal();
    MatrixXd gab = gram(spec, a, b);
    CHECK((gab - a * b.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gaussian gram diagonal is one and entries lie in (0,1]") {
    Rng rng(4);
    MatrixXd z(30, 2);
    for (int i = 0; i < 30; ++i) {
        z(i, 0) = rng.uniform(-5, 5);
        z(i, 1) = rng.normal();
    }
    KernelSpec spec{KernelKind::Gaussian, 2.0};
    MatrixXd g = gram(spec, z, z);
    for (int i = 0; i < 30; ++i) CHECK(g(i, i) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g.minCoeff() > 0.0);
    CHECK(g.maxCoeff() <= 1.0 + 1e-15);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gaussian closed form at distance 2 with sigma 1") {
    MatrixXd z1(1, 1), z2(1, 1);
    z1 << 0;
    z2 << 2;
    KernelSpec spec{KernelKind::Gaussian, 1.0};
    CHECK(gram(spec, z1, z2)(0, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("dimension mismatch errors") {
    MatrixXd a(2, 2), b(2, 3);
    a.setZero();
    b.setZero();
    KernelSpec spec{KernelKind::Linear, 1.0};
    CHECK_THROWS_AS(gram(spec, a, b), ConfigError);
}

TEST_CASE("gaussian gram is PSD up to rounding") {
    Rng rng(9);
    for (int m : {5, 60, 300}) {
        MatrixXd z(m, 3);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < 3; ++j) z(i, j) = rng.uniform(-5, 5);
        KernelSpec spec{KernelKind::Gaussian, 1.7};
        MatrixXd g = gram(spec, z, z);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(g, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10 * m);
    }
}

TEST_CASE("median heuristic on two points") {
    MatrixXd z(2, 1);
    z << 0, 3;
    CHECK(median_heuristic_sigma(z) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("median heuristic on four collinear points") {
    MatrixXd z(4, 1);
    z << 0, 1, 2, 3;
    // pairwise distances {1,1,1,2,2,3}, median 1.5
    CHECK(median_heuristic_sigma(z) == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("median heuristic rejects identical rows") {
    MatrixXd z(3, 2);
    z.setConstant(4.0);
    CHECK_THROWS_AS(median_heuristic_sigma(z), ConfigError);
}

TEST_CASE("median heuristic is deterministic above the subsample cutoff") {
    Rng rng(77);
    MatrixXd z(1500, 2);
    for (int i = 0; i < 1500; ++i) {
        z(i, 0) = rng.normal();
        z(i, 1) = rng.normal();
    }
    double s1 = median_heuristic_sigma(z);
    double s2 = median_heuristic_sigma(z);
    CHECK(s1 == s2);
    CHECK(s1 > 0.0);
}

TEST_CASE("gaussian spec requires positive sigma") {
    MatrixXd z(2, 1);
    z << 0, 1;
    KernelSpec spec{KernelKind::Gaussian, 0.0};
    CHECK_THROWS_AS(gram(spec, z, z), ConfigError);
}
