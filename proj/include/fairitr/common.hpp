#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairitr {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// user/config mistakes -> exit 2
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// numerical failures (non-convergence, NaN, infeasible) -> exit 3
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic RNG: mt19937_64 with explicit transforms. std::*_distribution
// output is implementation-defined, so transforms are pinned here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform on [0,1) with 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    // Box-Muller; second value cached, so draw order is pinned
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform() < p; }

    int sign() { return bernoulli(0.5) ? 1 : -1; }

    // uniform integer in [0, n)
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    std::mt19937_64& raw() { return gen_; }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// shortest text keeping the exact double: 17 significant digits
std::string format_digits17(double v);

void check_finite(const MatrixXd& m, const std::string& what);
void check_finite(const VectorXd& v, const std::string& what);

}  // namespace fairitr
