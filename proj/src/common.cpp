#include "fairitr/common.hpp"

#include <cmath>
#include <cstdio>

namespace fairitr {

std::string format_digits17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void check_finite(const MatrixXd& m, const std::string& what) {
    if (!m.allFinite()) throw NumericError(what + " contains NaN or Inf");
}

void check_finite(const VectorXd& v, const std::string& what) {
    if (!v.allFinite()) throw NumericError(what + " contains NaN or Inf");
}

}  // namespace fairitr
