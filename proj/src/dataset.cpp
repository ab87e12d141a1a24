#include "fairitr/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace fairitr {

MatrixXd Dataset::features() const {
    MatrixXd Z(n(), p() + K());
    Z.leftCols(p()) = X;
    Z.rightCols(K()) = S;
    return Z;
}

namespace {

// RFC-4180: quoted fields may contain commas, doubled quotes, newlines
std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_open = false;
    std::size_t i = 0, nbytes = text.size();
    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_open = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(row);
        row.clear();
    };
    while (i < nbytes) {
        char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < nbytes && text[i + 1] == '"') {
                    field += '"';
                    i += 2;
                } else {
                    quoted = false;
                    ++i;
                }
            } else {
                field += ch;
                ++i;
            }
        } else if (ch == '"' && field.empty() && !field_open) {
            quoted = true;
            field_open = true;
            ++i;
        } else if (ch == ',') {
            end_field();
            ++i;
        } else if (ch == '\r' && i + 1 < nbytes && text[i + 1] == '\n') {
            end_row();
            i += 2;
        } else if (ch == '\n') {
            end_row();
            ++i;
        } else {
            field += ch;
            field_open = true;
            ++i;
        }
    }
    if (quoted) throw ConfigError(path + ": unterminated quoted field");
    if (field_open || !field.empty() || !row.empty()) end_row();
    return rows;
}

double parse_cell(const std::string& cell, std::size_t data_row, const std::string& col) {
    if (cell.empty())
        throw ConfigError("row " + std::to_string(data_row) + ": missing value in column '" + col + "'");
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
        throw ConfigError("row " + std::to_string(data_row) + ", column '" + col +
                          "': unparseable value '" + cell + "'");
    return v;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto rows = parse_csv(ss.str(), path);
    if (rows.empty()) throw ConfigError(path + ": empty file");
    const auto& header = rows.front();

    std::size_t a_col = find_column(header, schema.treatment);
    std::size_t r_col = find_column(header, schema.reward);
    std::vector<std::size_t> s_cols, x_cols;
    for (const auto& name : schema.sensitive) s_cols.push_back(find_column(header, name));
    if (schema.covariates.empty()) {
        std::set<std::size_t> used{a_col, r_col};
        used.insert(s_cols.begin(), s_cols.end());
        for (std::size_t j = 0; j < header.size(); ++j)
            if (!used.count(j)) x_cols.push_back(j);
    } else {
        for (const auto& name : schema.covariates) x_cols.push_back(find_column(header, name));
    }
    if (s_cols.empty()) throw ConfigError("schema needs at least one sensitive column");
    if (x_cols.empty()) throw ConfigError("schema needs at least one covariate column");

    std::size_t n = rows.size() - 1;
    if (n < 2) throw ConfigError(path + ": fewer than 2 data rows");

    Dataset d;
    d.X.resize(n, x_cols.size());
    d.S.resize(n, s_cols.size());
    d.A.resize(n);
    d.R.resize(n);
    d.pi = VectorXd::Zero(n);

    std::vector<std::string> raw_a(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = rows[i + 1];
        if (row.size() != header.size())
            throw ConfigError("row " + std::to_string(i + 1) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(row.size()));
        for (std::size_t j = 0; j < x_cols.size(); ++j)
            d.X(i, j) = parse_cell(row[x_cols[j]], i + 1, header[x_cols[j]]);
        for (std::size_t j = 0; j < s_cols.size(); ++j)
            d.S(i, j) = parse_cell(row[s_cols[j]], i + 1, header[s_cols[j]]);
        d.R(i) = parse_cell(row[r_col], i + 1, header[r_col]);
        raw_a[i] = row[a_col];
        if (raw_a[i].empty())
            throw ConfigError("row " + std::to_string(i + 1) + ": missing value in column '" +
                              schema.treatment + "'");
    }

    std::set<std::string> levels(raw_a.begin(), raw_a.end());
    if (levels.size() != 2)
        throw ConfigError("treatment column '" + schema.treatment + "' has " +
                          std::to_string(levels.size()) + " distinct levels, need exactly 2");
    // lexicographically smaller level -> -1 unless the schema names the +1 level
    std::string pos = *std::next(levels.begin());
    if (schema.positive_level) {
        if (!levels.count(*schema.positive_level))
            throw ConfigError("positive_level '" + *schema.positive_level +
                              "' does not occur in the treatment column");
        pos = *schema.positive_level;
    }
    for (std::size_t i = 0; i < n; ++i) d.A(i) = (raw_a[i] == pos) ? 1 : -1;

    validate(d, false);
    return d;
}

void save_csv(const Dataset& d, const std::string& path, bool with_pi) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    for (Eigen::Index j = 0; j < d.p(); ++j) out << "x" << (j + 1) << ",";
    for (Eigen::Index j = 0; j < d.K(); ++j) out << "s" << (j + 1) << ",";
    out << "a,r";
    if (with_pi) out << ",pi";
    out << "\n";
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        for (Eigen::Index j = 0; j < d.p(); ++j) out << format_digits17(d.X(i, j)) << ",";
        for (Eigen::Index j = 0; j < d.K(); ++j) out << format_digits17(d.S(i, j)) << ",";
        out << d.A(i) << "," << format_digits17(d.R(i));
        if (with_pi) out << "," << format_digits17(d.pi(i));
        out << "\n";
    }
}

Dataset set_constant_propensity(const Dataset& d) {
    Eigen::Index n = d.n();
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (d.A(i) == 1) ++pos;
    if (pos == 0 || pos == n) throw ConfigError("all treatments identical: propensity degenerate");
    double pi_hat = static_cast<double>(pos) / static_cast<double>(n);
    Dataset out = d;
    out.pi.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) out.pi(i) = (d.A(i) == 1) ? pi_hat : 1.0 - pi_hat;
    return out;
}

namespace {

// design matrix [1, X, S] for the propensity model
MatrixXd logistic_design(const Dataset& d) {
    MatrixXd F(d.n(), 1 + d.p() + d.K());
    F.col(0).setOnes();
    F.middleCols(1, d.p()) = d.X;
    F.rightCols(d.K()) = d.S;
    return F;
}

double logistic_objective(const MatrixXd& F, const VectorXd& y, const VectorXd& beta, double penalty) {
    VectorXd z = F * beta;
    double obj = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
        obj += std::log1p(std::exp(-std::abs(z(i)))) + std::max(z(i), 0.0) - y(i) * z(i);
    obj += 0.5 * penalty * beta.tail(beta.size() - 1).squaredNorm();
    return obj;
}

}  // namespace

PropensityModel fit_penalized_logistic(const Dataset& d, double penalty) {
    if (penalty < 0) throw ConfigError("penalty must be nonnegative");
    bool has_pos = false, has_neg = false;
    for (Eigen::Index i = 0; i < d.n(); ++i) (d.A(i) == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw ConfigError("both treatment levels must be present");

    MatrixXd F = logistic_design(d);
    VectorXd y(d.n());
    for (Eigen::Index i = 0; i < d.n(); ++i) y(i) = (d.A(i) == 1) ? 1.0 : 0.0;

    Eigen::Index q = F.cols();
    VectorXd beta = VectorXd::Zero(q);
    VectorXd pen_diag = VectorXd::Constant(q, penalty);
    pen_diag(0) = 0.0;  // intercept unpenalized

    PropensityModel model;
    model.penalty = penalty;
    double obj = logistic_objective(F, y, beta, penalty);
    for (int iter = 1; iter <= 100; ++iter) {
        VectorXd z = F * beta;
        VectorXd prob = (1.0 + (-z.array()).exp()).inverse();
        VectorXd grad = F.transpose() * (prob - y) + pen_diag.asDiagonal() * beta;
        model.iterations = iter;
        model.grad_norm = grad.lpNorm<Eigen::Infinity>();
        if (model.grad_norm <= 1e-8) {
            model.coefficients = beta;
            return model;
        }
        VectorXd w = prob.array() * (1.0 - prob.array());
        MatrixXd H = F.transpose() * w.asDiagonal() * F;
        H.diagonal() += pen_diag;
        H.diagonal().array() += 1e-12;
        VectorXd step = H.ldlt().solve(-grad);
        // halving keeps the Newton step inside the decrease region
        double t = 1.0;
        for (int k = 0; k < 40; ++k) {
            double cand = logistic_objective(F, y, beta + t * step, penalty);
            if (cand <= obj + 1e-12 * (1.0 + std::abs(obj))) {
                beta += t * step;
                obj = cand;
                break;
            }
            t *= 0.5;
        }
    }
    VectorXd z = F * beta;
    VectorXd prob = (1.0 + (-z.array()).exp()).inverse();
    VectorXd grad = F.transpose() * (prob - y) + pen_diag.asDiagonal() * beta;
    throw NumericError("penalized logistic did not converge in 100 iterations, gradient norm " +
                       format_digits17(grad.lpNorm<Eigen::Infinity>()));
}

Dataset apply_propensity(const Dataset& d, const PropensityModel& m) {
    MatrixXd F = logistic_design(d);
    if (F.cols() != m.coefficients.size())
        throw ConfigError("propensity model dimension mismatch");
    VectorXd z = F * m.coefficients;
    Dataset out = d;
    out.pi.resize(d.n());
    constexpr double eps = 1e-6;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        double p1 = 1.0 / (1.0 + std::exp(-z(i)));
        p1 = std::clamp(p1, eps, 1.0 - eps);
        out.pi(i) = (d.A(i) == 1) ? p1 : 1.0 - p1;
    }
    return out;
}

Dataset shift_rewards(const Dataset& d) {
    Dataset out = d;
    double lo = d.R.minCoeff();
    if (lo < 0.0) {
        out.R = d.R.array() - lo;
        out.reward_shift = -lo;
    } else {
        out.reward_shift = 0.0;
    }
    return out;
}

void validate(const Dataset& d, bool require_pi) {
    Eigen::Index n = d.n();
    if (n < 1) throw ConfigError("dataset is empty");
    if (d.p() < 1 || d.K() < 1) throw ConfigError("need p >= 1 and K >= 1");
    if (d.X.rows() != n || d.S.rows() != n || d.R.size() != n)
        throw ConfigError("row counts disagree across X, S, A, R");
    check_finite(d.X, "X");
    check_finite(d.S, "S");
    check_finite(d.R, "R");
    for (Eigen::Index i = 0; i < n; ++i)
        if (d.A(i) != 1 && d.A(i) != -1) throw ConfigError("treatment entries must be -1 or +1");
    if (require_pi) {
        if (d.pi.size() != n) throw ConfigError("propensity not set");
        check_finite(d.pi, "pi");
        for (Eigen::Index i = 0; i < n; ++i)
            if (!(d.pi(i) > 0.0 && d.pi(i) < 1.0))
                throw ConfigError("propensities must lie in (0,1)");
        if (d.R.minCoeff() < 0.0)
            throw ConfigError("rewards must be nonnegative; run shift_rewards first");
    }
}

}  // namespace fairitr
