#include <carshare/lasso.hpp>

#include <carshare/csv.hpp>
#include <carshare/features.hpp>
#include <carshare/parallel.hpp>
#include <carshare/types.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

namespace carshare {

namespace {

struct Standardised {
    Eigen::MatrixXd z;
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd sd;
};

Standardised standardise(const Eigen::MatrixXd& x) {
    Standardised s;
    const auto n = static_cast<double>(x.rows());
    s.mean = x.colwise().mean();
    s.z = x.rowwise() - s.mean;
    s.sd = (s.z.colwise().squaredNorm() / n).array().sqrt();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (s.sd(j) > 1e-12 * std::max(1.0, std::abs(s.mean(j)))) {
            s.z.col(j) /= s.sd(j);
        } else {
            s.sd(j) = 0.0;
            s.z.col(j).setZero();
        }
    }
    return s;
}

std::optional<double> parse_number(const std::string& text) {
    if (text.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<double> lambda_sequence(double lmax, const LassoOptions& o) {
    if (!o.lambdas.empty()) {
        std::vector<double> l = o.lambdas;
        std::sort(l.begin(), l.end(), std::greater<>());
        return l;
    }
    std::vector<double> l;
    const int n = std::max(1, o.n_lambda);
    if (!(lmax > 0.0)) {
        return std::vector<double>(static_cast<std::size_t>(n), 0.0);
    }
    for (int k = 0; k < n; ++k) {
        const double frac = n == 1 ? 0.0 : static_cast<double>(k) / (n - 1);
        l.push_back(lmax * std::pow(o.lambda_min_ratio, frac));
    }
    return l;
}

}  // namespace

DesignMatrix read_design_csv(std::istream& in, const std::string& response, const std::vector<std::string>& ignore) {
    csv::Reader reader(in);
    const std::size_t c_y = reader.require(response);
    const auto c_id = reader.column("id");
    std::vector<std::size_t> cols;
    DesignMatrix design;
    for (std::size_t j = 0; j < reader.header().size(); ++j) {
        const auto& name = reader.header()[j];
        if (j == c_y || std::find(ignore.begin(), ignore.end(), name) != ignore.end()) continue;
        cols.push_back(j);
        design.names.push_back(name);
    }
    std::vector<std::vector<double>> rows;
    std::vector<double> ys;
    std::vector<std::string> row;
    while (reader.next(row)) {
        if (row.size() < reader.header().size()) {
            ++design.dropped_rows;
            continue;
        }
        auto y = parse_number(row[c_y]);
        std::vector<double> values;
        bool ok = y.has_value();
        for (std::size_t j : cols) {
            auto v = parse_number(row[j]);
            if (!v) {
                ok = false;
                break;
            }
            values.push_back(*v);
        }
        if (!ok) {
            ++design.dropped_rows;
            continue;
        }
        rows.push_back(std::move(values));
        ys.push_back(*y);
        design.row_ids.push_back(c_id ? row[*c_id] : std::to_string(rows.size() - 1));
    }
    if (rows.empty()) {
        throw InputError("design table has no complete rows");
    }
    // Keep non-constant columns only.
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        bool constant = true;
        for (const auto& r : rows) {
            if (r[j] != rows.front()[j]) {
                constant = false;
                break;
            }
        }
        if (constant) {
            design.dropped_columns.push_back(design.names[j]);
        } else {
            keep.push_back(j);
        }
    }
    std::vector<std::string> names;
    for (std::size_t j : keep) names.push_back(design.names[j]);
    design.names = names;
    design.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(keep.size()));
    design.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < keep.size(); ++k) {
            design.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][keep[k]];
        }
        design.y(static_cast<Eigen::Index>(i)) = ys[i];
    }
    design.log_transformed.assign(keep.size(), false);
    return design;
}

void log_transform_skewed(DesignMatrix& design, double skew_threshold) {
    design.log_transformed.resize(static_cast<std::size_t>(design.x.cols()), false);
    for (Eigen::Index j = 0; j < design.x.cols(); ++j) {
        std::vector<double> col(design.x.col(j).data(), design.x.col(j).data() + design.x.rows());
        if (design.x.col(j).minCoeff() < 0.0 || sample_skewness(col) <= skew_threshold) continue;
        design.x.col(j) = design.x.col(j).array().log1p().matrix();
        design.log_transformed[static_cast<std::size_t>(j)] = true;
    }
}

double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Standardised s = standardise(x);
    const Eigen::VectorXd centred = y.array() - y.mean();
    return (s.z.transpose() * centred).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

LassoPath fit_lasso_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LassoOptions& options) {
    if (x.rows() < 2 || x.cols() < 1 || y.size() != x.rows()) {
        throw InvalidArgument("lasso needs at least two rows, one predictor and a matching response");
    }
    const auto n = static_cast<double>(x.rows());
    const Eigen::Index p = x.cols();
    const Standardised s = standardise(x);
    LassoPath path;
    path.x_mean = s.mean;
    path.x_sd = s.sd;
    path.y_mean = y.mean();
    const Eigen::VectorXd yc = y.array() - path.y_mean;
    const double lmax = (s.z.transpose() * yc).cwiseAbs().maxCoeff() / n;
    path.lambda = lambda_sequence(lmax, options);
    const auto L = static_cast<Eigen::Index>(path.lambda.size());
    path.beta = Eigen::MatrixXd::Zero(p, L);
    path.beta_original = Eigen::MatrixXd::Zero(p, L);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = yc;
    // Column norms ||z_j||^2 / n: 1 for live columns, 0 for constant ones.
    const Eigen::VectorXd norm = s.z.colwise().squaredNorm().transpose() / n;
    for (Eigen::Index l = 0; l < L; ++l) {
        const double lambda = path.lambda[static_cast<std::size_t>(l)];
        bool converged = false;
        int sweep = 0;
        while (sweep < options.max_sweeps) {
            ++sweep;
            double max_change = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                if (norm(j) <= 0.0) continue;
                const double old = beta(j);
                const double z = s.z.col(j).dot(r) / n + norm(j) * old;
                const double updated = (z > lambda ? z - lambda : (z < -lambda ? z + lambda : 0.0)) / norm(j);
                if (updated != old) {
                    r -= s.z.col(j) * (updated - old);
                    beta(j) = updated;
                    max_change = std::max(max_change, std::abs(updated - old));
                }
            }
            if (max_change < options.tolerance) {
                converged = true;
                break;
            }
        }
        path.converged.push_back(converged);
        path.sweeps.push_back(sweep);
        const Eigen::VectorXd grad = s.z.transpose() * r / n;
        double kkt = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (beta(j) == 0.0) kkt = std::max(kkt, std::abs(grad(j)));
        }
        path.kkt_inactive.push_back(kkt);
        path.beta.col(l) = beta;
        double intercept = path.y_mean;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double b = s.sd(j) > 0.0 ? beta(j) / s.sd(j) : 0.0;
            path.beta_original(j, l) = b;
            intercept -= b * s.mean(j);
        }
        path.intercept.push_back(intercept);
    }
    return path;
}

Eigen::VectorXd LassoPath::predict(const Eigen::MatrixXd& x, std::size_t index) const {
    const auto l = static_cast<Eigen::Index>(index);
    return (x * beta_original.col(l)).array() + intercept.at(index);
}

std::size_t LassoPath::active_count(std::size_t index) const {
    const auto l = static_cast<Eigen::Index>(index);
    return static_cast<std::size_t>((beta.col(l).array() != 0.0).count());
}

LassoCv cv_select(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int folds, std::uint64_t seed, LambdaRule rule,
                  const LassoOptions& options) {
    LassoCv cv;
    const auto n = static_cast<std::size_t>(x.rows());
    if (n < 3) {
        throw InvalidArgument("cross-validation needs at least three rows");
    }
    if (folds < 2) {
        throw InvalidArgument("cross-validation needs at least two folds");
    }
    if (static_cast<std::size_t>(folds) > n) {
        cv.warnings.push_back("only " + std::to_string(n) + " rows; folds reduced from " + std::to_string(folds));
        folds = static_cast<int>(n);
    }
    cv.folds = folds;
    cv.path = fit_lasso_path(x, y, options);
    LassoOptions fold_options = options;
    fold_options.lambdas = cv.path.lambda;

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    cv.fold_of_row.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) cv.fold_of_row[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));

    const std::size_t L = cv.path.lambda.size();
    std::vector<std::vector<double>> fold_mse(static_cast<std::size_t>(folds), std::vector<double>(L, 0.0));
    std::vector<double> fold_size(static_cast<std::size_t>(folds), 0.0);
    parallel_for(static_cast<std::size_t>(folds), [&](std::size_t f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < n; ++i) {
            (cv.fold_of_row[i] == static_cast<int>(f) ? test : train).push_back(static_cast<Eigen::Index>(i));
        }
        const Eigen::MatrixXd xt = x(train, Eigen::all);
        const Eigen::VectorXd yt = y(train);
        const Eigen::MatrixXd xv = x(test, Eigen::all);
        const Eigen::VectorXd yv = y(test);
        const LassoPath p = fit_lasso_path(xt, yt, fold_options);
        for (std::size_t l = 0; l < L; ++l) {
            fold_mse[f][l] = (p.predict(xv, l) - yv).squaredNorm() / static_cast<double>(test.size());
        }
        fold_size[f] = static_cast<double>(test.size());
    });

    const double total = std::accumulate(fold_size.begin(), fold_size.end(), 0.0);
    for (std::size_t l = 0; l < L; ++l) {
        double m = 0.0;
        for (std::size_t f = 0; f < fold_mse.size(); ++f) m += fold_mse[f][l] * fold_size[f];
        m /= total;
        double v = 0.0;
        for (std::size_t f = 0; f < fold_mse.size(); ++f) v += (fold_mse[f][l] - m) * (fold_mse[f][l] - m) * fold_size[f];
        v /= total * static_cast<double>(folds - 1);
        cv.cv_mean.push_back(m);
        cv.cv_se.push_back(std::sqrt(v));
    }
    cv.index_min = static_cast<std::size_t>(std::min_element(cv.cv_mean.begin(), cv.cv_mean.end()) - cv.cv_mean.begin());
    const double bound = cv.cv_mean[cv.index_min] + cv.cv_se[cv.index_min];
    cv.index_1se = cv.index_min;
    for (std::size_t l = 0; l <= cv.index_min; ++l) {
        if (cv.cv_mean[l] <= bound) {
            cv.index_1se = l;
            break;
        }
    }
    cv.selected = rule == LambdaRule::min ? cv.index_min : cv.index_1se;
    return cv;
}

void write_coefficients_csv(std::ostream& out, const std::vector<std::string>& names, const LassoPath& path,
                            std::size_t index) {
    csv::Writer w(out);
    w.row({"predictor", "coefficient", "coefficient_original", "selected"});
    const auto l = static_cast<Eigen::Index>(index);
    for (std::size_t j = 0; j < names.size(); ++j) {
        const double b = path.beta(static_cast<Eigen::Index>(j), l);
        const bool active = b != 0.0;
        w.row({names[j], active ? csv::num(b) : "-",
               active ? csv::num(path.beta_original(static_cast<Eigen::Index>(j), l)) : "-", active ? "1" : "0"});
    }
}

void write_cv_curve_csv(std::ostream& out, const LassoCv& cv) {
    csv::Writer w(out);
    w.row({"lambda", "cv_mean", "cv_se", "active", "converged", "is_min", "is_1se"});
    for (std::size_t l = 0; l < cv.path.lambda.size(); ++l) {
        w.row({csv::num(cv.path.lambda[l]), csv::num(cv.cv_mean[l]), csv::num(cv.cv_se[l]),
               std::to_string(cv.path.active_count(l)), cv.path.converged[l] ? "1" : "0",
               l == cv.index_min ? "1" : "0", l == cv.index_1se ? "1" : "0"});
    }
}

nlohmann::json sign_summary(const std::vector<std::string>& names, const LassoPath& path, std::size_t index) {
    nlohmann::json positive = nlohmann::json::array();
    nlohmann::json negative = nlohmann::json::array();
    const auto l = static_cast<Eigen::Index>(index);
    for (std::size_t j = 0; j < names.size(); ++j) {
        const double b = path.beta(static_cast<Eigen::Index>(j), l);
        if (b > 0.0) positive.push_back(names[j]);
        if (b < 0.0) negative.push_back(names[j]);
    }
    return {{"lambda", path.lambda.at(index)}, {"positive", positive}, {"negative", negative}};
}

}  // namespace carshare
