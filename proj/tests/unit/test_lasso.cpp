#include <carshare/lasso.hpp>
#include <carshare/types.hpp>

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace carshare;

namespace {

struct Problem {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

Problem planted(int n, int decoys, double noise_sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Problem p{Eigen::MatrixXd(n, 2 + decoys), Eigen::VectorXd(n)};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p.x.cols(); ++j) p.x(i, j) = z(rng);
        p.y(i) = 2.0 * p.x(i, 0) - p.x(i, 1) + noise_sd * z(rng);
    }
    return p;
}

std::vector<double> geometric(double hi, double lo, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(hi * std::pow(lo / hi, i / double(n - 1)));
    return out;
}

double soft(double v, double t) { return v > t ? v - t : v < -t ? v + t : 0.0; }

}  // namespace

TEST_SUITE("lasso") {

TEST_CASE("penalty at or above lambda max zeroes all slopes") {
    const auto p = planted(50, 5, 1.0, 1);
    const double lmax = lasso_lambda_max(p.x, p.y);
    LassoOptions opt;
    opt.lambdas = {2.0 * lmax, lmax};
    const auto path = fit_lasso_path(p.x, p.y, opt);
    CHECK(path.active_count(0) == 0);
    CHECK(path.active_count(1) == 0);
    CHECK(path.intercept[1] == doctest::Approx(p.y.mean()));
}

TEST_CASE("small penalty matches least squares") {
    const auto p = planted(10, 1, 0.5, 2);
    LassoOptions opt;
    opt.lambdas = geometric(lasso_lambda_max(p.x, p.y), 1e-10, 60);
    opt.tolerance = 1e-14;
    const auto path = fit_lasso_path(p.x, p.y, opt);
    Eigen::MatrixXd a(10, 4);
    a.col(0).setOnes();
    a.rightCols(3) = p.x;
    const Eigen::VectorXd ols = (a.transpose() * a).ldlt().solve(a.transpose() * p.y);
    const auto last = path.lambda.size() - 1;
    CHECK(std::abs(path.intercept[last] - ols(0)) < 1e-4);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(path.beta_original(j, last) - ols(j + 1)) < 1e-4);
}

TEST_CASE("orthonormal design gives soft thresholding") {
    Eigen::MatrixXd x(8, 3);
    x << 1, 1, 1, -1, 1, 1, 1, -1, 1, -1, -1, 1, 1, 1, -1, -1, 1, -1, 1, -1, -1, -1, -1, -1;
    REQUIRE((x.transpose() * x / 8.0 - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-12);
    Eigen::VectorXd y(8);
    y << 3.1, -0.4, 2.2, 0.9, -1.7, 0.3, 1.1, -2.5;
    const Eigen::VectorXd ols = x.transpose() * (y.array() - y.mean()).matrix() / 8.0;
    LassoOptions opt;
    opt.lambdas = {0.9, 0.5, 0.2, 0.05};
    opt.tolerance = 1e-14;
    const auto path = fit_lasso_path(x, y, opt);
    for (std::size_t l = 0; l < opt.lambdas.size(); ++l)
        for (int j = 0; j < 3; ++j) CHECK(path.beta(j, static_cast<Eigen::Index>(l)) == doctest::Approx(soft(ols(j), opt.lambdas[l])));
}

TEST_CASE("kkt conditions hold along the path") {
    const auto p = planted(80, 15, 1.0, 3);
    const auto path = fit_lasso_path(p.x, p.y);
    for (std::size_t l = 0; l < path.lambda.size(); ++l) {
        CHECK(path.converged[l]);
        CHECK(path.kkt_inactive[l] <= path.lambda[l] + 1e-6);
    }
}

TEST_CASE("pure noise selects almost nothing") {
    int quiet = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed * 7919 + 1);
        std::normal_distribution<double> z(0.0, 1.0);
        Eigen::MatrixXd x(60, 10);
        Eigen::VectorXd y(60);
        for (int i = 0; i < 60; ++i) {
            for (int j = 0; j < 10; ++j) x(i, j) = z(rng);
            y(i) = z(rng);
        }
        LassoOptions opt;
        opt.n_lambda = 50;
        const auto cv = cv_select(x, y, 10, seed, LambdaRule::one_se, opt);
        quiet += cv.path.active_count(cv.selected) <= 1;
    }
    CHECK(quiet >= 80);
}

TEST_CASE("planted signals are selected with their signs") {
    const auto p = planted(200, 20, 1.0, 5);
    const auto cv = cv_select(p.x, p.y, 10, 5);
    CHECK(cv.path.beta(0, static_cast<Eigen::Index>(cv.selected)) > 0.0);
    CHECK(cv.path.beta(1, static_cast<Eigen::Index>(cv.selected)) < 0.0);
    std::vector<std::string> names{"x1", "x2"};
    for (int j = 0; j < 20; ++j) names.push_back("d" + std::to_string(j));
    const auto s = sign_summary(names, cv.path, cv.selected);
    CHECK(s.dump().find("x1") != std::string::npos);
}

TEST_CASE("duplicated column leaves predictions unchanged") {
    const auto p = planted(60, 3, 0.5, 6);
    Eigen::MatrixXd dup(60, 6);
    dup << p.x, p.x.col(0);
    LassoOptions opt;
    opt.lambdas = geometric(lasso_lambda_max(p.x, p.y), 0.01, 20);
    opt.tolerance = 1e-14;
    const auto a = fit_lasso_path(p.x, p.y, opt);
    const auto b = fit_lasso_path(dup, p.y, opt);
    for (std::size_t l = 0; l < 20; ++l) CHECK((a.predict(p.x, l) - b.predict(dup, l)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("rescaling a column leaves predictions unchanged") {
    const auto p = planted(60, 3, 0.5, 7);
    Eigen::MatrixXd scaled = p.x;
    scaled.col(2) *= 37.5;
    LassoOptions opt;
    opt.lambdas = geometric(lasso_lambda_max(p.x, p.y), 0.01, 20);
    opt.tolerance = 1e-14;
    const auto a = fit_lasso_path(p.x, p.y, opt);
    const auto b = fit_lasso_path(scaled, p.y, opt);
    for (std::size_t l = 0; l < 20; ++l) CHECK((a.predict(p.x, l) - b.predict(scaled, l)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("empty active set prints dashes") {
    const auto p = planted(30, 1, 1.0, 8);
    const auto path = fit_lasso_path(p.x, p.y);
    std::ostringstream out;
    write_coefficients_csv(out, {"a", "b", "c"}, path, 0);
    CHECK(out.str() == "predictor,coefficient,coefficient_original,selected\na,-,-,0\nb,-,-,0\nc,-,-,0\n");
}

TEST_CASE("design csv") {
    std::istringstream in("id,pickups,overlap_fraction,edu,flat,inc\nA,10,1,3,1,5\nB,12,1,4,1,\nC,8,0.5,2,1,7\nD,11,1,5,1,2\n");
    const auto d = read_design_csv(in);
    CHECK(d.y.size() == 3);
    CHECK(d.dropped_rows == 1);
    CHECK(d.names == std::vector<std::string>{"edu", "inc"});
    CHECK(d.dropped_columns == std::vector<std::string>{"flat"});
    CHECK(d.row_ids == std::vector<std::string>{"A", "C", "D"});
}

TEST_CASE("skewed predictors are log transformed") {
    DesignMatrix d;
    d.names = {"skewed", "even"};
    d.x.resize(12, 2);
    for (int i = 0; i < 12; ++i) {
        d.x(i, 0) = i == 11 ? 1000.0 : 1.0 + i % 2;
        d.x(i, 1) = i;
    }
    d.y = Eigen::VectorXd::Ones(12);
    d.log_transformed = {false, false};
    const double before = d.x(11, 0);
    log_transform_skewed(d, 2.0);
    CHECK(d.log_transformed[0]);
    CHECK_FALSE(d.log_transformed[1]);
    CHECK(d.x(11, 0) == doctest::Approx(std::log1p(before)));
}

TEST_CASE("too few rows") {
    CHECK_THROWS_AS(fit_lasso_path(Eigen::MatrixXd::Ones(1, 2), Eigen::VectorXd::Ones(1)), InvalidArgument);
}

}  // TEST_SUITE
