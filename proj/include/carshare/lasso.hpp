#pragma once

#include <Eigen/Dense>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace carshare {

/// Predictors and response for the per-unit regression.
struct DesignMatrix {
    std::vector<std::string> names;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::string> row_ids;
    std::vector<bool> log_transformed;
    std::size_t dropped_rows = 0;
    std::vector<std::string> dropped_columns;
};

/// Reads a unit table: `response` is y, every other column except those in
/// `ignore` is a predictor. Rows with empty or non-numeric values are dropped and
/// counted; constant columns are dropped and listed.
DesignMatrix read_design_csv(std::istream& in, const std::string& response = "pickups",
                             const std::vector<std::string>& ignore = {"id", "overlap_fraction"});

/// Replaces every non-negative predictor with sample skewness above the
/// threshold by log(1 + x).
void log_transform_skewed(DesignMatrix& design, double skew_threshold = 2.0);

struct LassoOptions {
    int n_lambda = 100;
    double lambda_min_ratio = 1e-3;
    double tolerance = 1e-7;
    int max_sweeps = 100000;
    /// Explicit decreasing penalty sequence; overrides n_lambda and the ratio.
    std::vector<double> lambdas;
};

/// Lasso path for (1/2n)||y - b0 - Xb||^2 + lambda ||b||_1 on standardised predictors
/// (population SD) with an unpenalised intercept.
struct LassoPath {
    std::vector<double> lambda;
    Eigen::MatrixXd beta;           // standardised scale, predictors x lambdas
    Eigen::MatrixXd beta_original;  // original predictor units
    std::vector<double> intercept;  // original units
    std::vector<bool> converged;
    std::vector<int> sweeps;
    /// max_j |x_j' r / n| over zero coefficients, per lambda.
    std::vector<double> kkt_inactive;
    Eigen::RowVectorXd x_mean;
    Eigen::RowVectorXd x_sd;
    double y_mean = 0.0;

    Eigen::VectorXd predict(const Eigen::MatrixXd& x, std::size_t index) const;
    std::size_t active_count(std::size_t index) const;
};

/// Smallest penalty with all slopes zero: max_j |x_j' (y - mean y)| / n.
double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Throws InvalidArgument for fewer than two rows or no predictors.
LassoPath fit_lasso_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LassoOptions& options = {});

enum class LambdaRule { min, one_se };

struct LassoCv {
    int folds = 10;
    std::vector<int> fold_of_row;
    std::vector<double> cv_mean;
    std::vector<double> cv_se;
    std::size_t index_min = 0;
    std::size_t index_1se = 0;
    std::size_t selected = 0;
    LassoPath path;  // fitted on all rows
    std::vector<std::string> warnings;
};

/// Seeded k-fold cross-validation over the full-data penalty sequence. Fewer rows
/// than folds reduces the fold count with a warning.
LassoCv cv_select(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int folds = 10, std::uint64_t seed = 1,
                  LambdaRule rule = LambdaRule::one_se, const LassoOptions& options = {});

/// predictor, coefficient (standardised), coefficient_original, selected; zero
/// coefficients are written as "-".
void write_coefficients_csv(std::ostream& out, const std::vector<std::string>& names, const LassoPath& path,
                            std::size_t index);
void write_cv_curve_csv(std::ostream& out, const LassoCv& cv);
/// Selected predictors grouped by coefficient sign.
nlohmann::json sign_summary(const std::vector<std::string>& names, const LassoPath& path, std::size_t index);

}  // namespace carshare
