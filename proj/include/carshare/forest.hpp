#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace carshare {

struct ForestOptions {
    int trees = 500;
    /// Features tried per split; 0 means max(1, p / 3).
    int mtry = 0;
    int min_leaf = 5;
    std::uint64_t seed = 1;
    /// Features with more distinct values than this are split on quantile bins.
    int max_bins = 256;
};

/// Regression forest of CART trees grown on bootstrap samples.
///
/// Splits minimise the summed squared error of the two children. Rows are put in
/// a canonical order before sampling, so the fit does not depend on row order.
class RandomForest {
public:
    static RandomForest fit(const Eigen::MatrixXd& x, std::span<const double> y, const ForestOptions& options = {});

    double predict(std::span<const double> row) const;
    std::vector<double> predict(const Eigen::MatrixXd& x) const;

    std::size_t tree_count() const { return roots_.size(); }
    int features() const { return features_; }

private:
    struct Node {
        int feature = -1;  // -1 for a leaf
        double threshold = 0.0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        double value = 0.0;
    };

    std::vector<Node> nodes_;
    std::vector<std::int32_t> roots_;
    int features_ = 0;
};

}  // namespace carshare
