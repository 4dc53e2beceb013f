#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace carshare {

/// Principal component projection fitted on the rows of a data matrix.
struct Pca {
    Eigen::RowVectorXd mean;
    /// One column per retained component (unit loadings).
    Eigen::MatrixXd loadings;
    Eigen::VectorXd explained_variance;

    /// Scores of new rows.
    Eigen::MatrixXd project(const Eigen::MatrixXd& rows) const;
};

/// Keeps up to `components` components. Works through the Gram matrix so that
/// wide matrices (few rows, many columns) stay cheap. Components with no
/// variance get zero loadings.
Pca fit_pca(const Eigen::MatrixXd& data, int components = 2);

struct KMeansResult {
    Eigen::MatrixXd centroids;  // k x dims
    std::vector<int> labels;
    double within_ss = 0.0;
};

struct KMeansOptions {
    int restarts = 10;
    int max_iterations = 100;
    std::uint64_t seed = 1;
};

/// Lloyd iterations from k-means++ seeds; the best of `restarts` runs is kept.
/// Throws InvalidArgument when k < 1 or k exceeds the number of rows.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, const KMeansOptions& options = {});

struct GapStatistic {
    int k = 1;
    std::vector<double> gap;      // index k - 1
    std::vector<double> std_err;  // s_k, already scaled by sqrt(1 + 1/B)
    std::vector<double> log_w;
};

struct GapOptions {
    int k_max = 8;
    int references = 50;
    KMeansOptions kmeans;
};

/// Number of clusters by the gap statistic with uniform references over the
/// bounding box of the points. k is the smallest value with
/// gap(k) >= gap(k+1) - s(k+1); data without spread yields k = 1.
GapStatistic gap_statistic(const Eigen::MatrixXd& points, const GapOptions& options = {});

}  // namespace carshare
