#include <carshare/kmeans.hpp>

#include <carshare/stats.hpp>
#include <carshare/types.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace carshare {

Eigen::MatrixXd Pca::project(const Eigen::MatrixXd& rows) const {
    return (rows.rowwise() - mean) * loadings;
}

Pca fit_pca(const Eigen::MatrixXd& data, int components) {
    if (data.rows() == 0 || data.cols() == 0) {
        throw InvalidArgument("PCA needs a non-empty matrix");
    }
    Pca pca;
    pca.mean = data.colwise().mean();
    const Eigen::MatrixXd centred = data.rowwise() - pca.mean;
    const Eigen::MatrixXd gram = centred * centred.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    const Eigen::Index n = data.rows();
    pca.loadings = Eigen::MatrixXd::Zero(data.cols(), components);
    pca.explained_variance = Eigen::VectorXd::Zero(components);
    const double scale = std::max(1.0, gram.diagonal().maxCoeff());
    for (int c = 0; c < components && c < n; ++c) {
        const Eigen::Index idx = n - 1 - c;  // eigenvalues ascend
        const double lambda = solver.eigenvalues()(idx);
        if (!(lambda > 1e-10 * scale)) {
            continue;
        }
        Eigen::VectorXd v = centred.transpose() * solver.eigenvectors().col(idx) / std::sqrt(lambda);
        // Fix the sign so that repeated fits agree.
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        pca.loadings.col(c) = v;
        pca.explained_variance(c) = lambda / std::max<double>(1.0, static_cast<double>(n - 1));
    }
    return pca;
}

namespace {

double within_ss(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids, std::vector<int>& labels) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
            const double d = (points.row(i) - centroids.row(c)).squaredNorm();
            if (d < best) {
                best = d;
                arg = static_cast<int>(c);
            }
        }
        labels[static_cast<std::size_t>(i)] = arg;
        total += best;
    }
    return total;
}

KMeansResult lloyd(const Eigen::MatrixXd& points, int k, int max_iterations, std::mt19937_64& rng) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd centroids(k, points.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centroids.row(0) = points.row(pick(rng));
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& d = d2[static_cast<std::size_t>(i)];
            d = std::min(d, (points.row(i) - centroids.row(c - 1)).squaredNorm());
            total += d;
        }
        Eigen::Index chosen = pick(rng);
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (Eigen::Index i = 0; i < n; ++i) {
                u -= d2[static_cast<std::size_t>(i)];
                if (u <= 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        centroids.row(c) = points.row(chosen);
    }

    KMeansResult result;
    result.labels.assign(static_cast<std::size_t>(n), 0);
    double previous = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iterations; ++it) {
        result.within_ss = within_ss(points, centroids, result.labels);
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
        std::vector<int> sizes(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int l = result.labels[static_cast<std::size_t>(i)];
            sums.row(l) += points.row(i);
            ++sizes[static_cast<std::size_t>(l)];
        }
        for (int c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] > 0) {
                centroids.row(c) = sums.row(c) / sizes[static_cast<std::size_t>(c)];
            }
        }
        if (previous - result.within_ss <= 1e-12 * std::max(1.0, previous)) {
            break;
        }
        previous = result.within_ss;
    }
    result.within_ss = within_ss(points, centroids, result.labels);
    result.centroids = centroids;
    return result;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, const KMeansOptions& options) {
    if (k < 1 || k > points.rows()) {
        throw InvalidArgument("k-means needs 1 <= k <= number of points");
    }
    std::mt19937_64 rng(options.seed);
    KMeansResult best;
    best.within_ss = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, options.restarts); ++r) {
        KMeansResult run = lloyd(points, k, options.max_iterations, rng);
        if (run.within_ss < best.within_ss - 1e-12) {
            best = std::move(run);
        }
    }
    return best;
}

GapStatistic gap_statistic(const Eigen::MatrixXd& points, const GapOptions& options) {
    GapStatistic out;
    const Eigen::Index n = points.rows();
    const int k_max = static_cast<int>(std::min<Eigen::Index>(options.k_max, n));
    if (n < 2 || k_max < 2) {
        return out;
    }
    const Eigen::RowVectorXd lo = points.colwise().minCoeff();
    const Eigen::RowVectorXd hi = points.colwise().maxCoeff();
    const double spread = (hi - lo).maxCoeff();
    const double total_ss = (points.rowwise() - points.colwise().mean()).squaredNorm();
    if (!(spread > 1e-12) || !(total_ss > 1e-12)) {
        return out;
    }

    std::mt19937_64 rng(stats::mix_seed(options.kmeans.seed, 0x6a70));
    auto log_w = [&](const Eigen::MatrixXd& data, int k, std::uint64_t seed) {
        KMeansOptions ko = options.kmeans;
        ko.seed = seed;
        const double w = kmeans(data, k, ko).within_ss;
        return std::log(std::max(w, 1e-300));
    };

    std::vector<std::vector<double>> ref_log_w(static_cast<std::size_t>(k_max));
    for (int b = 0; b < options.references; ++b) {
        Eigen::MatrixXd ref(n, points.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < points.cols(); ++j) {
                ref(i, j) = std::uniform_real_distribution<double>(lo(j), hi(j))(rng);
            }
        }
        for (int k = 1; k <= k_max; ++k) {
            ref_log_w[static_cast<std::size_t>(k - 1)].push_back(
                log_w(ref, k, stats::mix_seed(options.kmeans.seed, static_cast<std::uint64_t>(b * 64 + k))));
        }
    }
    const double se_scale = std::sqrt(1.0 + 1.0 / options.references);
    for (int k = 1; k <= k_max; ++k) {
        const auto& refs = ref_log_w[static_cast<std::size_t>(k - 1)];
        const double lw = log_w(points, k, options.kmeans.seed);
        out.log_w.push_back(lw);
        out.gap.push_back(stats::mean(refs) - lw);
        // Population SD of the reference values, as in the original definition.
        const double sd = std::sqrt(stats::variance(refs) * (refs.size() - 1.0) / refs.size());
        out.std_err.push_back(sd * se_scale);
    }
    out.k = k_max;
    for (int k = 1; k < k_max; ++k) {
        if (out.gap[static_cast<std::size_t>(k - 1)] >=
            out.gap[static_cast<std::size_t>(k)] - out.std_err[static_cast<std::size_t>(k)]) {
            out.k = k;
            break;
        }
    }
    return out;
}

}  // namespace carshare
