#include <carshare/forest.hpp>

#include <carshare/stats.hpp>
#include <carshare/types.hpp>

#include <algorithm>
#include <numeric>
#include <random>

namespace carshare {

namespace {

struct BinnedFeature {
    std::vector<std::uint16_t> bin;  // per row
    std::vector<double> cut;         // threshold between bin k and k + 1
};

BinnedFeature bin_feature(const Eigen::MatrixXd& x, Eigen::Index j, int max_bins) {
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = x(static_cast<Eigen::Index>(i), j);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> uniq = sorted;
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

    // Upper edge of each bin (inclusive).
    std::vector<double> upper;
    if (uniq.size() <= static_cast<std::size_t>(max_bins)) {
        upper = uniq;
    } else {
        for (int b = 1; b <= max_bins; ++b) {
            const auto pos = std::min(n - 1, static_cast<std::size_t>(static_cast<double>(b) * n / max_bins));
            upper.push_back(sorted[b == max_bins ? n - 1 : pos]);
        }
        upper.erase(std::unique(upper.begin(), upper.end()), upper.end());
    }
    BinnedFeature f;
    f.bin.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.bin[i] = static_cast<std::uint16_t>(std::lower_bound(upper.begin(), upper.end(), values[i]) - upper.begin());
    }
    for (std::size_t k = 0; k + 1 < upper.size(); ++k) {
        // Midpoint between the largest value of bin k and the smallest of bin k + 1.
        const double next = *std::upper_bound(sorted.begin(), sorted.end(), upper[k]);
        f.cut.push_back(0.5 * (upper[k] + next));
    }
    return f;
}

}  // namespace

RandomForest RandomForest::fit(const Eigen::MatrixXd& x_in, std::span<const double> y_in,
                               const ForestOptions& options) {
    const auto n = static_cast<std::size_t>(x_in.rows());
    const auto p = static_cast<int>(x_in.cols());
    if (n == 0 || p == 0 || y_in.size() != n) {
        throw InvalidArgument("random forest needs a non-empty design and matching targets");
    }
    if (options.trees < 1 || options.min_leaf < 1) {
        throw InvalidArgument("random forest needs at least one tree and a positive leaf size");
    }

    // Canonical row order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        for (int j = 0; j < p; ++j) {
            const double va = x_in(static_cast<Eigen::Index>(a), j);
            const double vb = x_in(static_cast<Eigen::Index>(b), j);
            if (va != vb) return va < vb;
        }
        return y_in[a] < y_in[b];
    });
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), p);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x.row(static_cast<Eigen::Index>(i)) = x_in.row(static_cast<Eigen::Index>(order[i]));
        y[i] = y_in[order[i]];
    }

    std::vector<BinnedFeature> binned;
    std::size_t max_bin_count = 1;
    for (int j = 0; j < p; ++j) {
        binned.push_back(bin_feature(x, j, std::max(2, options.max_bins)));
        max_bin_count = std::max(max_bin_count, binned.back().cut.size() + 1);
    }
    const int mtry = std::clamp(options.mtry > 0 ? options.mtry : std::max(1, p / 3), 1, p);
    const auto min_leaf = static_cast<std::size_t>(options.min_leaf);

    RandomForest forest;
    forest.features_ = p;
    std::mt19937_64 rng(options.seed);
    std::vector<double> hist_sum(max_bin_count);
    std::vector<std::size_t> hist_n(max_bin_count);
    std::vector<int> feature_pool(static_cast<std::size_t>(p));

    for (int t = 0; t < options.trees; ++t) {
        std::vector<std::size_t> rows(n);
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        for (auto& r : rows) r = draw(rng);
        std::sort(rows.begin(), rows.end());

        struct Task {
            std::int32_t node;
            std::size_t begin, end;
        };
        const auto root = static_cast<std::int32_t>(forest.nodes_.size());
        forest.nodes_.push_back({});
        forest.roots_.push_back(root);
        std::vector<Task> stack{{root, 0, n}};
        while (!stack.empty()) {
            const Task task = stack.back();
            stack.pop_back();
            const std::size_t count = task.end - task.begin;
            double sum = 0.0;
            double lo = y[rows[task.begin]];
            double hi = lo;
            for (std::size_t i = task.begin; i < task.end; ++i) {
                const double v = y[rows[i]];
                sum += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            forest.nodes_[static_cast<std::size_t>(task.node)].value = sum / static_cast<double>(count);
            if (count < 2 * min_leaf || hi - lo <= 0.0) continue;

            std::iota(feature_pool.begin(), feature_pool.end(), 0);
            const double parent = sum * sum / static_cast<double>(count);
            double best_gain = 1e-12 * std::max(1.0, std::abs(parent));
            int best_feature = -1;
            std::size_t best_bin = 0;
            for (int m = 0; m < mtry; ++m) {
                std::uniform_int_distribution<int> pick(m, p - 1);
                std::swap(feature_pool[static_cast<std::size_t>(m)], feature_pool[static_cast<std::size_t>(pick(rng))]);
                const int j = feature_pool[static_cast<std::size_t>(m)];
                const auto& f = binned[static_cast<std::size_t>(j)];
                const std::size_t bins = f.cut.size() + 1;
                if (bins < 2) continue;
                std::fill_n(hist_sum.begin(), bins, 0.0);
                std::fill_n(hist_n.begin(), bins, 0);
                for (std::size_t i = task.begin; i < task.end; ++i) {
                    const auto b = f.bin[rows[i]];
                    hist_sum[b] += y[rows[i]];
                    ++hist_n[b];
                }
                double left_sum = 0.0;
                std::size_t left_n = 0;
                for (std::size_t b = 0; b + 1 < bins; ++b) {
                    left_sum += hist_sum[b];
                    left_n += hist_n[b];
                    if (left_n < min_leaf) continue;
                    const std::size_t right_n = count - left_n;
                    if (right_n < min_leaf) break;
                    if (hist_n[b] == 0) continue;
                    const double right_sum = sum - left_sum;
                    const double gain = left_sum * left_sum / static_cast<double>(left_n) +
                                        right_sum * right_sum / static_cast<double>(right_n) - parent;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = j;
                        best_bin = b;
                    }
                }
            }
            if (best_feature < 0) continue;

            const auto& f = binned[static_cast<std::size_t>(best_feature)];
            auto mid = std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(task.begin),
                                             rows.begin() + static_cast<std::ptrdiff_t>(task.end),
                                             [&](std::size_t r) { return f.bin[r] <= best_bin; });
            const auto split = static_cast<std::size_t>(mid - rows.begin());
            const auto left = static_cast<std::int32_t>(forest.nodes_.size());
            forest.nodes_.push_back({});
            forest.nodes_.push_back({});
            Node& node = forest.nodes_[static_cast<std::size_t>(task.node)];
            node.feature = best_feature;
            node.threshold = f.cut[best_bin];
            node.left = left;
            node.right = left + 1;
            stack.push_back({left + 1, split, task.end});
            stack.push_back({left, task.begin, split});
        }
    }
    return forest;
}

double RandomForest::predict(std::span<const double> row) const {
    if (row.size() != static_cast<std::size_t>(features_)) {
        throw InvalidArgument("feature vector has the wrong length");
    }
    double total = 0.0;
    for (const auto root : roots_) {
        std::int32_t at = root;
        while (nodes_[static_cast<std::size_t>(at)].feature >= 0) {
            const Node& node = nodes_[static_cast<std::size_t>(at)];
            at = row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
        }
        total += nodes_[static_cast<std::size_t>(at)].value;
    }
    return total / static_cast<double>(roots_.size());
}

std::vector<double> RandomForest::predict(const Eigen::MatrixXd& x) const {
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        out[static_cast<std::size_t>(i)] = predict(row);
    }
    return out;
}

}  // namespace carshare
