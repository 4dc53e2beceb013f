#include <carshare/mlp.hpp>

#include <carshare/types.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace carshare {

MinMaxScaler MinMaxScaler::fit(const Eigen::MatrixXd& x) {
    MinMaxScaler s;
    s.lo_ = x.colwise().minCoeff();
    s.hi_ = x.colwise().maxCoeff();
    return s;
}

double MinMaxScaler::transform(double v, Eigen::Index c) const {
    const double span = hi_(c) - lo_(c);
    if (!(span > 0.0)) return 0.0;
    return 2.0 * (v - lo_(c)) / span - 1.0;
}

double MinMaxScaler::inverse(double z, Eigen::Index c) const {
    const double span = hi_(c) - lo_(c);
    if (!(span > 0.0)) return lo_(c);
    return lo_(c) + (z + 1.0) * 0.5 * span;
}

Eigen::MatrixXd MinMaxScaler::transform(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd z(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) z(i, j) = transform(x(i, j), j);
    return z;
}

Eigen::MatrixXd MinMaxScaler::inverse(const Eigen::MatrixXd& z) const {
    Eigen::MatrixXd x(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j) x(i, j) = inverse(z(i, j), j);
    return x;
}

namespace {

struct Weights {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::RowVectorXd w2;
    double b2 = 0.0;
};

double mse(const Weights& w, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() == 0) return 0.0;
    const Eigen::MatrixXd h = ((w.w1 * x.transpose()).colwise() + w.b1).array().tanh();
    const Eigen::RowVectorXd out = (w.w2 * h).array() + w.b2;
    return (out.transpose() - y).squaredNorm() / static_cast<double>(x.rows());
}

// Returns false when the loss stops being finite.
bool train(Weights& best, const Eigen::MatrixXd& xt, const Eigen::VectorXd& yt, const Eigen::MatrixXd& xv,
           const Eigen::VectorXd& yv, const MlpOptions& o, double lr, std::mt19937_64& rng) {
    const auto inputs = xt.cols();
    const int hidden = o.hidden;
    Weights w;
    const double limit1 = std::sqrt(6.0 / static_cast<double>(inputs + hidden));
    const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    std::uniform_real_distribution<double> u1(-limit1, limit1), u2(-limit2, limit2);
    w.w1 = Eigen::MatrixXd::NullaryExpr(hidden, inputs, [&] { return u1(rng); });
    w.b1 = Eigen::VectorXd::Zero(hidden);
    w.w2 = Eigen::RowVectorXd::NullaryExpr(hidden, [&] { return u2(rng); });
    w.b2 = 0.0;

    Weights m1{Eigen::MatrixXd::Zero(hidden, inputs), Eigen::VectorXd::Zero(hidden), Eigen::RowVectorXd::Zero(hidden), 0.0};
    Weights m2 = m1;
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    const bool use_validation = xv.rows() > 0;
    double best_loss = std::numeric_limits<double>::infinity();
    best = w;
    int stale = 0;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(xt.rows()));
    std::iota(order.begin(), order.end(), 0);
    const auto batch = static_cast<Eigen::Index>(std::max(1, o.batch_size));

    for (int epoch = 0; epoch < o.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index start = 0; start < xt.rows(); start += batch) {
            const Eigen::Index len = std::min(batch, xt.rows() - start);
            Eigen::MatrixXd xb(len, inputs);
            Eigen::VectorXd yb(len);
            for (Eigen::Index i = 0; i < len; ++i) {
                xb.row(i) = xt.row(order[static_cast<std::size_t>(start + i)]);
                yb(i) = yt(order[static_cast<std::size_t>(start + i)]);
            }
            const Eigen::MatrixXd h = ((w.w1 * xb.transpose()).colwise() + w.b1).array().tanh();  // hidden x len
            const Eigen::RowVectorXd out = (w.w2 * h).array() + w.b2;
            const Eigen::RowVectorXd err = (out - yb.transpose()) * (2.0 / static_cast<double>(len));
            Weights g;
            g.w2 = err * h.transpose();
            g.b2 = err.sum();
            const Eigen::MatrixXd dh = (w.w2.transpose() * err).array() * (1.0 - h.array().square());
            g.w1 = dh * xb;
            g.b1 = dh.rowwise().sum();

            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            auto adam = [&](auto& param, auto& mm, auto& vv, const auto& grad) {
                mm = beta1 * mm + (1.0 - beta1) * grad;
                vv = beta2 * vv + (1.0 - beta2) * grad.cwiseProduct(grad);
                param -= (lr * (mm / c1).array() / ((vv / c2).array().sqrt() + eps)).matrix();
            };
            adam(w.w1, m1.w1, m2.w1, g.w1);
            adam(w.b1, m1.b1, m2.b1, g.b1);
            adam(w.w2, m1.w2, m2.w2, g.w2);
            m1.b2 = beta1 * m1.b2 + (1.0 - beta1) * g.b2;
            m2.b2 = beta2 * m2.b2 + (1.0 - beta2) * g.b2 * g.b2;
            w.b2 -= lr * (m1.b2 / c1) / (std::sqrt(m2.b2 / c2) + eps);
        }
        const double loss = use_validation ? mse(w, xv, yv) : mse(w, xt, yt);
        if (!std::isfinite(loss)) {
            return false;
        }
        if (loss < best_loss - 1e-12) {
            best_loss = loss;
            best = w;
            stale = 0;
        } else if (++stale >= o.patience) {
            break;
        }
    }
    return true;
}

}  // namespace

Mlp Mlp::fit(const Eigen::MatrixXd& x, std::span<const double> y, const MlpOptions& options) {
    const auto n = x.rows();
    if (n == 0 || x.cols() == 0 || y.size() != static_cast<std::size_t>(n)) {
        throw InvalidArgument("MLP needs a non-empty design and matching targets");
    }
    if (options.hidden < 1) {
        throw InvalidArgument("MLP needs at least one hidden unit");
    }
    Mlp model;
    model.x_scale_ = MinMaxScaler::fit(x);
    Eigen::MatrixXd ycol(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) ycol(i, 0) = y[static_cast<std::size_t>(i)];
    model.y_scale_ = MinMaxScaler::fit(ycol);
    const Eigen::MatrixXd z = model.x_scale_.transform(x);
    const Eigen::VectorXd t = model.y_scale_.transform(ycol).col(0);

    std::mt19937_64 rng(options.seed);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = n >= 10 ? static_cast<Eigen::Index>(std::floor(options.validation_fraction * n)) : 0;
    Eigen::MatrixXd xv(n_val, x.cols()), xt(n - n_val, x.cols());
    Eigen::VectorXd yv(n_val), yt(n - n_val);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = idx[static_cast<std::size_t>(i)];
        if (i < n_val) {
            xv.row(i) = z.row(r);
            yv(i) = t(r);
        } else {
            xt.row(i - n_val) = z.row(r);
            yt(i - n_val) = t(r);
        }
    }

    double lr = options.learning_rate;
    for (int attempt = 0; attempt <= options.max_restarts; ++attempt) {
        Weights w;
        if (train(w, xt, yt, xv, yv, options, lr, rng)) {
            model.w1_ = w.w1;
            model.b1_ = w.b1;
            model.w2_ = w.w2;
            model.b2_ = w.b2;
            model.restarts_ = attempt;
            return model;
        }
        lr /= 10.0;
    }
    throw Error("MLP training diverged after " + std::to_string(options.max_restarts) + " restarts");
}

double Mlp::predict(std::span<const double> row) const {
    if (row.size() != static_cast<std::size_t>(w1_.cols())) {
        throw InvalidArgument("feature vector has the wrong length");
    }
    Eigen::VectorXd z(w1_.cols());
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = x_scale_.transform(row[static_cast<std::size_t>(j)], j);
    const Eigen::VectorXd h = (w1_ * z + b1_).array().tanh();
    return y_scale_.inverse(w2_.dot(h) + b2_, 0);
}

std::vector<double> Mlp::predict(const Eigen::MatrixXd& x) const {
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        out[static_cast<std::size_t>(i)] = predict(row);
    }
    return out;
}

}  // namespace carshare
