#include <carshare/sarima.hpp>

#include <carshare/stats.hpp>
#include <carshare/types.hpp>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <tuple>

namespace carshare {

namespace {

constexpr double kSigma2Floor = 1e-12;

std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

// 1 + sign * (c_1 B^lag + c_2 B^(2 lag) + ...)
std::vector<double> lag_poly(std::span<const double> c, int lag, double sign) {
    std::vector<double> out(c.size() * static_cast<std::size_t>(lag) + 1, 0.0);
    out[0] = 1.0;
    for (std::size_t i = 0; i < c.size(); ++i) out[(i + 1) * static_cast<std::size_t>(lag)] = sign * c[i];
    return out;
}

// Largest modulus among the inverse roots of 1 + sign * sum c_i z^i.
double max_inverse_root(std::span<const double> c, double sign) {
    std::size_t n = c.size();
    while (n > 0 && std::abs(c[n - 1]) < 1e-12) --n;
    if (n == 0) return 0.0;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) companion(0, static_cast<Eigen::Index>(i)) = -sign * c[i];
    for (std::size_t i = 1; i < n; ++i) companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    return Eigen::EigenSolver<Eigen::MatrixXd>(companion, false).eigenvalues().cwiseAbs().maxCoeff();
}

// Sparse lag representation of an expanded polynomial, constant term dropped.
struct Lagged {
    std::vector<std::size_t> lag;
    std::vector<double> coef;
};

Lagged sparse(const std::vector<double>& poly, double sign) {
    Lagged out;
    for (std::size_t k = 1; k < poly.size(); ++k) {
        if (poly[k] != 0.0) {
            out.lag.push_back(k);
            out.coef.push_back(sign * poly[k]);
        }
    }
    return out;
}

struct Params {
    std::vector<double> phi, theta, sphi, stheta;
    double mean = 0.0;
};

Params unpack(const SarimaOrder& o, const Eigen::VectorXd& x) {
    Params p;
    Eigen::Index i = 0;
    for (int k = 0; k < o.p; ++k) p.phi.push_back(x(i++));
    for (int k = 0; k < o.q; ++k) p.theta.push_back(x(i++));
    for (int k = 0; k < o.P; ++k) p.sphi.push_back(x(i++));
    for (int k = 0; k < o.Q; ++k) p.stheta.push_back(x(i++));
    if (o.include_mean) p.mean = x(i++);
    return p;
}

int n_params(const SarimaOrder& o) { return o.p + o.q + o.P + o.Q + (o.include_mean ? 1 : 0); }

// AR coefficients a_k (w_t = sum a_k w_{t-k} + ...) and MA coefficients b_k.
std::pair<std::vector<double>, std::vector<double>> expand(const SarimaOrder& o, const Params& p) {
    const auto ar = poly_mul(lag_poly(p.phi, 1, -1.0), lag_poly(p.sphi, o.S, -1.0));
    const auto ma = poly_mul(lag_poly(p.theta, 1, 1.0), lag_poly(p.stheta, o.S, 1.0));
    std::vector<double> a(ar.size() - 1), b(ma.size() - 1);
    for (std::size_t k = 1; k < ar.size(); ++k) a[k - 1] = -ar[k];
    for (std::size_t k = 1; k < ma.size(); ++k) b[k - 1] = ma[k];
    return {a, b};
}

bool admissible(const Params& p) {
    constexpr double limit = 0.999;
    return max_inverse_root(p.phi, -1.0) < limit && max_inverse_root(p.sphi, -1.0) < limit &&
           max_inverse_root(p.theta, 1.0) < limit && max_inverse_root(p.stheta, 1.0) < limit;
}

std::vector<double> difference(std::span<const double> y, const std::vector<double>& c) {
    const std::size_t lag = c.size() - 1;
    std::vector<double> w;
    if (y.size() <= lag) return w;
    w.reserve(y.size() - lag);
    for (std::size_t t = lag; t < y.size(); ++t) {
        double s = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * y[t - k];
        w.push_back(s);
    }
    return w;
}

// Conditional residuals; the first `ncond` residuals are zero by construction.
std::vector<double> css_residuals(const std::vector<double>& w, const SarimaOrder& o, const Params& p,
                                  std::size_t& ncond) {
    const auto [a, b] = expand(o, p);
    const Lagged ar = sparse([&] {
        std::vector<double> v(a.size() + 1, 0.0);
        for (std::size_t k = 0; k < a.size(); ++k) v[k + 1] = a[k];
        return v;
    }(), 1.0);
    const Lagged ma = sparse([&] {
        std::vector<double> v(b.size() + 1, 0.0);
        for (std::size_t k = 0; k < b.size(); ++k) v[k + 1] = b[k];
        return v;
    }(), 1.0);
    ncond = a.size();
    std::vector<double> e(w.size(), 0.0);
    for (std::size_t t = ncond; t < w.size(); ++t) {
        double r = w[t] - p.mean;
        for (std::size_t i = 0; i < ar.lag.size(); ++i) r -= ar.coef[i] * (w[t - ar.lag[i]] - p.mean);
        for (std::size_t i = 0; i < ma.lag.size(); ++i) {
            if (ma.lag[i] <= t) r -= ma.coef[i] * e[t - ma.lag[i]];
        }
        e[t] = r;
    }
    return e;
}

// Innovations v_t and their variances F_t (in units of sigma^2) from the Kalman
// filter of the ARMA state-space form. Returns false for a non-stationary model.
bool kalman_innovations(const std::vector<double>& w, const SarimaOrder& o, const Params& p, std::vector<double>& v,
                        std::vector<double>& F) {
    const auto [a, b] = expand(o, p);
    const std::size_t r = std::max(a.size(), b.size() + 1);
    Eigen::VectorXd t = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r));
    Eigen::VectorXd R = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r));
    for (std::size_t k = 0; k < a.size(); ++k) t(static_cast<Eigen::Index>(k)) = a[k];
    R(0) = 1.0;
    for (std::size_t k = 0; k < b.size(); ++k) R(static_cast<Eigen::Index>(k + 1)) = b[k];
    const auto ri = static_cast<Eigen::Index>(r);
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(ri, ri);
    T.col(0) = t;
    for (Eigen::Index i = 0; i + 1 < ri; ++i) T(i, i + 1) = 1.0;
    const Eigen::MatrixXd RR = R * R.transpose();

    // Stationary covariance by the doubling algorithm.
    Eigen::MatrixXd P = RR;
    Eigen::MatrixXd A = T;
    bool converged = false;
    for (int it = 0; it < 64; ++it) {
        const Eigen::MatrixXd step = A * P * A.transpose();
        P += step;
        A = A * A;
        if (!P.allFinite()) return false;
        if (step.cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff())) {
            converged = true;
            break;
        }
    }
    if (!converged) return false;

    // T M T' with T = [t | shifted identity], in O(r^2).
    auto propagate = [&](const Eigen::MatrixXd& M) {
        Eigen::MatrixXd TM(ri, ri);
        for (Eigen::Index i = 0; i < ri; ++i) {
            TM.row(i) = t(i) * M.row(0);
            if (i + 1 < ri) TM.row(i) += M.row(i + 1);
        }
        Eigen::MatrixXd out(ri, ri);
        for (Eigen::Index j = 0; j < ri; ++j) {
            out.col(j) = t(j) * TM.col(0);
            if (j + 1 < ri) out.col(j) += TM.col(j + 1);
        }
        return out;
    };

    Eigen::VectorXd state = Eigen::VectorXd::Zero(ri);
    v.assign(w.size(), 0.0);
    F.assign(w.size(), 1.0);
    bool steady = false;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double f = P(0, 0);
        if (!(f > 0.0) || !std::isfinite(f)) return false;
        const double innov = w[k] - p.mean - state(0);
        v[k] = innov;
        F[k] = f;
        const Eigen::VectorXd gain = P.col(0) / f;
        state += gain * innov;
        // Predict the next state: T a.
        const double head = state(0);
        for (Eigen::Index i = 0; i + 1 < ri; ++i) state(i) = state(i + 1) + t(i) * head;
        state(ri - 1) = t(ri - 1) * head;
        if (!steady) {
            const Eigen::MatrixXd updated = P - gain * P.row(0);
            const Eigen::MatrixXd next = propagate(updated) + RR;
            steady = std::abs(next(0, 0) - 1.0) < 1e-9 && (next - P).cwiseAbs().maxCoeff() < 1e-9;
            P = next;
        }
    }
    return true;
}

template <typename Residuals>
struct LmFunctor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    Residuals residuals;
    int n_inputs;
    int n_values;

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
        residuals(x, fvec);
        return 0;
    }
    int inputs() const { return n_inputs; }
    int values() const { return n_values; }
};

template <typename Residuals>
Eigen::VectorXd least_squares(Residuals residuals, Eigen::VectorXd x, int n_values) {
    if (x.size() == 0) return x;
    LmFunctor<Residuals> functor{std::move(residuals), static_cast<int>(x.size()), n_values};
    Eigen::NumericalDiff<LmFunctor<Residuals>> numdiff(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<LmFunctor<Residuals>>> lm(numdiff);
    lm.parameters.maxfev = 200 * static_cast<int>(x.size() + 1);
    lm.parameters.xtol = 1e-8;
    lm.parameters.ftol = 1e-10;
    lm.minimize(x);
    return x;
}

double aicc_of(double loglik, int k, std::size_t n) {
    const double kk = k + 1.0;  // variance parameter included
    const double nn = static_cast<double>(n);
    if (nn - kk - 1.0 <= 0.0) return std::numeric_limits<double>::infinity();
    return -2.0 * loglik + 2.0 * kk + 2.0 * kk * (kk + 1.0) / (nn - kk - 1.0);
}

}  // namespace

std::string SarimaOrder::to_string() const {
    return fmt::format("({},{},{})({},{},{})[{}]{}", p, d, q, P, D, Q, S, include_mean ? " with mean" : "");
}

std::vector<double> differencing_polynomial(int d, int D, int S) {
    std::vector<double> c{1.0};
    for (int i = 0; i < d; ++i) c = poly_mul(c, {1.0, -1.0});
    for (int i = 0; i < D; ++i) {
        std::vector<double> s(static_cast<std::size_t>(S) + 1, 0.0);
        s[0] = 1.0;
        s[static_cast<std::size_t>(S)] = -1.0;
        c = poly_mul(c, s);
    }
    return c;
}

SarimaModel fit_sarima_order(std::span<const double> y, const SarimaOrder& order, bool exact) {
    if (order.S < 1 || order.p < 0 || order.q < 0 || order.P < 0 || order.Q < 0 || order.d < 0 || order.D < 0) {
        throw InvalidArgument("invalid SARIMA order " + order.to_string());
    }
    const auto c = differencing_polynomial(order.d, order.D, order.S);
    const std::vector<double> w = difference(y, c);
    const int k = n_params(order);
    const std::size_t ncond_expected = static_cast<std::size_t>(order.p + order.S * order.P);
    if (w.size() < ncond_expected + static_cast<std::size_t>(k) + 3) {
        throw Error("series too short for " + order.to_string());
    }

    Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
    if (order.include_mean) x(k - 1) = stats::mean(w);
    const std::size_t nw = w.size();
    auto css = [&](const Eigen::VectorXd& params, Eigen::VectorXd& out) {
        std::size_t ncond = 0;
        const auto e = css_residuals(w, order, unpack(order, params), ncond);
        out.resize(static_cast<Eigen::Index>(nw - ncond));
        for (std::size_t t = ncond; t < nw; ++t) {
            out(static_cast<Eigen::Index>(t - ncond)) = std::isfinite(e[t]) ? e[t] : 1e150;
        }
    };
    x = least_squares(css, x, static_cast<int>(nw - ncond_expected));

    SarimaModel model;
    model.order_ = order;
    model.y_.assign(y.begin(), y.end());
    Params p = unpack(order, x);
    if (!admissible(p) || !x.allFinite()) {
        throw Error("estimate for " + order.to_string() + " is non-stationary or non-invertible");
    }

    std::size_t ncond = 0;
    const auto e = css_residuals(w, order, p, ncond);
    double ss = 0.0;
    for (std::size_t t = ncond; t < nw; ++t) ss += e[t] * e[t];
    const std::size_t n_used = nw - ncond;
    double sigma2 = std::max(ss / static_cast<double>(n_used), kSigma2Floor);
    // Candidates condition on different numbers of start values; the likelihood is
    // put on the full differenced length so their AICc values are comparable.
    double loglik = -0.5 * static_cast<double>(nw) * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0);
    std::size_t n_lik = nw;

    if (exact) {
        auto ml = [&](const Eigen::VectorXd& params, Eigen::VectorXd& out) {
            out.resize(static_cast<Eigen::Index>(nw));
            std::vector<double> v, F;
            const Params q = unpack(order, params);
            if (!admissible(q) || !kalman_innovations(w, order, q, v, F)) {
                out.setConstant(1e150);
                return;
            }
            double mean_log_f = 0.0;
            for (double f : F) mean_log_f += std::log(f);
            mean_log_f /= static_cast<double>(nw);
            const double g = std::exp(0.5 * mean_log_f);
            for (std::size_t t = 0; t < nw; ++t) out(static_cast<Eigen::Index>(t)) = v[t] / std::sqrt(F[t]) * g;
        };
        Eigen::VectorXd xm = least_squares(ml, x, static_cast<int>(nw));
        const Params q = unpack(order, xm);
        std::vector<double> v, F;
        if (xm.allFinite() && admissible(q) && kalman_innovations(w, order, q, v, F)) {
            double s = 0.0;
            double sum_log_f = 0.0;
            for (std::size_t t = 0; t < nw; ++t) {
                s += v[t] * v[t] / F[t];
                sum_log_f += std::log(F[t]);
            }
            const double s2 = std::max(s / static_cast<double>(nw), kSigma2Floor);
            const double ll =
                -0.5 * (static_cast<double>(nw) * (std::log(2.0 * std::numbers::pi * s2) + 1.0) + sum_log_f);
            if (std::isfinite(ll)) {
                p = q;
                sigma2 = s2;
                loglik = ll;
                n_lik = nw;
                model.exact_ = true;
            }
        }
    }

    model.phi_ = p.phi;
    model.theta_ = p.theta;
    model.sphi_ = p.sphi;
    model.stheta_ = p.stheta;
    model.mean_ = p.mean;
    model.sigma2_ = sigma2;
    model.loglik_ = loglik;
    model.aicc_ = aicc_of(loglik, k, n_lik);
    return model;
}

std::vector<double> SarimaModel::forecast(std::size_t h) const {
    const auto c = differencing_polynomial(order_.d, order_.D, order_.S);
    std::vector<double> w = difference(y_, c);
    Params p{phi_, theta_, sphi_, stheta_, mean_};
    std::size_t ncond = 0;
    std::vector<double> e = css_residuals(w, order_, p, ncond);
    const auto [a, b] = expand(order_, p);
    const std::size_t nw = w.size();
    for (std::size_t step = 0; step < h; ++step) {
        const std::size_t t = nw + step;
        double value = mean_;
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (k + 1 <= t) value += a[k] * (w[t - k - 1] - mean_);
        }
        for (std::size_t k = 0; k < b.size(); ++k) {
            if (k + 1 <= t) value += b[k] * e[t - k - 1];
        }
        w.push_back(value);
        e.push_back(0.0);
    }
    std::vector<double> y = y_;
    std::vector<double> out;
    out.reserve(h);
    for (std::size_t step = 0; step < h; ++step) {
        const std::size_t t = y_.size() + step;
        double value = w[nw + step];
        for (std::size_t k = 1; k < c.size(); ++k) value -= c[k] * y[t - k];
        y.push_back(value);
        out.push_back(value);
    }
    return out;
}

double kpss_statistic(std::span<const double> y, int lags) {
    const std::size_t n = y.size();
    if (n < 3) return 0.0;
    const double m = stats::mean(y);
    std::vector<double> e(n);
    for (std::size_t t = 0; t < n; ++t) e[t] = y[t] - m;
    double s2 = 0.0;
    for (double v : e) s2 += v * v;
    for (int s = 1; s <= lags && static_cast<std::size_t>(s) < n; ++s) {
        double acc = 0.0;
        for (std::size_t t = static_cast<std::size_t>(s); t < n; ++t) acc += e[t] * e[t - static_cast<std::size_t>(s)];
        s2 += 2.0 * (1.0 - s / (lags + 1.0)) * acc;
    }
    s2 /= static_cast<double>(n);
    if (!(s2 > 1e-12)) return 0.0;
    double partial = 0.0;
    double eta = 0.0;
    for (double v : e) {
        partial += v;
        eta += partial * partial;
    }
    return eta / (static_cast<double>(n) * static_cast<double>(n) * s2);
}

int kpss_ndiffs(std::span<const double> y) {
    const int lags = static_cast<int>(std::trunc(4.0 * std::pow(static_cast<double>(y.size()) / 100.0, 0.25)));
    return kpss_statistic(y, lags) > 0.463 ? 1 : 0;
}

double seasonal_strength(std::span<const double> y, int S) {
    const std::size_t n = y.size();
    const auto s = static_cast<std::size_t>(S);
    if (S < 2 || n < 2 * s) return 0.0;
    // Centred moving average of order S (2 x S for even S).
    std::vector<double> trend(n, std::numeric_limits<double>::quiet_NaN());
    const std::size_t half = s / 2;
    for (std::size_t t = half; t + half < n; ++t) {
        double acc = 0.0;
        if (s % 2 == 0) {
            acc = 0.5 * (y[t - half] + y[t + half]);
            for (std::size_t k = t - half + 1; k < t + half; ++k) acc += y[k];
        } else {
            for (std::size_t k = t - half; k <= t + half; ++k) acc += y[k];
        }
        trend[t] = acc / static_cast<double>(s);
    }
    std::vector<double> phase_sum(s, 0.0), phase_n(s, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        if (std::isnan(trend[t])) continue;
        phase_sum[t % s] += y[t] - trend[t];
        phase_n[t % s] += 1.0;
    }
    std::vector<double> seasonal(s);
    for (std::size_t k = 0; k < s; ++k) seasonal[k] = phase_n[k] > 0 ? phase_sum[k] / phase_n[k] : 0.0;
    const double centre = stats::mean(seasonal);
    for (double& v : seasonal) v -= centre;
    std::vector<double> remainder, detrended;
    for (std::size_t t = 0; t < n; ++t) {
        if (std::isnan(trend[t])) continue;
        const double dt = y[t] - trend[t];
        detrended.push_back(dt);
        remainder.push_back(dt - seasonal[t % s]);
    }
    const double vd = stats::variance(detrended);
    if (!(vd > 1e-12)) return 0.0;
    return std::clamp(1.0 - stats::variance(remainder) / vd, 0.0, 1.0);
}

int seasonal_ndiffs(std::span<const double> y, int S) { return seasonal_strength(y, S) > 0.64 ? 1 : 0; }

SarimaSelection fit_sarima(std::span<const double> y, int S, const SarimaOptions& options) {
    if (S < 1) {
        throw InvalidArgument("season length must be positive");
    }
    if (y.size() < 3 * static_cast<std::size_t>(S)) {
        throw InvalidArgument("SARIMA needs at least three seasons of training data");
    }
    SarimaSelection sel;
    const int D = options.D >= 0 ? options.D : (S > 1 ? seasonal_ndiffs(y, S) : 0);
    int d = options.d;
    if (d < 0) {
        const auto w = difference(y, differencing_polynomial(0, D, S));
        d = kpss_ndiffs(w);
    }
    const int max_P = S > 1 ? options.max_P : 0;
    const int max_Q = S > 1 ? options.max_Q : 0;

    using Key = std::tuple<int, int, int, int>;
    std::map<Key, double> tried;
    std::optional<SarimaModel> best;
    auto attempt = [&](int p, int q, int P, int Q) {
        if (p < 0 || q < 0 || P < 0 || Q < 0 || p > options.max_p || q > options.max_q || P > max_P || Q > max_Q) {
            return false;
        }
        const Key key{p, q, P, Q};
        if (tried.count(key) || tried.size() >= static_cast<std::size_t>(options.max_models)) return false;
        SarimaOrder o{p, d, q, P, D, Q, S, d == 0 && D == 0};
        double score = std::numeric_limits<double>::infinity();
        try {
            SarimaModel m = fit_sarima_order(y, o, false);
            score = m.aicc();
            if (!best || score < best->aicc()) {
                best = std::move(m);
                tried[key] = score;
                return true;
            }
        } catch (const Error&) {
            // Inadmissible or too short: excluded from the search.
        }
        tried[key] = score;
        return false;
    };

    if (options.stepwise) {
        attempt(std::min(2, options.max_p), 2 <= options.max_q ? 2 : options.max_q, std::min(1, max_P),
                std::min(1, max_Q));
        attempt(0, 0, 0, 0);
        attempt(std::min(1, options.max_p), 0, std::min(1, max_P), 0);
        attempt(0, std::min(1, options.max_q), 0, std::min(1, max_Q));
        bool improved = best.has_value();
        while (improved) {
            improved = false;
            const auto& o = best->order();
            const std::array<std::array<int, 4>, 12> moves{{{1, 0, 0, 0},
                                                            {-1, 0, 0, 0},
                                                            {0, 1, 0, 0},
                                                            {0, -1, 0, 0},
                                                            {0, 0, 1, 0},
                                                            {0, 0, -1, 0},
                                                            {0, 0, 0, 1},
                                                            {0, 0, 0, -1},
                                                            {1, 1, 0, 0},
                                                            {-1, -1, 0, 0},
                                                            {0, 0, 1, 1},
                                                            {0, 0, -1, -1}}};
            const int p0 = o.p, q0 = o.q, P0 = o.P, Q0 = o.Q;
            for (const auto& m : moves) {
                if (attempt(p0 + m[0], q0 + m[1], P0 + m[2], Q0 + m[3])) {
                    improved = true;
                    break;
                }
            }
        }
    } else {
        for (int p = 0; p <= options.max_p; ++p)
            for (int q = 0; q <= options.max_q; ++q)
                for (int P = 0; P <= max_P; ++P)
                    for (int Q = 0; Q <= max_Q; ++Q) attempt(p, q, P, Q);
    }
    sel.models_tried = tried.size();
    if (!best) {
        throw Error("no admissible SARIMA candidate");
    }
    if (options.exact_refit) {
        try {
            sel.model = fit_sarima_order(y, best->order(), true);
            if (!sel.model.exact()) {
                sel.warnings.push_back("exact likelihood refit failed; keeping the conditional estimate");
            }
        } catch (const Error& e) {
            sel.model = *best;
            sel.warnings.push_back(std::string("exact refit rejected: ") + e.what());
        }
    } else {
        sel.model = *best;
    }
    return sel;
}

}  // namespace carshare
