#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace carshare {

struct SarimaOrder {
    int p = 0, d = 0, q = 0;
    int P = 0, D = 0, Q = 0;
    int S = 1;
    bool include_mean = false;

    std::string to_string() const;
    friend bool operator==(const SarimaOrder&, const SarimaOrder&) = default;
};

struct SarimaOptions {
    int max_p = 3;
    int max_q = 3;
    int max_P = 1;
    int max_Q = 1;
    /// Differencing orders; -1 selects them from the data (KPSS and seasonal strength).
    int d = -1;
    int D = -1;
    /// Hyndman-Khandakar neighbourhood search; false tries every (p, q, P, Q).
    bool stepwise = true;
    int max_models = 94;
    /// Re-estimate the selected model by exact Gaussian likelihood.
    bool exact_refit = true;
};

/// A fitted seasonal ARIMA model:
/// phi(B) Phi(B^S) (1-B)^d (1-B^S)^D (y_t - mu) = theta(B) Theta(B^S) e_t.
class SarimaModel {
public:
    const SarimaOrder& order() const { return order_; }
    const std::vector<double>& phi() const { return phi_; }
    const std::vector<double>& theta() const { return theta_; }
    const std::vector<double>& seasonal_phi() const { return sphi_; }
    const std::vector<double>& seasonal_theta() const { return stheta_; }
    double mean() const { return mean_; }
    double sigma2() const { return sigma2_; }
    double loglik() const { return loglik_; }
    double aicc() const { return aicc_; }
    /// True when the coefficients come from exact maximum likelihood.
    bool exact() const { return exact_; }

    /// Point forecasts for the h steps after the training series (unclamped).
    std::vector<double> forecast(std::size_t h) const;

private:
    friend SarimaModel fit_sarima_order(std::span<const double>, const SarimaOrder&, bool);

    SarimaOrder order_;
    std::vector<double> phi_, theta_, sphi_, stheta_;
    double mean_ = 0.0;
    double sigma2_ = 0.0;
    double loglik_ = 0.0;
    double aicc_ = 0.0;
    bool exact_ = false;
    std::vector<double> y_;
};

/// Fits one order by conditional sum of squares, optionally refined by exact
/// likelihood. Throws Error when the estimate is non-stationary or non-invertible.
SarimaModel fit_sarima_order(std::span<const double> y, const SarimaOrder& order, bool exact = false);

struct SarimaSelection {
    SarimaModel model;
    std::size_t models_tried = 0;
    std::vector<std::string> warnings;
};

/// Selects and fits a model by AICc. Throws InvalidArgument when the series is
/// shorter than three seasons and Error when no candidate can be fitted.
SarimaSelection fit_sarima(std::span<const double> y, int S, const SarimaOptions& options = {});

/// KPSS level-stationarity statistic with a Bartlett long-run variance.
double kpss_statistic(std::span<const double> y, int lags);
/// 0 or 1: first differences needed at the 5% level.
int kpss_ndiffs(std::span<const double> y);
/// Seasonal strength from a classical additive decomposition, in [0, 1].
double seasonal_strength(std::span<const double> y, int S);
/// 1 when the seasonal strength exceeds 0.64.
int seasonal_ndiffs(std::span<const double> y, int S);

/// Coefficients of (1-B)^d (1-B^S)^D, constant term first.
std::vector<double> differencing_polynomial(int d, int D, int S);

}  // namespace carshare
