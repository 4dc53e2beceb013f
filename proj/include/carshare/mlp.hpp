#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace carshare {

/// Per-column min-max scaling onto [-1, 1]. Constant columns map to 0.
class MinMaxScaler {
public:
    MinMaxScaler() = default;
    static MinMaxScaler fit(const Eigen::MatrixXd& x);

    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd inverse(const Eigen::MatrixXd& z) const;
    double transform(double v, Eigen::Index column) const;
    double inverse(double z, Eigen::Index column) const;

private:
    Eigen::RowVectorXd lo_;
    Eigen::RowVectorXd hi_;
};

struct MlpOptions {
    int hidden = 5;
    double learning_rate = 0.01;
    int max_epochs = 500;
    int patience = 25;
    int batch_size = 32;
    double validation_fraction = 0.2;
    int max_restarts = 3;
    std::uint64_t seed = 1;
};

/// Single hidden layer perceptron: tanh hidden units and a linear output.
///
/// Inputs and target are scaled to [-1, 1]. Training uses Adam on the squared
/// error with early stopping on a seeded random hold-out. When the loss diverges
/// the fit restarts with a ten times smaller step, up to max_restarts times, and
/// then throws Error.
class Mlp {
public:
    static Mlp fit(const Eigen::MatrixXd& x, std::span<const double> y, const MlpOptions& options = {});

    double predict(std::span<const double> row) const;
    std::vector<double> predict(const Eigen::MatrixXd& x) const;

    int hidden() const { return static_cast<int>(w1_.rows()); }
    int restarts() const { return restarts_; }

private:
    MinMaxScaler x_scale_;
    MinMaxScaler y_scale_;
    Eigen::MatrixXd w1_;  // hidden x inputs
    Eigen::VectorXd b1_;
    Eigen::RowVectorXd w2_;
    double b2_ = 0.0;
    int restarts_ = 0;
};

}  // namespace carshare
