#pragma once

#include <carshare/features.hpp>
#include <carshare/forest.hpp>
#include <carshare/kmeans.hpp>
#include <carshare/mlp.hpp>
#include <carshare/sarima.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace carshare {

struct SplitSpec {
    double train_fraction = 0.8;
    std::size_t min_days = 5;
};

struct DaySplit {
    std::vector<std::chrono::sys_days> train;
    std::vector<std::chrono::sys_days> test;
};

/// Temporal split: the earliest floor(fraction * n) distinct days train, the rest
/// test. Input order is irrelevant. Throws InvalidArgument for fewer than
/// min_days days or a split leaving either side empty.
DaySplit split_days(std::vector<std::chrono::sys_days> days, const SplitSpec& spec = {});

enum class Method { ha, hm, ha_plus, hm_plus, sarima, rf, mlp, weikl };

inline constexpr std::array<Method, 8> kAllMethods{Method::ha,     Method::hm, Method::ha_plus, Method::hm_plus,
                                                   Method::sarima, Method::rf, Method::mlp,     Method::weikl};

/// "HA", "HM", "HA+", "HM+", "SARIMA", "RF", "MLP", "WEIKL".
std::string_view to_string(Method m);
/// Case-insensitive; also accepts "arima" and "nn".
std::optional<Method> parse_method(std::string_view text);

/// Everything a forecaster may look at. Panel days are consecutive and sorted;
/// the first train_days of them are training days.
struct DemandData {
    EventPanel panel;
    std::vector<std::vector<double>> neighbor_avg;  // same shape as panel.counts
    std::size_t train_days = 0;
    /// Panel cell indices that are modelled and evaluated.
    std::vector<std::size_t> cells;

    int bins() const { return panel.bins_per_day(); }
    std::size_t days() const { return panel.calendar.size(); }
    std::size_t test_days() const { return days() - train_days; }
};

/// Assembles DemandData: neighbour averages over `hops`, the split on the panel
/// calendar, and the cells whose activity total exceeds min_events.
DemandData make_demand_data(const EventPanel& panel, const Grid& grid, std::span<const double> activity,
                            const SplitSpec& split = {}, double min_events = 30.0, int hops = 2);

struct ForecastOptions {
    std::uint64_t seed = 1;
    /// Cross-validation folds inside the training days for RF and MLP.
    int cv_folds = 5;
    /// Random row folds instead of contiguous day blocks.
    bool random_folds = false;
    ForestOptions forest;
    std::vector<int> mtry_candidates{2, 4, 5};
    MlpOptions mlp;
    std::vector<int> hidden_candidates{1, 3, 5, 10, 20, 30};
    SarimaOptions sarima;
    GapOptions gap;
};

/// A fitted model. predict() is defined for modelled cells on test days and
/// always returns a finite, non-negative value.
class Forecaster {
public:
    virtual ~Forecaster() = default;
    virtual Method method() const = 0;
    virtual double predict(std::size_t cell, std::size_t day, int bin) const = 0;

    const std::vector<std::string>& warnings() const { return warnings_; }

protected:
    std::vector<std::string> warnings_;
};

std::unique_ptr<Forecaster> fit_forecaster(Method method, const DemandData& data, const ForecastOptions& options = {});

/// Per-bin mean or median over training days, optionally pooled by weekday/weekend.
/// Exposed separately because other forecasters fall back to it.
std::unique_ptr<Forecaster> fit_baseline(Method variant, const DemandData& data);

/// Number of model features: time of day, six day-of-week dummies (Sunday is the
/// reference level), weekday flag and neighbour average.
inline constexpr int kFeatureCount = 9;
std::array<double, kFeatureCount> feature_vector(const DemandData& data, std::size_t cell, std::size_t day, int bin);

/// Day-regime forecaster: per timeslot PCA, k-means with the gap statistic and a
/// from-to matrix between consecutive timeslots.
class WeiklForecaster : public Forecaster {
public:
    struct Slot {
        Pca pca;
        KMeansResult groups;
        std::vector<int> day_group;  // per training day
        /// from_to[g][h]: share of days in group g here that fall in group h at the next timeslot.
        std::vector<std::vector<double>> from_to;
        /// variation[g][c]: mean change to the next timeslot for modelled cell c.
        std::vector<std::vector<double>> variation;
        std::vector<double> train_mean;  // per modelled cell
    };

    WeiklForecaster(const DemandData& data, const GapOptions& gap);

    Method method() const override { return Method::weikl; }
    double predict(std::size_t cell, std::size_t day, int bin) const override;

    const std::vector<Slot>& slots() const { return slots_; }

private:
    const DemandData* data_;
    std::vector<Slot> slots_;
    std::vector<int> column_;  // panel cell -> modelled column, -1 when absent
};

/// RMSE of a forecaster over all test days and bins of one panel cell.
double evaluate_cell(const Forecaster& f, const DemandData& data, std::size_t cell);

struct Comparison {
    std::vector<Method> methods;
    std::vector<std::size_t> cells;         // panel cell indices
    std::vector<std::vector<double>> rmse;  // [method][cell]
    std::vector<std::unique_ptr<Forecaster>> models;

    /// Method with the lowest RMSE for each cell; ties go to the earlier method.
    std::vector<Method> best_per_cell() const;
    double median_rmse(Method m) const;
};

Comparison compare_forecasters(const DemandData& data, const std::vector<Method>& methods,
                               const ForecastOptions& options = {});

void write_rmse_csv(std::ostream& out, const Comparison& c, const DemandData& data);
void write_best_method_csv(std::ostream& out, const Comparison& c, const DemandData& data);
/// Boxplot statistics per method plus best-method counts.
nlohmann::json comparison_summary(const Comparison& c);
/// Predicted and observed test series for one panel cell.
void write_tagged_series_csv(std::ostream& out, const Comparison& c, const DemandData& data, std::size_t cell);

struct BalanceRow {
    CellId cell;
    double vehicles = 0.0;
    double dropoffs = 0.0;
    double pickups = 0.0;
    double balance = 0.0;
};

inline double expected_balance(double vehicles, double dropoffs, double pickups) {
    return vehicles + dropoffs - pickups;
}

/// One row per cell; negative balances mark deficit cells. Throws InvalidArgument
/// when the inputs are not aligned.
std::vector<BalanceRow> balance(const std::vector<CellId>& cells, std::span<const double> vehicles,
                                std::span<const double> pickups, std::span<const double> dropoffs);
void write_balance_csv(std::ostream& out, const std::vector<BalanceRow>& rows);

}  // namespace carshare
