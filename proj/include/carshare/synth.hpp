#pragma once

#include <carshare/grid.hpp>
#include <carshare/ingest.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace carshare {

enum class CellClass { day, night, neutral, airport };

std::string_view to_string(CellClass c);

/// A synthetic city: rectangular operation area, fleet, and demand process.
///
/// Every parked vehicle is picked up with a per-minute probability that follows
/// the daily shape of its cell's class, a weekday/weekend multiplier and a shared
/// day-level lognormal factor. Destinations are drawn from class-specific
/// time-of-day weights. Day cells receive vehicles in the morning and lose them in
/// the evening, night cells the reverse, neutral cells are flat.
struct CityScenario {
    std::string city = "Synthetica";
    GeoPoint south_west{9.10, 45.40};
    double width_m = 5000.0;
    double height_m = 5000.0;
    double cell_side_m = 500.0;
    std::size_t fleet_size = 60;
    int days = 14;
    std::chrono::sys_days start = std::chrono::sys_days(std::chrono::year{2016} / 10 / 3);
    int poll_minutes = 1;
    /// Pickup intensity for a parked vehicle, in trips per day at the mean shape.
    double trips_per_vehicle_day = 4.0;
    /// Weekday demand divided by weekend demand.
    double weekday_weekend_ratio = 1.0;
    /// SD of the log of the day-level demand factor.
    double day_noise_sd = 0.0;
    /// Shares of cells planted as day and night cells; the rest are neutral.
    double day_share = 0.3;
    double night_share = 0.3;
    bool airport = false;
    /// Pickup and drop-off weight of the airport relative to an ordinary cell.
    double airport_weight = 12.0;
    /// Extra destination weight for cells of the origin's class.
    double same_class_bias = 0.2;
    int min_trip_minutes = 12;
    int max_trip_minutes = 40;
    /// Share of extra records planted outside the area under separate vehicle ids.
    double outlier_fraction = 0.0;
    std::uint64_t seed = 1;

    /// Throws InvalidArgument for an inconsistent scenario.
    void validate() const;
};

/// Reads "key = value" pairs (INI syntax, optional [scenario] section).
CityScenario load_scenario(const std::filesystem::path& path);
void write_scenario(std::ostream& out, const CityScenario& s);

struct RegimeDay {
    std::chrono::sys_days date;
    bool weekday = true;
    double factor = 1.0;
};

struct SynthCity {
    OperationArea area;
    Grid grid;
    SnapshotSet snapshots;
    /// Completed trips, sorted like infer_trips() output.
    TripSet trips;
    std::vector<std::pair<CellId, CellClass>> classes;
    std::vector<RegimeDay> calendar;
    std::vector<std::string> outlier_vins;
    std::size_t outlier_records = 0;
    double realised_trips_per_vehicle_day = 0.0;
    std::vector<std::string> warnings;

    std::optional<CellClass> class_of(CellId c) const;
};

/// Deterministic for a given scenario, seed included.
SynthCity generate_city(const CityScenario& scenario);

/// Demand-only city for forecasting: a rows x cols grid of cells with Poisson
/// pickup counts per bin, no fleet constraint.
struct DemandScenario {
    GeoPoint south_west{9.10, 45.40};
    int rows = 10;
    int cols = 5;
    double cell_side_m = 500.0;
    int days = 45;
    std::chrono::sys_days start = std::chrono::sys_days(std::chrono::year{2016} / 10 / 3);
    int bin_minutes = 60;
    /// Mean pickups per cell and bin before multipliers.
    double mean_rate = 3.0;
    /// SD of the log of the per-cell base rate.
    double cell_spread_sd = 0.5;
    /// 0 gives a flat day; 1 gives strong morning and evening peaks.
    double daily_amplitude = 1.0;
    double weekday_weekend_ratio = 1.0;
    /// SD of the log of a city-wide factor per day.
    double day_noise_sd = 0.0;
    std::uint64_t seed = 1;
};

struct DemandCity {
    OperationArea area;
    Grid grid;
    TripSet trips;
    /// rates[cell][day * bins + bin], cells in grid.active_cells() order.
    std::vector<std::vector<double>> rates;
    std::vector<RegimeDay> calendar;
};

DemandCity generate_demand(const DemandScenario& scenario);

void write_classes_csv(std::ostream& out, const SynthCity& city);
void write_calendar_csv(std::ostream& out, const std::vector<RegimeDay>& calendar);

}  // namespace carshare
