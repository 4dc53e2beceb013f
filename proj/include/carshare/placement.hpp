#pragma once

#include <carshare/grid.hpp>
#include <carshare/ingest.hpp>
#include <carshare/time.hpp>

#include <nlohmann/json.hpp>

#include <ostream>
#include <vector>

namespace carshare {

enum class WindowMode { sliding_max, first_window };

struct CoverageOptions {
    int window_days = 30;
    WindowMode mode = WindowMode::sliding_max;
    TimeZone tz = TimeZone::utc();
    /// 0 means the number of distinct vehicles in the input.
    std::size_t fleet_size = 0;
};

struct CoverageRow {
    CellId cell;
    std::size_t distinct_vehicles = 0;
    double fleet_fraction = 0.0;
    std::size_t rank = 0;
    /// Local start date of the best window, as days since the first observed day.
    std::size_t window_start = 0;
};

/// Distinct vehicles parked in each active cell within a window of window_days
/// local days, maximised over all window positions (or the first one). Rows are
/// ranked by fraction, ties broken by (row, col). Throws InvalidArgument when the
/// window is non-positive or longer than the observation period.
std::vector<CoverageRow> coverage(const SnapshotSet& snapshots, const Grid& grid, const CoverageOptions& options = {});

/// Same, counting trip origins and destinations as presence.
std::vector<CoverageRow> coverage(const TripSet& trips, const Grid& grid, const CoverageOptions& options = {});

/// Cells reaching the threshold, best first, at most top_k.
std::vector<CoverageRow> select_sites(const std::vector<CoverageRow>& table, double threshold = 0.5,
                                      std::size_t top_k = 3);

void write_coverage_csv(std::ostream& out, const std::vector<CoverageRow>& rows);
nlohmann::json sites_geojson(const Grid& grid, const std::vector<CoverageRow>& sites);

}  // namespace carshare
