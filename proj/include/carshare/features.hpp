#pragma once

#include <carshare/geo.hpp>
#include <carshare/grid.hpp>
#include <carshare/ingest.hpp>
#include <carshare/time.hpp>

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace carshare {

enum class EventKind { pickup, dropoff };
std::string_view to_string(EventKind k);

/// Consecutive local calendar days of an observation period.
class Calendar {
public:
    Calendar() = default;
    explicit Calendar(std::vector<std::chrono::sys_days> days);
    static Calendar spanning(std::chrono::sys_days first, std::chrono::sys_days last);

    std::size_t size() const { return days_.size(); }
    bool empty() const { return days_.empty(); }
    std::chrono::sys_days day(std::size_t i) const { return days_.at(i); }
    const std::vector<std::chrono::sys_days>& days() const { return days_; }
    /// Sunday = 0.
    int day_of_week(std::size_t i) const { return carshare::day_of_week(days_.at(i)); }
    bool is_weekday(std::size_t i) const { return carshare::is_weekday(days_.at(i)); }
    std::optional<std::size_t> index_of(std::chrono::sys_days d) const;

private:
    std::vector<std::chrono::sys_days> days_;
};

/// Event counts for every active cell, bin and day of a calendar.
///
/// counts[cell][day * bins_per_day + bin] holds e_(i,d,t); empty bins are zeros.
struct EventPanel {
    EventKind kind = EventKind::pickup;
    int bin_minutes = 60;
    Calendar calendar;
    std::vector<CellId> cells;
    std::vector<std::vector<double>> counts;

    int bins_per_day() const { return 1440 / bin_minutes; }
    double at(std::size_t cell, std::size_t day, int bin) const {
        return counts[cell][day * static_cast<std::size_t>(bins_per_day()) + static_cast<std::size_t>(bin)];
    }
    double total(std::size_t cell) const;
    std::optional<std::size_t> cell_index(CellId c) const;
};

/// Local calendar covering every trip start and end.
Calendar trip_calendar(const TripSet& trips, const TimeZone& tz);

/// Bins trip starts (pickup) or ends (drop-off) by local time. Trips whose event
/// falls outside the calendar or outside every active cell are ignored.
/// Throws InvalidArgument when bin_minutes does not divide 1440.
EventPanel bin_events(const TripSet& trips, const Grid& grid, int bin_minutes, EventKind kind, const TimeZone& tz,
                      const Calendar& calendar);

struct FeatureRow {
    CellId cell;
    std::size_t day = 0;
    int bin = 0;
    int day_of_week = 0;  // Sunday = 0
    bool is_weekday = false;
    double neighbor_avg = 0.0;
    double target = 0.0;
};

/// Mean count over the active cells within `hops` of each cell, same day and bin.
/// Cells without active neighbours get 0.
std::vector<std::vector<double>> neighbour_averages(const EventPanel& panel, const Grid& grid, int hops = 2);

/// Total pickups plus drop-offs per panel cell.
std::vector<double> activity_totals(const EventPanel& pickups, const EventPanel& dropoffs);

/// One row per (cell, day, bin) for cells whose activity total exceeds min_events.
std::vector<FeatureRow> build_feature_table(const EventPanel& target, const Grid& grid,
                                            std::span<const double> activity, double min_events = 30.0,
                                            int hops = 2);

void write_event_series_csv(std::ostream& out, const EventPanel& panel);
void write_feature_table_csv(std::ostream& out, const std::vector<FeatureRow>& rows, const Calendar& calendar);

/// Shannon entropy (natural log) of category proportions; 0 when the total is 0.
double venue_entropy(std::span<const double> category_counts);

/// First-level venue categories; events are excluded since they are transient.
inline constexpr std::string_view kExcludedVenueCategory = "Event";

struct PoIProfile {
    std::string area_id;
    std::map<std::string, double> counts;
    double total = 0.0;
    double entropy = 0.0;
};

/// Reads `area_id,category,count` rows; rows of the excluded category are skipped.
std::vector<PoIProfile> read_poi_csv(std::istream& in);
void write_entropy_csv(std::ostream& out, const std::vector<PoIProfile>& profiles);

struct CensusUnit {
    std::string id;
    Ring polygon;
    double overlap_fraction = 0.0;
    std::map<std::string, double> indicators;  // already scaled by overlap_fraction
    double pickups = 0.0;
};

struct CensusOverlay {
    std::vector<CensusUnit> units;
    std::vector<std::string> discarded;
    /// Indicator names whose sample skewness exceeds the threshold.
    std::vector<std::string> skewed;
};

/// Reads a FeatureCollection of census polygons; every numeric property except
/// "id" is an indicator.
std::vector<CensusUnit> read_census_geojson(const nlohmann::json& doc);

/// Intersects each unit with the area, drops units overlapping less than
/// min_overlap, scales indicators by the overlap and counts pickups per unit.
/// Throws InputError when no unit survives.
CensusOverlay census_overlay(const std::vector<CensusUnit>& census, const OperationArea& area, const TripSet& trips,
                             double min_overlap = 0.20, double skew_threshold = 2.0);

/// Sample skewness (adjusted Fisher-Pearson); 0 for constant data.
double sample_skewness(std::span<const double> values);

/// Writes id, pickups, overlap_fraction and indicator columns. When PoI profiles are
/// given they are joined on area id and add poi_<category>, poi_total and
/// poi_entropy columns (zeros for units without venues).
void write_census_units_csv(std::ostream& out, const CensusOverlay& overlay,
                            const std::vector<PoIProfile>& pois = {});

}  // namespace carshare
