#pragma once

#include <carshare/geo.hpp>
#include <carshare/time.hpp>
#include <carshare/types.hpp>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace carshare {

class Grid;

enum class Cleanliness : std::uint8_t { good, unacceptable, unknown };
enum class Engine : std::uint8_t { combustion, electric };

std::string_view to_string(Cleanliness c);
std::string_view to_string(Engine e);

/// Index into SnapshotSet::vins().
struct VehicleIndex {
    std::uint32_t value = 0;

    friend auto operator<=>(const VehicleIndex&, const VehicleIndex&) = default;
};

/// One available vehicle seen at one poll instant.
struct SnapshotRecord {
    VehicleIndex vehicle;
    Timestamp time;
    GeoPoint position;
    float fuel = 0.0f;
    Cleanliness interior = Cleanliness::unknown;
    Cleanliness exterior = Cleanliness::unknown;
    Engine engine = Engine::combustion;
};

/// Counts of records removed at each stage, plus free-form notes.
struct DiscardReport {
    std::size_t read = 0;
    std::size_t malformed = 0;
    std::size_t out_of_range = 0;
    std::size_t duplicates = 0;
    std::size_t outside_area = 0;
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
};

/// Deduplicated snapshot records, sorted by (vehicle, time).
class SnapshotSet {
public:
    SnapshotSet() = default;

    /// Interns the identifier and returns its index.
    VehicleIndex intern(const std::string& vin);
    /// Appends a record; call finalize() before using the set.
    void add(SnapshotRecord r) { records_.push_back(r); }
    /// Sorts by (vehicle, time) and keeps the first record of each duplicate pair.
    void finalize();

    const std::vector<std::string>& vins() const { return vins_; }
    const std::string& vin(VehicleIndex v) const { return vins_.at(v.value); }
    const std::vector<SnapshotRecord>& records() const { return records_; }
    std::vector<SnapshotRecord>& mutable_records() { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    /// Distinct poll instants present in the set, ascending.
    std::vector<Timestamp> poll_instants() const;

    std::string source;
    DiscardReport report;

private:
    std::vector<std::string> vins_;
    std::map<std::string, std::uint32_t, std::less<>> index_;
    std::vector<SnapshotRecord> records_;
};

/// Names of the eight input fields in the raw feed.
struct FieldMapping {
    std::string vin = "vin";
    std::string timestamp = "date_time";
    std::string lon = "lon";
    std::string lat = "lat";
    std::string fuel = "fuel";
    std::string interior = "interior";
    std::string exterior = "exterior";
    std::string engine = "engine";

    /// Reads "field = source_name" lines (INI style, '#' and ';' comments).
    static FieldMapping load(const std::filesystem::path& path);
};

enum class InputFormat { automatic, ndjson, csv };

SnapshotSet parse_snapshots(std::istream& in, const FieldMapping& mapping, InputFormat format,
                            const std::string& source_name = "<stream>");
/// Throws InputError when the file cannot be opened.
SnapshotSet parse_snapshots_file(const std::filesystem::path& path, const FieldMapping& mapping = {},
                                 InputFormat format = InputFormat::automatic);

/// Keeps records inside the operation area (boundary included).
SnapshotSet clean(const SnapshotSet& snapshots, const OperationArea& area);

/// Writes the canonical CSV snapshot layout using the default field names.
void write_snapshots_csv(std::ostream& out, const SnapshotSet& snapshots);

struct Trip {
    std::string vin;
    Timestamp start_time;
    Timestamp end_time;
    GeoPoint origin;
    GeoPoint destination;

    double duration_min() const {
        return std::chrono::duration<double, std::ratio<60>>(end_time - start_time).count();
    }
    double displacement_m() const { return haversine_m(origin, destination); }
};

struct TripSet {
    std::vector<Trip> trips;
    std::string source;
    DiscardReport report;
    /// Short disappearances that were neither jitter nor long enough to count as trips.
    std::size_t short_gaps = 0;
    std::size_t jitter_gaps = 0;
};

struct TripInferenceOptions {
    std::chrono::minutes min_gap{10};
    double jitter_radius_m = 30.0;
    std::chrono::minutes poll_interval{1};
};

/// One trip per unavailability gap of at least min_gap. A gap is the interval
/// between the last sighting and the reappearance of a vehicle.
TripSet infer_trips(const SnapshotSet& snapshots, const TripInferenceOptions& options = {});

void write_trips_csv(std::ostream& out, const TripSet& trips);
TripSet read_trips_csv(std::istream& in, const std::string& source_name = "<stream>");
TripSet read_trips_file(const std::filesystem::path& path);

/// Trips per vehicle per day over the whole fleet.
double utilisation_rate(std::size_t trip_count, std::size_t fleet_size, double observation_days);
double utilisation_rate(const TripSet& trips, std::size_t fleet_size, double observation_days);

struct CellUtilisation {
    CellId cell;
    std::size_t trips = 0;
    std::size_t vehicles_seen = 0;
    /// Trips originating in the cell / distinct vehicles picked up there / days.
    double per_vehicle_seen = 0.0;
    /// Trips originating in the cell / fleet size / days.
    double per_fleet_vehicle = 0.0;
};

/// Per-cell variant keyed by trip origin cell; both denominators are reported.
std::vector<CellUtilisation> utilisation_by_cell(const TripSet& trips, const Grid& grid, std::size_t fleet_size,
                                                 double observation_days);

}  // namespace carshare
