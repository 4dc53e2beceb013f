#include <carshare/ingest.hpp>

#include <carshare/csv.hpp>
#include <carshare/grid.hpp>
#include <carshare/parallel.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace carshare {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

std::optional<double> parse_double(std::string_view s) {
    const std::string t = trim(s);
    if (t.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::optional<Cleanliness> parse_cleanliness(std::string_view s) {
    const std::string v = lower(trim(s));
    if (v == "good") return Cleanliness::good;
    if (v == "unacceptable" || v == "bad") return Cleanliness::unacceptable;
    if (v.empty() || v == "unknown" || v == "unavailable") return Cleanliness::unknown;
    return std::nullopt;
}

std::optional<Engine> parse_engine(std::string_view s) {
    const std::string v = lower(trim(s));
    if (v == "ce" || v == "combustion") return Engine::combustion;
    if (v == "ed" || v == "electric") return Engine::electric;
    return std::nullopt;
}

// Raw textual field values for one record, in mapping order.
struct RawRecord {
    std::string vin, timestamp, lon, lat, fuel, interior, exterior, engine;
};

enum class Verdict { ok, malformed, out_of_range };

Verdict convert(const RawRecord& raw, SnapshotSet& set, SnapshotRecord& out) {
    const std::string vin = trim(raw.vin);
    const auto time = parse_timestamp(raw.timestamp);
    const auto lon = parse_double(raw.lon);
    const auto lat = parse_double(raw.lat);
    const auto fuel = parse_double(raw.fuel);
    const auto interior = parse_cleanliness(raw.interior);
    const auto exterior = parse_cleanliness(raw.exterior);
    const auto engine = parse_engine(raw.engine);
    if (vin.empty() || !time || !lon || !lat || !fuel || !interior || !exterior || !engine) {
        return Verdict::malformed;
    }
    if (*lon < -180.0 || *lon > 180.0 || *lat < -90.0 || *lat > 90.0 || *fuel < 0.0 || *fuel > 100.0) {
        return Verdict::out_of_range;
    }
    out.vehicle = set.intern(vin);
    out.time = *time;
    out.position = {*lon, *lat};
    out.fuel = static_cast<float>(*fuel);
    out.interior = *interior;
    out.exterior = *exterior;
    out.engine = *engine;
    return Verdict::ok;
}

std::string json_field(const nlohmann::json& obj, const std::string& key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return {};
    }
    if (it->is_string()) {
        return it->get<std::string>();
    }
    if (it->is_number_integer()) {
        return std::to_string(it->get<long long>());
    }
    if (it->is_number()) {
        return csv::num(it->get<double>());
    }
    return it->dump();
}

void ingest_one(const RawRecord& raw, SnapshotSet& set) {
    ++set.report.read;
    SnapshotRecord rec;
    switch (convert(raw, set, rec)) {
        case Verdict::ok:
            set.add(rec);
            break;
        case Verdict::malformed:
            ++set.report.malformed;
            break;
        case Verdict::out_of_range:
            ++set.report.out_of_range;
            break;
    }
}

void parse_ndjson(std::istream& in, const FieldMapping& m, SnapshotSet& set) {
    std::string line;
    auto take = [&](const nlohmann::json& obj) {
        if (!obj.is_object()) {
            ++set.report.read;
            ++set.report.malformed;
            return;
        }
        ingest_one({json_field(obj, m.vin), json_field(obj, m.timestamp), json_field(obj, m.lon),
                    json_field(obj, m.lat), json_field(obj, m.fuel), json_field(obj, m.interior),
                    json_field(obj, m.exterior), json_field(obj, m.engine)},
                   set);
    };
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded()) {
            ++set.report.read;
            ++set.report.malformed;
            continue;
        }
        if (doc.is_array()) {
            for (const auto& obj : doc) take(obj);
        } else {
            take(doc);
        }
    }
}

void parse_csv(std::istream& in, const FieldMapping& m, SnapshotSet& set) {
    csv::Reader reader(in);
    const std::size_t c_vin = reader.require(m.vin);
    const std::size_t c_time = reader.require(m.timestamp);
    const std::size_t c_lon = reader.require(m.lon);
    const std::size_t c_lat = reader.require(m.lat);
    const std::size_t c_fuel = reader.require(m.fuel);
    const std::size_t c_int = reader.require(m.interior);
    const std::size_t c_ext = reader.require(m.exterior);
    const std::size_t c_eng = reader.require(m.engine);
    const std::size_t needed = std::max({c_vin, c_time, c_lon, c_lat, c_fuel, c_int, c_ext, c_eng});
    std::vector<std::string> row;
    while (reader.next(row)) {
        if (row.size() <= needed) {
            ++set.report.read;
            ++set.report.malformed;
            continue;
        }
        ingest_one({row[c_vin], row[c_time], row[c_lon], row[c_lat], row[c_fuel], row[c_int], row[c_ext], row[c_eng]},
                   set);
    }
}

}  // namespace

std::string_view to_string(Cleanliness c) {
    switch (c) {
        case Cleanliness::good: return "GOOD";
        case Cleanliness::unacceptable: return "UNACCEPTABLE";
        case Cleanliness::unknown: break;
    }
    return "UNKNOWN";
}

std::string_view to_string(Engine e) { return e == Engine::electric ? "ED" : "CE"; }

nlohmann::json DiscardReport::to_json() const {
    return {{"read", read},
            {"malformed", malformed},
            {"out_of_range", out_of_range},
            {"duplicates", duplicates},
            {"outside_area", outside_area},
            {"notes", notes}};
}

VehicleIndex SnapshotSet::intern(const std::string& vin) {
    auto it = index_.find(vin);
    if (it != index_.end()) {
        return {it->second};
    }
    const auto idx = static_cast<std::uint32_t>(vins_.size());
    vins_.push_back(vin);
    index_.emplace(vin, idx);
    return {idx};
}

void SnapshotSet::finalize() {
    std::stable_sort(records_.begin(), records_.end(), [](const SnapshotRecord& a, const SnapshotRecord& b) {
        return std::tie(a.vehicle, a.time) < std::tie(b.vehicle, b.time);
    });
    const auto before = records_.size();
    auto last = std::unique(records_.begin(), records_.end(), [](const SnapshotRecord& a, const SnapshotRecord& b) {
        return a.vehicle == b.vehicle && a.time == b.time;
    });
    records_.erase(last, records_.end());
    report.duplicates += before - records_.size();
}

std::vector<Timestamp> SnapshotSet::poll_instants() const {
    std::vector<Timestamp> out;
    out.reserve(records_.size() / std::max<std::size_t>(1, vins_.size()) + 1);
    for (const auto& r : records_) {
        out.push_back(r.time);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

FieldMapping FieldMapping::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot read field mapping: " + path.string());
    }
    FieldMapping m;
    std::map<std::string, std::string*> slots{{"vin", &m.vin},           {"timestamp", &m.timestamp},
                                              {"date_time", &m.timestamp}, {"lon", &m.lon},
                                              {"lat", &m.lat},           {"fuel", &m.fuel},
                                              {"interior", &m.interior}, {"exterior", &m.exterior},
                                              {"engine", &m.engine}};
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw InputError("malformed mapping line: " + t);
        }
        const std::string key = trim(std::string_view(t).substr(0, eq));
        std::string value = trim(std::string_view(t).substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        auto it = slots.find(key);
        if (it == slots.end()) {
            throw InputError("unknown mapping key: " + key);
        }
        *it->second = value;
    }
    return m;
}

SnapshotSet parse_snapshots(std::istream& in, const FieldMapping& mapping, InputFormat format,
                            const std::string& source_name) {
    SnapshotSet set;
    set.source = source_name;
    if (format == InputFormat::automatic) {
        const int c = (in >> std::ws).peek();
        format = (c == '{' || c == '[') ? InputFormat::ndjson : InputFormat::csv;
    }
    if (format == InputFormat::ndjson) {
        parse_ndjson(in, mapping, set);
    } else {
        parse_csv(in, mapping, set);
    }
    set.finalize();
    return set;
}

SnapshotSet parse_snapshots_file(const std::filesystem::path& path, const FieldMapping& mapping, InputFormat format) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot read snapshots: " + path.string());
    }
    if (format == InputFormat::automatic) {
        const auto ext = path.extension().string();
        if (ext == ".ndjson" || ext == ".jsonl" || ext == ".json") {
            format = InputFormat::ndjson;
        } else if (ext == ".csv") {
            format = InputFormat::csv;
        }
    }
    return parse_snapshots(in, mapping, format, path.string());
}

SnapshotSet clean(const SnapshotSet& snapshots, const OperationArea& area) {
    SnapshotSet out = snapshots;
    auto& recs = out.mutable_records();
    const auto before = recs.size();
    std::erase_if(recs, [&](const SnapshotRecord& r) { return !area.contains(r.position); });
    out.report.outside_area += before - recs.size();
    if (recs.empty()) {
        out.report.notes.push_back("no records left inside the operation area");
    }
    return out;
}

void write_snapshots_csv(std::ostream& out, const SnapshotSet& snapshots) {
    csv::Writer w(out);
    w.row({"vin", "date_time", "lon", "lat", "fuel", "interior", "exterior", "engine"});
    for (const auto& r : snapshots.records()) {
        w.row({snapshots.vin(r.vehicle), format_timestamp(r.time), csv::num(r.position.lon), csv::num(r.position.lat),
               csv::num(static_cast<double>(r.fuel)), std::string(to_string(r.interior)),
               std::string(to_string(r.exterior)), std::string(to_string(r.engine))});
    }
}

TripSet infer_trips(const SnapshotSet& snapshots, const TripInferenceOptions& options) {
    TripSet result;
    result.source = snapshots.source;
    result.report = snapshots.report;

    const auto& recs = snapshots.records();
    const std::vector<Timestamp> polls = snapshots.poll_instants();
    // A vehicle counts as missing only if the feed polled while it was absent.
    auto polled_between = [&](Timestamp a, Timestamp b) {
        auto it = std::upper_bound(polls.begin(), polls.end(), a);
        return it != polls.end() && *it < b;
    };

    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t i = 0; i < recs.size();) {
        std::size_t j = i;
        while (j < recs.size() && recs[j].vehicle == recs[i].vehicle) ++j;
        ranges.emplace_back(i, j);
        i = j;
    }

    struct PerVehicle {
        std::vector<Trip> trips;
        std::size_t short_gaps = 0;
        std::size_t jitter_gaps = 0;
    };
    std::vector<PerVehicle> parts(ranges.size());
    parallel_for(ranges.size(), [&](std::size_t v) {
        auto [begin, end] = ranges[v];
        PerVehicle& part = parts[v];
        for (std::size_t i = begin; i + 1 < end; ++i) {
            const SnapshotRecord& a = recs[i];
            const SnapshotRecord& b = recs[i + 1];
            if (!polled_between(a.time, b.time)) {
                continue;
            }
            const auto gap = b.time - a.time;
            const double moved = haversine_m(a.position, b.position);
            if (gap >= options.min_gap) {
                part.trips.push_back({snapshots.vin(a.vehicle), a.time, b.time, a.position, b.position});
            } else if (moved < options.jitter_radius_m) {
                ++part.jitter_gaps;
            } else {
                ++part.short_gaps;
            }
        }
    });

    for (auto& part : parts) {
        result.short_gaps += part.short_gaps;
        result.jitter_gaps += part.jitter_gaps;
        std::move(part.trips.begin(), part.trips.end(), std::back_inserter(result.trips));
    }
    std::sort(result.trips.begin(), result.trips.end(), [](const Trip& a, const Trip& b) {
        return std::tie(a.start_time, a.vin, a.end_time) < std::tie(b.start_time, b.vin, b.end_time);
    });
    return result;
}

void write_trips_csv(std::ostream& out, const TripSet& trips) {
    csv::Writer w(out);
    w.row({"vin", "start_time", "end_time", "origin_lon", "origin_lat", "dest_lon", "dest_lat", "duration_min",
           "displacement_m"});
    for (const auto& t : trips.trips) {
        w.row({t.vin, format_timestamp(t.start_time), format_timestamp(t.end_time), csv::num(t.origin.lon),
               csv::num(t.origin.lat), csv::num(t.destination.lon), csv::num(t.destination.lat),
               csv::num(t.duration_min()), fmt::format("{:.1f}", t.displacement_m())});
    }
}

TripSet read_trips_csv(std::istream& in, const std::string& source_name) {
    csv::Reader reader(in);
    const std::size_t c_vin = reader.require("vin");
    const std::size_t c_start = reader.require("start_time");
    const std::size_t c_end = reader.require("end_time");
    const std::size_t c_olon = reader.require("origin_lon");
    const std::size_t c_olat = reader.require("origin_lat");
    const std::size_t c_dlon = reader.require("dest_lon");
    const std::size_t c_dlat = reader.require("dest_lat");
    TripSet set;
    set.source = source_name;
    std::vector<std::string> row;
    while (reader.next(row)) {
        ++set.report.read;
        if (row.size() < reader.header().size()) {
            ++set.report.malformed;
            continue;
        }
        auto s = parse_timestamp(row[c_start]);
        auto e = parse_timestamp(row[c_end]);
        auto olon = parse_double(row[c_olon]);
        auto olat = parse_double(row[c_olat]);
        auto dlon = parse_double(row[c_dlon]);
        auto dlat = parse_double(row[c_dlat]);
        if (!s || !e || !olon || !olat || !dlon || !dlat || !(*e > *s)) {
            ++set.report.malformed;
            continue;
        }
        set.trips.push_back({row[c_vin], *s, *e, {*olon, *olat}, {*dlon, *dlat}});
    }
    return set;
}

TripSet read_trips_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot read trips: " + path.string());
    }
    return read_trips_csv(in, path.string());
}

double utilisation_rate(std::size_t trip_count, std::size_t fleet_size, double observation_days) {
    if (fleet_size == 0 || !(observation_days > 0.0)) {
        throw InvalidArgument("utilisation rate needs a positive fleet size and observation period");
    }
    return static_cast<double>(trip_count) / static_cast<double>(fleet_size) / observation_days;
}

double utilisation_rate(const TripSet& trips, std::size_t fleet_size, double observation_days) {
    return utilisation_rate(trips.trips.size(), fleet_size, observation_days);
}

std::vector<CellUtilisation> utilisation_by_cell(const TripSet& trips, const Grid& grid, std::size_t fleet_size,
                                                 double observation_days) {
    if (fleet_size == 0 || !(observation_days > 0.0)) {
        throw InvalidArgument("utilisation rate needs a positive fleet size and observation period");
    }
    std::map<CellId, std::pair<std::size_t, std::set<std::string_view>>> per_cell;
    for (const auto& t : trips.trips) {
        if (auto cell = grid.locate_active(t.origin)) {
            auto& slot = per_cell[*cell];
            ++slot.first;
            slot.second.insert(t.vin);
        }
    }
    std::vector<CellUtilisation> out;
    out.reserve(per_cell.size());
    for (const auto& [cell, slot] : per_cell) {
        CellUtilisation u;
        u.cell = cell;
        u.trips = slot.first;
        u.vehicles_seen = slot.second.size();
        u.per_vehicle_seen = static_cast<double>(u.trips) / static_cast<double>(u.vehicles_seen) / observation_days;
        u.per_fleet_vehicle = static_cast<double>(u.trips) / static_cast<double>(fleet_size) / observation_days;
        out.push_back(u);
    }
    return out;
}

}  // namespace carshare
