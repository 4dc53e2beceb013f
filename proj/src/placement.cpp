#include <carshare/placement.hpp>

#include <carshare/csv.hpp>
#include <carshare/parallel.hpp>

#include <algorithm>
#include <map>
#include <set>

namespace carshare {

namespace {

struct Sighting {
    std::size_t cell;
    std::uint32_t vehicle;
    std::int64_t day;
};

std::int64_t local_day(const TimeZone& tz, Timestamp t) {
    return std::chrono::floor<std::chrono::days>(tz.to_local(t)).time_since_epoch().count();
}

std::vector<CoverageRow> tabulate(std::vector<Sighting> sightings, const Grid& grid, std::size_t fleet,
                                  std::int64_t first_day, std::int64_t last_day, const CoverageOptions& options) {
    if (options.window_days <= 0) {
        throw InvalidArgument("window must be at least one day");
    }
    const auto period = last_day - first_day + 1;
    if (sightings.empty() || options.window_days > period) {
        throw InvalidArgument("window is longer than the observation period");
    }
    if (fleet == 0) {
        throw InvalidArgument("fleet size must be positive");
    }
    std::sort(sightings.begin(), sightings.end(), [](const Sighting& a, const Sighting& b) {
        return std::tie(a.cell, a.day, a.vehicle) < std::tie(b.cell, b.day, b.vehicle);
    });
    const auto& cells = grid.active_cells();
    std::vector<std::size_t> begin(cells.size() + 1, sightings.size());
    for (std::size_t i = sightings.size(); i-- > 0;) begin[sightings[i].cell] = i;
    for (std::size_t c = cells.size(); c-- > 0;) begin[c] = std::min(begin[c], begin[c + 1]);

    const auto n_windows = options.mode == WindowMode::first_window ? 1 : period - options.window_days + 1;
    std::vector<CoverageRow> rows(cells.size());
    parallel_for(cells.size(), [&](std::size_t c) {
        rows[c].cell = cells[c];
        // Vehicle-day presence for this cell, then a sliding count of days per vehicle.
        std::vector<std::vector<std::uint32_t>> by_day(static_cast<std::size_t>(period));
        for (std::size_t i = begin[c]; i < begin[c + 1]; ++i) {
            auto& day = by_day[static_cast<std::size_t>(sightings[i].day - first_day)];
            if (day.empty() || day.back() != sightings[i].vehicle) day.push_back(sightings[i].vehicle);
        }
        std::map<std::uint32_t, int> in_window;
        auto add = [&](std::size_t d) {
            for (auto v : by_day[d]) ++in_window[v];
        };
        auto remove = [&](std::size_t d) {
            for (auto v : by_day[d])
                if (--in_window[v] == 0) in_window.erase(v);
        };
        const auto w = static_cast<std::size_t>(options.window_days);
        for (std::size_t d = 0; d < w; ++d) add(d);
        rows[c].distinct_vehicles = in_window.size();
        for (std::int64_t s = 1; s < n_windows; ++s) {
            remove(static_cast<std::size_t>(s - 1));
            add(static_cast<std::size_t>(s) + w - 1);
            if (in_window.size() > rows[c].distinct_vehicles) {
                rows[c].distinct_vehicles = in_window.size();
                rows[c].window_start = static_cast<std::size_t>(s);
            }
        }
        rows[c].fleet_fraction =
            std::min(1.0, static_cast<double>(rows[c].distinct_vehicles) / static_cast<double>(fleet));
    });
    std::sort(rows.begin(), rows.end(), [](const CoverageRow& a, const CoverageRow& b) {
        if (a.distinct_vehicles != b.distinct_vehicles) return a.distinct_vehicles > b.distinct_vehicles;
        return a.cell < b.cell;
    });
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = i + 1;
    return rows;
}

}  // namespace

std::vector<CoverageRow> coverage(const SnapshotSet& snapshots, const Grid& grid, const CoverageOptions& options) {
    std::vector<Sighting> sightings;
    std::int64_t first = std::numeric_limits<std::int64_t>::max();
    std::int64_t last = std::numeric_limits<std::int64_t>::min();
    std::set<std::uint32_t> vehicles;
    for (const auto& r : snapshots.records()) {
        const auto day = local_day(options.tz, r.time);
        first = std::min(first, day);
        last = std::max(last, day);
        vehicles.insert(r.vehicle.value);
        if (auto cell = grid.locate_active(r.position)) {
            sightings.push_back({*grid.active_index(*cell), r.vehicle.value, day});
        }
    }
    const auto fleet = options.fleet_size > 0 ? options.fleet_size : vehicles.size();
    return tabulate(std::move(sightings), grid, fleet, first, last, options);
}

std::vector<CoverageRow> coverage(const TripSet& trips, const Grid& grid, const CoverageOptions& options) {
    std::vector<Sighting> sightings;
    std::int64_t first = std::numeric_limits<std::int64_t>::max();
    std::int64_t last = std::numeric_limits<std::int64_t>::min();
    std::map<std::string, std::uint32_t> vehicles;
    for (const auto& t : trips.trips) {
        const auto v = vehicles.emplace(t.vin, static_cast<std::uint32_t>(vehicles.size())).first->second;
        for (auto [time, where] : {std::pair{t.start_time, t.origin}, std::pair{t.end_time, t.destination}}) {
            const auto day = local_day(options.tz, time);
            first = std::min(first, day);
            last = std::max(last, day);
            if (auto cell = grid.locate_active(where)) {
                sightings.push_back({*grid.active_index(*cell), v, day});
            }
        }
    }
    const auto fleet = options.fleet_size > 0 ? options.fleet_size : vehicles.size();
    return tabulate(std::move(sightings), grid, fleet, first, last, options);
}

std::vector<CoverageRow> select_sites(const std::vector<CoverageRow>& table, double threshold, std::size_t top_k) {
    std::vector<CoverageRow> out;
    for (const auto& r : table) {
        if (r.fleet_fraction >= threshold) out.push_back(r);
    }
    std::sort(out.begin(), out.end(), [](const CoverageRow& a, const CoverageRow& b) {
        if (a.fleet_fraction != b.fleet_fraction) return a.fleet_fraction > b.fleet_fraction;
        return a.cell < b.cell;
    });
    if (out.size() > top_k) out.resize(top_k);
    return out;
}

void write_coverage_csv(std::ostream& out, const std::vector<CoverageRow>& rows) {
    csv::Writer w(out);
    w.row({"row", "col", "distinct_vehicles", "fleet_fraction", "rank"});
    for (const auto& r : rows) {
        w.row({std::to_string(r.cell.row), std::to_string(r.cell.col), std::to_string(r.distinct_vehicles),
               csv::num(r.fleet_fraction), std::to_string(r.rank)});
    }
}

nlohmann::json sites_geojson(const Grid& grid, const std::vector<CoverageRow>& sites) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& s : sites) {
        features.push_back({{"type", "Feature"},
                            {"properties",
                             {{"row", s.cell.row},
                              {"col", s.cell.col},
                              {"distinct_vehicles", s.distinct_vehicles},
                              {"fleet_fraction", s.fleet_fraction},
                              {"rank", s.rank}}},
                            {"geometry", ring_to_geojson_geometry(grid.cell_ring(s.cell))}});
    }
    return {{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace carshare
