#include <carshare/features.hpp>

#include <carshare/csv.hpp>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

namespace carshare {

namespace bg = boost::geometry;

namespace {

using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint>;
using BgMulti = bg::model::multi_polygon<BgPolygon>;

BgPolygon to_polygon(const Ring& ring, const LocalProjection& proj) {
    BgPolygon poly;
    for (const auto& p : ring) {
        const PlanarPoint q = proj.to_plane(p);
        bg::append(poly.outer(), BgPoint(q.x, q.y));
    }
    if (!ring.empty()) {
        const PlanarPoint q = proj.to_plane(ring.front());
        bg::append(poly.outer(), BgPoint(q.x, q.y));
    }
    bg::correct(poly);
    return poly;
}

std::chrono::sys_days local_day(Timestamp t, const TimeZone& tz) {
    const auto local = tz.to_local(t);
    return std::chrono::sys_days(std::chrono::floor<std::chrono::days>(local).time_since_epoch());
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

std::string_view to_string(EventKind k) { return k == EventKind::pickup ? "pickup" : "dropoff"; }

Calendar::Calendar(std::vector<std::chrono::sys_days> days) : days_(std::move(days)) {
    std::sort(days_.begin(), days_.end());
    days_.erase(std::unique(days_.begin(), days_.end()), days_.end());
}

Calendar Calendar::spanning(std::chrono::sys_days first, std::chrono::sys_days last) {
    std::vector<std::chrono::sys_days> days;
    for (auto d = first; d <= last; d += std::chrono::days{1}) {
        days.push_back(d);
    }
    return Calendar(std::move(days));
}

std::optional<std::size_t> Calendar::index_of(std::chrono::sys_days d) const {
    auto it = std::lower_bound(days_.begin(), days_.end(), d);
    if (it == days_.end() || *it != d) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - days_.begin());
}

double EventPanel::total(std::size_t cell) const {
    double s = 0.0;
    for (double v : counts.at(cell)) s += v;
    return s;
}

std::optional<std::size_t> EventPanel::cell_index(CellId c) const {
    auto it = std::lower_bound(cells.begin(), cells.end(), c);
    if (it == cells.end() || *it != c) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - cells.begin());
}

Calendar trip_calendar(const TripSet& trips, const TimeZone& tz) {
    if (trips.trips.empty()) {
        return {};
    }
    auto first = local_day(trips.trips.front().start_time, tz);
    auto last = first;
    for (const auto& t : trips.trips) {
        first = std::min({first, local_day(t.start_time, tz), local_day(t.end_time, tz)});
        last = std::max({last, local_day(t.start_time, tz), local_day(t.end_time, tz)});
    }
    return Calendar::spanning(first, last);
}

EventPanel bin_events(const TripSet& trips, const Grid& grid, int bin_minutes, EventKind kind, const TimeZone& tz,
                      const Calendar& calendar) {
    if (bin_minutes <= 0 || 1440 % bin_minutes != 0) {
        throw InvalidArgument("bin length must divide 1440 minutes");
    }
    EventPanel panel;
    panel.kind = kind;
    panel.bin_minutes = bin_minutes;
    panel.calendar = calendar;
    panel.cells = grid.active_cells();
    const std::size_t width = calendar.size() * static_cast<std::size_t>(panel.bins_per_day());
    panel.counts.assign(panel.cells.size(), std::vector<double>(width, 0.0));
    for (const auto& t : trips.trips) {
        const Timestamp when = kind == EventKind::pickup ? t.start_time : t.end_time;
        const GeoPoint where = kind == EventKind::pickup ? t.origin : t.destination;
        const auto cell = grid.locate_active(where);
        if (!cell) continue;
        const auto local = tz.to_local(when);
        const auto midnight = std::chrono::floor<std::chrono::days>(local);
        const auto day = calendar.index_of(std::chrono::sys_days(midnight.time_since_epoch()));
        if (!day) continue;
        const auto minute = std::chrono::duration_cast<std::chrono::minutes>(local - midnight).count();
        const auto bin = static_cast<std::size_t>(minute / bin_minutes);
        const std::size_t ci = *grid.active_index(*cell);
        panel.counts[ci][*day * static_cast<std::size_t>(panel.bins_per_day()) + bin] += 1.0;
    }
    return panel;
}

std::vector<std::vector<double>> neighbour_averages(const EventPanel& panel, const Grid& grid, int hops) {
    std::vector<std::vector<double>> out(panel.cells.size());
    for (std::size_t i = 0; i < panel.cells.size(); ++i) {
        std::vector<std::size_t> idx;
        for (const auto& n : grid.neighbors(panel.cells[i], hops)) {
            if (auto j = panel.cell_index(n)) idx.push_back(*j);
        }
        const std::size_t width = panel.counts[i].size();
        out[i].assign(width, 0.0);
        if (idx.empty()) continue;
        for (std::size_t j : idx) {
            for (std::size_t k = 0; k < width; ++k) out[i][k] += panel.counts[j][k];
        }
        for (double& v : out[i]) v /= static_cast<double>(idx.size());
    }
    return out;
}

std::vector<double> activity_totals(const EventPanel& pickups, const EventPanel& dropoffs) {
    if (pickups.cells != dropoffs.cells) {
        throw InvalidArgument("pickup and drop-off panels cover different cells");
    }
    std::vector<double> out(pickups.cells.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = pickups.total(i) + dropoffs.total(i);
    }
    return out;
}

std::vector<FeatureRow> build_feature_table(const EventPanel& target, const Grid& grid,
                                            std::span<const double> activity, double min_events, int hops) {
    if (activity.size() != target.cells.size()) {
        throw InvalidArgument("activity totals do not match the panel cells");
    }
    const auto neigh = neighbour_averages(target, grid, hops);
    const int bins = target.bins_per_day();
    std::vector<FeatureRow> rows;
    for (std::size_t i = 0; i < target.cells.size(); ++i) {
        if (!(activity[i] > min_events)) continue;
        for (std::size_t d = 0; d < target.calendar.size(); ++d) {
            for (int b = 0; b < bins; ++b) {
                const std::size_t k = d * static_cast<std::size_t>(bins) + static_cast<std::size_t>(b);
                rows.push_back({target.cells[i], d, b, target.calendar.day_of_week(d), target.calendar.is_weekday(d),
                                neigh[i][k], target.counts[i][k]});
            }
        }
    }
    return rows;
}

void write_event_series_csv(std::ostream& out, const EventPanel& panel) {
    csv::Writer w(out);
    w.row({"row", "col", "kind", "date", "bin", "count"});
    const int bins = panel.bins_per_day();
    for (std::size_t i = 0; i < panel.cells.size(); ++i) {
        for (std::size_t d = 0; d < panel.calendar.size(); ++d) {
            const std::string date = format_date(std::chrono::year_month_day(panel.calendar.day(d)));
            for (int b = 0; b < bins; ++b) {
                w.row({std::to_string(panel.cells[i].row), std::to_string(panel.cells[i].col),
                       std::string(to_string(panel.kind)), date, std::to_string(b), csv::num(panel.at(i, d, b))});
            }
        }
    }
}

void write_feature_table_csv(std::ostream& out, const std::vector<FeatureRow>& rows, const Calendar& calendar) {
    csv::Writer w(out);
    w.row({"row", "col", "date", "day", "time_of_day", "day_of_week", "is_weekday", "neighbor_avg", "target"});
    for (const auto& r : rows) {
        w.row({std::to_string(r.cell.row), std::to_string(r.cell.col),
               format_date(std::chrono::year_month_day(calendar.day(r.day))), std::to_string(r.day),
               std::to_string(r.bin), std::to_string(r.day_of_week), r.is_weekday ? "1" : "0",
               csv::num(r.neighbor_avg), csv::num(r.target)});
    }
}

double venue_entropy(std::span<const double> category_counts) {
    double n = 0.0;
    for (double c : category_counts) {
        if (c < 0.0 || !std::isfinite(c)) {
            throw InvalidArgument("venue counts must be finite and non-negative");
        }
        n += c;
    }
    if (n <= 0.0) {
        return 0.0;
    }
    double e = 0.0;
    for (double c : category_counts) {
        if (c > 0.0) {
            const double p = c / n;
            e -= p * std::log(p);
        }
    }
    return std::max(0.0, e);
}

std::vector<PoIProfile> read_poi_csv(std::istream& in) {
    csv::Reader reader(in);
    const std::size_t c_area = reader.require("area_id");
    const std::size_t c_cat = reader.require("category");
    const std::size_t c_count = reader.require("count");
    const std::string excluded = lower(kExcludedVenueCategory);
    std::map<std::string, PoIProfile> by_area;
    std::vector<std::string> row;
    while (reader.next(row)) {
        if (row.size() < reader.header().size()) {
            throw InputError("short PoI row at line " + std::to_string(reader.line_number()));
        }
        double count = 0.0;
        const std::string& text = row[c_count];
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), count);
        if (ec != std::errc{} || ptr != text.data() + text.size() || count < 0.0) {
            throw InputError("invalid PoI count at line " + std::to_string(reader.line_number()));
        }
        auto& profile = by_area[row[c_area]];
        profile.area_id = row[c_area];
        if (lower(row[c_cat]) == excluded) continue;
        profile.counts[row[c_cat]] += count;
    }
    std::vector<PoIProfile> out;
    for (auto& [id, p] : by_area) {
        std::vector<double> counts;
        for (const auto& [cat, c] : p.counts) {
            counts.push_back(c);
            p.total += c;
        }
        p.entropy = venue_entropy(counts);
        out.push_back(std::move(p));
    }
    return out;
}

void write_entropy_csv(std::ostream& out, const std::vector<PoIProfile>& profiles) {
    csv::Writer w(out);
    w.row({"area_id", "total", "entropy"});
    for (const auto& p : profiles) {
        w.row({p.area_id, csv::num(p.total), csv::num(p.entropy)});
    }
}

std::vector<CensusUnit> read_census_geojson(const nlohmann::json& doc) {
    std::vector<CensusUnit> out;
    try {
        std::size_t index = 0;
        for (const auto& f : doc.at("features")) {
            CensusUnit unit;
            const auto props = f.value("properties", nlohmann::json::object());
            if (props.contains("id")) {
                const auto& id = props["id"];
                unit.id = id.is_string() ? id.get<std::string>() : id.dump();
            } else {
                unit.id = std::to_string(index);
            }
            for (const auto& [key, value] : props.items()) {
                if (key != "id" && value.is_number()) {
                    unit.indicators[key] = value.get<double>();
                }
            }
            unit.polygon = ring_from_geojson(f);
            out.push_back(std::move(unit));
            ++index;
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed census GeoJSON: ") + e.what());
    }
    return out;
}

double sample_skewness(std::span<const double> values) {
    const auto n = static_cast<double>(values.size());
    if (values.size() < 3) {
        return 0.0;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double m2 = 0.0;
    double m3 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if (m2 <= 1e-300) {
        return 0.0;
    }
    const double g1 = m3 / std::pow(m2, 1.5);
    return std::sqrt(n * (n - 1.0)) / (n - 2.0) * g1;
}

CensusOverlay census_overlay(const std::vector<CensusUnit>& census, const OperationArea& area, const TripSet& trips,
                             double min_overlap, double skew_threshold) {
    const LocalProjection& proj = area.projection();
    const BgPolygon area_poly = to_polygon(area.ring(), proj);
    CensusOverlay overlay;
    for (const auto& unit : census) {
        if (unit.polygon.size() < 3) {
            overlay.discarded.push_back(unit.id);
            continue;
        }
        const BgPolygon poly = to_polygon(unit.polygon, proj);
        const double full = bg::area(poly);
        BgMulti inter;
        bg::intersection(poly, area_poly, inter);
        const double fraction = full > 0.0 ? std::clamp(bg::area(inter) / full, 0.0, 1.0) : 0.0;
        if (fraction < min_overlap) {
            overlay.discarded.push_back(unit.id);
            continue;
        }
        CensusUnit kept = unit;
        kept.overlap_fraction = fraction;
        for (auto& [name, value] : kept.indicators) {
            value *= fraction;
        }
        kept.pickups = 0.0;
        for (const auto& t : trips.trips) {
            if (ring_contains(unit.polygon, t.origin)) kept.pickups += 1.0;
        }
        overlay.units.push_back(std::move(kept));
    }
    if (overlay.units.empty()) {
        throw InputError("no census unit overlaps the operation area by at least " +
                         csv::num(min_overlap * 100.0) + "% (" + std::to_string(overlay.discarded.size()) +
                         " discarded)");
    }
    std::set<std::string> names;
    for (const auto& u : overlay.units) {
        for (const auto& [name, v] : u.indicators) names.insert(name);
    }
    for (const auto& name : names) {
        std::vector<double> column;
        for (const auto& u : overlay.units) {
            auto it = u.indicators.find(name);
            column.push_back(it == u.indicators.end() ? 0.0 : it->second);
        }
        if (sample_skewness(column) > skew_threshold) {
            overlay.skewed.push_back(name);
        }
    }
    return overlay;
}

void write_census_units_csv(std::ostream& out, const CensusOverlay& overlay, const std::vector<PoIProfile>& pois) {
    std::set<std::string> names;
    for (const auto& u : overlay.units) {
        for (const auto& [name, v] : u.indicators) names.insert(name);
    }
    std::set<std::string> categories;
    std::map<std::string, const PoIProfile*> by_area;
    for (const auto& p : pois) {
        by_area[p.area_id] = &p;
        for (const auto& [cat, c] : p.counts) categories.insert(cat);
    }
    csv::Writer w(out);
    std::vector<std::string> header{"id", "pickups", "overlap_fraction"};
    header.insert(header.end(), names.begin(), names.end());
    if (!pois.empty()) {
        for (const auto& cat : categories) header.push_back("poi_" + cat);
        header.push_back("poi_total");
        header.push_back("poi_entropy");
    }
    w.row(header);
    for (const auto& u : overlay.units) {
        std::vector<std::string> row{u.id, csv::num(u.pickups), csv::num(u.overlap_fraction)};
        for (const auto& name : names) {
            auto it = u.indicators.find(name);
            row.push_back(csv::num(it == u.indicators.end() ? 0.0 : it->second));
        }
        if (!pois.empty()) {
            auto it = by_area.find(u.id);
            const PoIProfile* p = it == by_area.end() ? nullptr : it->second;
            for (const auto& cat : categories) {
                double c = 0.0;
                if (p) {
                    auto ct = p->counts.find(cat);
                    if (ct != p->counts.end()) c = ct->second;
                }
                row.push_back(csv::num(c));
            }
            row.push_back(csv::num(p ? p->total : 0.0));
            row.push_back(csv::num(p ? p->entropy : 0.0));
        }
        w.row(row);
    }
}

}  // namespace carshare
