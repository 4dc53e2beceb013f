#include <carshare/synth.hpp>

#include <carshare/csv.hpp>
#include <carshare/stats.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace carshare {

std::string_view to_string(CellClass c) {
    switch (c) {
        case CellClass::day: return "day";
        case CellClass::night: return "night";
        case CellClass::neutral: return "neutral";
        case CellClass::airport: return "airport";
    }
    return "neutral";
}

void CityScenario::validate() const {
    if (!(width_m > 0.0) || !(height_m > 0.0) || !(cell_side_m > 0.0)) {
        throw InvalidArgument("area and cell sizes must be positive");
    }
    if (fleet_size == 0 || days <= 0) {
        throw InvalidArgument("fleet size and days must be positive");
    }
    if (poll_minutes <= 0 || 1440 % poll_minutes != 0) {
        throw InvalidArgument("poll interval must divide 1440 minutes");
    }
    if (trips_per_vehicle_day < 0.0 || !(weekday_weekend_ratio > 0.0) || day_noise_sd < 0.0) {
        throw InvalidArgument("demand parameters must be non-negative");
    }
    if (day_share < 0.0 || night_share < 0.0 || day_share + night_share > 1.0) {
        throw InvalidArgument("class shares must lie in [0, 1] and sum to at most 1");
    }
    if (min_trip_minutes < 1 || max_trip_minutes < min_trip_minutes) {
        throw InvalidArgument("trip duration range is empty");
    }
    if (outlier_fraction < 0.0 || outlier_fraction >= 1.0) {
        throw InvalidArgument("outlier fraction must lie in [0, 1)");
    }
}

CityScenario load_scenario(const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw InputError(fmt::format("{}: {}", path.string(), e.what()));
    }
    const auto& t = tree.get_child_optional("scenario") ? tree.get_child("scenario") : tree;
    CityScenario s;
    try {
        s.city = t.get("city", s.city);
        s.south_west.lon = t.get("south_west_lon", s.south_west.lon);
        s.south_west.lat = t.get("south_west_lat", s.south_west.lat);
        s.width_m = t.get("width_m", s.width_m);
        s.height_m = t.get("height_m", s.height_m);
        s.cell_side_m = t.get("cell_side_m", s.cell_side_m);
        s.fleet_size = t.get("fleet_size", s.fleet_size);
        s.days = t.get("days", s.days);
        if (auto start = t.get_optional<std::string>("start_date")) {
            auto d = parse_date(*start);
            if (!d) throw InputError(fmt::format("{}: bad start_date '{}'", path.string(), *start));
            s.start = std::chrono::sys_days(*d);
        }
        s.poll_minutes = t.get("poll_minutes", s.poll_minutes);
        s.trips_per_vehicle_day = t.get("trips_per_vehicle_day", s.trips_per_vehicle_day);
        s.weekday_weekend_ratio = t.get("weekday_weekend_ratio", s.weekday_weekend_ratio);
        s.day_noise_sd = t.get("day_noise_sd", s.day_noise_sd);
        s.day_share = t.get("day_share", s.day_share);
        s.night_share = t.get("night_share", s.night_share);
        s.airport = t.get("airport", s.airport);
        s.airport_weight = t.get("airport_weight", s.airport_weight);
        s.same_class_bias = t.get("same_class_bias", s.same_class_bias);
        s.min_trip_minutes = t.get("min_trip_minutes", s.min_trip_minutes);
        s.max_trip_minutes = t.get("max_trip_minutes", s.max_trip_minutes);
        s.outlier_fraction = t.get("outlier_fraction", s.outlier_fraction);
        s.seed = t.get("seed", s.seed);
    } catch (const boost::property_tree::ptree_error& e) {
        throw InputError(fmt::format("{}: {}", path.string(), e.what()));
    }
    s.validate();
    return s;
}

void write_scenario(std::ostream& out, const CityScenario& s) {
    out << "[scenario]\n";
    out << "city = " << s.city << '\n';
    out << "south_west_lon = " << csv::num(s.south_west.lon) << '\n';
    out << "south_west_lat = " << csv::num(s.south_west.lat) << '\n';
    out << "width_m = " << csv::num(s.width_m) << '\n';
    out << "height_m = " << csv::num(s.height_m) << '\n';
    out << "cell_side_m = " << csv::num(s.cell_side_m) << '\n';
    out << "fleet_size = " << s.fleet_size << '\n';
    out << "days = " << s.days << '\n';
    out << "start_date = " << format_date(std::chrono::year_month_day(s.start)) << '\n';
    out << "poll_minutes = " << s.poll_minutes << '\n';
    out << "trips_per_vehicle_day = " << csv::num(s.trips_per_vehicle_day) << '\n';
    out << "weekday_weekend_ratio = " << csv::num(s.weekday_weekend_ratio) << '\n';
    out << "day_noise_sd = " << csv::num(s.day_noise_sd) << '\n';
    out << "day_share = " << csv::num(s.day_share) << '\n';
    out << "night_share = " << csv::num(s.night_share) << '\n';
    out << "airport = " << (s.airport ? "true" : "false") << '\n';
    out << "airport_weight = " << csv::num(s.airport_weight) << '\n';
    out << "same_class_bias = " << csv::num(s.same_class_bias) << '\n';
    out << "min_trip_minutes = " << s.min_trip_minutes << '\n';
    out << "max_trip_minutes = " << s.max_trip_minutes << '\n';
    out << "outlier_fraction = " << csv::num(s.outlier_fraction) << '\n';
    out << "seed = " << s.seed << '\n';
}

std::optional<CellClass> SynthCity::class_of(CellId c) const {
    auto it = std::lower_bound(classes.begin(), classes.end(), c,
                               [](const auto& entry, CellId key) { return entry.first < key; });
    if (it == classes.end() || it->first != c) return std::nullopt;
    return it->second;
}

namespace {

constexpr int kMinutesPerDay = 1440;

OperationArea rectangle_area(const std::string& city, GeoPoint south_west, double width_m, double height_m) {
    const LocalProjection proj(south_west);
    const GeoPoint north_east = proj.to_geo({width_m, height_m});
    return OperationArea(city, rectangle_ring(south_west, north_east));
}

double bump(double hour, double centre, double width) {
    double d = std::abs(hour - centre);
    d = std::min(d, 24.0 - d);
    return std::exp(-0.5 * d * d / (width * width));
}

/// Pickup and drop-off intensity shapes by hour, each averaging 1 over the day.
struct Shapes {
    std::array<std::array<double, kMinutesPerDay>, 4> pickup;
    std::array<std::array<double, kMinutesPerDay>, 4> dropoff;

    Shapes() {
        auto fill = [](std::array<double, kMinutesPerDay>& a, auto f) {
            double sum = 0.0;
            for (int m = 0; m < kMinutesPerDay; ++m) sum += a[static_cast<std::size_t>(m)] = f(m / 60.0);
            for (double& v : a) v *= kMinutesPerDay / sum;
        };
        auto idx = [](CellClass c) { return static_cast<std::size_t>(c); };
        // Day cells fill up in the morning and empty in the evening; night cells the reverse.
        fill(pickup[idx(CellClass::day)], [](double h) { return 0.15 + bump(h, 18.0, 1.5) + 0.3 * bump(h, 13.0, 1.0); });
        fill(dropoff[idx(CellClass::day)], [](double h) { return 0.15 + bump(h, 8.5, 1.5) + 0.3 * bump(h, 13.0, 1.0); });
        fill(pickup[idx(CellClass::night)], [](double h) { return 0.15 + bump(h, 8.0, 1.5) + 0.2 * bump(h, 13.0, 2.0); });
        fill(dropoff[idx(CellClass::night)], [](double h) { return 0.15 + bump(h, 19.0, 1.5) + 0.2 * bump(h, 23.0, 1.5); });
        fill(pickup[idx(CellClass::neutral)], [](double h) { return 0.6 + bump(h, 8.0, 1.5) + bump(h, 18.0, 1.5); });
        fill(dropoff[idx(CellClass::neutral)], [](double h) { return 0.6 + bump(h, 8.5, 1.5) + bump(h, 18.5, 1.5); });
        fill(pickup[idx(CellClass::airport)], [](double h) { return 0.1 + bump(h, 19.0, 2.0); });
        fill(dropoff[idx(CellClass::airport)], [](double h) { return 0.1 + bump(h, 7.0, 2.0); });
    }
};

const Shapes& shapes() {
    static const Shapes s;
    return s;
}

std::vector<RegimeDay> make_calendar(std::chrono::sys_days start, int days, double ratio, double noise_sd,
                                     std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<RegimeDay> out;
    for (int d = 0; d < days; ++d) {
        RegimeDay r;
        r.date = start + std::chrono::days(d);
        r.weekday = is_weekday(r.date);
        const double noise = noise_sd > 0.0 ? std::exp(noise_sd * normal(rng) - 0.5 * noise_sd * noise_sd) : 1.0;
        r.factor = (r.weekday ? 1.0 : 1.0 / ratio) * noise;
        out.push_back(r);
    }
    return out;
}

/// Uniform point in a cell, kept strictly inside both the cell and the area.
GeoPoint point_in_cell(const Grid& grid, const OperationArea& area, CellId c, std::mt19937_64& rng) {
    const auto b = grid.cell_bounds_m(c);
    const PlanarPoint origin = grid.projection().to_plane(grid.origin());
    const double margin = 0.02 * grid.cell_side();
    std::uniform_real_distribution<double> ux(b[0] + margin, b[2] - margin);
    std::uniform_real_distribution<double> uy(b[1] + margin, b[3] - margin);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const GeoPoint p = grid.projection().to_geo({origin.x + ux(rng), origin.y + uy(rng)});
        if (area.contains(p) && grid.locate(p) == c) return p;
    }
    throw Error(fmt::format("cannot place a point inside cell ({}, {})", c.row, c.col));
}

std::vector<std::pair<CellId, CellClass>> plant_classes(const Grid& grid, const CityScenario& s) {
    const auto& cells = grid.active_cells();
    const double cr = 0.5 * (grid.rows() - 1);
    const double cc = 0.5 * (grid.cols() - 1);
    std::vector<std::size_t> order(cells.size());
    std::iota(order.begin(), order.end(), 0);
    auto dist = [&](std::size_t i) { return std::hypot(cells[i].row - cr, cells[i].col - cc); };
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dist(a) < dist(b); });

    std::vector<std::pair<CellId, CellClass>> out(cells.size());
    std::optional<CellId> airport;
    if (s.airport) airport = cells.back();  // north-east corner
    std::size_t ordinary = cells.size() - (airport ? 1 : 0);
    const auto n_day = static_cast<std::size_t>(std::lround(s.day_share * static_cast<double>(ordinary)));
    const auto n_night = static_cast<std::size_t>(std::lround(s.night_share * static_cast<double>(ordinary)));
    std::size_t rank = 0;
    for (auto i : order) {
        out[i].first = cells[i];
        if (airport && cells[i] == *airport) {
            out[i].second = CellClass::airport;
            continue;
        }
        if (rank < n_day) {
            out[i].second = CellClass::day;
        } else if (rank >= ordinary - std::min(n_night, ordinary - n_day)) {
            out[i].second = CellClass::night;
        } else {
            out[i].second = CellClass::neutral;
        }
        ++rank;
    }
    return out;
}

}  // namespace

SynthCity generate_city(const CityScenario& s) {
    s.validate();
    std::mt19937_64 rng(s.seed);
    OperationArea area = rectangle_area(s.city, s.south_west, s.width_m, s.height_m);
    Grid grid = build_grid(area, s.cell_side_m);
    auto classes = plant_classes(grid, s);
    auto calendar = make_calendar(s.start, s.days, s.weekday_weekend_ratio, s.day_noise_sd, rng);
    const std::size_t n_cells = classes.size();

    std::vector<double> weight(n_cells, 1.0);
    std::vector<std::size_t> klass(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        klass[c] = static_cast<std::size_t>(classes[c].second);
        if (classes[c].second == CellClass::airport) weight[c] = s.airport_weight;
    }
    const double per_vehicle_minute = s.trips_per_vehicle_day / kMinutesPerDay;

    SnapshotSet snaps;
    snaps.source = "synthetic:" + s.city;
    std::vector<VehicleIndex> ids;
    for (std::size_t v = 0; v < s.fleet_size; ++v) ids.push_back(snaps.intern(fmt::format("SYN{:05d}", v)));

    struct Vehicle {
        std::size_t cell = 0;
        GeoPoint position;
        std::int64_t busy_until = -1;  // minute of reappearance while on a trip
        float fuel = 1.0f;
        Engine engine = Engine::combustion;
    };
    std::vector<Vehicle> fleet(s.fleet_size);
    std::vector<std::vector<std::size_t>> parked(n_cells);
    {
        std::discrete_distribution<std::size_t> start_cell(weight.begin(), weight.end());
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t v = 0; v < fleet.size(); ++v) {
            fleet[v].cell = start_cell(rng);
            fleet[v].position = point_in_cell(grid, area, classes[fleet[v].cell].first, rng);
            fleet[v].fuel = static_cast<float>(0.5 + 0.5 * u(rng));
            fleet[v].engine = u(rng) < 0.2 ? Engine::electric : Engine::combustion;
            parked[fleet[v].cell].push_back(v);
        }
    }

    struct Pending {
        std::int64_t start;
        std::int64_t end;
        std::size_t vehicle;
        GeoPoint origin;
        GeoPoint destination;
        std::size_t dest_cell;
    };
    std::vector<Pending> in_flight;
    std::vector<Trip> trips;
    const Shapes& sh = shapes();
    const auto t0 = std::chrono::sys_seconds(s.start);
    const std::int64_t horizon = static_cast<std::int64_t>(s.days) * kMinutesPerDay;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> duration(s.min_trip_minutes, s.max_trip_minutes);
    std::vector<double> dest_weight(n_cells);

    for (std::int64_t t = 0; t < horizon; ++t) {
        const auto day = static_cast<std::size_t>(t / kMinutesPerDay);
        const auto minute = static_cast<std::size_t>(t % kMinutesPerDay);
        const double factor = calendar[day].factor;

        // Arrivals first, so a vehicle returning at t is visible at t.
        for (std::size_t i = 0; i < in_flight.size();) {
            if (in_flight[i].end == t) {
                Vehicle& v = fleet[in_flight[i].vehicle];
                v.cell = in_flight[i].dest_cell;
                v.position = in_flight[i].destination;
                v.busy_until = -1;
                parked[v.cell].push_back(in_flight[i].vehicle);
                trips.push_back({snaps.vin(ids[in_flight[i].vehicle]), t0 + std::chrono::minutes(in_flight[i].start),
                                 t0 + std::chrono::minutes(t), in_flight[i].origin, in_flight[i].destination});
                in_flight[i] = in_flight.back();
                in_flight.pop_back();
            } else {
                ++i;
            }
        }

        std::vector<std::size_t> picked;
        for (std::size_t c = 0; c < n_cells; ++c) {
            auto& here = parked[c];
            if (here.empty()) continue;
            const double hazard = std::min(1.0, per_vehicle_minute * sh.pickup[klass[c]][minute] * factor);
            std::binomial_distribution<std::size_t> draw(here.size(), hazard);
            const std::size_t k = draw(rng);
            for (std::size_t j = 0; j < k; ++j) {
                std::uniform_int_distribution<std::size_t> pick(0, here.size() - 1);
                const std::size_t slot = pick(rng);
                const std::size_t v = here[slot];
                here[slot] = here.back();
                here.pop_back();

                for (std::size_t d = 0; d < n_cells; ++d) {
                    dest_weight[d] = weight[d] * sh.dropoff[klass[d]][minute] *
                                     (klass[d] == klass[c] ? 1.0 + s.same_class_bias : 1.0);
                }
                std::discrete_distribution<std::size_t> dest(dest_weight.begin(), dest_weight.end());
                const std::size_t to = dest(rng);
                Pending p{t, t + duration(rng), v, fleet[v].position,
                          point_in_cell(grid, area, classes[to].first, rng), to};
                fleet[v].busy_until = p.end;
                fleet[v].fuel = std::max(0.05f, fleet[v].fuel - static_cast<float>(0.05 * unit(rng)));
                in_flight.push_back(p);
                picked.push_back(v);
            }
        }

        if (t % s.poll_minutes == 0) {
            const auto when = t0 + std::chrono::minutes(t);
            auto emit = [&](std::size_t v) {
                SnapshotRecord r;
                r.vehicle = ids[v];
                r.time = when;
                r.position = fleet[v].position;
                r.fuel = fleet[v].fuel;
                r.interior = Cleanliness::good;
                r.exterior = Cleanliness::good;
                r.engine = fleet[v].engine;
                snaps.add(r);
            };
            for (const auto& cell : parked)
                for (auto v : cell) emit(v);
            for (auto v : picked) {
                // Visible at the pickup minute, at the origin.
                auto it = std::find_if(in_flight.begin(), in_flight.end(), [&](const Pending& p) { return p.vehicle == v; });
                SnapshotRecord r;
                r.vehicle = ids[v];
                r.time = when;
                r.position = it->origin;
                r.fuel = fleet[v].fuel;
                r.interior = Cleanliness::good;
                r.exterior = Cleanliness::good;
                r.engine = fleet[v].engine;
                snaps.add(r);
            }
        }
    }

    std::vector<std::string> outliers;
    std::size_t outlier_records = 0;
    if (s.outlier_fraction > 0.0) {
        const double normal = static_cast<double>(snaps.size());
        outlier_records = static_cast<std::size_t>(std::llround(normal * s.outlier_fraction / (1.0 - s.outlier_fraction)));
        const std::size_t ghosts = std::max<std::size_t>(1, s.fleet_size / 10);
        for (std::size_t g = 0; g < ghosts; ++g) outliers.push_back(fmt::format("GHOST{:04d}", g));
        std::uniform_int_distribution<std::int64_t> when(0, horizon / s.poll_minutes - 1);
        std::uniform_int_distribution<std::size_t> who(0, ghosts - 1);
        std::uniform_real_distribution<double> off(0.5, 1.0);
        for (std::size_t i = 0; i < outlier_records; ++i) {
            SnapshotRecord r;
            r.vehicle = snaps.intern(outliers[who(rng)]);
            r.time = t0 + std::chrono::minutes(when(rng) * s.poll_minutes);
            r.position = {s.south_west.lon + off(rng), s.south_west.lat - off(rng)};
            r.fuel = 0.5f;
            snaps.add(r);
        }
    }
    const std::size_t before = snaps.size();
    snaps.finalize();
    outlier_records -= before - snaps.size();  // duplicated ghost instants collapse

    std::sort(trips.begin(), trips.end(), [](const Trip& a, const Trip& b) {
        return std::tie(a.start_time, a.vin, a.end_time) < std::tie(b.start_time, b.vin, b.end_time);
    });
    TripSet trip_set;
    trip_set.trips = std::move(trips);
    trip_set.source = snaps.source;

    std::vector<std::string> warnings;
    const double realised =
        static_cast<double>(trip_set.trips.size()) / static_cast<double>(s.fleet_size) / static_cast<double>(s.days);
    if (realised < 0.8 * s.trips_per_vehicle_day) {
        warnings.push_back(fmt::format("fleet capacity limits demand: {:.2f} of {:.2f} trips per vehicle and day realised",
                                       realised, s.trips_per_vehicle_day));
    }
    return SynthCity{std::move(area),    std::move(grid),     std::move(snaps),    std::move(trip_set),
                     std::move(classes), std::move(calendar), std::move(outliers), outlier_records,
                     realised,           std::move(warnings)};
}

DemandCity generate_demand(const DemandScenario& s) {
    if (s.rows <= 0 || s.cols <= 0 || s.days <= 0 || s.mean_rate < 0.0 || !(s.weekday_weekend_ratio > 0.0)) {
        throw InvalidArgument("invalid demand scenario");
    }
    if (s.bin_minutes <= 0 || kMinutesPerDay % s.bin_minutes != 0) {
        throw InvalidArgument("bin length must divide 1440 minutes");
    }
    std::mt19937_64 rng(s.seed);
    OperationArea area = rectangle_area("demand", s.south_west, s.cols * s.cell_side_m, s.rows * s.cell_side_m);
    Grid grid = build_grid(area, s.cell_side_m);
    auto calendar = make_calendar(s.start, s.days, s.weekday_weekend_ratio, s.day_noise_sd, rng);
    const auto& cells = grid.active_cells();
    const int bins = kMinutesPerDay / s.bin_minutes;

    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> base(cells.size()), morning(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        base[c] = s.mean_rate * std::exp(s.cell_spread_sd * normal(rng) - 0.5 * s.cell_spread_sd * s.cell_spread_sd);
        morning[c] = unit(rng);
    }
    auto shape = [&](std::size_t c, double hour, bool weekday) {
        if (s.daily_amplitude <= 0.0) return 1.0;
        const double peaks = weekday ? morning[c] * bump(hour, 8.0, 1.5) + (1.0 - morning[c]) * bump(hour, 18.0, 2.0)
                                     : bump(hour, 14.0, 3.0);
        const double night = hour < 6.0 ? 0.2 : 1.0;
        return (1.0 - s.daily_amplitude) + s.daily_amplitude * night * (0.3 + 2.5 * peaks);
    };

    std::vector<std::vector<double>> rates(cells.size(), std::vector<double>(static_cast<std::size_t>(s.days * bins)));
    std::vector<Trip> trips;
    const auto t0 = std::chrono::sys_seconds(s.start);
    std::uniform_int_distribution<int> offset(0, s.bin_minutes - 1);
    std::uniform_int_distribution<std::size_t> any_cell(0, cells.size() - 1);
    std::size_t serial = 0;
    for (int d = 0; d < s.days; ++d) {
        const auto& day = calendar[static_cast<std::size_t>(d)];
        for (int b = 0; b < bins; ++b) {
            const double hour = (b + 0.5) * s.bin_minutes / 60.0;
            for (std::size_t c = 0; c < cells.size(); ++c) {
                const double rate = base[c] * shape(c, hour, day.weekday) * day.factor;
                rates[c][static_cast<std::size_t>(d * bins + b)] = rate;
                std::poisson_distribution<int> pois(rate);
                const int k = rate > 0.0 ? pois(rng) : 0;
                for (int j = 0; j < k; ++j) {
                    const auto start = t0 + std::chrono::minutes(d * kMinutesPerDay + b * s.bin_minutes + offset(rng));
                    trips.push_back({fmt::format("DEM{:07d}", serial++), start, start + std::chrono::minutes(15),
                                     point_in_cell(grid, area, cells[c], rng),
                                     point_in_cell(grid, area, cells[any_cell(rng)], rng)});
                }
            }
        }
    }
    TripSet trip_set;
    trip_set.trips = std::move(trips);
    trip_set.source = "synthetic:demand";
    return DemandCity{std::move(area), std::move(grid), std::move(trip_set), std::move(rates), std::move(calendar)};
}

void write_classes_csv(std::ostream& out, const SynthCity& city) {
    csv::Writer w(out);
    w.row({"row", "col", "class"});
    for (const auto& [cell, c] : city.classes) {
        w.row({std::to_string(cell.row), std::to_string(cell.col), std::string(to_string(c))});
    }
}

void write_calendar_csv(std::ostream& out, const std::vector<RegimeDay>& calendar) {
    csv::Writer w(out);
    w.row({"date", "day_of_week", "regime", "factor"});
    for (const auto& d : calendar) {
        w.row({format_date(std::chrono::year_month_day(d.date)), std::to_string(day_of_week(d.date)),
               d.weekday ? "weekday" : "weekend", csv::num(d.factor)});
    }
}

}  // namespace carshare
