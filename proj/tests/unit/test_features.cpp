#include "helpers.hpp"

#include <carshare/features.hpp>
#include <carshare/synth.hpp>
#include <carshare/time.hpp>

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace carshare;

namespace {

Trip make_trip(const Grid& g, Timestamp start, double x, double y) {
    Trip t;
    t.vin = "V";
    t.start_time = start;
    t.end_time = start + std::chrono::minutes(20);
    t.origin = test::offset(g, x, y);
    t.destination = test::offset(g, x + 10, y + 10);
    return t;
}

EventPanel flat_panel(const Grid& g, std::size_t days, int bin_minutes) {
    EventPanel p;
    p.bin_minutes = bin_minutes;
    std::vector<std::chrono::sys_days> d;
    for (std::size_t i = 0; i < days; ++i) d.push_back(std::chrono::floor<std::chrono::days>(test::at(static_cast<int>(i), 0, 0)));
    p.calendar = Calendar(d);
    p.cells = g.active_cells();
    p.counts.assign(p.cells.size(), std::vector<double>(days * static_cast<std::size_t>(p.bins_per_day()), 0.0));
    return p;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("trip at 10:07 falls in bin 10") {
    const Grid g = build_grid(test::rect_area(1000, 1000), 500.0);
    TripSet trips;
    trips.trips.push_back(make_trip(g, test::at(0, 10, 7), 100, 100));
    const auto cal = trip_calendar(trips, TimeZone::utc());
    const auto panel = bin_events(trips, g, 60, EventKind::pickup, TimeZone::utc(), cal);
    const auto c = *panel.cell_index({0, 0});
    for (int b = 0; b < 24; ++b) CHECK(panel.at(c, 0, b) == (b == 10 ? 1.0 : 0.0));
    CHECK_THROWS_AS(bin_events(trips, g, 7, EventKind::pickup, TimeZone::utc(), cal), InvalidArgument);
}

TEST_CASE("local time shifts the bin") {
    const Grid g = build_grid(test::rect_area(1000, 1000), 500.0);
    TripSet trips;
    trips.trips.push_back(make_trip(g, test::at(0, 10, 7), 100, 100));
    const auto tz = TimeZone::fixed(std::chrono::minutes(120));
    const auto panel = bin_events(trips, g, 60, EventKind::pickup, tz, trip_calendar(trips, tz));
    CHECK(panel.at(*panel.cell_index({0, 0}), 0, 12) == 1.0);
}

TEST_CASE("binning conserves events") {
    CityScenario sc;
    sc.days = 3;
    sc.fleet_size = 25;
    const auto city = generate_city(sc);
    const auto cal = trip_calendar(city.trips, TimeZone::utc());
    for (const auto kind : {EventKind::pickup, EventKind::dropoff}) {
        const auto panel = bin_events(city.trips, city.grid, 30, kind, TimeZone::utc(), cal);
        double total = 0.0;
        for (std::size_t c = 0; c < panel.cells.size(); ++c) total += panel.total(c);
        CHECK(total == static_cast<double>(city.trips.trips.size()));
    }
}

TEST_CASE("poisson demand mean") {
    DemandScenario sc;
    sc.rows = 1;
    sc.cols = 1;
    sc.days = 30;
    sc.mean_rate = 2.0;
    sc.cell_spread_sd = 0.0;
    sc.daily_amplitude = 0.0;
    sc.seed = 4;
    const auto city = generate_demand(sc);
    std::vector<std::chrono::sys_days> days;
    for (const auto& d : city.calendar) days.push_back(d.date);
    const auto panel = bin_events(city.trips, city.grid, 60, EventKind::pickup, TimeZone::utc(), Calendar(days));
    REQUIRE(panel.cells.size() == 1);
    const double n = static_cast<double>(panel.counts[0].size());
    CHECK(n == 720.0);
    const double mean = panel.total(0) / n;
    CHECK(std::abs(mean - 2.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("neighbour averages") {
    const Grid g = build_grid(test::rect_area(3500, 3500), 500.0);
    auto panel = flat_panel(g, 1, 60);
    const CellId centre{3, 3};
    for (const CellId n : g.neighbors(centre, 2)) panel.counts[*panel.cell_index(n)][5] = 2.0;
    const auto avg = neighbour_averages(panel, g, 2);
    CHECK(avg[*panel.cell_index(centre)][5] == doctest::Approx(2.0));
    CHECK(avg[*panel.cell_index(centre)][4] == 0.0);

    const Grid sparse(g.origin(), 500.0, 3, 3, g.projection(), {{0, 0}, {2, 2}});
    auto p2 = flat_panel(sparse, 1, 60);
    p2.counts[1][3] = 7.0;
    const auto avg2 = neighbour_averages(p2, sparse, 1);
    CHECK(avg2[0][3] == 0.0);
}

TEST_CASE("feature table row count") {
    const Grid g = build_grid(test::rect_area(1500, 1000), 500.0);
    auto panel = flat_panel(g, 4, 120);
    std::vector<double> activity(panel.cells.size(), 0.0);
    activity[0] = 31.0;
    activity[1] = 30.0;
    activity[3] = 100.0;
    const auto rows = build_feature_table(panel, g, activity, 30.0, 2);
    CHECK(rows.size() == 2u * 4u * 12u);
    for (const auto& r : rows) CHECK(r.cell != panel.cells[1]);
}

TEST_CASE("venue entropy") {
    const std::vector<double> one{5, 0, 0};
    CHECK(venue_entropy(one) == 0.0);
    const std::vector<double> uniform(8, 3.0);
    CHECK(venue_entropy(uniform) == doctest::Approx(std::log(8.0)));
    const std::vector<double> two{3, 1};
    CHECK(venue_entropy(two) == doctest::Approx(-(0.75 * std::log(0.75) + 0.25 * std::log(0.25))));
    CHECK(venue_entropy(two) == doctest::Approx(0.5623).epsilon(1e-4));
    CHECK(venue_entropy(std::vector<double>{}) == 0.0);
}

TEST_CASE("poi csv skips events") {
    std::istringstream in("area_id,category,count\nA,Food,3\nA,Event,9\nA,Shop,1\nB,Food,2\n");
    const auto p = read_poi_csv(in);
    REQUIRE(p.size() == 2);
    CHECK(p[0].total == 4.0);
    CHECK(p[0].counts.count("Event") == 0);
    CHECK(p[1].entropy == 0.0);
}

TEST_CASE("census overlay") {
    const GeoPoint sw{9.10, 45.40};
    const LocalProjection proj(sw);
    const auto area = test::rect_area(2000, 2000, sw);
    auto rect = [&](double x0, double y0, double x1, double y1) {
        return rectangle_ring(proj.to_geo({x0, y0}), proj.to_geo({x1, y1}));
    };
    std::vector<CensusUnit> units(3);
    units[0] = {"inside", rect(200, 200, 800, 800), 0.0, {{"education", 10.0}}, 0.0};
    units[1] = {"sliver", rect(1810, 1000, 2810, 1500), 0.0, {{"education", 10.0}}, 0.0};
    units[2] = {"half", rect(1500, 200, 2500, 600), 0.0, {{"education", 10.0}}, 0.0};
    TripSet trips;
    Trip t;
    t.origin = proj.to_geo({500, 500});
    t.destination = t.origin;
    trips.trips = {t, t};
    const auto o = census_overlay(units, area, trips);
    REQUIRE(o.units.size() == 2);
    CHECK(o.discarded == std::vector<std::string>{"sliver"});
    CHECK(o.units[0].overlap_fraction == doctest::Approx(1.0));
    CHECK(o.units[0].indicators.at("education") == doctest::Approx(10.0));
    CHECK(o.units[0].pickups == 2.0);
    CHECK(o.units[1].overlap_fraction == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(o.units[1].indicators.at("education") == doctest::Approx(5.0).epsilon(1e-3));
}

TEST_CASE("sample skewness") {
    const std::vector<double> flat{2, 2, 2};
    CHECK(sample_skewness(flat) == 0.0);
    const std::vector<double> v{1, 2, 3, 10};
    double m = 0;
    for (double x : v) m += x / 4.0;
    double m2 = 0, m3 = 0;
    for (double x : v) {
        m2 += (x - m) * (x - m) / 4.0;
        m3 += (x - m) * (x - m) * (x - m) / 4.0;
    }
    const double g1 = m3 / std::pow(m2, 1.5);
    CHECK(sample_skewness(v) == doctest::Approx(g1 * std::sqrt(4.0 * 3.0) / 2.0));
}

}  // TEST_SUITE
