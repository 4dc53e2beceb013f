#include "helpers.hpp"

#include <carshare/placement.hpp>
#include <carshare/synth.hpp>

#include <doctest.h>

#include <map>

using namespace carshare;

namespace {

std::map<CellId, CoverageRow> by_cell(const std::vector<CoverageRow>& rows) {
    std::map<CellId, CoverageRow> out;
    for (const auto& r : rows) out[r.cell] = r;
    return out;
}

CoverageRow row(int r, double f) {
    CoverageRow x;
    x.cell = {r, 0};
    x.fleet_fraction = f;
    return x;
}

}  // namespace

TEST_SUITE("placement") {

TEST_CASE("fractions of a hand-built fleet") {
    const Grid g = build_grid(test::rect_area(1000, 1000), 500.0);
    SnapshotSet s;
    for (int day = 0; day < 4; ++day)
        for (const char* vin : {"A", "B", "C"}) {
            test::add_sighting(s, vin, test::at(day, 8, 0), test::offset(g, 100, 100));
            test::add_sighting(s, vin, test::at(day, 12, 0), test::offset(g, 800, 800));
        }
    test::add_sighting(s, "A", test::at(0, 20, 0), test::offset(g, 100, 800));
    test::add_sighting(s, "A", test::at(0, 21, 0), test::offset(g, 120, 810));
    s.finalize();
    CoverageOptions opt;
    opt.window_days = 2;
    const auto rows = by_cell(coverage(s, g, opt));
    CHECK(rows.at({0, 0}).fleet_fraction == 1.0);
    CHECK(rows.at({1, 1}).fleet_fraction == 1.0);
    CHECK(rows.at({0, 1}).fleet_fraction == 0.0);
    CHECK(rows.at({1, 0}).distinct_vehicles == 1);
    CHECK(rows.at({1, 0}).fleet_fraction == doctest::Approx(1.0 / 3.0));
    CHECK(rows.at({0, 0}).rank == 1);
    CHECK(rows.at({1, 1}).rank == 2);

    opt.fleet_size = 6;
    CHECK(by_cell(coverage(s, g, opt)).at({0, 0}).fleet_fraction == 0.5);

    opt.window_days = 0;
    CHECK_THROWS_AS(coverage(s, g, opt), InvalidArgument);
    opt.window_days = 5;
    CHECK_THROWS_AS(coverage(s, g, opt), InvalidArgument);
}

TEST_CASE("site selection") {
    const std::vector<CoverageRow> table{row(0, 0.6), row(1, 0.9), row(2, 0.3), row(3, 0.8)};
    const auto sites = select_sites(table, 0.5, 3);
    REQUIRE(sites.size() == 3);
    CHECK(sites[0].fleet_fraction == 0.9);
    CHECK(sites[1].fleet_fraction == 0.8);
    CHECK(sites[2].fleet_fraction == 0.6);
    CHECK(select_sites({row(0, 0.49), row(1, 0.2)}, 0.5, 3).empty());
    CHECK(select_sites(table, 0.5, 1).size() == 1);
}

TEST_CASE("coverage grows with the window") {
    CityScenario sc;
    sc.days = 8;
    sc.fleet_size = 40;
    sc.seed = 3;
    const auto city = generate_city(sc);
    CoverageOptions opt;
    std::map<CellId, double> prev;
    for (int w : {1, 2, 4, 8}) {
        opt.window_days = w;
        for (const auto& r : coverage(city.snapshots, city.grid, opt)) {
            CHECK(r.fleet_fraction <= 1.0);
            CHECK(r.fleet_fraction >= prev[r.cell]);
            prev[r.cell] = r.fleet_fraction;
        }
    }
    opt.window_days = 2;
    opt.mode = WindowMode::first_window;
    const auto first = by_cell(coverage(city.snapshots, city.grid, opt));
    opt.mode = WindowMode::sliding_max;
    for (const auto& r : coverage(city.snapshots, city.grid, opt)) CHECK(r.fleet_fraction >= first.at(r.cell).fleet_fraction);
}

TEST_CASE("trip endpoint presence") {
    const Grid g = build_grid(test::rect_area(1000, 1000), 500.0);
    TripSet trips;
    for (int day = 0; day < 2; ++day)
        for (const char* vin : {"A", "B"}) {
            Trip t;
            t.vin = vin;
            t.start_time = test::at(day, 9, 0);
            t.end_time = test::at(day, 9, 30);
            t.origin = test::offset(g, 100, 100);
            t.destination = test::offset(g, 700, 100);
            trips.trips.push_back(t);
        }
    CoverageOptions opt;
    opt.window_days = 1;
    const auto rows = by_cell(coverage(trips, g, opt));
    CHECK(rows.at({0, 0}).fleet_fraction == 1.0);
    CHECK(rows.at({0, 1}).fleet_fraction == 1.0);
    CHECK(rows.at({1, 1}).fleet_fraction == 0.0);
}

}  // TEST_SUITE
