#include "helpers.hpp"

#include <carshare/ingest.hpp>
#include <carshare/synth.hpp>
#include <carshare/time.hpp>

#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace carshare;

namespace {

const char* kHeader = "vin,date_time,lon,lat,fuel,interior,exterior,engine\n";

SnapshotSet parse(const std::string& body) {
    std::istringstream in(std::string(kHeader) + body);
    return parse_snapshots(in, {}, InputFormat::csv);
}

/// A vehicle parked for the whole morning so that the feed polls every minute.
void add_anchor(SnapshotSet& s, GeoPoint p) {
    for (int m = 0; m < 6 * 60; ++m) test::add_sighting(s, "anchor", test::at(0, 6, 0) + std::chrono::minutes(m), p);
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("latitude out of range is skipped") {
    const auto s = parse("A,2016-10-03T10:00:00Z,9.19,91.0,50,good,good,ce\n"
                         "B,2016-10-03T10:00:00Z,9.19,45.46,50,good,good,ce\n");
    CHECK(s.size() == 1);
    CHECK(s.report.out_of_range == 1);
    CHECK(s.report.read == 2);
}

TEST_CASE("duplicate vin and timestamp keep one record") {
    const auto s = parse("A,2016-10-03T10:00:00Z,9.19,45.46,50,good,good,ce\n"
                         "A,2016-10-03T10:00:00Z,9.19,45.46,50,good,good,ce\n");
    CHECK(s.size() == 1);
    CHECK(s.report.duplicates == 1);
}

TEST_CASE("ndjson input") {
    std::istringstream in(R"({"vin":"A","date_time":"2016-10-03T10:00:00Z","lon":9.19,"lat":45.46,"fuel":40,"interior":"good","exterior":"bad","engine":"ed"})"
                          "\n");
    const auto s = parse_snapshots(in, {}, InputFormat::automatic);
    REQUIRE(s.size() == 1);
    CHECK(s.records()[0].engine == Engine::electric);
    CHECK(s.records()[0].exterior == Cleanliness::unacceptable);
}

TEST_CASE("clean drops far records and keeps the boundary") {
    const auto area = test::rect_area(2000, 2000);
    SnapshotSet s;
    const GeoPoint c = area.centroid();
    const LocalProjection proj(c);
    test::add_sighting(s, "far", test::at(0, 10, 0), proj.to_geo({500000.0, 0.0}));
    test::add_sighting(s, "edge", test::at(0, 10, 0), area.ring()[0]);
    const GeoPoint mid{0.5 * (area.ring()[0].lon + area.ring()[1].lon), area.ring()[0].lat};
    test::add_sighting(s, "side", test::at(0, 10, 0), mid);
    s.finalize();
    const auto cleaned = clean(s, area);
    CHECK(cleaned.size() == 2);
    CHECK(cleaned.report.outside_area == 1);
    SUBCASE("idempotent") {
        const auto twice = clean(cleaned, area);
        CHECK(twice.size() == cleaned.size());
        CHECK(twice.report.outside_area == cleaned.report.outside_area);
    }
}

TEST_CASE("planted outliers are removed exactly") {
    CityScenario sc;
    sc.days = 2;
    sc.fleet_size = 30;
    sc.outlier_fraction = 0.05;
    sc.seed = 11;
    const auto city = generate_city(sc);
    REQUIRE(city.outlier_records > 0);
    const auto cleaned = clean(city.snapshots, city.area);
    CHECK(cleaned.report.outside_area == city.outlier_records);
    std::set<std::string> kept;
    for (const auto& r : cleaned.records()) kept.insert(cleaned.vin(r.vehicle));
    for (const auto& vin : city.outlier_vins) CHECK(kept.count(vin) == 0);
    CHECK(cleaned.size() + city.outlier_records == city.snapshots.size());
}

TEST_CASE("a gap of 25 minutes is one trip") {
    const auto area = test::rect_area(3000, 3000);
    const LocalProjection proj(area.centroid());
    const GeoPoint a = proj.to_geo({0, 0});
    const GeoPoint b = proj.to_geo({800, 300});
    SnapshotSet s;
    for (int m = 50; m <= 60; ++m) test::add_sighting(s, "V1", test::at(0, 9, 0) + std::chrono::minutes(m), a);
    for (int m = 25; m <= 35; ++m) test::add_sighting(s, "V1", test::at(0, 10, m), b);
    add_anchor(s, a);
    s.finalize();
    const auto trips = infer_trips(s);
    REQUIRE(trips.trips.size() == 1);
    const Trip& t = trips.trips[0];
    CHECK(t.start_time == test::at(0, 10, 0));
    CHECK(t.end_time == test::at(0, 10, 25));
    CHECK(t.origin == a);
    CHECK(t.destination == b);
    CHECK(t.duration_min() == doctest::Approx(25.0));
}

TEST_CASE("one missed poll with a small shift is jitter") {
    const auto area = test::rect_area(3000, 3000);
    const LocalProjection proj(area.centroid());
    SnapshotSet s;
    for (int m = 0; m < 10; ++m) test::add_sighting(s, "V1", test::at(0, 10, m), proj.to_geo({0, 0}));
    for (int m = 11; m < 20; ++m) test::add_sighting(s, "V1", test::at(0, 10, m), proj.to_geo({8, 0}));
    add_anchor(s, proj.to_geo({-500, 0}));
    s.finalize();
    const auto trips = infer_trips(s);
    CHECK(trips.trips.empty());
    CHECK(trips.jitter_gaps == 1);
}

TEST_CASE("trip count equals long gaps") {
    const auto area = test::rect_area(3000, 3000);
    const LocalProjection proj(area.centroid());
    SnapshotSet s;
    std::vector<int> gaps{3, 12, 40, 9, 10, 15};
    int minute = 0;
    double x = 0.0;
    std::size_t expected = 0;
    for (int g : gaps) {
        for (int i = 0; i < 5; ++i) test::add_sighting(s, "V1", test::at(0, 6, 0) + std::chrono::minutes(minute++), proj.to_geo({x, 0}));
        minute += g - 1;
        x += 400.0;
        if (g >= 10) ++expected;
    }
    test::add_sighting(s, "V1", test::at(0, 6, 0) + std::chrono::minutes(minute), proj.to_geo({x, 0}));
    add_anchor(s, proj.to_geo({0, 900}));
    s.finalize();
    CHECK(infer_trips(s).trips.size() == expected);
}

TEST_CASE("utilisation rate") {
    CHECK(utilisation_rate(156080, 686, 45.0) == doctest::Approx(5.056).epsilon(1e-3));
    CHECK(utilisation_rate(12168, 194, 45.0) == doctest::Approx(1.394).epsilon(1e-3));
    CHECK(utilisation_rate(TripSet{}, 10, 45.0) == 0.0);
}

TEST_CASE("utilisation is invariant under time translation") {
    CityScenario sc;
    sc.days = 2;
    sc.fleet_size = 20;
    const auto city = generate_city(sc);
    SnapshotSet shifted = city.snapshots;
    for (auto& r : shifted.mutable_records()) r.time += std::chrono::hours(24 * 9 + 5);
    const auto a = infer_trips(city.snapshots);
    const auto b = infer_trips(shifted);
    CHECK(utilisation_rate(a, 20, 2.0) == utilisation_rate(b, 20, 2.0));
}

TEST_CASE("trips csv round trip") {
    CityScenario sc;
    sc.days = 1;
    sc.fleet_size = 10;
    const auto trips = infer_trips(generate_city(sc).snapshots);
    std::ostringstream out;
    write_trips_csv(out, trips);
    std::istringstream in(out.str());
    const auto back = read_trips_csv(in);
    REQUIRE(back.trips.size() == trips.trips.size());
    for (std::size_t i = 0; i < back.trips.size(); ++i) {
        CHECK(back.trips[i].vin == trips.trips[i].vin);
        CHECK(back.trips[i].start_time == trips.trips[i].start_time);
    }
}

}  // TEST_SUITE
