#include <carshare/clustering.hpp>
#include <carshare/ingest.hpp>
#include <carshare/synth.hpp>

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace carshare;

namespace {

CityScenario small() {
    CityScenario sc;
    sc.days = 3;
    sc.fleet_size = 30;
    sc.seed = 17;
    return sc;
}

std::string snapshots_text(const SynthCity& c) {
    std::ostringstream out;
    write_snapshots_csv(out, c.snapshots);
    return out.str();
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("zero demand keeps every vehicle parked") {
    auto sc = small();
    sc.trips_per_vehicle_day = 0.0;
    const auto city = generate_city(sc);
    CHECK(city.trips.trips.empty());
    std::map<std::uint32_t, GeoPoint> first;
    std::map<std::uint32_t, std::size_t> seen;
    for (const auto& r : city.snapshots.records()) {
        auto [it, fresh] = first.emplace(r.vehicle.value, r.position);
        if (!fresh) CHECK(it->second == r.position);
        ++seen[r.vehicle.value];
    }
    CHECK(first.size() == sc.fleet_size);
    for (const auto& [v, n] : seen) CHECK(n == static_cast<std::size_t>(sc.days * 1440));
    CHECK(infer_trips(city.snapshots).trips.empty());
}

TEST_CASE("same scenario and seed give identical output") {
    const auto a = generate_city(small());
    const auto b = generate_city(small());
    CHECK(snapshots_text(a) == snapshots_text(b));
    auto other = small();
    other.seed = 18;
    CHECK(snapshots_text(generate_city(other)) != snapshots_text(a));
}

TEST_CASE("generated snapshots pass cleaning untouched") {
    const auto city = generate_city(small());
    const auto cleaned = clean(city.snapshots, city.area);
    CHECK(cleaned.size() == city.snapshots.size());
    CHECK(cleaned.report.outside_area == 0);
}

TEST_CASE("inferred trips equal the ground truth") {
    const auto city = generate_city(small());
    const auto inferred = infer_trips(city.snapshots);
    REQUIRE(inferred.trips.size() == city.trips.trips.size());
    for (std::size_t i = 0; i < inferred.trips.size(); ++i) {
        CHECK(inferred.trips[i].vin == city.trips.trips[i].vin);
        CHECK(inferred.trips[i].start_time == city.trips.trips[i].start_time);
        CHECK(inferred.trips[i].end_time == city.trips.trips[i].end_time);
        CHECK(inferred.trips[i].origin == city.trips.trips[i].origin);
        CHECK(inferred.trips[i].destination == city.trips.trips[i].destination);
    }
}

TEST_CASE("classes and the airport") {
    auto sc = small();
    sc.airport = true;
    const auto city = generate_city(sc);
    std::map<CellClass, int> n;
    for (const CellId c : city.grid.active_cells()) ++n[*city.class_of(c)];
    CHECK(n[CellClass::airport] == 1);
    CHECK(n[CellClass::day] > 0);
    CHECK(n[CellClass::night] > 0);
    CHECK(n[CellClass::neutral] > 0);
    CHECK(city.class_of(city.grid.active_cells().back()) == CellClass::airport);
}

TEST_CASE("planted day and night cells are recovered") {
    CityScenario sc;
    sc.days = 7;
    sc.fleet_size = 400;
    sc.seed = 2;
    const auto city = generate_city(sc);
    const auto profiles = availability_profiles(city.snapshots, city.grid, 10);
    std::vector<std::vector<double>> series;
    std::vector<int> truth;
    for (const auto& p : profiles) {
        const auto cls = *city.class_of(p.cell);
        if (cls == CellClass::neutral) continue;
        series.push_back(p.values);
        truth.push_back(cls == CellClass::day ? 0 : 1);
    }
    const auto sel = select_k(dtw_matrix(series, 12), 2, 2);
    CHECK(adjusted_rand_index(sel.clustering.assignment, truth) >= 0.9);
}

TEST_CASE("scenario file round trip") {
    auto sc = small();
    sc.airport = true;
    sc.weekday_weekend_ratio = 2.5;
    const auto path = std::filesystem::temp_directory_path() / "carshare_unit_scenario.ini";
    {
        std::ofstream out(path);
        write_scenario(out, sc);
    }
    const auto back = load_scenario(path);
    std::filesystem::remove(path);
    CHECK(back.fleet_size == sc.fleet_size);
    CHECK(back.days == sc.days);
    CHECK(back.airport);
    CHECK(back.weekday_weekend_ratio == 2.5);
    CHECK(back.seed == sc.seed);
    CHECK(back.start == sc.start);
}

TEST_CASE("invalid scenarios") {
    auto sc = small();
    sc.fleet_size = 0;
    CHECK_THROWS_AS(sc.validate(), InvalidArgument);
    sc = small();
    sc.day_share = 0.8;
    sc.night_share = 0.5;
    CHECK_THROWS_AS(sc.validate(), InvalidArgument);
}

TEST_CASE("demand generator is deterministic") {
    DemandScenario sc;
    sc.rows = 2;
    sc.cols = 2;
    sc.days = 5;
    const auto a = generate_demand(sc);
    const auto b = generate_demand(sc);
    REQUIRE(a.trips.trips.size() == b.trips.trips.size());
    for (std::size_t i = 0; i < a.trips.trips.size(); ++i) CHECK(a.trips.trips[i].start_time == b.trips.trips[i].start_time);
    CHECK(a.rates.size() == 4);
}

}  // TEST_SUITE
