#pragma once

#include <carshare/geo.hpp>
#include <carshare/grid.hpp>
#include <carshare/ingest.hpp>

#include <chrono>
#include <string>

namespace test {

using namespace std::chrono_literals;

/// Rectangle of the given size in metres with its south-west corner at `sw`.
inline carshare::OperationArea rect_area(double width_m, double height_m, carshare::GeoPoint sw = {9.10, 45.40}) {
    const carshare::LocalProjection proj(sw);
    return carshare::OperationArea("test", carshare::rectangle_ring(sw, proj.to_geo({width_m, height_m})));
}

inline carshare::Timestamp at(int day, int hour, int minute) {
    using namespace std::chrono;
    return sys_days(year{2016} / 10 / (3 + day)) + hours(hour) + minutes(minute);
}

/// Point `x` metres east and `y` metres north of a grid's origin.
inline carshare::GeoPoint offset(const carshare::Grid& g, double x, double y) {
    const auto o = g.projection().to_plane(g.origin());
    return g.projection().to_geo({o.x + x, o.y + y});
}

inline void add_sighting(carshare::SnapshotSet& s, const std::string& vin, carshare::Timestamp t, carshare::GeoPoint p) {
    carshare::SnapshotRecord r;
    r.vehicle = s.intern(vin);
    r.time = t;
    r.position = p;
    r.fuel = 50.0f;
    s.add(r);
}

}  // namespace test
