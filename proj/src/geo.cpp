#include <carshare/geo.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace carshare {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double cross(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

// Orientation of (a, b, c) with a relative tolerance for collinearity.
int orientation(GeoPoint a, GeoPoint b, GeoPoint c) {
    const double v = cross(b.lon - a.lon, b.lat - a.lat, c.lon - a.lon, c.lat - a.lat);
    const double scale = std::max({std::abs(b.lon - a.lon), std::abs(b.lat - a.lat), std::abs(c.lon - a.lon),
                                   std::abs(c.lat - a.lat), 1e-12});
    if (std::abs(v) <= 1e-14 * scale * scale) {
        return 0;
    }
    return v > 0 ? 1 : -1;
}

bool within_span(GeoPoint a, GeoPoint b, GeoPoint p) {
    return p.lon >= std::min(a.lon, b.lon) && p.lon <= std::max(a.lon, b.lon) && p.lat >= std::min(a.lat, b.lat) &&
           p.lat <= std::max(a.lat, b.lat);
}

bool on_segment(GeoPoint a, GeoPoint b, GeoPoint p) { return orientation(a, b, p) == 0 && within_span(a, b, p); }

bool segments_touch(GeoPoint a, GeoPoint b, GeoPoint c, GeoPoint d) {
    const int o1 = orientation(a, b, c);
    const int o2 = orientation(a, b, d);
    const int o3 = orientation(c, d, a);
    const int o4 = orientation(c, d, b);
    if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) {
        return true;
    }
    return (o1 == 0 && within_span(a, b, c)) || (o2 == 0 && within_span(a, b, d)) ||
           (o3 == 0 && within_span(c, d, a)) || (o4 == 0 && within_span(c, d, b));
}

}  // namespace

double haversine_m(GeoPoint a, GeoPoint b) {
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = (b.lat - a.lat) * kDegToRad;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double h = std::sin(dphi / 2) * std::sin(dphi / 2) +
                     std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

LocalProjection::LocalProjection(GeoPoint anchor)
    : anchor_(anchor),
      m_per_deg_lon_(kEarthRadiusM * kDegToRad * std::cos(anchor.lat * kDegToRad)),
      m_per_deg_lat_(kEarthRadiusM * kDegToRad) {}

PlanarPoint LocalProjection::to_plane(GeoPoint p) const {
    return {(p.lon - anchor_.lon) * m_per_deg_lon_, (p.lat - anchor_.lat) * m_per_deg_lat_};
}

GeoPoint LocalProjection::to_geo(PlanarPoint p) const {
    return {anchor_.lon + p.x / m_per_deg_lon_, anchor_.lat + p.y / m_per_deg_lat_};
}

BoundingBox bounding_box(const Ring& ring) {
    BoundingBox box{ring.front().lon, ring.front().lat, ring.front().lon, ring.front().lat};
    for (const auto& p : ring) {
        box.min_lon = std::min(box.min_lon, p.lon);
        box.max_lon = std::max(box.max_lon, p.lon);
        box.min_lat = std::min(box.min_lat, p.lat);
        box.max_lat = std::max(box.max_lat, p.lat);
    }
    return box;
}

bool ring_contains(const Ring& ring, GeoPoint p) {
    const std::size_t n = ring.size();
    if (n < 3) {
        return false;
    }
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if (on_segment(ring[j], ring[i], p)) {
            return true;
        }
    }
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const GeoPoint& a = ring[i];
        const GeoPoint& b = ring[j];
        if ((a.lat > p.lat) != (b.lat > p.lat)) {
            const double x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if (p.lon < x) {
                inside = !inside;
            }
        }
    }
    return inside;
}

bool ring_is_simple(const Ring& ring) {
    const std::size_t n = ring.size();
    if (n < 3) {
        return false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const GeoPoint a = ring[i];
        const GeoPoint b = ring[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            const GeoPoint c = ring[j];
            const GeoPoint d = ring[(j + 1) % n];
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) {
                // Shared vertex is fine; folding back onto the previous edge is not.
                const GeoPoint shared = j == i + 1 ? b : a;
                const GeoPoint other_first = j == i + 1 ? a : b;
                const GeoPoint other_second = j == i + 1 ? d : c;
                if (orientation(other_first, shared, other_second) == 0) {
                    const double dot = (other_first.lon - shared.lon) * (other_second.lon - shared.lon) +
                                       (other_first.lat - shared.lat) * (other_second.lat - shared.lat);
                    if (dot > 0) {
                        return false;
                    }
                }
                continue;
            }
            if (segments_touch(a, b, c, d)) {
                return false;
            }
        }
    }
    return true;
}

double planar_signed_area(const std::vector<PlanarPoint>& ring) {
    double twice = 0.0;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        twice += ring[j].x * ring[i].y - ring[i].x * ring[j].y;
    }
    return twice / 2.0;
}

Ring normalize_ring(Ring ring) {
    Ring out;
    out.reserve(ring.size());
    for (const auto& p : ring) {
        if (out.empty() || !(out.back() == p)) {
            out.push_back(p);
        }
    }
    while (out.size() > 1 && out.front() == out.back()) {
        out.pop_back();
    }
    return out;
}

OperationArea::OperationArea(std::string city, Ring ring) : city_(std::move(city)), ring_(normalize_ring(std::move(ring))) {
    if (ring_.size() < 3) {
        throw InputError("operation area needs at least three distinct vertices");
    }
    for (const auto& p : ring_) {
        if (!std::isfinite(p.lon) || !std::isfinite(p.lat) || p.lon < -180.0 || p.lon > 180.0 || p.lat < -90.0 ||
            p.lat > 90.0) {
            throw InputError("operation area vertex outside WGS84 range");
        }
    }
    if (!ring_is_simple(ring_)) {
        throw InputError("operation area polygon is self-intersecting");
    }
    bbox_ = bounding_box(ring_);

    // Area-weighted centroid in degree space; good enough as a projection anchor.
    double a2 = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    const GeoPoint ref = ring_.front();
    for (std::size_t i = 0, j = ring_.size() - 1; i < ring_.size(); j = i++) {
        const double xj = ring_[j].lon - ref.lon;
        const double yj = ring_[j].lat - ref.lat;
        const double xi = ring_[i].lon - ref.lon;
        const double yi = ring_[i].lat - ref.lat;
        const double c = xj * yi - xi * yj;
        a2 += c;
        cx += (xj + xi) * c;
        cy += (yj + yi) * c;
    }
    if (std::abs(a2) <= 0.0) {
        throw InputError("operation area polygon is degenerate");
    }
    centroid_ = {ref.lon + cx / (3.0 * a2), ref.lat + cy / (3.0 * a2)};
    projection_ = LocalProjection(centroid_);
    area_km2_ = std::abs(planar_signed_area(planar_ring())) / 1e6;
    if (!(area_km2_ > 0.0)) {
        throw InputError("operation area polygon is degenerate");
    }
}

bool OperationArea::contains(GeoPoint p) const {
    if (p.lon < bbox_.min_lon || p.lon > bbox_.max_lon || p.lat < bbox_.min_lat || p.lat > bbox_.max_lat) {
        return false;
    }
    return ring_contains(ring_, p);
}

std::vector<PlanarPoint> OperationArea::planar_ring() const {
    std::vector<PlanarPoint> out;
    out.reserve(ring_.size());
    for (const auto& p : ring_) {
        out.push_back(projection_.to_plane(p));
    }
    return out;
}

Ring ring_from_geojson(const nlohmann::json& doc) {
    const nlohmann::json* geom = &doc;
    if (doc.value("type", "") == "FeatureCollection") {
        const auto& features = doc.at("features");
        if (features.empty()) {
            throw InputError("GeoJSON FeatureCollection has no features");
        }
        geom = &features.front().at("geometry");
    } else if (doc.value("type", "") == "Feature") {
        geom = &doc.at("geometry");
    }
    const std::string type = geom->value("type", "");
    const nlohmann::json* rings = nullptr;
    if (type == "Polygon") {
        rings = &geom->at("coordinates");
    } else if (type == "MultiPolygon") {
        rings = &geom->at("coordinates").at(0);
    } else {
        throw InputError("GeoJSON geometry must be a Polygon, got '" + type + "'");
    }
    Ring ring;
    for (const auto& c : rings->at(0)) {
        ring.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    }
    return normalize_ring(std::move(ring));
}

OperationArea load_operation_area(const std::filesystem::path& path, const std::string& city) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot read operation area: " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("invalid GeoJSON in " + path.string() + ": " + e.what());
    }
    std::string name = city;
    if (name.empty() && doc.value("type", "") == "FeatureCollection" && !doc.at("features").empty()) {
        const auto& props = doc["features"][0].value("properties", nlohmann::json::object());
        name = props.value("city", "");
    } else if (name.empty() && doc.value("type", "") == "Feature") {
        name = doc.value("properties", nlohmann::json::object()).value("city", "");
    }
    try {
        return OperationArea(name, ring_from_geojson(doc));
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed polygon in " + path.string() + ": " + e.what());
    }
}

nlohmann::json ring_to_geojson_geometry(const Ring& ring) {
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& p : ring) {
        coords.push_back({p.lon, p.lat});
    }
    coords.push_back({ring.front().lon, ring.front().lat});
    return {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({coords})}};
}

Ring rectangle_ring(GeoPoint south_west, GeoPoint north_east) {
    return {south_west, {north_east.lon, south_west.lat}, north_east, {south_west.lon, north_east.lat}};
}

}  // namespace carshare
