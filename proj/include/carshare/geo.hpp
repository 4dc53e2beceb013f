#pragma once

#include <carshare/types.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace carshare {

/// Mean Earth radius in metres (IUGG).
inline constexpr double kEarthRadiusM = 6371008.8;

/// Great-circle distance in metres.
double haversine_m(GeoPoint a, GeoPoint b);

struct PlanarPoint {
    double x = 0.0;
    double y = 0.0;
};

/// Local equirectangular projection anchored at a reference point.
///
/// Metres are degrees times a per-axis scale evaluated at the anchor latitude.
/// At city scale (tens of kilometres) the distortion stays below half a percent.
class LocalProjection {
public:
    LocalProjection() = default;
    explicit LocalProjection(GeoPoint anchor);

    PlanarPoint to_plane(GeoPoint p) const;
    GeoPoint to_geo(PlanarPoint p) const;

    GeoPoint anchor() const { return anchor_; }
    double metres_per_degree_lon() const { return m_per_deg_lon_; }
    double metres_per_degree_lat() const { return m_per_deg_lat_; }

private:
    GeoPoint anchor_{};
    double m_per_deg_lon_ = 0.0;
    double m_per_deg_lat_ = 0.0;
};

/// Polygon ring stored open: the closing vertex is implicit.
using Ring = std::vector<GeoPoint>;

struct BoundingBox {
    double min_lon = 0.0;
    double min_lat = 0.0;
    double max_lon = 0.0;
    double max_lat = 0.0;
};

BoundingBox bounding_box(const Ring& ring);

/// Point-in-polygon with the closed convention: boundary points are inside.
bool ring_contains(const Ring& ring, GeoPoint p);

/// True when no two non-adjacent edges touch and no adjacent edges overlap.
bool ring_is_simple(const Ring& ring);

/// Signed shoelace area in the units of the given planar coordinates.
double planar_signed_area(const std::vector<PlanarPoint>& ring);

/// Drops a repeated closing vertex and consecutive duplicates.
Ring normalize_ring(Ring ring);

/// The polygon inside which vehicles may be parked and rented.
class OperationArea {
public:
    /// Validates the ring: at least three distinct vertices, coordinates in range,
    /// simple, and with positive area. Throws InputError otherwise.
    OperationArea(std::string city, Ring ring);

    const std::string& city() const { return city_; }
    const Ring& ring() const { return ring_; }
    const BoundingBox& bbox() const { return bbox_; }
    GeoPoint centroid() const { return centroid_; }
    const LocalProjection& projection() const { return projection_; }
    double area_km2() const { return area_km2_; }

    bool contains(GeoPoint p) const;

    /// Ring projected with the area's local projection.
    std::vector<PlanarPoint> planar_ring() const;

private:
    std::string city_;
    Ring ring_;
    BoundingBox bbox_{};
    GeoPoint centroid_{};
    LocalProjection projection_;
    double area_km2_ = 0.0;
};

/// Reads the first Polygon (outer ring) from a GeoJSON Feature, FeatureCollection
/// or bare geometry.
Ring ring_from_geojson(const nlohmann::json& doc);
OperationArea load_operation_area(const std::filesystem::path& path, const std::string& city = {});
nlohmann::json ring_to_geojson_geometry(const Ring& ring);

/// Axis-aligned square in WGS84 degrees, counter-clockwise from the south-west corner.
Ring rectangle_ring(GeoPoint south_west, GeoPoint north_east);

}  // namespace carshare
