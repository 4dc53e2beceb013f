#include <carshare/grid.hpp>

#include <algorithm>
#include <array>
#include <cmath>

namespace carshare {

namespace {

// Liang-Barsky clip of segment ab against the closed rectangle; true when the clipped
// part has a point strictly inside the rectangle.
bool segment_enters_interior(PlanarPoint a, PlanarPoint b, const std::array<double, 4>& r) {
    double t0 = 0.0;
    double t1 = 1.0;
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const std::array<double, 4> p{-dx, dx, -dy, dy};
    const std::array<double, 4> q{a.x - r[0], r[2] - a.x, a.y - r[1], r[3] - a.y};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) {
                return false;
            }
            continue;
        }
        const double t = q[i] / p[i];
        if (p[i] < 0.0) {
            t0 = std::max(t0, t);
        } else {
            t1 = std::min(t1, t);
        }
        if (t0 > t1) {
            return false;
        }
    }
    const double tm = 0.5 * (t0 + t1);
    const double mx = a.x + tm * dx;
    const double my = a.y + tm * dy;
    const double eps = 1e-9 * std::max(1.0, r[2] - r[0]);
    return mx > r[0] + eps && mx < r[2] - eps && my > r[1] + eps && my < r[3] - eps;
}

bool planar_contains(const std::vector<PlanarPoint>& ring, PlanarPoint p) {
    bool inside = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const auto& a = ring[i];
        const auto& b = ring[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) {
                inside = !inside;
            }
        }
    }
    return inside;
}

int span_count(double extent, double side) {
    return std::max(1, static_cast<int>(std::ceil(extent / side - 1e-9)));
}

}  // namespace

Grid::Grid(GeoPoint origin, double cell_side_m, int n_rows, int n_cols, LocalProjection projection,
           std::vector<CellId> active_cells)
    : origin_(origin),
      cell_side_(cell_side_m),
      n_rows_(n_rows),
      n_cols_(n_cols),
      projection_(projection),
      origin_plane_(projection.to_plane(origin)),
      active_(std::move(active_cells)),
      active_lookup_(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols), -1) {
    if (!(cell_side_m > 0.0) || n_rows <= 0 || n_cols <= 0) {
        throw InvalidArgument("grid needs a positive cell side and at least one row and column");
    }
    std::sort(active_.begin(), active_.end());
    active_.erase(std::unique(active_.begin(), active_.end()), active_.end());
    for (std::size_t i = 0; i < active_.size(); ++i) {
        if (!in_bounds(active_[i])) {
            throw InvalidArgument("active cell outside grid bounds");
        }
        active_lookup_[static_cast<std::size_t>(active_[i].row) * static_cast<std::size_t>(n_cols_) +
                       static_cast<std::size_t>(active_[i].col)] = static_cast<int>(i);
    }
}

bool Grid::is_active(CellId c) const { return active_index(c).has_value(); }

std::optional<std::size_t> Grid::active_index(CellId c) const {
    if (!in_bounds(c)) {
        return std::nullopt;
    }
    const int idx = active_lookup_[static_cast<std::size_t>(c.row) * static_cast<std::size_t>(n_cols_) +
                                   static_cast<std::size_t>(c.col)];
    if (idx < 0) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(idx);
}

PlanarPoint Grid::offset_m(GeoPoint p) const {
    const PlanarPoint q = projection_.to_plane(p);
    return {q.x - origin_plane_.x, q.y - origin_plane_.y};
}

std::optional<CellId> Grid::locate(GeoPoint p) const {
    const PlanarPoint o = offset_m(p);
    if (!std::isfinite(o.x) || !std::isfinite(o.y) || o.x < 0.0 || o.y < 0.0) {
        return std::nullopt;
    }
    auto index = [&](double v, int n) -> std::optional<int> {
        const double limit = n * cell_side_;
        if (v > limit * (1.0 + 1e-9)) {
            return std::nullopt;
        }
        return std::min(n - 1, static_cast<int>(std::floor(v / cell_side_)));
    };
    auto col = index(o.x, n_cols_);
    auto row = index(o.y, n_rows_);
    if (!col || !row) {
        return std::nullopt;
    }
    return CellId{*row, *col};
}

std::optional<CellId> Grid::locate_active(GeoPoint p) const {
    auto cell = locate(p);
    if (!cell || is_active(*cell)) {
        return cell;
    }
    const PlanarPoint o = offset_m(p);
    const double tol = 1e-9 * cell_side_;
    const bool on_west = std::abs(o.x - cell->col * cell_side_) <= tol;
    const bool on_south = std::abs(o.y - cell->row * cell_side_) <= tol;
    const std::array<CellId, 3> candidates{CellId{cell->row, cell->col - 1}, CellId{cell->row - 1, cell->col},
                                           CellId{cell->row - 1, cell->col - 1}};
    const std::array<bool, 3> allowed{on_west, on_south, on_west && on_south};
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (allowed[i] && is_active(candidates[i])) {
            return candidates[i];
        }
    }
    return std::nullopt;
}

std::vector<CellId> Grid::neighbors(CellId c, int hops) const {
    if (!is_active(c)) {
        throw InvalidArgument("neighbours requested for an inactive cell");
    }
    if (hops < 0) {
        throw InvalidArgument("hop count must be non-negative");
    }
    std::vector<CellId> out;
    for (int r = std::max(0, c.row - hops); r <= std::min(n_rows_ - 1, c.row + hops); ++r) {
        for (int k = std::max(0, c.col - hops); k <= std::min(n_cols_ - 1, c.col + hops); ++k) {
            const CellId n{r, k};
            if (n != c && is_active(n)) {
                out.push_back(n);
            }
        }
    }
    return out;
}

std::array<double, 4> Grid::cell_bounds_m(CellId c) const {
    return {c.col * cell_side_, c.row * cell_side_, (c.col + 1) * cell_side_, (c.row + 1) * cell_side_};
}

Ring Grid::cell_ring(CellId c) const {
    const auto b = cell_bounds_m(c);
    auto geo = [&](double x, double y) { return projection_.to_geo({origin_plane_.x + x, origin_plane_.y + y}); };
    return {geo(b[0], b[1]), geo(b[2], b[1]), geo(b[2], b[3]), geo(b[0], b[3])};
}

GeoPoint Grid::cell_center(CellId c) const {
    const auto b = cell_bounds_m(c);
    return projection_.to_geo({origin_plane_.x + 0.5 * (b[0] + b[2]), origin_plane_.y + 0.5 * (b[1] + b[3])});
}

Grid build_grid(const OperationArea& area, double cell_side_m) {
    if (!std::isfinite(cell_side_m) || !(cell_side_m > 0.0)) {
        throw InvalidArgument("cell side must be positive");
    }
    const BoundingBox& box = area.bbox();
    const GeoPoint origin{box.min_lon, box.min_lat};
    const LocalProjection& proj = area.projection();
    const PlanarPoint sw = proj.to_plane(origin);
    const PlanarPoint ne = proj.to_plane({box.max_lon, box.max_lat});
    const double width = ne.x - sw.x;
    const double height = ne.y - sw.y;
    if (!(width > 0.0) || !(height > 0.0)) {
        throw InvalidArgument("operation area has a degenerate bounding box");
    }
    const int n_cols = span_count(width, cell_side_m);
    const int n_rows = span_count(height, cell_side_m);

    std::vector<PlanarPoint> ring = area.planar_ring();
    for (auto& p : ring) {
        p = {p.x - sw.x, p.y - sw.y};
    }

    std::vector<CellId> active;
    for (int r = 0; r < n_rows; ++r) {
        for (int c = 0; c < n_cols; ++c) {
            const std::array<double, 4> rect{c * cell_side_m, r * cell_side_m, (c + 1) * cell_side_m,
                                             (r + 1) * cell_side_m};
            bool hit = planar_contains(ring, {0.5 * (rect[0] + rect[2]), 0.5 * (rect[1] + rect[3])});
            for (std::size_t i = 0, j = ring.size() - 1; !hit && i < ring.size(); j = i++) {
                hit = segment_enters_interior(ring[j], ring[i], rect);
            }
            if (hit) {
                active.push_back({r, c});
            }
        }
    }
    return Grid(origin, cell_side_m, n_rows, n_cols, proj, std::move(active));
}

nlohmann::json grid_to_geojson(const Grid& grid) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& c : grid.active_cells()) {
        features.push_back({{"type", "Feature"},
                            {"properties", {{"row", c.row}, {"col", c.col}}},
                            {"geometry", ring_to_geojson_geometry(grid.cell_ring(c))}});
    }
    const auto anchor = grid.projection().anchor();
    return {{"type", "FeatureCollection"},
            {"grid",
             {{"origin", {grid.origin().lon, grid.origin().lat}},
              {"cell_side_m", grid.cell_side()},
              {"rows", grid.rows()},
              {"cols", grid.cols()},
              {"projection", "local-equirectangular"},
              {"projection_anchor", {anchor.lon, anchor.lat}}}},
            {"features", features}};
}

Grid grid_from_geojson(const nlohmann::json& doc) {
    try {
        const auto& meta = doc.at("grid");
        const GeoPoint origin{meta.at("origin").at(0).get<double>(), meta.at("origin").at(1).get<double>()};
        const GeoPoint anchor{meta.at("projection_anchor").at(0).get<double>(),
                              meta.at("projection_anchor").at(1).get<double>()};
        std::vector<CellId> active;
        for (const auto& f : doc.at("features")) {
            const auto& props = f.at("properties");
            active.push_back({props.at("row").get<int>(), props.at("col").get<int>()});
        }
        return Grid(origin, meta.at("cell_side_m").get<double>(), meta.at("rows").get<int>(),
                    meta.at("cols").get<int>(), LocalProjection(anchor), std::move(active));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("grid GeoJSON lacks metadata: ") + e.what());
    }
}

}  // namespace carshare
