#pragma once

#include <carshare/geo.hpp>
#include <carshare/types.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

namespace carshare {

/// Square tessellation of an operation area's bounding box.
///
/// Cell (row, col) covers [col*side, (col+1)*side) x [row*side, (row+1)*side) metres
/// east and north of the south-west bounding-box corner. Shared edges belong to the
/// cell with the larger index; the outer north and east edges fold into the last
/// row and column. Immutable after construction, so concurrent queries are safe.
class Grid {
public:
    Grid(GeoPoint origin, double cell_side_m, int n_rows, int n_cols, LocalProjection projection,
         std::vector<CellId> active_cells);

    GeoPoint origin() const { return origin_; }
    double cell_side() const { return cell_side_; }
    int rows() const { return n_rows_; }
    int cols() const { return n_cols_; }
    const LocalProjection& projection() const { return projection_; }

    /// Active cells in (row, col) order.
    const std::vector<CellId>& active_cells() const { return active_; }
    bool in_bounds(CellId c) const { return c.row >= 0 && c.row < n_rows_ && c.col >= 0 && c.col < n_cols_; }
    bool is_active(CellId c) const;
    /// Position of an active cell in active_cells(), or nullopt.
    std::optional<std::size_t> active_index(CellId c) const;

    /// Cell containing the point, or nullopt outside the bounding box.
    std::optional<CellId> locate(GeoPoint p) const;
    /// Like locate(), but when the owning cell is inactive and the point lies on its
    /// south or west edge, the active neighbour across that edge is returned instead.
    std::optional<CellId> locate_active(GeoPoint p) const;

    /// Active cells within Chebyshev distance <= hops of an active cell, excluding it.
    /// Throws InvalidArgument for an inactive cell.
    std::vector<CellId> neighbors(CellId c, int hops) const;

    /// Cell square in metres relative to the grid origin: x0, y0, x1, y1.
    std::array<double, 4> cell_bounds_m(CellId c) const;
    Ring cell_ring(CellId c) const;
    GeoPoint cell_center(CellId c) const;

    /// Planar coordinates of a point relative to the grid origin.
    PlanarPoint offset_m(GeoPoint p) const;

private:
    GeoPoint origin_;
    double cell_side_;
    int n_rows_;
    int n_cols_;
    LocalProjection projection_;
    PlanarPoint origin_plane_;
    std::vector<CellId> active_;
    std::vector<int> active_lookup_;  // row-major, -1 when inactive
};

/// Builds the grid and marks every cell whose interior meets the polygon interior.
Grid build_grid(const OperationArea& area, double cell_side_m = 500.0);

/// FeatureCollection with one polygon per active cell (properties row, col) and a
/// top-level "grid" member holding everything needed to rebuild the grid exactly.
nlohmann::json grid_to_geojson(const Grid& grid);
Grid grid_from_geojson(const nlohmann::json& doc);

}  // namespace carshare
