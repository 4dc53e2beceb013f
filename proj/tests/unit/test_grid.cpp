#include "helpers.hpp"

#include <carshare/grid.hpp>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/box.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace carshare;
namespace bg = boost::geometry;

TEST_SUITE("grid") {

TEST_CASE("two kilometre square gives 16 cells") {
    const Grid g = build_grid(test::rect_area(2000, 2000), 500.0);
    CHECK(g.rows() == 4);
    CHECK(g.cols() == 4);
    CHECK(g.active_cells().size() == 16);
}

TEST_CASE("cell side must be positive") {
    const auto area = test::rect_area(2000, 2000);
    CHECK_THROWS_AS(build_grid(area, 0.0), InvalidArgument);
    CHECK_THROWS_AS(build_grid(area, -5.0), InvalidArgument);
}

TEST_CASE("locate") {
    const Grid g = build_grid(test::rect_area(2000, 2000), 500.0);
    CHECK(g.locate(g.origin()) == CellId{0, 0});
    CHECK(g.locate(test::offset(g, 501, 1)) == CellId{0, 1});
    CHECK(g.locate(test::offset(g, 250, 1250)) == CellId{2, 0});
    CHECK_FALSE(g.locate(test::offset(g, -10, 10)).has_value());
}

TEST_CASE("locate agrees with nearest cell centre") {
    const Grid g = build_grid(test::rect_area(4000, 3000), 500.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(1e-3, 3990.0), uy(1e-3, 2990.0);
    int agree = 0;
    for (int i = 0; i < 10000; ++i) {
        const double x = ux(rng), y = uy(rng);
        CellId best{};
        double best_d = 1e300;
        for (int r = 0; r < g.rows(); ++r) {
            for (int c = 0; c < g.cols(); ++c) {
                const double dx = x - (c + 0.5) * 500.0, dy = y - (r + 0.5) * 500.0;
                if (dx * dx + dy * dy < best_d) {
                    best_d = dx * dx + dy * dy;
                    best = {r, c};
                }
            }
        }
        const auto got = g.locate(test::offset(g, x, y));
        agree += got && *got == best;
    }
    CHECK(agree == 10000);
}

TEST_CASE("neighbour counts") {
    const Grid g = build_grid(test::rect_area(3000, 3000), 500.0);
    CHECK(g.neighbors({3, 3}, 1).size() == 8);
    CHECK(g.neighbors({3, 3}, 2).size() == 24);
    CHECK(g.neighbors({0, 0}, 1).size() == 3);
    CHECK(g.neighbors({0, 0}, 2).size() == 8);
}

TEST_CASE("neighbours are symmetric and nested") {
    const Grid g = build_grid(test::rect_area(2500, 2000), 500.0);
    for (const CellId a : g.active_cells()) {
        for (int h = 1; h <= 2; ++h) {
            const auto na = g.neighbors(a, h);
            const auto wider = g.neighbors(a, h + 1);
            for (const CellId b : na) {
                const auto nb = g.neighbors(b, h);
                CHECK(std::count(nb.begin(), nb.end(), a) == 1);
                CHECK(std::count(wider.begin(), wider.end(), b) == 1);
            }
        }
    }
}

TEST_CASE("active cells match a clipping oracle") {
    using Pt = bg::model::d2::point_xy<double>;
    using Poly = bg::model::polygon<Pt, false>;
    const GeoPoint sw{9.10, 45.40};
    const LocalProjection p(sw);
    const std::vector<PlanarPoint> shape{{130, 70}, {4710, 310}, {4380, 2230}, {2620, 1890}, {2280, 4460}, {410, 3940}};
    Ring ring;
    for (const auto& q : shape) ring.push_back(p.to_geo(q));
    const OperationArea area("poly", ring);
    const Grid g = build_grid(area, 500.0);

    Poly poly;
    const auto o = g.projection().to_plane(g.origin());
    for (const auto& v : area.ring()) {
        const auto q = g.projection().to_plane(v);
        bg::append(poly.outer(), Pt(q.x - o.x, q.y - o.y));
    }
    bg::correct(poly);
    std::set<CellId> expected;
    for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) {
            const bg::model::box<Pt> cell(Pt(c * 500.0, r * 500.0), Pt((c + 1) * 500.0, (r + 1) * 500.0));
            std::vector<Poly> out;
            bg::intersection(cell, poly, out);
            double a = 0.0;
            for (const auto& piece : out) a += bg::area(piece);
            if (a > 1e-6) expected.insert({r, c});
        }
    }
    const std::set<CellId> got(g.active_cells().begin(), g.active_cells().end());
    CHECK(got == expected);
    CHECK(got.size() < static_cast<std::size_t>(g.rows() * g.cols()));
}

TEST_CASE("every in-area point maps to one active cell") {
    const auto area = test::rect_area(2300, 1700);
    const Grid g = build_grid(area, 500.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto& b = area.bbox();
    for (int i = 0; i < 2000; ++i) {
        const GeoPoint q{b.min_lon + u(rng) * (b.max_lon - b.min_lon), b.min_lat + u(rng) * (b.max_lat - b.min_lat)};
        if (!area.contains(q)) continue;
        const auto c = g.locate_active(q);
        REQUIRE(c.has_value());
        CHECK(g.is_active(*c));
    }
}

TEST_CASE("geojson round trip") {
    const Grid g = build_grid(test::rect_area(2000, 1500), 500.0);
    const Grid back = grid_from_geojson(grid_to_geojson(g));
    CHECK(back.rows() == g.rows());
    CHECK(back.cols() == g.cols());
    CHECK(back.active_cells() == g.active_cells());
    CHECK(back.locate(test::offset(g, 760, 20)) == g.locate(test::offset(g, 760, 20)));
}

}  // TEST_SUITE
