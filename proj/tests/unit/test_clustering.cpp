#include "helpers.hpp"

#include <carshare/clustering.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace carshare;

namespace {

/// Plain DP over the full cost matrix with the symmetric step pattern.
double dtw_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size(), m = b.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> g(n + 1, std::vector<double>(m + 1, inf));
    g[0][0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j) {
            const double c = (a[i - 1] - b[j - 1]) * (a[i - 1] - b[j - 1]);
            g[i][j] = c + std::min({g[i - 1][j], g[i][j - 1], g[i - 1][j - 1]});
        }
    return g[n][m];
}

Eigen::MatrixXd euclid(const std::vector<std::array<double, 2>>& pts) {
    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            d(i, j) = std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
    return d;
}

std::vector<std::array<double, 2>> blobs(int k, int per, std::uint64_t seed, std::vector<int>* truth = nullptr) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 0.3);
    std::vector<std::array<double, 2>> pts;
    for (int c = 0; c < k; ++c)
        for (int i = 0; i < per; ++i) {
            pts.push_back({10.0 * c + z(rng), 10.0 * (c % 2) + z(rng)});
            if (truth) truth->push_back(c);
        }
    return pts;
}

/// 144-bin profile with a bump of the given height centred at `hour`.
std::vector<double> bump_profile(double hour, double height, double base = 1.0) {
    std::vector<double> v(144);
    for (int b = 0; b < 144; ++b) {
        double d = std::abs(b / 6.0 - hour);
        d = std::min(d, 24.0 - d);
        v[b] = base + height * std::exp(-d * d / 2.0);
    }
    return v;
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("profile normalisation") {
    const std::vector<double> flat(144, 3.0);
    for (double v : normalise_profile(flat)) CHECK(v == 1.0);
    const auto p = bump_profile(8.0, 2.0);
    std::vector<double> scaled = p;
    for (double& v : scaled) v *= 10.0;
    const auto a = normalise_profile(p), b = normalise_profile(scaled);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]));
    CHECK(normalise_profile(std::vector<double>(4, 0.0)).empty());
}

TEST_CASE("residential cell is above one at night") {
    const auto area = test::rect_area(1000, 1000);
    const Grid g = build_grid(area, 500.0);
    SnapshotSet s;
    for (int day = 0; day < 3; ++day)
        for (int m = 0; m < 1440; m += 5) {
            const int hour = m / 60;
            test::add_sighting(s, "anchor", test::at(day, 0, m), test::offset(g, 750, 750));
            if (hour >= 20 || hour < 8) test::add_sighting(s, "home", test::at(day, 0, m), test::offset(g, 250, 250));
        }
    s.finalize();
    const auto profiles = availability_profiles(s, g, 10);
    REQUIRE(profiles.size() == 2);
    const auto& home = profiles[0].cell == CellId{0, 0} ? profiles[0] : profiles[1];
    const auto& anchor = profiles[0].cell == CellId{0, 0} ? profiles[1] : profiles[0];
    for (int b = 0; b < 144; ++b) {
        const int hour = b / 6;
        if (hour >= 20 || hour < 8) CHECK(home.values[b] > 1.0);
        else CHECK(home.values[b] < 1.0);
        CHECK(anchor.values[b] == doctest::Approx(1.0));
    }
}

TEST_CASE("dtw basics") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    std::vector<double> a(30), b(30);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    CHECK(dtw_distance(a, a, 5) == 0.0);
    CHECK(dtw_distance(a, b, 5) == dtw_distance(b, a, 5));
    double prev = dtw_distance(a, b, 0);
    for (int band = 1; band <= 30; ++band) {
        const double d = dtw_distance(a, b, band);
        CHECK(d <= prev + 1e-12);
        prev = d;
    }
    CHECK(dtw_distance(a, b, 30) == doctest::Approx(dtw_oracle(a, b)));
    CHECK_THROWS_AS(dtw_distance(a, std::vector<double>(29, 0.0), 5), InvalidArgument);
    CHECK_THROWS_AS(dtw_distance(a, b, -1), InvalidArgument);
}

TEST_CASE("dtw tolerates a shift") {
    std::vector<double> a(72, 1.0), b(72, 1.0);
    for (int i = 20; i < 26; ++i) a[i] = 3.0;
    for (int i = 24; i < 30; ++i) b[i] = 3.0;
    double euclid_sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) euclid_sq += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(dtw_distance(a, b, 12) < 0.1 * euclid_sq);
    CHECK(dtw_distance(a, b, 0) == doctest::Approx(euclid_sq));
}

TEST_CASE("pam") {
    const auto pts = blobs(3, 4, 2);
    const auto d = euclid(pts);
    const auto all = pam(d, static_cast<int>(pts.size()));
    CHECK(all.cost == 0.0);
    CHECK(all.medoids.size() == pts.size());
    CHECK_THROWS_AS(pam(d, 0), InvalidArgument);

    std::vector<int> truth;
    const auto two = blobs(2, 15, 3, &truth);
    const auto r = pam(euclid(two), 2);
    CHECK(adjusted_rand_index(r.assignment, truth) == 1.0);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<std::array<double, 2>> scatter(40);
    for (auto& p : scatter) p = {u(rng), u(rng)};
    const auto s = pam(euclid(scatter), 5);
    for (std::size_t i = 1; i < s.cost_trace.size(); ++i) CHECK(s.cost_trace[i] <= s.cost_trace[i - 1]);
    CHECK(s.cost == doctest::Approx(s.cost_trace.back()));
}

TEST_CASE("silhouette selects the planted k") {
    CHECK(select_k(euclid(blobs(3, 10, 5))).k == 3);
    CHECK(select_k(euclid(blobs(2, 10, 6))).k == 2);
    const auto same = select_k(Eigen::MatrixXd::Zero(6, 6));
    CHECK(same.k == 1);
    CHECK_FALSE(same.warnings.empty());
}

TEST_CASE("adjusted rand index") {
    CHECK(adjusted_rand_index({0, 0, 1, 1, 2}, {2, 2, 0, 0, 1}) == doctest::Approx(1.0));
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) < 0.0);
}

TEST_CASE("label rules") {
    std::vector<std::vector<double>> profiles;
    std::vector<int> assignment;
    for (int i = 0; i < 5; ++i) {
        profiles.push_back(normalise_profile(bump_profile(13.0, 0.64)));
        assignment.push_back(0);
    }
    for (int i = 0; i < 5; ++i) {
        profiles.push_back(normalise_profile(bump_profile(2.0, 0.8)));
        assignment.push_back(1);
    }
    for (int i = 0; i < 5; ++i) {
        profiles.push_back(normalise_profile(bump_profile(7.0, 0.05)));
        assignment.push_back(2);
    }
    profiles.push_back(normalise_profile(bump_profile(18.0, 20.0, 0.2)));
    assignment.push_back(3);
    const auto labels = label_clusters(profiles, assignment, 4);
    CHECK(labels[0].label == kLabelDay);
    CHECK(labels[0].range == doctest::Approx(0.6).epsilon(0.02));
    CHECK(labels[1].label == kLabelNight);
    CHECK(labels[2].label == kLabelNeutral);
    CHECK(labels[3].label == kLabelHighIntensity);
    CHECK(labels[3].range > 10.0 * labels[0].range);

    auto scaled = profiles;
    for (auto& p : scaled) {
        for (double& v : p) v *= 7.0;
        p = normalise_profile(p);
    }
    const auto again = label_clusters(scaled, assignment, 4);
    for (int c = 0; c < 4; ++c) CHECK(again[c].label == labels[c].label);
}

TEST_CASE("two day clusters keep one day label") {
    std::vector<std::vector<double>> profiles{bump_profile(12.0, 1.0), bump_profile(11.0, 0.5)};
    for (auto& p : profiles) p = normalise_profile(p);
    LabelRules rules;
    rules.high_intensity_max_cells = 0;
    const auto labels = label_clusters(profiles, {0, 1}, 2, rules);
    CHECK(labels[0].label == kLabelDay);
    CHECK(labels[1].label == kLabelNeutral);
}

}  // TEST_SUITE
