#include <carshare/joincount.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

using namespace carshare;

namespace {

std::vector<CellId> square(int n) {
    std::vector<CellId> out;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) out.push_back({r, c});
    return out;
}

const JoinCountRow& row_of(const JoinCountResult& r, const std::string& label) {
    for (const auto& row : r.rows)
        if (row.label == label) return row;
    throw std::runtime_error("missing row " + label);
}

double joins_of(const LabelledLattice& l, const std::vector<int>& lab, int which) {
    double n = 0;
    for (const auto& [a, b] : l.edges) n += lab[a] == which && lab[b] == which;
    return n;
}

}  // namespace

TEST_SUITE("joincount") {

TEST_CASE("edge counts") {
    const auto cells = square(5);
    const std::vector<std::string> labels(25, "a");
    CHECK(make_lattice(cells, labels, Adjacency::rook).edges.size() == 2u * 5 * 4);
    CHECK(make_lattice(cells, labels, Adjacency::queen).edges.size() == 2u * 5 * 4 + 2u * 4 * 4);
}

TEST_CASE("single label is degenerate") {
    const auto cells = square(4);
    const auto l = make_lattice(cells, std::vector<std::string>(16, "day"), Adjacency::queen);
    const auto r = join_count(l);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].observed == static_cast<double>(l.edges.size()));
    CHECK(r.rows[0].degenerate);
    CHECK(std::isnan(r.rows[0].z));
    std::ostringstream out;
    write_join_count_csv(out, r);
    CHECK(out.str().find("NA") != std::string::npos);
}

TEST_CASE("checkerboard under rook adjacency") {
    const auto cells = square(6);
    std::vector<std::string> labels;
    for (const auto& c : cells) labels.push_back((c.row + c.col) % 2 ? "night" : "day");
    const auto r = join_count(make_lattice(cells, labels, Adjacency::rook));
    for (const auto& row : r.rows) {
        CHECK(row.observed == 0.0);
        CHECK(row.z < -3.0);
        CHECK(row.p_value > 0.99);
    }
}

TEST_CASE("high-intensity cells are excluded") {
    const auto cells = square(3);
    std::vector<std::string> labels(9, "day");
    labels[4] = "high-intensity";
    const auto l = make_lattice(cells, labels, Adjacency::queen);
    CHECK(l.size() == 8);
    CHECK(std::find(l.names.begin(), l.names.end(), "high-intensity") == l.names.end());
}

TEST_CASE("moments match exact enumeration") {
    const auto cells = square(3);
    std::vector<std::string> labels{"a", "a", "b", "a", "c", "b", "a", "b", "c"};
    for (const auto adj : {Adjacency::queen, Adjacency::rook}) {
        const auto l = make_lattice(cells, labels, adj);
        std::vector<int> perm = l.label;
        std::sort(perm.begin(), perm.end());
        std::map<int, std::pair<double, double>> sums;
        double count = 0;
        do {
            for (int k = 0; k < static_cast<int>(l.names.size()); ++k) {
                const double j = joins_of(l, perm, k);
                sums[k].first += j;
                sums[k].second += j * j;
            }
            ++count;
        } while (std::next_permutation(perm.begin(), perm.end()));
        const auto r = join_count(l);
        for (int k = 0; k < static_cast<int>(l.names.size()); ++k) {
            const double mean = sums[k].first / count;
            const double var = sums[k].second / count - mean * mean;
            const auto& row = row_of(r, l.names[k]);
            CHECK(row.expected == doctest::Approx(mean));
            CHECK(row.variance == doctest::Approx(var));
        }
    }
}

TEST_CASE("free sampling moments match exact enumeration") {
    const auto cells = square(3);
    std::vector<std::string> labels{"a", "a", "b", "a", "b", "b", "a", "b", "a"};
    const auto l = make_lattice(cells, labels, Adjacency::queen);
    JoinCountOptions opt;
    opt.sampling = Sampling::free;
    const auto r = join_count(l, opt);
    for (int k = 0; k < 2; ++k) {
        const double p = static_cast<double>(std::count(l.label.begin(), l.label.end(), k)) / 9.0;
        double m1 = 0, m2 = 0;
        for (int mask = 0; mask < 512; ++mask) {
            std::vector<int> lab(9);
            double w = 1.0;
            for (int i = 0; i < 9; ++i) {
                const bool in = mask >> i & 1;
                lab[i] = in ? k : -1;
                w *= in ? p : 1.0 - p;
            }
            const double j = joins_of(l, lab, k);
            m1 += w * j;
            m2 += w * j * j;
        }
        const auto& row = row_of(r, l.names[k]);
        CHECK(row.expected == doctest::Approx(m1));
        CHECK(row.variance == doctest::Approx(m2 - m1 * m1));
    }
}

TEST_CASE("renaming labels permutes rows only") {
    const auto cells = square(6);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> u(0, 2);
    const std::vector<std::string> a{"day", "night", "neutral"}, b{"neutral", "day", "night"};
    std::vector<std::string> la, lb;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const int k = u(rng);
        la.push_back(a[k]);
        lb.push_back(b[k]);
    }
    const auto ra = join_count(make_lattice(cells, la));
    const auto rb = join_count(make_lattice(cells, lb));
    for (int k = 0; k < 3; ++k) {
        const auto& x = row_of(ra, a[k]);
        const auto& y = row_of(rb, b[k]);
        CHECK(x.observed == y.observed);
        CHECK(x.expected == doctest::Approx(y.expected));
        CHECK(x.variance == doctest::Approx(y.variance));
        CHECK(x.z == doctest::Approx(y.z));
    }
}

TEST_CASE("same and cross joins add up to all edges") {
    const auto cells = square(7);
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> u(0, 3);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < cells.size(); ++i) labels.push_back("L" + std::to_string(u(rng)));
    const auto l = make_lattice(cells, labels);
    const auto same = same_label_joins(l, l.label);
    std::size_t cross = 0;
    for (const auto& [a, b] : l.edges) cross += l.label[a] != l.label[b];
    std::size_t total = cross;
    for (const auto s : same) total += s;
    CHECK(total == l.edges.size());
}

TEST_CASE("permutation mean agrees with the closed form") {
    const auto cells = square(8);
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> u(0, 2);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < cells.size(); ++i) labels.push_back("L" + std::to_string(u(rng)));
    JoinCountOptions opt;
    opt.permutations = 999;
    opt.seed = 5;
    const auto r = join_count(make_lattice(cells, labels), opt);
    for (const auto& row : r.rows) {
        REQUIRE(row.permutation_mean.has_value());
        CHECK(std::abs(*row.permutation_mean - row.expected) < 3.0 * *row.permutation_se);
        CHECK(*row.permutation_p > 0.0);
        CHECK(*row.permutation_p <= 1.0);
    }
}

TEST_CASE("assignment csv") {
    std::istringstream in("row,col,cluster,label\n0,0,0,day\n0,1,0,day\n1,0,1,night\n1,1,2,high-intensity\n");
    const auto l = read_assignment_csv(in, Adjacency::rook);
    CHECK(l.size() == 3);
    CHECK(l.edges.size() == 2);
}

}  // TEST_SUITE
