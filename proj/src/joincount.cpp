#include <carshare/joincount.hpp>

#include <carshare/csv.hpp>
#include <carshare/parallel.hpp>
#include <carshare/stats.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <fmt/format.h>

namespace carshare {

LabelledLattice make_lattice(const std::vector<CellId>& cells, const std::vector<std::string>& labels,
                             Adjacency adjacency, const std::vector<std::string>& excluded) {
    if (cells.size() != labels.size()) {
        throw InvalidArgument("cells and labels must be aligned");
    }
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (std::find(excluded.begin(), excluded.end(), labels[i]) == excluded.end()) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return cells[a] < cells[b]; });

    LabelledLattice lat;
    std::map<std::string, int> names;
    for (auto i : order) names.emplace(labels[i], 0);
    for (auto& [name, idx] : names) {
        idx = static_cast<int>(lat.names.size());
        lat.names.push_back(name);
    }
    std::map<CellId, std::size_t> position;
    for (auto i : order) {
        if (!position.emplace(cells[i], lat.cells.size()).second) {
            throw InvalidArgument(fmt::format("cell ({}, {}) listed twice", cells[i].row, cells[i].col));
        }
        lat.cells.push_back(cells[i]);
        lat.label.push_back(names.at(labels[i]));
    }
    for (std::size_t a = 0; a < lat.cells.size(); ++a) {
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                if (adjacency == Adjacency::rook && dr != 0 && dc != 0) continue;
                auto it = position.find({lat.cells[a].row + dr, lat.cells[a].col + dc});
                if (it != position.end() && it->second > a) lat.edges.emplace_back(a, it->second);
            }
        }
    }
    return lat;
}

LabelledLattice read_assignment_csv(std::istream& in, Adjacency adjacency, const std::vector<std::string>& excluded) {
    csv::Reader reader(in);
    const auto row_col = reader.require("row");
    const auto col_col = reader.require("col");
    const auto label_col = reader.require("label");
    std::vector<CellId> cells;
    std::vector<std::string> labels;
    std::vector<std::string> row;
    while (reader.next(row)) {
        try {
            cells.push_back({std::stoi(row.at(row_col)), std::stoi(row.at(col_col))});
        } catch (const std::exception&) {
            throw InputError(fmt::format("line {}: bad cell address", reader.line_number()));
        }
        labels.push_back(row.at(label_col));
    }
    return make_lattice(cells, labels, adjacency, excluded);
}

std::vector<std::size_t> same_label_joins(const LabelledLattice& lattice, const std::vector<int>& labels) {
    std::vector<std::size_t> joins(lattice.names.size(), 0);
    for (auto [a, b] : lattice.edges) {
        if (labels[a] == labels[b]) ++joins[static_cast<std::size_t>(labels[a])];
    }
    return joins;
}

JoinCountResult join_count(const LabelledLattice& lattice, const JoinCountOptions& options) {
    if (lattice.edges.empty()) {
        throw InvalidArgument("lattice has no adjacent cells");
    }
    const double n = static_cast<double>(lattice.size());
    std::vector<double> degree(lattice.size(), 0.0);
    for (auto [a, b] : lattice.edges) {
        degree[a] += 1.0;
        degree[b] += 1.0;
    }
    // Weight sums for a binary symmetric matrix.
    const double s0 = 2.0 * static_cast<double>(lattice.edges.size());
    const double s1 = 2.0 * s0;
    double s2 = 0.0;
    for (double d : degree) s2 += 4.0 * d * d;

    JoinCountResult result;
    result.edges = lattice.edges.size();
    const auto observed = same_label_joins(lattice, lattice.label);
    std::vector<double> count(lattice.names.size(), 0.0);
    for (int l : lattice.label) count[static_cast<std::size_t>(l)] += 1.0;
    if (lattice.names.size() < 2) {
        result.notes.push_back("only one label present");
    }

    std::vector<std::vector<std::size_t>> perm;
    if (options.permutations > 0) {
        perm.resize(static_cast<std::size_t>(options.permutations));
        parallel_for(perm.size(), [&](std::size_t i) {
            std::mt19937_64 rng(stats::mix_seed(options.seed, i));
            std::vector<int> shuffled = lattice.label;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            perm[i] = same_label_joins(lattice, shuffled);
        });
    }

    for (std::size_t l = 0; l < lattice.names.size(); ++l) {
        const double k = count[l];
        if (k < 2.0) {
            result.notes.push_back(fmt::format("label '{}' has fewer than two cells; omitted", lattice.names[l]));
            continue;
        }
        JoinCountRow row;
        row.label = lattice.names[l];
        row.cells = static_cast<std::size_t>(k);
        row.observed = static_cast<double>(observed[l]);
        if (options.sampling == Sampling::nonfree) {
            const double r2 = k * (k - 1.0) / (n * (n - 1.0));
            const double r3 = n > 2.0 ? r2 * (k - 2.0) / (n - 2.0) : 0.0;
            const double r4 = n > 3.0 ? r3 * (k - 3.0) / (n - 3.0) : 0.0;
            row.expected = 0.5 * s0 * r2;
            row.variance = 0.25 * (s1 * r2 + (s2 - 2.0 * s1) * r3 + (s0 * s0 + s1 - s2) * r4) -
                           row.expected * row.expected;
        } else {
            const double p = k / n;
            row.expected = 0.5 * s0 * p * p;
            row.variance =
                0.25 * (s1 * p * p + (s2 - 2.0 * s1) * p * p * p + (s1 - s2) * p * p * p * p);
        }
        if (row.variance <= 1e-12 * std::max(1.0, row.expected * row.expected)) {
            row.degenerate = true;
            row.variance = 0.0;
            row.z = std::nan("");
            row.p_value = std::nan("");
            result.notes.push_back(
                fmt::format("label '{}' has zero variance: trivially autocorrelated", row.label));
        } else {
            row.z = (row.observed - row.expected) / std::sqrt(row.variance);
            row.p_value = std::clamp(stats::normal_upper_tail(row.z), std::numeric_limits<double>::min(),
                                     1.0 - std::numeric_limits<double>::epsilon());
        }
        if (!perm.empty()) {
            std::vector<double> values;
            values.reserve(perm.size());
            std::size_t at_least = 0;
            for (const auto& p : perm) {
                values.push_back(static_cast<double>(p[l]));
                if (p[l] >= observed[l]) ++at_least;
            }
            row.permutation_mean = stats::mean(values);
            row.permutation_se = stats::stddev(values) / std::sqrt(static_cast<double>(values.size()));
            row.permutation_p = (1.0 + static_cast<double>(at_least)) / (1.0 + static_cast<double>(values.size()));
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

void write_join_count_csv(std::ostream& out, const JoinCountResult& result) {
    csv::Writer w(out);
    const bool perm = !result.rows.empty() && result.rows.front().permutation_mean.has_value();
    std::vector<std::string> header{"label", "cells", "count", "expected", "variance", "z", "p_value"};
    if (perm) {
        header.insert(header.end(), {"permutation_mean", "permutation_p"});
    }
    w.row(header);
    auto fmt_num = [](double v) { return std::isnan(v) ? std::string("NA") : csv::num(v); };
    for (const auto& r : result.rows) {
        std::vector<std::string> fields{r.label,          std::to_string(r.cells), csv::num(r.observed),
                                        csv::num(r.expected), csv::num(r.variance), fmt_num(r.z),
                                        fmt_num(r.p_value)};
        if (perm) {
            fields.push_back(csv::num(*r.permutation_mean));
            fields.push_back(csv::num(*r.permutation_p));
        }
        w.row(fields);
    }
}

}  // namespace carshare
