#pragma once

#include <carshare/types.hpp>

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace carshare {

enum class Adjacency { queen, rook };

/// Labelled cells with binary symmetric weights. Each undirected edge is stored once.
struct LabelledLattice {
    std::vector<CellId> cells;
    std::vector<int> label;  // index into names
    std::vector<std::string> names;
    std::vector<std::pair<std::size_t, std::size_t>> edges;

    std::size_t size() const { return cells.size(); }
};

/// Builds the lattice, dropping cells whose label appears in `excluded`.
LabelledLattice make_lattice(const std::vector<CellId>& cells, const std::vector<std::string>& labels,
                             Adjacency adjacency = Adjacency::queen,
                             const std::vector<std::string>& excluded = {"high-intensity"});

/// Reads row,col,...,label rows as written by the clustering step.
LabelledLattice read_assignment_csv(std::istream& in, Adjacency adjacency = Adjacency::queen,
                                    const std::vector<std::string>& excluded = {"high-intensity"});

enum class Sampling { nonfree, free };

struct JoinCountOptions {
    Sampling sampling = Sampling::nonfree;
    /// Monte-Carlo label permutations; 0 disables the permutation check.
    int permutations = 0;
    std::uint64_t seed = 1;
};

struct JoinCountRow {
    std::string label;
    std::size_t cells = 0;
    double observed = 0.0;
    double expected = 0.0;
    double variance = 0.0;
    double z = 0.0;
    double p_value = 0.0;
    /// Zero variance: every cell shares the label, so the pattern is trivially clustered.
    bool degenerate = false;
    std::optional<double> permutation_mean;
    std::optional<double> permutation_se;
    std::optional<double> permutation_p;
};

struct JoinCountResult {
    std::vector<JoinCountRow> rows;
    std::size_t edges = 0;
    std::vector<std::string> notes;
};

/// Same-label join counts per label with closed-form moments and one-sided
/// upper-tail normal p-values. Labels with fewer than two cells are omitted with a
/// note. Throws InvalidArgument when the lattice has no edges.
JoinCountResult join_count(const LabelledLattice& lattice, const JoinCountOptions& options = {});

/// Same-label joins for every label index.
std::vector<std::size_t> same_label_joins(const LabelledLattice& lattice, const std::vector<int>& labels);

void write_join_count_csv(std::ostream& out, const JoinCountResult& result);

}  // namespace carshare
