#pragma once

#include <locsolve/ordering.hpp>
#include <locsolve/sparse.hpp>

#include <vector>

namespace locsolve {

/**
 * Costs c_ij = log(a_i) - log|a_ij| of the full symmetric pattern, with a_i
 * the largest modulus in row i. Stored by column: column j lists the rows i
 * with a_ij != 0. Absent entries are +infinity.
 */
struct LogCostMatrix {
    Index n = 0;
    std::vector<Index> col_starts{0};
    std::vector<Index> row_indices;
    Vector costs;
    /// log a_i per row.
    Vector log_row_max;
};

/// Throws InvalidInput when some row has no nonzero entry.
LogCostMatrix log_weight_transform(const SparseSymMatrix& a);

struct AssignmentResult {
    /// Built from the column -> matched row list: sigma.inverse()[col] = row,
    /// sigma.forward()[row] = col.
    Permutation sigma;
    Vector u;  // row duals
    Vector v;  // column duals
    double objective = 0.0;
};

/**
 * Minimum-cost perfect matching by shortest augmenting paths (Dijkstra with
 * a binary heap on reduced costs). Throws StructurallySingular listing the
 * rows left unmatched when no perfect matching exists.
 */
AssignmentResult solve_lap(const LogCostMatrix& c);

struct ScalingResult {
    DiagScaling scaling;
    /// Some exponent had to be clamped to stay representable.
    bool clamped = false;
};

/// d_i = sqrt(r_i s_i) with r_i = exp(u_i)/a_i and s_i = exp(v_i), evaluated in log space.
ScalingResult scaling_from_duals(const AssignmentResult& res, const LogCostMatrix& c);

/// Disjoint cycles of `forward`, each starting at its smallest member, sorted by that member.
std::vector<std::vector<Index>> cycles_of_permutation(const Permutation& p);

/// A 1x1 (second < 0) or 2x2 diagonal block of the symmetric permutation.
struct Block {
    Index first = 0;
    Index second = -1;

    [[nodiscard]] bool is_pair() const noexcept { return second >= 0; }
    friend bool operator==(const Block&, const Block&) = default;
};

/**
 * Splits matching cycles into 1x1 and 2x2 blocks using the scaled matrix.
 *
 * Even cycles: of the two pairings, keep the one whose weakest matched entry
 * is largest in modulus; on a tie (1e-12) keep the pairing that pairs the
 * cycle's first member with its successor. Odd cycles: the member with the
 * largest |diagonal| (smallest index on a tie) becomes the 1x1 block, the rest
 * pair up in cycle order starting after it. Pairs are stored ascending.
 */
std::vector<Block> split_cycles(const std::vector<std::vector<Index>>& cycles, const SparseSymMatrix& scaled);

/// Blocks in ascending order of their smallest member, members consecutive.
/// Throws InvalidInput unless the blocks partition {0..n-1}.
Permutation build_symmetric_permutation(std::vector<Block> blocks, Index n);

struct CompressedGraph {
    AdjGraph graph;
    /// members[s] = original vertices of supervertex s (ascending).
    std::vector<std::vector<Index>> members;
};

/// One supervertex per block (in the given block order); supervertices are
/// adjacent iff any pair of members is.
CompressedGraph compress_graph(const SparseSymMatrix& a, const std::vector<Block>& blocks);

/// Expands an ordering of supervertices, keeping each block's members consecutive.
Permutation expand_ordering(const Permutation& compressed, const std::vector<std::vector<Index>>& members);

struct SymMatchingResult {
    Permutation p_s;
    std::vector<Block> blocks;
    DiagScaling scaling;
    bool scaling_clamped = false;
    AssignmentResult assignment;
};

/// log transform -> LAP -> scaling -> cycle split -> P_S.
SymMatchingResult symmetric_matching(const SparseSymMatrix& a);

}  // namespace locsolve
