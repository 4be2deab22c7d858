#pragma once

#include <locsolve/sparse.hpp>

#include <filesystem>
#include <vector>

namespace locsolve {

/// Undirected graph as sorted, symmetric adjacency lists without self loops.
struct AdjGraph {
    std::vector<std::vector<Index>> adj;

    [[nodiscard]] Index size() const noexcept { return static_cast<Index>(adj.size()); }
    [[nodiscard]] Index edge_count() const noexcept;

    /// Throws InvalidInput on unsorted lists, self loops, or asymmetric edges.
    void validate() const;

    static AdjGraph from_matrix(const SparseSymMatrix& a) { return {adjacency(a)}; }
};

/**
 * Minimum degree ordering on a quotient graph with element absorption and
 * exact external degrees. Ties go to the smallest vertex id. The result is
 * the elimination order, i.e. inverse()[step] = vertex.
 */
Permutation min_degree_order(const AdjGraph& g);

/// Nonzeros (diagonal included) of the Cholesky factor of P A P^T, counted
/// structurally via the elimination tree.
Index symbolic_fill_count(const SparseSymMatrix& a, const Permutation& p);

/// Reads a 0-based ordering, one index per line (old index listed at its new position).
Permutation read_ordering_file(const std::filesystem::path& path, Index n);

}  // namespace locsolve
