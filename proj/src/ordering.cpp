#include <locsolve/ordering.hpp>

#include <fstream>
#include <numeric>
#include <set>
#include <string>

namespace locsolve {

Index AdjGraph::edge_count() const noexcept {
    Index e = 0;
    for (const auto& l : adj) e += static_cast<Index>(l.size());
    return e / 2;
}

void AdjGraph::validate() const {
    const Index n = size();
    for (Index v = 0; v < n; ++v) {
        const auto& l = adj[v];
        for (std::size_t k = 0; k < l.size(); ++k) {
            const Index u = l[k];
            if (u < 0 || u >= n) throw InvalidInput("AdjGraph: neighbour out of range");
            if (u == v) throw InvalidInput("AdjGraph: self loop at " + std::to_string(v));
            if (k > 0 && l[k - 1] >= u) throw InvalidInput("AdjGraph: adjacency not sorted/unique");
            if (!std::binary_search(adj[u].begin(), adj[u].end(), v)) {
                throw InvalidInput("AdjGraph: edge " + std::to_string(v) + "-" + std::to_string(u) + " not symmetric");
            }
        }
    }
}

Permutation min_degree_order(const AdjGraph& g) {
    const Index n = g.size();
    std::vector<std::vector<Index>> var_adj = g.adj;
    std::vector<std::vector<Index>> elem_adj(static_cast<std::size_t>(n));
    std::vector<std::vector<Index>> elem_vars(static_cast<std::size_t>(n));
    std::vector<char> eliminated(static_cast<std::size_t>(n), 0);
    std::vector<char> absorbed(static_cast<std::size_t>(n), 0);
    std::vector<Index> degree(static_cast<std::size_t>(n));
    std::vector<Index> mark(static_cast<std::size_t>(n), -1);
    Index stamp = 0;

    std::set<std::pair<Index, Index>> queue;
    for (Index v = 0; v < n; ++v) {
        degree[v] = static_cast<Index>(var_adj[v].size());
        queue.insert({degree[v], v});
    }

    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(n));
    std::vector<Index> clique;

    while (!queue.empty()) {
        const Index p = queue.begin()->second;
        queue.erase(queue.begin());
        eliminated[p] = 1;
        order.push_back(p);

        // New element: live neighbours of p through variables and elements.
        ++stamp;
        mark[p] = stamp;
        clique.clear();
        for (Index u : var_adj[p]) {
            if (!eliminated[u] && mark[u] != stamp) {
                mark[u] = stamp;
                clique.push_back(u);
            }
        }
        for (Index e : elem_adj[p]) {
            if (absorbed[e]) continue;
            for (Index u : elem_vars[e]) {
                if (!eliminated[u] && mark[u] != stamp) {
                    mark[u] = stamp;
                    clique.push_back(u);
                }
            }
            absorbed[e] = 1;
            std::vector<Index>().swap(elem_vars[e]);
        }
        std::sort(clique.begin(), clique.end());
        elem_vars[p] = clique;
        std::vector<Index>().swap(var_adj[p]);
        std::vector<Index>().swap(elem_adj[p]);

        const Index clique_stamp = stamp;
        for (Index v : clique) {
            auto& ea = elem_adj[v];
            std::erase_if(ea, [&](Index e) { return absorbed[e] != 0; });
            ea.push_back(p);
            // Variables inside the new element are reachable through it.
            std::erase_if(var_adj[v], [&](Index u) { return eliminated[u] || mark[u] == clique_stamp; });
        }
        for (Index v : clique) {
            ++stamp;
            mark[v] = stamp;
            Index d = 0;
            for (Index u : var_adj[v]) {
                if (mark[u] != stamp) {
                    mark[u] = stamp;
                    ++d;
                }
            }
            for (Index e : elem_adj[v]) {
                for (Index u : elem_vars[e]) {
                    if (!eliminated[u] && mark[u] != stamp) {
                        mark[u] = stamp;
                        ++d;
                    }
                }
            }
            if (d != degree[v]) {
                queue.erase({degree[v], v});
                degree[v] = d;
                queue.insert({d, v});
            }
        }
    }
    return Permutation::from_ordering(std::move(order));
}

Index symbolic_fill_count(const SparseSymMatrix& a, const Permutation& p) {
    const Index n = a.size();
    require_same_size(static_cast<std::size_t>(p.size()), static_cast<std::size_t>(n), "symbolic_fill_count");
    // Lower pattern of B = P A P^T, row-wise.
    std::vector<std::vector<Index>> rows(static_cast<std::size_t>(n));
    const auto& fwd = p.forward();
    for (Index i = 0; i < n; ++i) {
        const auto r = a.row(i);
        for (Index j : r.cols) {
            if (j == i) continue;
            const Index bi = fwd[i], bj = fwd[j];
            if (bi > bj) rows[bi].push_back(bj);
            else rows[bj].push_back(bi);
        }
    }
    // Elimination tree (Liu) with path compression.
    std::vector<Index> parent(static_cast<std::size_t>(n), -1), ancestor(static_cast<std::size_t>(n), -1);
    for (Index i = 0; i < n; ++i) {
        for (Index k : rows[i]) {
            Index r = k;
            while (ancestor[r] != -1 && ancestor[r] != i) {
                const Index next = ancestor[r];
                ancestor[r] = i;
                r = next;
            }
            if (ancestor[r] == -1) {
                ancestor[r] = i;
                parent[r] = i;
            }
        }
    }
    // Row subtrees: row i of L covers every node on the tree paths from its entries up to i.
    std::vector<Index> mark(static_cast<std::size_t>(n), -1);
    Index count = n;
    for (Index i = 0; i < n; ++i) {
        mark[i] = i;
        for (Index k : rows[i]) {
            for (Index j = k; mark[j] != i; j = parent[j]) {
                mark[j] = i;
                ++count;
            }
        }
    }
    return count;
}

Permutation read_ordering_file(const std::filesystem::path& path, Index n) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ordering file " + path.string());
    std::vector<Index> order;
    long long v = 0;
    while (in >> v) order.push_back(static_cast<Index>(v));
    if (!in.eof()) throw InvalidInput("ordering file: non-integer token in " + path.string());
    if (static_cast<Index>(order.size()) != n) {
        throw InvalidInput("ordering file: expected " + std::to_string(n) + " entries, found " + std::to_string(order.size()));
    }
    return Permutation::from_ordering(std::move(order));
}

}  // namespace locsolve
