#include <locsolve/matching.hpp>

#include <functional>
#include <limits>
#include <queue>
#include <string>

namespace locsolve {

LogCostMatrix log_weight_transform(const SparseSymMatrix& a) {
    const Index n = a.size();
    LogCostMatrix c;
    c.n = n;
    Vector row_max(static_cast<std::size_t>(n), 0.0);
    std::vector<Index> counts(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i) {
        const auto r = a.row(i);
        for (std::size_t p = 0; p < r.cols.size(); ++p) {
            const double v = std::abs(r.vals[p]);
            if (v == 0.0) continue;
            const Index j = r.cols[p];
            row_max[i] = std::max(row_max[i], v);
            row_max[j] = std::max(row_max[j], v);
            ++counts[j];
            if (j != i) ++counts[i];
        }
    }
    for (Index i = 0; i < n; ++i) {
        if (row_max[i] == 0.0) throw InvalidInput("log_weight_transform: row " + std::to_string(i) + " has no nonzero entry");
    }
    c.log_row_max.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) c.log_row_max[i] = std::log(row_max[i]);

    c.col_starts.assign(static_cast<std::size_t>(n + 1), 0);
    for (Index j = 0; j < n; ++j) c.col_starts[j + 1] = c.col_starts[j] + counts[j];
    c.row_indices.resize(static_cast<std::size_t>(c.col_starts[n]));
    c.costs.resize(static_cast<std::size_t>(c.col_starts[n]));
    std::vector<Index> next(c.col_starts.begin(), c.col_starts.end() - 1);
    // Sweeping rows in order fills every column with ascending row indices.
    for (Index i = 0; i < n; ++i) {
        const auto r = a.row(i);
        for (std::size_t p = 0; p < r.cols.size(); ++p) {
            const double v = std::abs(r.vals[p]);
            if (v == 0.0) continue;
            const Index j = r.cols[p];
            const double lv = std::log(v);
            // entry (i, j) in column j
            c.row_indices[next[j]] = i;
            c.costs[next[j]++] = c.log_row_max[i] - lv;
            if (j != i) {
                // entry (j, i) in column i
                c.row_indices[next[i]] = j;
                c.costs[next[i]++] = c.log_row_max[j] - lv;
            }
        }
    }
    return c;
}

AssignmentResult solve_lap(const LogCostMatrix& c) {
    const Index n = c.n;
    constexpr double inf = std::numeric_limits<double>::infinity();
    Vector u(static_cast<std::size_t>(n), 0.0), v(static_cast<std::size_t>(n), inf);
    std::vector<Index> row_of_col(static_cast<std::size_t>(n), -1), col_of_row(static_cast<std::size_t>(n), -1);

    for (Index j = 0; j < n; ++j) {
        for (Index p = c.col_starts[j]; p < c.col_starts[j + 1]; ++p) v[j] = std::min(v[j], c.costs[p]);
        if (c.col_starts[j] == c.col_starts[j + 1]) v[j] = 0.0;
    }
    // Cheap start: tight entries to free rows, preferring the largest row index.
    for (Index j = 0; j < n; ++j) {
        for (Index p = c.col_starts[j + 1] - 1; p >= c.col_starts[j]; --p) {
            const Index i = c.row_indices[p];
            if (col_of_row[i] == -1 && c.costs[p] - v[j] == 0.0) {
                col_of_row[i] = j;
                row_of_col[j] = i;
                break;
            }
        }
    }

    Vector dist_row(static_cast<std::size_t>(n), inf), dist_col(static_cast<std::size_t>(n), inf);
    std::vector<Index> pred_col(static_cast<std::size_t>(n), -1);
    std::vector<char> done(static_cast<std::size_t>(n), 0);
    std::vector<Index> touched_rows, finished_rows, reached_cols;
    using Item = std::pair<double, Index>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    bool failed = false;

    for (Index j0 = 0; j0 < n; ++j0) {
        if (row_of_col[j0] != -1) continue;
        auto relax = [&](Index j, double dj) {
            for (Index p = c.col_starts[j]; p < c.col_starts[j + 1]; ++p) {
                const Index i = c.row_indices[p];
                if (done[i]) continue;
                const double nd = dj + std::max(0.0, c.costs[p] - u[i] - v[j]);
                if (nd < dist_row[i]) {
                    if (dist_row[i] == inf) touched_rows.push_back(i);
                    dist_row[i] = nd;
                    pred_col[i] = j;
                    heap.push({nd, i});
                }
            }
        };
        dist_col[j0] = 0.0;
        reached_cols.push_back(j0);
        relax(j0, 0.0);
        Index free_row = -1;
        double D = 0.0;
        while (!heap.empty()) {
            const auto [d, i] = heap.top();
            heap.pop();
            if (done[i] || d > dist_row[i]) continue;
            done[i] = 1;
            finished_rows.push_back(i);
            if (col_of_row[i] == -1) {
                free_row = i;
                D = d;
                break;
            }
            const Index j = col_of_row[i];
            dist_col[j] = d;
            reached_cols.push_back(j);
            relax(j, d);
        }
        if (free_row >= 0) {
            for (Index i : finished_rows) u[i] += dist_row[i] - D;
            for (Index j : reached_cols) v[j] += D - dist_col[j];
            for (Index i = free_row;;) {
                const Index j = pred_col[i];
                const Index prev = row_of_col[j];
                row_of_col[j] = i;
                col_of_row[i] = j;
                if (j == j0) break;
                i = prev;
            }
        } else {
            failed = true;
        }
        for (Index i : touched_rows) {
            dist_row[i] = inf;
            done[i] = 0;
        }
        for (Index j : reached_cols) dist_col[j] = inf;
        touched_rows.clear();
        finished_rows.clear();
        reached_cols.clear();
        while (!heap.empty()) heap.pop();
    }

    if (failed) {
        std::vector<Index> unmatched;
        for (Index i = 0; i < n; ++i) {
            if (col_of_row[i] == -1) unmatched.push_back(i);
        }
        std::string list;
        for (std::size_t k = 0; k < unmatched.size() && k < 10; ++k) list += (k ? "," : "") + std::to_string(unmatched[k]);
        if (unmatched.size() > 10) list += ",...";
        throw StructurallySingular("matrix is structurally singular: " + std::to_string(unmatched.size()) +
                                       " rows cannot be matched (" + list + ")",
                                   std::move(unmatched));
    }

    AssignmentResult res;
    res.objective = 0.0;
    for (Index j = 0; j < n; ++j) {
        for (Index p = c.col_starts[j]; p < c.col_starts[j + 1]; ++p) {
            if (c.row_indices[p] == row_of_col[j]) {
                res.objective += c.costs[p];
                break;
            }
        }
    }
    res.sigma = Permutation::from_ordering(std::move(row_of_col));
    res.u = std::move(u);
    res.v = std::move(v);
    return res;
}

ScalingResult scaling_from_duals(const AssignmentResult& res, const LogCostMatrix& c) {
    const Index n = c.n;
    require_same_size(res.u.size(), static_cast<std::size_t>(n), "scaling_from_duals");
    constexpr double limit = 700.0;
    ScalingResult out;
    Vector d(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        double e = 0.5 * (res.u[i] + res.v[i] - c.log_row_max[i]);
        if (!std::isfinite(e) || std::abs(e) > limit) {
            out.clamped = true;
            e = std::isfinite(e) ? std::clamp(e, -limit, limit) : 0.0;
        }
        d[i] = std::exp(e);
    }
    out.scaling = DiagScaling(std::move(d));
    return out;
}

std::vector<std::vector<Index>> cycles_of_permutation(const Permutation& p) {
    const Index n = p.size();
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<Index>> cycles;
    for (Index s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::vector<Index> cyc;
        for (Index i = s; !seen[i]; i = p.forward()[i]) {
            seen[i] = 1;
            cyc.push_back(i);
        }
        cycles.push_back(std::move(cyc));
    }
    return cycles;
}

namespace {

Block make_pair_block(Index a, Index b) { return a < b ? Block{a, b} : Block{b, a}; }

}  // namespace

std::vector<Block> split_cycles(const std::vector<std::vector<Index>>& cycles, const SparseSymMatrix& scaled) {
    std::vector<Block> blocks;
    for (const auto& cyc : cycles) {
        const auto len = static_cast<Index>(cyc.size());
        if (len == 0) continue;
        if (len == 1) {
            blocks.push_back({cyc[0], -1});
            continue;
        }
        if (len % 2 == 0) {
            Index offset = 0;
            if (len > 2) {
                auto weakest = [&](Index start) {
                    double m = std::numeric_limits<double>::infinity();
                    for (Index k = 0; k < len; k += 2) {
                        m = std::min(m, std::abs(scaled.at(cyc[(start + k) % len], cyc[(start + k + 1) % len])));
                    }
                    return m;
                };
                if (weakest(1) > weakest(0) + 1e-12) offset = 1;
            }
            for (Index k = 0; k < len; k += 2) {
                blocks.push_back(make_pair_block(cyc[(offset + k) % len], cyc[(offset + k + 1) % len]));
            }
            continue;
        }
        Index single = 0;
        for (Index k = 1; k < len; ++k) {
            const double dk = std::abs(scaled.diag(cyc[k]));
            const double ds = std::abs(scaled.diag(cyc[single]));
            if (dk > ds || (dk == ds && cyc[k] < cyc[single])) single = k;
        }
        blocks.push_back({cyc[single], -1});
        for (Index k = 1; k < len; k += 2) {
            blocks.push_back(make_pair_block(cyc[(single + k) % len], cyc[(single + k + 1) % len]));
        }
    }
    return blocks;
}

Permutation build_symmetric_permutation(std::vector<Block> blocks, Index n) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    Index covered = 0;
    auto claim = [&](Index i) {
        if (i < 0 || i >= n || seen[i]) throw InvalidInput("build_symmetric_permutation: blocks do not partition the index set");
        seen[i] = 1;
        ++covered;
    };
    for (auto& b : blocks) {
        claim(b.first);
        if (b.is_pair()) {
            claim(b.second);
            if (b.second < b.first) std::swap(b.first, b.second);
        }
    }
    if (covered != n) throw InvalidInput("build_symmetric_permutation: blocks do not cover the index set");
    std::sort(blocks.begin(), blocks.end(), [](const Block& x, const Block& y) { return x.first < y.first; });
    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(n));
    for (const auto& b : blocks) {
        order.push_back(b.first);
        if (b.is_pair()) order.push_back(b.second);
    }
    return Permutation::from_ordering(std::move(order));
}

CompressedGraph compress_graph(const SparseSymMatrix& a, const std::vector<Block>& blocks) {
    const Index n = a.size();
    CompressedGraph cg;
    std::vector<Index> super(static_cast<std::size_t>(n), -1);
    for (const auto& b : blocks) {
        const auto s = static_cast<Index>(cg.members.size());
        std::vector<Index> mem{b.first};
        if (b.is_pair()) mem.push_back(b.second);
        std::sort(mem.begin(), mem.end());
        for (Index i : mem) {
            if (i < 0 || i >= n || super[i] != -1) throw InvalidInput("compress_graph: blocks do not partition the index set");
            super[i] = s;
        }
        cg.members.push_back(std::move(mem));
    }
    for (Index i = 0; i < n; ++i) {
        if (super[i] == -1) throw InvalidInput("compress_graph: blocks do not cover the index set");
    }
    cg.graph.adj.resize(cg.members.size());
    for (Index i = 0; i < n; ++i) {
        const auto r = a.row(i);
        for (Index j : r.cols) {
            const Index si = super[i], sj = super[j];
            if (si == sj) continue;
            cg.graph.adj[si].push_back(sj);
            cg.graph.adj[sj].push_back(si);
        }
    }
    for (auto& l : cg.graph.adj) {
        std::sort(l.begin(), l.end());
        l.erase(std::unique(l.begin(), l.end()), l.end());
    }
    return cg;
}

Permutation expand_ordering(const Permutation& compressed, const std::vector<std::vector<Index>>& members) {
    require_same_size(static_cast<std::size_t>(compressed.size()), members.size(), "expand_ordering");
    std::vector<Index> order;
    for (Index s : compressed.inverse()) {
        for (Index i : members[s]) order.push_back(i);
    }
    return Permutation::from_ordering(std::move(order));
}

SymMatchingResult symmetric_matching(const SparseSymMatrix& a) {
    const auto costs = log_weight_transform(a);
    SymMatchingResult out;
    out.assignment = solve_lap(costs);
    auto sc = scaling_from_duals(out.assignment, costs);
    out.scaling = std::move(sc.scaling);
    out.scaling_clamped = sc.clamped;
    const auto scaled = scale_sym(a, out.scaling);
    out.blocks = split_cycles(cycles_of_permutation(out.assignment.sigma), scaled);
    out.p_s = build_symmetric_permutation(out.blocks, a.size());
    return out;
}

}  // namespace locsolve
