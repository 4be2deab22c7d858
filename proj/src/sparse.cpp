#include <locsolve/sparse.hpp>

#include <algorithm>
#include <numeric>
#include <string>

namespace locsolve {

namespace {

std::string entry_str(Index i, Index j) {
    return "(" + std::to_string(i) + ", " + std::to_string(j) + ")";
}

}  // namespace

SparseSymMatrix::SparseSymMatrix(Index n, std::vector<Index> row_starts, std::vector<Index> col_indices,
                                 std::vector<double> values)
    : n_(n), row_starts_(std::move(row_starts)), col_indices_(std::move(col_indices)), values_(std::move(values)) {
    validate();
}

void SparseSymMatrix::validate() const {
    if (n_ < 0) throw InvalidInput("SparseSymMatrix: negative dimension");
    if (row_starts_.size() != static_cast<std::size_t>(n_ + 1) || row_starts_.front() != 0) {
        throw InvalidInput("SparseSymMatrix: row_starts must have length n+1 and start at 0");
    }
    if (col_indices_.size() != values_.size() ||
        row_starts_.back() != static_cast<Index>(col_indices_.size())) {
        throw InvalidInput("SparseSymMatrix: inconsistent array lengths");
    }
    for (Index i = 0; i < n_; ++i) {
        const Index b = row_starts_[i];
        const Index e = row_starts_[i + 1];
        if (e <= b) throw InvalidInput("SparseSymMatrix: row " + std::to_string(i) + " has no diagonal slot");
        for (Index p = b; p < e; ++p) {
            const Index j = col_indices_[p];
            if (j < 0 || j > i) throw InvalidInput("SparseSymMatrix: entry " + entry_str(i, j) + " not in lower triangle");
            if (p > b && col_indices_[p - 1] >= j) {
                throw InvalidInput("SparseSymMatrix: row " + std::to_string(i) + " not strictly increasing");
            }
        }
        if (col_indices_[e - 1] != i) {
            throw InvalidInput("SparseSymMatrix: row " + std::to_string(i) + " has no diagonal slot");
        }
    }
}

SparseSymMatrix SparseSymMatrix::from_triplets(Index n, std::span<const Triplet> entries) {
    std::vector<Triplet> lower;
    lower.reserve(entries.size() + static_cast<std::size_t>(n));
    for (const auto& t : entries) {
        if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n) {
            throw InvalidInput("from_triplets: entry " + entry_str(t.row, t.col) + " out of range");
        }
        lower.push_back(t.row >= t.col ? t : Triplet{t.col, t.row, t.value});
    }
    std::sort(lower.begin(), lower.end(),
              [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    for (std::size_t k = 1; k < lower.size(); ++k) {
        if (lower[k].row == lower[k - 1].row && lower[k].col == lower[k - 1].col) {
            throw InvalidInput("from_triplets: duplicate entry " + entry_str(lower[k].row, lower[k].col));
        }
    }

    std::vector<Index> starts(static_cast<std::size_t>(n + 1), 0);
    std::vector<Index> cols;
    std::vector<double> vals;
    cols.reserve(lower.size() + static_cast<std::size_t>(n));
    vals.reserve(lower.size() + static_cast<std::size_t>(n));
    std::size_t k = 0;
    for (Index i = 0; i < n; ++i) {
        bool has_diag = false;
        while (k < lower.size() && lower[k].row == i) {
            cols.push_back(lower[k].col);
            vals.push_back(lower[k].value);
            has_diag = has_diag || lower[k].col == i;
            ++k;
        }
        if (!has_diag) {
            cols.push_back(i);
            vals.push_back(0.0);
        }
        starts[static_cast<std::size_t>(i + 1)] = static_cast<Index>(cols.size());
    }
    return SparseSymMatrix(n, std::move(starts), std::move(cols), std::move(vals));
}

SparseSymMatrix SparseSymMatrix::identity(Index n) {
    const Vector ones(static_cast<std::size_t>(n), 1.0);
    return diagonal(ones);
}

SparseSymMatrix SparseSymMatrix::diagonal(std::span<const double> d) {
    const auto n = static_cast<Index>(d.size());
    std::vector<Index> starts(d.size() + 1);
    std::iota(starts.begin(), starts.end(), Index{0});
    std::vector<Index> cols(d.size());
    std::iota(cols.begin(), cols.end(), Index{0});
    return SparseSymMatrix(n, std::move(starts), std::move(cols), Vector(d.begin(), d.end()));
}

double SparseSymMatrix::at(Index i, Index j) const {
    if (i < 0 || j < 0 || i >= n_ || j >= n_) throw InvalidInput("at: index out of range");
    if (j > i) std::swap(i, j);
    const auto r = row(i);
    const auto it = std::lower_bound(r.cols.begin(), r.cols.end(), j);
    if (it == r.cols.end() || *it != j) return 0.0;
    return r.vals[static_cast<std::size_t>(it - r.cols.begin())];
}

double SparseSymMatrix::norm1() const {
    Vector colsum(static_cast<std::size_t>(n_), 0.0);
    for (Index i = 0; i < n_; ++i) {
        const auto r = row(i);
        for (std::size_t p = 0; p < r.cols.size(); ++p) {
            const Index j = r.cols[p];
            const double v = std::abs(r.vals[p]);
            colsum[static_cast<std::size_t>(j)] += v;
            if (j != i) colsum[static_cast<std::size_t>(i)] += v;
        }
    }
    return norm_inf(colsum);
}

SparseSymMatrix SparseSymMatrix::shifted(double shift) const {
    SparseSymMatrix out = *this;
    for (Index i = 0; i < n_; ++i) out.values_[static_cast<std::size_t>(row_starts_[i + 1] - 1)] -= shift;
    return out;
}

// ----------------------------------------------------------------------------

Permutation Permutation::identity(Index n) {
    std::vector<Index> f(static_cast<std::size_t>(n));
    std::iota(f.begin(), f.end(), Index{0});
    return from_forward(std::move(f));
}

Permutation Permutation::from_forward(std::vector<Index> forward) {
    const auto n = forward.size();
    std::vector<Index> inv(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const Index t = forward[i];
        if (t < 0 || static_cast<std::size_t>(t) >= n || inv[static_cast<std::size_t>(t)] != -1) {
            throw InvalidInput("Permutation: not a bijection on {0.." + std::to_string(n) + "-1}");
        }
        inv[static_cast<std::size_t>(t)] = static_cast<Index>(i);
    }
    Permutation p;
    p.forward_ = std::move(forward);
    p.inverse_ = std::move(inv);
    return p;
}

Permutation Permutation::from_ordering(std::vector<Index> order) {
    Permutation p = from_forward(std::move(order));
    std::swap(p.forward_, p.inverse_);
    return p;
}

Permutation Permutation::then(const Permutation& next) const {
    require_same_size(forward_.size(), next.forward_.size(), "Permutation::then");
    std::vector<Index> f(forward_.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = next.forward_[static_cast<std::size_t>(forward_[i])];
    return from_forward(std::move(f));
}

Vector Permutation::apply(std::span<const double> x) const {
    require_same_size(x.size(), forward_.size(), "Permutation::apply");
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[static_cast<std::size_t>(forward_[i])] = x[i];
    return out;
}

Vector Permutation::apply_inverse(std::span<const double> x) const {
    require_same_size(x.size(), forward_.size(), "Permutation::apply_inverse");
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[static_cast<std::size_t>(forward_[i])];
    return out;
}

// ----------------------------------------------------------------------------

DiagScaling::DiagScaling(Vector d) : d_(std::move(d)) {
    for (double v : d_) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("DiagScaling: entries must be finite and > 0");
    }
}

Vector DiagScaling::apply(std::span<const double> x) const {
    require_same_size(x.size(), d_.size(), "DiagScaling::apply");
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = d_[i] * x[i];
    return out;
}

// ----------------------------------------------------------------------------

void sym_matvec(const SparseSymMatrix& a, std::span<const double> x, std::span<double> y) {
    require_same_size(x.size(), static_cast<std::size_t>(a.size()), "sym_matvec");
    require_same_size(y.size(), static_cast<std::size_t>(a.size()), "sym_matvec");
    const auto& starts = a.row_starts();
    const auto& cols = a.col_indices();
    const auto& vals = a.values();
    std::fill(y.begin(), y.end(), 0.0);
    for (Index i = 0; i < a.size(); ++i) {
        const double xi = x[static_cast<std::size_t>(i)];
        double acc = 0.0;
        const Index e = starts[i + 1] - 1;  // diagonal slot
        for (Index p = starts[i]; p < e; ++p) {
            const auto j = static_cast<std::size_t>(cols[p]);
            acc += vals[p] * x[j];
            y[j] += vals[p] * xi;
        }
        y[static_cast<std::size_t>(i)] += acc + vals[e] * xi;
    }
}

Vector sym_matvec(const SparseSymMatrix& a, std::span<const double> x) {
    Vector y(static_cast<std::size_t>(a.size()));
    sym_matvec(a, x, y);
    return y;
}

SparseSymMatrix permute_sym(const SparseSymMatrix& a, const Permutation& p) {
    require_same_size(static_cast<std::size_t>(p.size()), static_cast<std::size_t>(a.size()), "permute_sym");
    const Index n = a.size();
    const auto& fwd = p.forward();

    std::vector<Index> count(static_cast<std::size_t>(n + 1), 0);
    for (Index i = 0; i < n; ++i) {
        const auto r = a.row(i);
        for (Index j : r.cols) ++count[static_cast<std::size_t>(std::max(fwd[i], fwd[j]) + 1)];
    }
    std::partial_sum(count.begin(), count.end(), count.begin());
    std::vector<Index> cols(static_cast<std::size_t>(a.nnz()));
    Vector vals(static_cast<std::size_t>(a.nnz()));
    std::vector<Index> next(count.begin(), count.end() - 1);
    for (Index i = 0; i < n; ++i) {
        const auto r = a.row(i);
        for (std::size_t q = 0; q < r.cols.size(); ++q) {
            const Index pi = fwd[i];
            const Index pj = fwd[r.cols[q]];
            const Index row = std::max(pi, pj);
            const auto slot = static_cast<std::size_t>(next[static_cast<std::size_t>(row)]++);
            cols[slot] = std::min(pi, pj);
            vals[slot] = r.vals[q];
        }
    }
    for (Index i = 0; i < n; ++i) {
        const auto b = static_cast<std::size_t>(count[static_cast<std::size_t>(i)]);
        const auto e = static_cast<std::size_t>(count[static_cast<std::size_t>(i + 1)]);
        std::vector<std::pair<Index, double>> tmp;
        tmp.reserve(e - b);
        for (std::size_t s = b; s < e; ++s) tmp.emplace_back(cols[s], vals[s]);
        std::sort(tmp.begin(), tmp.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        for (std::size_t s = b; s < e; ++s) {
            cols[s] = tmp[s - b].first;
            vals[s] = tmp[s - b].second;
        }
    }
    return SparseSymMatrix(n, std::move(count), std::move(cols), std::move(vals));
}

SparseSymMatrix scale_sym(const SparseSymMatrix& a, const DiagScaling& d) {
    require_same_size(static_cast<std::size_t>(d.size()), static_cast<std::size_t>(a.size()), "scale_sym");
    Vector vals = a.values();
    const auto& starts = a.row_starts();
    const auto& cols = a.col_indices();
    for (Index i = 0; i < a.size(); ++i) {
        for (Index p = starts[i]; p < starts[i + 1]; ++p) vals[p] = d[i] * vals[p] * d[cols[p]];
    }
    return SparseSymMatrix(a.size(), starts, cols, std::move(vals));
}

std::vector<std::vector<Index>> adjacency(const SparseSymMatrix& a) {
    std::vector<std::vector<Index>> adj(static_cast<std::size_t>(a.size()));
    for (Index i = 0; i < a.size(); ++i) {
        for (Index j : a.row(i).cols) {
            if (j == i) continue;
            adj[static_cast<std::size_t>(i)].push_back(j);
            adj[static_cast<std::size_t>(j)].push_back(i);
        }
    }
    for (auto& l : adj) std::sort(l.begin(), l.end());
    return adj;
}

}  // namespace locsolve
