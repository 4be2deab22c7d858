#pragma once

#include <locsolve/core.hpp>

#include <span>
#include <vector>

namespace locsolve {

/// One (row, col, value) entry used to assemble a symmetric matrix.
struct Triplet {
    Index row;
    Index col;
    double value;
};

/**
 * Real symmetric sparse matrix stored as its lower triangle in CSR form.
 *
 * Row i holds the entries (i, j) with j <= i, column indices strictly
 * increasing, and always ends with an explicit diagonal slot (which may hold
 * zero). The full operator is the lower triangle mirrored across the diagonal.
 */
class SparseSymMatrix {
public:
    struct RowView {
        std::span<const Index> cols;
        std::span<const double> vals;
    };

    SparseSymMatrix() = default;

    /// Takes ownership of raw CSR arrays; throws InvalidInput if they break an invariant.
    SparseSymMatrix(Index n, std::vector<Index> row_starts, std::vector<Index> col_indices,
                    std::vector<double> values);

    /// Assembles from entries given in either triangle. Each unordered pair may
    /// appear at most once; missing diagonals are inserted as explicit zeros.
    static SparseSymMatrix from_triplets(Index n, std::span<const Triplet> entries);

    static SparseSymMatrix identity(Index n);
    static SparseSymMatrix diagonal(std::span<const double> d);

    [[nodiscard]] Index size() const noexcept { return n_; }
    /// Stored entries (lower triangle including the diagonal).
    [[nodiscard]] Index nnz() const noexcept { return static_cast<Index>(values_.size()); }

    [[nodiscard]] RowView row(Index i) const noexcept {
        const auto b = static_cast<std::size_t>(row_starts_[i]);
        const auto e = static_cast<std::size_t>(row_starts_[i + 1]);
        return {{col_indices_.data() + b, e - b}, {values_.data() + b, e - b}};
    }

    /// Diagonal entry of row i (always stored last in the row).
    [[nodiscard]] double diag(Index i) const noexcept { return values_[row_starts_[i + 1] - 1]; }

    /// Entry (i, j) of the symmetric operator, zero when not stored.
    [[nodiscard]] double at(Index i, Index j) const;

    [[nodiscard]] const std::vector<Index>& row_starts() const noexcept { return row_starts_; }
    [[nodiscard]] const std::vector<Index>& col_indices() const noexcept { return col_indices_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

    /// Max absolute column sum of the full symmetric operator.
    [[nodiscard]] double norm1() const;

    /// Returns the same pattern with `shift` subtracted from every diagonal entry.
    [[nodiscard]] SparseSymMatrix shifted(double shift) const;

    friend bool operator==(const SparseSymMatrix&, const SparseSymMatrix&) = default;

private:
    void validate() const;

    Index n_ = 0;
    std::vector<Index> row_starts_{0};
    std::vector<Index> col_indices_;
    std::vector<double> values_;
};

/**
 * Bijection on {0..n-1}.
 *
 * `forward()[old] = new` and `inverse()[new] = old`. A permutation is usually
 * built from an ordering list, i.e. the old indices listed in their new order.
 */
class Permutation {
public:
    Permutation() = default;

    static Permutation identity(Index n);
    /// order[new] = old
    static Permutation from_ordering(std::vector<Index> order);
    /// forward[old] = new
    static Permutation from_forward(std::vector<Index> forward);

    [[nodiscard]] Index size() const noexcept { return static_cast<Index>(forward_.size()); }
    [[nodiscard]] const std::vector<Index>& forward() const noexcept { return forward_; }
    [[nodiscard]] const std::vector<Index>& inverse() const noexcept { return inverse_; }

    /// Applies `this` first, then `next`.
    [[nodiscard]] Permutation then(const Permutation& next) const;

    /// out[forward[i]] = x[i]
    [[nodiscard]] Vector apply(std::span<const double> x) const;
    /// out[i] = x[forward[i]]
    [[nodiscard]] Vector apply_inverse(std::span<const double> x) const;

    friend bool operator==(const Permutation&, const Permutation&) = default;

private:
    std::vector<Index> forward_;
    std::vector<Index> inverse_;
};

/// Positive diagonal scaling D.
class DiagScaling {
public:
    DiagScaling() = default;
    explicit DiagScaling(Vector d);

    static DiagScaling ones(Index n) { return DiagScaling(Vector(static_cast<std::size_t>(n), 1.0)); }

    [[nodiscard]] Index size() const noexcept { return static_cast<Index>(d_.size()); }
    [[nodiscard]] const Vector& values() const noexcept { return d_; }
    [[nodiscard]] double operator[](Index i) const noexcept { return d_[static_cast<std::size_t>(i)]; }

    /// out_i = d_i x_i
    [[nodiscard]] Vector apply(std::span<const double> x) const;

private:
    Vector d_;
};

/// y = A x with A reconstructed from its lower triangle.
Vector sym_matvec(const SparseSymMatrix& a, std::span<const double> x);
void sym_matvec(const SparseSymMatrix& a, std::span<const double> x, std::span<double> y);

/// Symmetric permutation: result(p(i), p(j)) = a(i, j).
SparseSymMatrix permute_sym(const SparseSymMatrix& a, const Permutation& p);

/// result(i, j) = d_i a(i, j) d_j
SparseSymMatrix scale_sym(const SparseSymMatrix& a, const DiagScaling& d);

/// Symmetric adjacency lists of the off-diagonal pattern (sorted, no self loops).
std::vector<std::vector<Index>> adjacency(const SparseSymMatrix& a);

}  // namespace locsolve
