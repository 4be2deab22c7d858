#pragma once

#include <locsolve/sparse.hpp>

#include <span>
#include <vector>

namespace locsolve {

/// Default dimension cap for dense work on sparse inputs.
inline constexpr Index kDenseCap = 20000;

/// Full symmetric n x n matrix, row-major (equivalently column-major).
class DenseSymMatrix {
public:
    DenseSymMatrix() = default;
    explicit DenseSymMatrix(Index n) : n_(n), a_(static_cast<std::size_t>(n * n), 0.0) {}

    [[nodiscard]] Index size() const noexcept { return n_; }
    [[nodiscard]] double& operator()(Index i, Index j) noexcept { return a_[static_cast<std::size_t>(i * n_ + j)]; }
    [[nodiscard]] double operator()(Index i, Index j) const noexcept { return a_[static_cast<std::size_t>(i * n_ + j)]; }
    [[nodiscard]] std::span<const double> data() const noexcept { return a_; }
    [[nodiscard]] std::span<double> data() noexcept { return a_; }

    [[nodiscard]] Vector multiply(std::span<const double> x) const;
    [[nodiscard]] double norm1() const;

private:
    Index n_ = 0;
    Vector a_;
};

/// Expands the lower-triangular storage; throws InvalidInput above `cap` or if the
/// allocation would exceed 4 GiB.
DenseSymMatrix to_dense(const SparseSymMatrix& a, Index cap = kDenseCap);

/// All eigenpairs of a symmetric matrix. values ascending; vectors column-major
/// (vector k occupies [k*n, (k+1)*n)) and orthonormal.
struct DenseEigen {
    Vector values;
    Vector vectors;
    Index n = 0;

    [[nodiscard]] std::span<const double> vector(Index k) const {
        return {vectors.data() + k * n, static_cast<std::size_t>(n)};
    }
};

DenseEigen dense_eig(const DenseSymMatrix& a);
/// Eigenvalues only (skips the O(n^3) accumulation of the transformations).
Vector dense_eigenvalues(const DenseSymMatrix& a);

/**
 * Implicit-shift QL iteration on a symmetric tridiagonal matrix.
 *
 * `diag` (length n) is overwritten with the eigenvalues in ascending order.
 * `offdiag` holds the n-1 sub-diagonal entries and is destroyed. When `vectors`
 * is non-null it must hold an n x n column-major matrix Z; on return it holds
 * Z*Q where Q has the eigenvectors of the tridiagonal as columns.
 */
void tridiagonal_ql(std::span<double> diag, std::span<double> offdiag, double* vectors);

/**
 * Dense symmetric indefinite factorization P A P^T = L D L^T with
 * Bunch-Kaufman 1x1/2x2 pivoting.
 */
class DenseLDLT {
public:
    DenseLDLT() = default;
    /// Throws NumericalFailure when A is singular.
    explicit DenseLDLT(DenseSymMatrix a);

    [[nodiscard]] Index size() const noexcept { return n_; }
    [[nodiscard]] Vector solve(std::span<const double> b) const;
    /// Stored nonzeros of L (strictly lower) plus D (lower triangle of the blocks).
    [[nodiscard]] Index nnz() const noexcept { return n_ * (n_ + 1) / 2; }
    [[nodiscard]] Index two_by_two_count() const noexcept;

private:
    Index n_ = 0;
    DenseSymMatrix lu_;
    std::vector<Index> perm_;       // perm_[new] = old
    std::vector<int> block_size_;   // 1 or 2 at block starts, 0 for the second row of a 2x2
};

}  // namespace locsolve
