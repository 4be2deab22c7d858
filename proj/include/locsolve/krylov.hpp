#pragma once

#include <locsolve/mlildl.hpp>
#include <locsolve/sparse.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace locsolve {

/// Matrix-free linear map. `apply` must be safe to call concurrently.
class LinearOperator {
public:
    using Fn = std::function<void(std::span<const double>, std::span<double>)>;

    LinearOperator() = default;
    LinearOperator(Index n, Fn fn) : n_(n), fn_(std::move(fn)) {}

    static LinearOperator identity(Index n);
    /// z -> (A - shift I) z
    static LinearOperator shifted(const SparseSymMatrix& a, double shift = 0.0);
    /// z -> M^{-1} z; the factor must outlive the operator.
    static LinearOperator preconditioner(const MultilevelFactor& f);
    /// Same, owning the factor.
    static LinearOperator preconditioner(std::shared_ptr<const MultilevelFactor> f);

    [[nodiscard]] Index size() const noexcept { return n_; }
    void apply(std::span<const double> x, std::span<double> y) const;
    [[nodiscard]] Vector operator()(std::span<const double> x) const;

private:
    Index n_ = 0;
    Fn fn_;
};

struct SqmrOptions {
    double tol = 1e-10;
    Index maxit = 1000;
    /// The recursive residual is replaced by b - op(x) this often.
    Index residual_check_interval = 50;
    /// When positive, an estimate of ||op||: the run also stops once the normwise
    /// backward error ||b - op x|| / (||b|| + op_norm ||x||) is below tol.
    double op_norm = 0.0;
};

struct SqmrReport {
    Index iterations = 0;
    /// ||b - op(x)|| / ||b||, recomputed at exit.
    double final_relative_residual = 0.0;
    /// ||b - op(x)|| / (||b|| + op_norm ||x||), recomputed at exit (equals the relative residual when op_norm is 0).
    double final_backward_error = 0.0;
    bool converged = false;
    std::optional<std::string> breakdown;
};

/**
 * Symmetric QMR for op x = b with a symmetric (possibly indefinite)
 * preconditioner P ~ op^{-1}, applied from the right. The Lanczos process runs
 * on op P in the bilinear form [u, v] = u^T P v; the tridiagonal least-squares
 * problem is solved by Givens rotations. One op and one P application per
 * iteration.
 *
 * `x` holds the initial guess on entry. Breakdown (|[v, v]| or a rotation
 * pivot below 1e-14 of its scale) ends the run with `breakdown` set; the
 * caller may restart from the returned x.
 */
SqmrReport sqmr_solve(const LinearOperator& op, const LinearOperator& precond, std::span<const double> b,
                      std::span<double> x, const SqmrOptions& options = {});

/// Orthonormal columns, each of the operator's dimension.
using Basis = std::vector<Vector>;

/// Throws NumericalFailure unless |q_i^T q_j - delta_ij| <= tol for all pairs.
void check_orthonormal(const Basis& q, Index n, double tol = 1e-8);

/// z -> (I - Q Q^T)(A - theta I)(I - Q Q^T) z. Q is copied.
LinearOperator make_jd_operator(const SparseSymMatrix& a, double theta, const Basis& q);

/**
 * Projected preconditioner for the correction equation:
 *   r -> K^{-1} r - W (Q^T W)^{-1} Q^T K^{-1} r,  W = K^{-1} Q,
 * the symmetric form of (I - w u^T / (u^T w)) K^{-1}, Kw = u, for a basis.
 * The output is orthogonal to every column of Q. Throws NumericalFailure when
 * Q^T W is numerically singular (|u^T w| < 1e-14 ||u|| ||w|| for one column).
 */
LinearOperator make_jd_preconditioner(const LinearOperator& kinv, const Basis& q);

}  // namespace locsolve
