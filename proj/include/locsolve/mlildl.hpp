#pragma once

#include <locsolve/dense.hpp>
#include <locsolve/matching.hpp>
#include <locsolve/sparse.hpp>

#include <optional>
#include <string>
#include <vector>

namespace locsolve {

struct FactorParams {
    /// Bound on the estimated norm of the inverse triangular factor.
    double kappa = 5.0;
    /// Drop threshold; entries below epsilon/kappa are discarded. Defaults to 1/sqrt(N).
    std::optional<double> epsilon;
    /// Aggressive dropping constant.
    double tau = 0.1;
    Index max_levels = 25;
    /// A Schur complement of at most this dimension is factored densely.
    Index small_block_cutoff = 200;
    /// A level whose ||L11^{-1}||_inf is found above inverse_safety * kappa after
    /// factorization is redone with a halved bound (at most three times).
    double inverse_safety = 10.0;
    /// Work limit (in multiply-adds) of the exact level check; the iterative
    /// estimate is used above it.
    double exact_check_budget = 3e8;
    bool enable_matching = true;
    bool enable_aggressive_drop = true;
    /// Replaces the minimum degree ordering on the first level. Matched pairs
    /// stay adjacent: supervertices are placed by the first occurrence of a member.
    std::optional<Permutation> initial_ordering;

    /// Throws InvalidInput for out-of-range values.
    void validate() const;
    [[nodiscard]] double epsilon_for(Index n) const;
};

/// A 1x1 or 2x2 diagonal pivot [[a, b], [b, c]] starting at `start`.
struct PivotBlock {
    Index start = 0;
    int size = 1;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

/**
 * Running state of the sign-choice estimator of ||L^{-1}||_inf.
 *
 * Each probe solves L y = b one column at a time with b_k in {+1, -1}; |y_k|
 * can reach 1 + |p_k|, where p_k collects the contributions of the columns
 * already appended, so max_k (1 + |p_k|) is a lower bound of ||L^{-1}||_inf.
 * The sign is chosen with a one-column lookahead. Probe 0 resolves p_k = 0
 * with b_k = +1; the other probes resolve it with a fixed hash of (probe, k),
 * which makes them follow different sign patterns through the factor.
 */
class InvNormEstimator {
public:
    static constexpr int kDefaultProbes = 16;

    explicit InvNormEstimator(Index n, int probes = kDefaultProbes);

    /// Estimate row k would get as the next pivot: max over probes of 1 + |p_k|.
    [[nodiscard]] double candidate(Index k) const noexcept;

    /// Appends column k (strictly lower entries) and returns y_k of probe 0.
    double append_column(Index k, std::span<const Index> rows, std::span<const double> vals);

    [[nodiscard]] double estimate() const noexcept { return estimate_; }

private:
    Index n_;
    int probes_;
    Vector p_;  // probe-major
    double estimate_ = 1.0;
};

/// Lower bound of ||L^{-1}||_inf for a unit lower triangular L given by columns.
double estimate_inverse_norm(Index n, std::span<const Index> col_starts, std::span<const Index> rows,
                             std::span<const double> vals);

struct PivotMetrics {
    double d1 = 0.0;
    double d2 = 0.0;
};

/**
 * Block diagonal dominance of the leading column(s):
 *   d1 = sum_{j>1} |s_j1| / |s_11|                 (+inf when s_11 = 0)
 *   d2 = sum_{j>2} ||(s_j1, s_j2) B^{-1}||_1        (+inf when B is singular)
 * `rest1` and `rest2` hold s_j1 and s_j2 for the rows j > 2, aligned.
 */
PivotMetrics pivot_metrics(double s11, double s12, double s22, std::span<const double> rest1,
                           std::span<const double> rest2);

enum class PivotKind { OneByOne, TwoByTwo, Postpone };

/**
 * Pivot decision on the leading columns of a dense Schur complement: a 2x2
 * pivot when d2 < d1, otherwise 1x1. `nu1`/`nu2` are the inverse-norm
 * estimates the two rows would receive; a pivot whose rows exceed kappa is
 * not accepted (a rejected 2x2 falls back to 1x1 before postponing).
 */
PivotKind choose_pivot(const DenseSymMatrix& s, double nu1, double nu2, double kappa);

struct LevelStats {
    Index dim = 0;
    Index accepted = 0;
    Index schur_dim = 0;
    Index two_by_two = 0;
    Index l_nnz = 0;
    double inv_norm_estimate = 1.0;
    /// A posteriori value of ||L11^{-1}||_inf (exact or iterative estimate).
    double inv_norm_check = 1.0;
    /// Bound the accepted factorization was computed with.
    double kappa_used = 0.0;
    bool used_matching = false;
    Index aggressive_dropped = 0;
    double aggressive_dropped_mass = 0.0;
};

/**
 * One level of the multilevel factorization. With P = perm and D = scaling,
 * the level matrix satisfies P^T D A D P ~ [[B, F^T], [F, C]] where
 * B = L11 D11 L11^T covers the first `accepted` positions, F (the coupling)
 * is kept from the preprocessed matrix and C - F B^{-1} F^T is handed to the
 * next level.
 */
struct LevelFactor {
    DiagScaling scaling;
    /// forward()[i] = position of level index i in the factored ordering.
    Permutation perm;
    Index accepted = 0;
    Index schur_dim = 0;
    /// L11 strictly lower part by columns.
    std::vector<Index> l_col_starts{0};
    std::vector<Index> l_rows;
    Vector l_vals;
    std::vector<PivotBlock> d_blocks;
    /// Coupling F by rows (schur_dim rows, accepted columns).
    std::vector<Index> f_row_starts{0};
    std::vector<Index> f_cols;
    Vector f_vals;
    LevelStats stats;

    [[nodiscard]] Index dim() const noexcept { return accepted + schur_dim; }
    /// In place: x <- (L11 D11 L11^T)^{-1} x on the first `accepted` entries.
    void solve_b(std::span<double> x) const;
};

struct PreprocessResult {
    SparseSymMatrix matrix;  // P^T D A D P
    DiagScaling scaling;
    Permutation perm;
    std::vector<Block> blocks;
    bool used_matching = false;
};

/// Scaling and fill-reducing ordering of one level (matching-based or plain).
PreprocessResult preprocess_level(const SparseSymMatrix& a, const FactorParams& params,
                                  const std::optional<Permutation>& ordering = std::nullopt);

struct LevelResult {
    LevelFactor level;
    SparseSymMatrix schur;
};

/**
 * Inverse-based incomplete LDL^T of a preprocessed matrix. Pivots are tried in
 * order; postponed rows move (stably) to the end and their explicit Schur
 * complement is returned. `drop` is the absolute threshold epsilon/kappa.
 */
LevelResult factor_level(const SparseSymMatrix& atilde, double kappa, double drop);

/// Iterative estimate of ||L11^{-1}||_inf (1-norm estimator applied to L11^{-T}); a lower bound, usually tight.
double inverse_factor_norm(const LevelFactor& level);

/// ||L11^{-1}||_inf computed row by row; O(accepted * nnz(L11)).
double exact_inverse_factor_norm(const LevelFactor& level);

/// Drops l_ij with |l_ij| <= tau / (nu_i * nnz below the diagonal of column j).
void aggressive_drop(LevelFactor& level, double tau);

struct FactorStats {
    double fill_ratio = 0.0;
    Index nnz_a = 0;
    Index nnz_factor = 0;
    Index final_dim = 0;
    std::vector<LevelStats> levels;
};

class MultilevelFactor {
public:
    MultilevelFactor() = default;

    [[nodiscard]] Index size() const noexcept { return n_; }
    /// z = M^{-1} r
    [[nodiscard]] Vector apply(std::span<const double> r) const;
    void apply(std::span<const double> r, std::span<double> z) const;

    [[nodiscard]] const std::vector<LevelFactor>& levels() const noexcept { return levels_; }
    [[nodiscard]] const DenseLDLT& final_factor() const noexcept { return final_; }
    [[nodiscard]] const FactorStats& stats() const noexcept { return stats_; }

    /// Human-readable per-level summary.
    [[nodiscard]] std::string report() const;

    friend MultilevelFactor factorize(const SparseSymMatrix& a, const FactorParams& params);

private:
    void apply_level(std::size_t k, std::span<double> x) const;

    Index n_ = 0;
    std::vector<LevelFactor> levels_;
    DenseLDLT final_;
    FactorStats stats_;
};

/// Throws FactorBreakdown when two consecutive levels accept < 1% of their rows.
MultilevelFactor factorize(const SparseSymMatrix& a, const FactorParams& params);

}  // namespace locsolve
