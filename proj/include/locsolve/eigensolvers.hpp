#pragma once

#include <locsolve/krylov.hpp>
#include <locsolve/mlildl.hpp>
#include <locsolve/sparse.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace locsolve {

struct EigenPair {
    double lambda = 0.0;
    /// Unit 2-norm.
    Vector x;
    /// ||A x - lambda x||_2
    double residual = 0.0;
    Index multiplicity_hint = 1;
    bool converged = true;
};

/// Symmetric tridiagonal matrix; beta[i] couples rows i and i+1.
struct Tridiagonal {
    Vector alpha;
    Vector beta;

    [[nodiscard]] Index size() const noexcept { return static_cast<Index>(alpha.size()); }
    void validate() const;
    /// Max absolute row sum.
    [[nodiscard]] double norm_inf() const;
};

struct TridiagEigen {
    Vector values;  // ascending
    /// Column-major size x size, empty unless requested.
    Vector vectors;
};

TridiagEigen tridiag_eig(const Tridiagonal& t, bool want_vectors = false);

struct LanczosResult {
    Tridiagonal t;
    /// The Lanczos vectors; empty when run without reorthogonalization.
    Basis basis;
    /// Next (normalised) Lanczos vector and its coupling beta_{k+1}.
    Vector next;
    double next_beta = 0.0;
    /// beta_{k+1} vanished: span(basis) is invariant.
    bool invariant = false;
};

/// `steps` steps of the symmetric Lanczos three-term recurrence from v1. With
/// reorth, each new vector is orthogonalised twice against all previous ones.
LanczosResult lanczos_run(const LinearOperator& op, std::span<const double> v1, Index steps, bool reorth);

struct CwiValue {
    double value = 0.0;
    Index multiplicity = 1;
};

struct CwiClassification {
    /// One entry per cluster of T's eigenvalues (its median member), ascending.
    std::vector<CwiValue> good;
    Vector spurious;
};

/**
 * Cullum-Willoughby test: eigenvalues of T are clustered with `tol`; a cluster
 * with two or more copies is good; a simple eigenvalue is spurious if T with its
 * first row and column deleted has an eigenvalue within `tol`. A tol <= 0
 * means 1e-8 * ||T||_inf.
 */
CwiClassification cwi_identify(const Tridiagonal& t, double tol = 0.0);

struct TraceEvent {
    std::string solver;
    Index outer = 0;
    double theta = 0.0;
    double residual = 0.0;
    Index inner_iterations = 0;
};

struct SolverConfig {
    Index n_wanted = 5;
    double target_sigma = 0.0;
    Index max_basis = 20;
    Index restart_size = 8;
    /// Residual bound relative to ||A||_1.
    double outer_tol = 1e-9;
    /// Inner (linear solve) tolerance of the shift-and-invert solver.
    double inner_tol = 1e-12;
    /// Correction-equation tolerance schedule: max(2^-step, jd_inner_floor)
    /// until ||r|| < jd_switch_residual * ||A||_1, then jd_inner_final.
    double jd_inner_floor = 1e-4;
    double jd_switch_residual = 1e-5;
    double jd_inner_final = 1e-12;
    /// Below this residual (relative to ||A||_1) the correction equation uses theta instead of the target.
    double jd_theta_switch = 1e-3;
    /// JD locks this many pairs beyond n_wanted and returns the nearest n_wanted,
    /// so a missed eigenvalue near the edge of the wanted set is usually caught.
    Index jd_guard = 1;
    Index inner_maxit = 1000;
    Index max_outer = 2000;
    std::uint64_t seed = 1;
    double cwi_factor = 4.0;
    Index cwi_max_steps = 200000;
    /// Good/spurious tolerance; <= 0 means 1e-8 * ||T||_inf.
    double cwi_tol = 0.0;
    std::function<void(const TraceEvent&)> trace;

    /// Throws InvalidInput with the offending field.
    void validate() const;
};

struct SolveStats {
    /// Outer steps: Lanczos steps (cwi), inner solves (silanczos), search-space expansions (jd).
    Index outer_iterations = 0;
    Index inner_iterations = 0;
    Index inner_solves = 0;
    Index restarts = 0;
    Index refactorizations = 0;
    double fill_ratio = 0.0;
    bool all_converged = false;

    [[nodiscard]] double inner_average() const noexcept {
        return inner_solves > 0 ? static_cast<double>(inner_iterations) / static_cast<double>(inner_solves) : 0.0;
    }
};

struct EigenResult {
    /// Sorted by |lambda - target|, ties to the smaller lambda.
    std::vector<EigenPair> pairs;
    SolveStats stats;
};

/// Starting vector: uniform entries in [-0.5, 0.5) from SplitMix64(seed), normalised.
Vector seeded_start_vector(Index n, std::uint64_t seed);

EigenResult cwi_solve(const SparseSymMatrix& a, const SolverConfig& cfg);

/**
 * Solves (A - sigma I) y = b with SQMR preconditioned by a multilevel factor
 * of A - sigma I. A solve that misses the tolerance is continued once from its
 * last iterate; if it still fails, the factor is recomputed with epsilon / 10
 * (up to three times, the last with epsilon = 0) before NumericalFailure.
 */
class ShiftInvertSolver {
public:
    ShiftInvertSolver(const SparseSymMatrix& a, double sigma, FactorParams params, double tol = 1e-12,
                      Index maxit = 1000);

    /// Returns the SQMR iterations spent.
    Index solve(std::span<const double> b, std::span<double> y);

    [[nodiscard]] Index solves() const noexcept { return solves_; }
    [[nodiscard]] Index iterations() const noexcept { return iterations_; }
    [[nodiscard]] Index refactorizations() const noexcept { return refactorizations_; }
    [[nodiscard]] const MultilevelFactor& factor() const noexcept { return *factor_; }

private:
    void refactor();

    SparseSymMatrix shifted_;
    FactorParams params_;
    double tol_;
    Index maxit_;
    std::shared_ptr<const MultilevelFactor> factor_;
    double epsilon_;
    Index solves_ = 0;
    Index iterations_ = 0;
    Index refactorizations_ = 0;
};

/// Returns the inner iterations of one solve (A - sigma I) y = b.
using InnerSolve = std::function<Index(std::span<const double> b, std::span<double> y)>;

/// Observer of the Lanczos factorization B V = V T + f e^T after each restart.
using RestartHook = std::function<void(const Basis& v, const Tridiagonal& t, const Vector& f)>;

/**
 * Implicitly restarted Lanczos on (A - sigma I)^{-1}, sigma = cfg.target_sigma,
 * with full reorthogonalisation. The basis grows to max_basis; restarts apply
 * implicitly shifted QR steps with the unwanted Ritz values as shifts and keep
 * restart_size vectors plus the converged ones.
 */
EigenResult si_lanczos_ir(const SparseSymMatrix& a, const InnerSolve& solve, const SolverConfig& cfg,
                          const RestartHook& hook = {});

/// Same, with ShiftInvertSolver built from `params`.
EigenResult si_lanczos_ir(const SparseSymMatrix& a, const SolverConfig& cfg, const FactorParams& params);

/// Returns an approximation of (A - shift I)^{-1}; a higher `refinement` asks for a more accurate one.
using PreconditionerFactory = std::function<LinearOperator(double shift, int refinement)>;

/// Multilevel factor of A - shift I with epsilon / 10^refinement (epsilon = 0 from
/// refinement 3 on); records the fill ratio of the last factor built.
PreconditionerFactory multilevel_factory(const SparseSymMatrix& a, const FactorParams& params,
                                         std::shared_ptr<double> fill_ratio = nullptr);

/**
 * Symmetric Jacobi-Davidson for the eigenvalues nearest cfg.target_sigma. The
 * preconditioner is built once at the target and rebuilt with the next
 * refinement (at most 3) after two consecutive correction solves that miss
 * their tolerance. Converged pairs are deflated
 * into Q; the correction equation is solved with SQMR on the projected
 * operator and preconditioner.
 */
EigenResult jd_solve(const SparseSymMatrix& a, const PreconditionerFactory& factory, const SolverConfig& cfg);

}  // namespace locsolve
