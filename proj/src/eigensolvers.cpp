#include <locsolve/eigensolvers.hpp>

#include <locsolve/anderson.hpp>
#include <locsolve/dense.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace locsolve {

namespace {

bool nearer(double a, double b, double target) {
    const double da = std::abs(a - target), db = std::abs(b - target);
    if (da != db) return da < db;
    return a < b;
}

void sort_pairs(std::vector<EigenPair>& pairs, double target) {
    std::stable_sort(pairs.begin(), pairs.end(),
                     [target](const EigenPair& x, const EigenPair& y) { return nearer(x.lambda, y.lambda, target); });
}

/// Normalises x and fills lambda (Rayleigh quotient) and the residual.
EigenPair make_pair(const SparseSymMatrix& a, Vector x, double tol_abs) {
    EigenPair p;
    const double nx = norm2(x);
    if (nx > 0.0) scale(1.0 / nx, x);
    Vector ax = sym_matvec(a, x);
    p.lambda = dot(x, ax);
    axpy(-p.lambda, x, ax);
    p.residual = norm2(ax);
    p.converged = nx > 0.0 && p.residual <= tol_abs;
    p.x = std::move(x);
    return p;
}

/// Two passes of classical Gram-Schmidt against each basis; returns the remaining norm.
double orthogonalize(std::span<double> w, const Basis& a, const Basis* b = nullptr, Vector* coeffs = nullptr) {
    if (coeffs) coeffs->assign(a.size(), 0.0);
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double h = dot(a[i], w);
            axpy(-h, a[i], w);
            if (coeffs) (*coeffs)[i] += h;
        }
        if (b) {
            for (const auto& q : *b) axpy(-dot(q, w), q, w);
        }
    }
    return norm2(w);
}

Vector combine(const Basis& v, std::span<const double> s) {
    Vector x(v.empty() ? 0 : v[0].size(), 0.0);
    for (std::size_t i = 0; i < v.size() && i < s.size(); ++i) {
        if (s[i] != 0.0) axpy(s[i], v[i], x);
    }
    return x;
}

/// Solves (T - shift I) x = b in place by Gaussian elimination with partial pivoting.
void tridiag_shifted_solve(const Tridiagonal& t, Index k, double shift, Vector& b) {
    // Rows hold (d, u1, u2) after elimination; l multipliers stored per row.
    Vector d(static_cast<std::size_t>(k)), u1(static_cast<std::size_t>(k), 0.0), u2(static_cast<std::size_t>(k), 0.0),
        sub(static_cast<std::size_t>(k), 0.0);
    for (Index i = 0; i < k; ++i) {
        d[i] = t.alpha[i] - shift;
        if (i + 1 < k) {
            u1[i] = t.beta[i];
            sub[i] = t.beta[i];
        }
    }
    const double tiny = std::max(t.norm_inf(), 1.0) * 1e-300;
    for (Index i = 0; i + 1 < k; ++i) {
        if (std::abs(sub[i]) > std::abs(d[i])) {
            // Swap rows i and i+1.
            std::swap(d[i], sub[i]);
            std::swap(u1[i], d[i + 1]);
            std::swap(u2[i], u1[i + 1]);
            std::swap(b[i], b[i + 1]);
        }
        if (d[i] == 0.0) d[i] = tiny;
        const double l = sub[i] / d[i];
        d[i + 1] -= l * u1[i];
        u1[i + 1] -= l * u2[i];
        b[i + 1] -= l * b[i];
    }
    if (d[k - 1] == 0.0) d[k - 1] = tiny;
    for (Index i = k - 1; i >= 0; --i) {
        double s = b[i];
        if (i + 1 < k) s -= u1[i] * b[i + 1];
        if (i + 2 < k) s -= u2[i] * b[i + 2];
        b[i] = s / d[i];
    }
}

/// Eigenvector of T_k for an eigenvalue near theta by inverse iteration.
Vector tridiag_inverse_iteration(const Tridiagonal& t, Index k, double theta) {
    Vector s(static_cast<std::size_t>(k), 1.0);
    for (int it = 0; it < 3; ++it) {
        tridiag_shifted_solve(t, k, theta, s);
        const double ns = norm2(s);
        if (!(ns > 0.0) || !std::isfinite(ns)) break;
        scale(1.0 / ns, s);
    }
    return s;
}

double tridiag_rayleigh(const Tridiagonal& t, Index k, std::span<const double> s) {
    double r = 0.0;
    for (Index i = 0; i < k; ++i) {
        r += t.alpha[i] * s[i] * s[i];
        if (i + 1 < k) r += 2.0 * t.beta[i] * s[i] * s[i + 1];
    }
    return r;
}

/// Plain three-term Lanczos recurrence (no storage of old vectors).
class LanczosStepper {
public:
    LanczosStepper(const LinearOperator& op, std::span<const double> v1)
        : op_(op), v_prev_(v1.size(), 0.0), v_(v1.begin(), v1.end()), w_(v1.size()) {
        const double nv = norm2(v_);
        if (!(nv > 0.0)) throw InvalidInput("lanczos: starting vector is zero");
        scale(1.0 / nv, v_);
    }

    [[nodiscard]] const Vector& current() const noexcept { return v_; }

    /// Advances one step; returns (alpha_j, beta_{j+1}).
    std::pair<double, double> step() {
        op_.apply(v_, w_);
        if (beta_ != 0.0) axpy(-beta_, v_prev_, w_);
        const double alpha = dot(w_, v_);
        axpy(-alpha, v_, w_);
        const double beta = norm2(w_);
        std::swap(v_prev_, v_);
        if (beta > 0.0) {
            for (std::size_t i = 0; i < v_.size(); ++i) v_[i] = w_[i] / beta;
        } else {
            std::fill(v_.begin(), v_.end(), 0.0);
        }
        beta_ = beta;
        return {alpha, beta};
    }

private:
    const LinearOperator& op_;
    Vector v_prev_, v_, w_;
    double beta_ = 0.0;
};

constexpr double kLanczosBreakdown = 1e-13;

}  // namespace

// ----------------------------------------------------------------------------
// Tridiagonal helpers
// ----------------------------------------------------------------------------

void Tridiagonal::validate() const {
    if (!alpha.empty() && beta.size() + 1 != alpha.size()) {
        throw DimensionMismatch("tridiagonal: beta must have size(alpha) - 1 entries");
    }
    if (alpha.empty() && !beta.empty()) throw DimensionMismatch("tridiagonal: beta without alpha");
}

double Tridiagonal::norm_inf() const {
    double m = 0.0;
    for (Index i = 0; i < size(); ++i) {
        double s = std::abs(alpha[i]);
        if (i > 0) s += std::abs(beta[i - 1]);
        if (i + 1 < size()) s += std::abs(beta[i]);
        m = std::max(m, s);
    }
    return m;
}

TridiagEigen tridiag_eig(const Tridiagonal& t, bool want_vectors) {
    t.validate();
    const Index n = t.size();
    TridiagEigen e;
    e.values = t.alpha;
    Vector off = t.beta;
    if (want_vectors) {
        e.vectors.assign(static_cast<std::size_t>(n * n), 0.0);
        for (Index i = 0; i < n; ++i) e.vectors[i * n + i] = 1.0;
    }
    tridiagonal_ql(e.values, off, want_vectors ? e.vectors.data() : nullptr);
    return e;
}

LanczosResult lanczos_run(const LinearOperator& op, std::span<const double> v1, Index steps, bool reorth) {
    require_same_size(v1.size(), static_cast<std::size_t>(op.size()), "lanczos starting vector");
    if (steps < 1) throw InvalidInput("lanczos: steps must be >= 1");
    LanczosResult res;
    if (!reorth) {
        LanczosStepper st(op, v1);
        for (Index j = 0; j < steps; ++j) {
            const auto [alpha, beta] = st.step();
            res.t.alpha.push_back(alpha);
            const double scale_ref = std::abs(alpha) + (res.t.beta.empty() ? 0.0 : res.t.beta.back());
            if (beta <= kLanczosBreakdown * scale_ref) {
                res.invariant = true;
                res.next_beta = 0.0;
                return res;
            }
            if (j + 1 < steps) res.t.beta.push_back(beta);
            res.next_beta = beta;
        }
        res.next = st.current();
        return res;
    }

    Vector v(v1.begin(), v1.end());
    const double nv = norm2(v);
    if (!(nv > 0.0)) throw InvalidInput("lanczos: starting vector is zero");
    scale(1.0 / nv, v);
    Vector w(v.size());
    Vector h;
    for (Index j = 0; j < steps; ++j) {
        res.basis.push_back(v);
        op.apply(v, w);
        orthogonalize(w, res.basis, nullptr, &h);
        const double alpha = h.back();
        const double beta = norm2(w);
        res.t.alpha.push_back(alpha);
        const double scale_ref = std::abs(alpha) + (res.t.beta.empty() ? 0.0 : res.t.beta.back());
        if (beta <= kLanczosBreakdown * scale_ref) {
            res.invariant = true;
            res.next_beta = 0.0;
            return res;
        }
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / beta;
        if (j + 1 < steps) res.t.beta.push_back(beta);
        res.next_beta = beta;
    }
    res.next = v;
    return res;
}

CwiClassification cwi_identify(const Tridiagonal& t, double tol) {
    t.validate();
    const Index k = t.size();
    CwiClassification out;
    if (k == 0) return out;
    if (tol <= 0.0) tol = 1e-8 * std::max(t.norm_inf(), std::numeric_limits<double>::min());
    const auto ev = tridiag_eig(t).values;
    Vector hat;
    if (k > 1) {
        Tridiagonal th;
        th.alpha.assign(t.alpha.begin() + 1, t.alpha.end());
        th.beta.assign(t.beta.begin() + 1, t.beta.end());
        hat = tridiag_eig(th).values;
    }
    auto in_hat = [&](double x) {
        auto it = std::lower_bound(hat.begin(), hat.end(), x - tol);
        return it != hat.end() && *it <= x + tol;
    };
    for (Index i = 0; i < k;) {
        Index j = i + 1;
        while (j < k && ev[j] - ev[j - 1] <= tol) ++j;
        const Index mult = j - i;
        // The median copy: converged copies agree to rounding, a copy still converging sits at an end.
        const double rep = ev[i + (mult - 1) / 2];
        if (mult >= 2 || !in_hat(ev[i])) {
            out.good.push_back({rep, mult});
        } else {
            out.spurious.push_back(ev[i]);
        }
        i = j;
    }
    return out;
}

// ----------------------------------------------------------------------------
// Configuration
// ----------------------------------------------------------------------------

void SolverConfig::validate() const {
    auto fail = [](const std::string& m) { throw InvalidInput("solver config: " + m); };
    if (n_wanted < 1) fail("n_wanted must be >= 1");
    if (max_basis < 2) fail("max_basis must be >= 2");
    if (restart_size < 1 || restart_size >= max_basis) fail("restart_size must satisfy 1 <= restart_size < max_basis");
    if (n_wanted > restart_size) fail("n_wanted must not exceed restart_size");
    if (!(outer_tol > 0.0)) fail("outer_tol must be positive");
    if (!(inner_tol > 0.0)) fail("inner_tol must be positive");
    if (!(jd_inner_floor > 0.0) || !(jd_inner_final > 0.0)) fail("JD inner tolerances must be positive");
    if (inner_maxit < 1 || max_outer < 1) fail("iteration limits must be >= 1");
    if (!(cwi_factor > 0.0)) fail("cwi_factor must be positive");
    if (cwi_max_steps < 1) fail("cwi_max_steps must be >= 1");
    if (jd_guard < 0) fail("jd_guard must be >= 0");
    if (!std::isfinite(target_sigma)) fail("target_sigma must be finite");
}

Vector seeded_start_vector(Index n, std::uint64_t seed) {
    SplitMix64 g(seed);
    Vector v(static_cast<std::size_t>(n));
    for (auto& x : v) x = g.uniform() - 0.5;
    const double nv = norm2(v);
    if (nv > 0.0) scale(1.0 / nv, v);
    return v;
}

// ----------------------------------------------------------------------------
// Cullum-Willoughby Lanczos
// ----------------------------------------------------------------------------

EigenResult cwi_solve(const SparseSymMatrix& a, const SolverConfig& cfg) {
    cfg.validate();
    const Index n = a.size();
    if (n < 1) throw InvalidInput("cwi_solve: empty matrix");
    const double anorm = a.norm1();
    const double tol_abs = cfg.outer_tol * anorm;
    const auto op = LinearOperator::shifted(a);
    const Vector v1 = seeded_start_vector(n, cfg.seed);
    const Index steps = std::max<Index>(
        1, std::min<Index>(static_cast<Index>(std::ceil(cfg.cwi_factor * static_cast<double>(n))), cfg.cwi_max_steps));

    const auto run = lanczos_run(op, v1, steps, false);
    const Tridiagonal& t = run.t;
    const Index k = t.size();
    EigenResult res;
    res.stats.outer_iterations = k;

    auto cls = cwi_identify(t, cfg.cwi_tol);
    std::stable_sort(cls.good.begin(), cls.good.end(),
                     [&](const CwiValue& x, const CwiValue& y) { return nearer(x.value, y.value, cfg.target_sigma); });
    const auto wanted = std::min<std::size_t>(cls.good.size(), static_cast<std::size_t>(cfg.n_wanted));
    if (cfg.trace) {
        for (std::size_t i = 0; i < wanted; ++i) cfg.trace({"cwi", k, cls.good[i].value, 0.0, 0});
    }

    // For each wanted value take the shortest leading T_k' whose Ritz vector is accurate.
    const double tnorm = std::max(t.norm_inf(), 1e-300);
    std::vector<Vector> coeffs(wanted);
    std::vector<Index> lengths(wanted, k);
    for (std::size_t w = 0; w < wanted; ++w) {
        const double theta = cls.good[w].value;
        for (int c = 6; c >= 0; --c) {
            const Index kp = c == 0 ? k : std::max<Index>(2, k >> c);
            if (kp > k || (c > 0 && kp == k)) continue;
            auto s = tridiag_inverse_iteration(t, kp, theta);
            const double coupling = kp < k ? t.beta[kp - 1] : run.next_beta;
            const double bound = std::abs(coupling * s[kp - 1]);
            const bool close = std::abs(tridiag_rayleigh(t, kp, s) - theta) <= 1e-8 * tnorm;
            if ((close && bound <= 0.1 * tol_abs) || c == 0) {
                coeffs[w] = std::move(s);
                lengths[w] = kp;
                break;
            }
        }
    }

    // Second pass: regenerate the Lanczos vectors and accumulate the Ritz vectors.
    std::vector<Vector> xs(wanted, Vector(static_cast<std::size_t>(n), 0.0));
    const Index need = wanted > 0 ? *std::max_element(lengths.begin(), lengths.end()) : 0;
    if (need > 0) {
        LanczosStepper st(op, v1);
        for (Index j = 0; j < need; ++j) {
            const Vector& vj = st.current();
            for (std::size_t w = 0; w < wanted; ++w) {
                if (j < lengths[w]) axpy(coeffs[w][j], vj, xs[w]);
            }
            if (j + 1 < need) st.step();
        }
    }
    for (std::size_t w = 0; w < wanted; ++w) {
        auto p = make_pair(a, std::move(xs[w]), tol_abs);
        p.multiplicity_hint = cls.good[w].multiplicity;
        res.pairs.push_back(std::move(p));
    }
    sort_pairs(res.pairs, cfg.target_sigma);
    res.stats.all_converged = static_cast<Index>(res.pairs.size()) == cfg.n_wanted &&
                              std::all_of(res.pairs.begin(), res.pairs.end(), [](const EigenPair& p) { return p.converged; });
    return res;
}

// ----------------------------------------------------------------------------
// Shift-and-invert inner solver
// ----------------------------------------------------------------------------

ShiftInvertSolver::ShiftInvertSolver(const SparseSymMatrix& a, double sigma, FactorParams params, double tol,
                                     Index maxit)
    : shifted_(a.shifted(sigma)), params_(std::move(params)), tol_(tol), maxit_(maxit) {
    epsilon_ = params_.epsilon_for(shifted_.size());
    params_.epsilon = epsilon_;
    factor_ = std::make_shared<const MultilevelFactor>(factorize(shifted_, params_));
}

void ShiftInvertSolver::refactor() {
    ++refactorizations_;
    epsilon_ = refactorizations_ >= 3 ? 0.0 : epsilon_ / 10.0;
    params_.epsilon = epsilon_;
    factor_ = std::make_shared<const MultilevelFactor>(factorize(shifted_, params_));
}

Index ShiftInvertSolver::solve(std::span<const double> b, std::span<double> y) {
    const auto op = LinearOperator::shifted(shifted_);
    SqmrOptions opt;
    opt.tol = tol_;
    opt.maxit = maxit_;
    opt.op_norm = shifted_.norm1();
    Index its = 0;
    ++solves_;
    while (true) {
        const auto prec = LinearOperator::preconditioner(factor_);
        std::fill(y.begin(), y.end(), 0.0);
        auto rep = sqmr_solve(op, prec, b, y, opt);
        its += rep.iterations;
        if (!rep.converged) {
            rep = sqmr_solve(op, prec, b, y, opt);
            its += rep.iterations;
        }
        if (rep.converged) break;
        if (refactorizations_ >= 3) {
            iterations_ += its;
            char msg[160];
            std::snprintf(msg, sizeof msg, "shift-invert solve did not reach %.1e (backward error %.3e)", tol_,
                          rep.final_backward_error);
            throw NumericalFailure(msg);
        }
        refactor();
    }
    iterations_ += its;
    return its;
}

// ----------------------------------------------------------------------------
// Implicitly restarted shift-and-invert Lanczos
// ----------------------------------------------------------------------------

namespace {

using DenseRows = std::vector<Vector>;

/// Applies implicitly shifted QR steps to T (dense, m x m); accumulates Q.
void shifted_qr_steps(DenseRows& t, DenseRows& q, std::span<const double> shifts) {
    const auto m = t.size();
    for (double mu : shifts) {
        DenseRows h = t;
        for (std::size_t i = 0; i < m; ++i) h[i][i] -= mu;
        std::vector<std::pair<double, double>> rot(m > 0 ? m - 1 : 0);
        for (std::size_t i = 0; i + 1 < m; ++i) {
            const double x = h[i][i], y = h[i + 1][i];
            const double r = std::hypot(x, y);
            const double c = r == 0.0 ? 1.0 : x / r;
            const double s = r == 0.0 ? 0.0 : y / r;
            rot[i] = {c, s};
            for (std::size_t col = 0; col < m; ++col) {
                const double a0 = h[i][col], a1 = h[i + 1][col];
                h[i][col] = c * a0 + s * a1;
                h[i + 1][col] = -s * a0 + c * a1;
            }
        }
        for (std::size_t i = 0; i + 1 < m; ++i) {
            const auto [c, s] = rot[i];
            for (std::size_t col = 0; col < m; ++col) {
                const double a0 = t[i][col], a1 = t[i + 1][col];
                t[i][col] = c * a0 + s * a1;
                t[i + 1][col] = -s * a0 + c * a1;
            }
            for (std::size_t row = 0; row < m; ++row) {
                const double a0 = t[row][i], a1 = t[row][i + 1];
                t[row][i] = c * a0 + s * a1;
                t[row][i + 1] = -s * a0 + c * a1;
            }
            for (std::size_t row = 0; row < m; ++row) {
                const double a0 = q[row][i], a1 = q[row][i + 1];
                q[row][i] = c * a0 + s * a1;
                q[row][i + 1] = -s * a0 + c * a1;
            }
        }
        // Restore exact tridiagonal symmetric structure.
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (j + 1 < i || i + 1 < j) t[i][j] = 0.0;
            }
            if (i + 1 < m) {
                const double b = 0.5 * (t[i + 1][i] + t[i][i + 1]);
                t[i + 1][i] = t[i][i + 1] = b;
            }
        }
    }
}

}  // namespace

EigenResult si_lanczos_ir(const SparseSymMatrix& a, const InnerSolve& solve, const SolverConfig& cfg,
                          const RestartHook& hook) {
    cfg.validate();
    const Index n = a.size();
    if (n < 1) throw InvalidInput("si_lanczos_ir: empty matrix");
    const double anorm = a.norm1();
    const double tol_abs = cfg.outer_tol * anorm;
    const double sigma = cfg.target_sigma;
    const Index m = std::min(cfg.max_basis, n);
    const Index nw = std::min(cfg.n_wanted, n);
    const Index k0 = std::min(cfg.restart_size, std::max<Index>(m - 1, 1));

    EigenResult res;
    Basis v;
    Tridiagonal t;
    Vector f = seeded_start_vector(n, cfg.seed);
    double fnorm = 1.0;  // f holds the next (unnormalised) vector
    Vector w(static_cast<std::size_t>(n)), h;
    bool invariant = false;

    auto apply_b = [&](std::span<const double> x, std::span<double> y) {
        const Index its = solve(x, y);
        res.stats.inner_iterations += its;
        ++res.stats.inner_solves;
        ++res.stats.outer_iterations;
        return its;
    };

    struct Ritz {
        double theta;
        Index index;
    };

    std::vector<char> converged_flags;
    Vector ritz_values;
    Vector ritz_vectors;  // column-major m x m
    std::vector<Ritz> order;

    while (true) {
        // Extend the factorisation to m vectors.
        while (static_cast<Index>(v.size()) < m && !invariant) {
            if (!v.empty()) t.beta.push_back(fnorm);
            Vector vj(f);
            scale(1.0 / fnorm, vj);
            v.push_back(std::move(vj));
            const Index its = apply_b(v.back(), w);
            f = w;
            orthogonalize(f, v, nullptr, &h);
            t.alpha.push_back(h.back());
            fnorm = norm2(f);
            if (cfg.trace) cfg.trace({"silanczos", res.stats.outer_iterations, h.back(), fnorm, its});
            if (fnorm <= kLanczosBreakdown * (std::abs(h.back()) + (t.beta.empty() ? 0.0 : t.beta.back()))) {
                invariant = true;
            }
            if (res.stats.outer_iterations >= cfg.max_outer) break;
        }

        const Index cur = static_cast<Index>(v.size());
        const auto eig = tridiag_eig(t, true);
        order.clear();
        for (Index i = 0; i < cur; ++i) order.push_back({eig.values[i], i});
        std::stable_sort(order.begin(), order.end(), [&](const Ritz& x, const Ritz& y) {
            const double ax = std::abs(x.theta), ay = std::abs(y.theta);
            if (ax != ay) return ax > ay;
            return sigma + 1.0 / x.theta < sigma + 1.0 / y.theta;
        });

        // Convergence of the wanted Ritz pairs: bound first, then the true residual.
        Index nconv = 0;
        const double resid_scale = anorm + std::abs(sigma);
        for (Index i = 0; i < std::min(nw, cur); ++i) {
            const auto& r = order[i];
            if (r.theta == 0.0) break;
            const double est = invariant ? 0.0 : std::abs(fnorm * eig.vectors[r.index * cur + cur - 1]);
            if (est * resid_scale / std::abs(r.theta) > tol_abs) break;
            auto x = combine(v, std::span<const double>(eig.vectors.data() + r.index * cur, static_cast<std::size_t>(cur)));
            if (make_pair(a, std::move(x), tol_abs).converged) {
                ++nconv;
            } else {
                break;
            }
        }
        const bool done = nconv >= nw || invariant || res.stats.outer_iterations >= cfg.max_outer;
        if (done) {
            for (Index i = 0; i < std::min(nw, cur); ++i) {
                const auto& r = order[i];
                auto x = combine(v, std::span<const double>(eig.vectors.data() + r.index * cur, static_cast<std::size_t>(cur)));
                res.pairs.push_back(make_pair(a, std::move(x), tol_abs));
            }
            break;
        }

        // Implicit restart with the unwanted Ritz values as shifts.
        const Index k = std::min(k0 + std::min(nconv, (m - k0) / 2), cur - 1);
        Vector shifts;
        for (Index i = k; i < cur; ++i) shifts.push_back(order[i].theta);
        DenseRows td(static_cast<std::size_t>(cur), Vector(static_cast<std::size_t>(cur), 0.0));
        DenseRows qd(static_cast<std::size_t>(cur), Vector(static_cast<std::size_t>(cur), 0.0));
        for (Index i = 0; i < cur; ++i) {
            td[i][i] = t.alpha[i];
            qd[i][i] = 1.0;
            if (i + 1 < cur) td[i][i + 1] = td[i + 1][i] = t.beta[i];
        }
        shifted_qr_steps(td, qd, shifts);

        Basis vk;
        for (Index j = 0; j < k; ++j) {
            Vector col(static_cast<std::size_t>(cur));
            for (Index i = 0; i < cur; ++i) col[i] = qd[i][j];
            vk.push_back(combine(v, col));
        }
        Vector qk(static_cast<std::size_t>(cur));
        for (Index i = 0; i < cur; ++i) qk[i] = qd[i][k];
        Vector fnew = combine(v, qk);
        scale(td[k][k - 1], fnew);
        axpy(qd[cur - 1][k - 1], f, fnew);
        orthogonalize(fnew, vk);

        v = std::move(vk);
        t.alpha.assign(static_cast<std::size_t>(k), 0.0);
        t.beta.assign(static_cast<std::size_t>(k - 1), 0.0);
        for (Index i = 0; i < k; ++i) {
            t.alpha[i] = td[i][i];
            if (i + 1 < k) t.beta[i] = td[i + 1][i];
        }
        f = std::move(fnew);
        fnorm = norm2(f);
        ++res.stats.restarts;
        if (hook) hook(v, t, f);
        if (fnorm == 0.0) invariant = true;
    }

    sort_pairs(res.pairs, sigma);
    res.stats.all_converged = static_cast<Index>(res.pairs.size()) == cfg.n_wanted &&
                              std::all_of(res.pairs.begin(), res.pairs.end(), [](const EigenPair& p) { return p.converged; });
    return res;
}

EigenResult si_lanczos_ir(const SparseSymMatrix& a, const SolverConfig& cfg, const FactorParams& params) {
    cfg.validate();
    ShiftInvertSolver solver(a, cfg.target_sigma, params, cfg.inner_tol, cfg.inner_maxit);
    auto res = si_lanczos_ir(
        a, [&solver](std::span<const double> b, std::span<double> y) { return solver.solve(b, y); }, cfg);
    res.stats.refactorizations = solver.refactorizations();
    res.stats.fill_ratio = solver.factor().stats().fill_ratio;
    return res;
}

// ----------------------------------------------------------------------------
// Jacobi-Davidson
// ----------------------------------------------------------------------------

PreconditionerFactory multilevel_factory(const SparseSymMatrix& a, const FactorParams& params,
                                         std::shared_ptr<double> fill_ratio) {
    auto m = std::make_shared<const SparseSymMatrix>(a);
    return [m, params, fill_ratio](double shift, int refinement) {
        const auto shifted = m->shifted(shift);
        FactorParams p = params;
        if (refinement > 0) p.epsilon = refinement >= 3 ? 0.0 : p.epsilon_for(shifted.size()) * std::pow(10.0, -refinement);
        auto f = std::make_shared<const MultilevelFactor>(factorize(shifted, p));
        if (fill_ratio) *fill_ratio = f->stats().fill_ratio;
        return LinearOperator::preconditioner(std::move(f));
    };
}

EigenResult jd_solve(const SparseSymMatrix& a, const PreconditionerFactory& factory, const SolverConfig& cfg) {
    cfg.validate();
    const Index n = a.size();
    if (n < 1) throw InvalidInput("jd_solve: empty matrix");
    const double anorm = a.norm1();
    const double tol_abs = cfg.outer_tol * anorm;
    const double tau = cfg.target_sigma;
    const Index nw = std::min(cfg.n_wanted + cfg.jd_guard, n);
    const Index mmax = std::min(cfg.max_basis, n);
    const Index keep = std::min(cfg.restart_size, mmax - 1);

    EigenResult res;
    int refinement = 0;
    int misses = 0;
    LinearOperator kinv = factory(tau, refinement);

    Basis q;       // converged eigenvectors
    Vector lambdas;
    Basis v, av;   // search space and A times it
    DenseRows hm;  // V^T A V
    Vector t = seeded_start_vector(n, cfg.seed);
    std::uint64_t fresh = 0;
    Index step = 0;

    auto reset_space = [&](const Vector& eigvec_cols, const std::vector<Index>& cols, const Vector& values, Index size) {
        Basis nv, nav;
        for (Index c : cols) {
            std::span<const double> s(eigvec_cols.data() + c * size, static_cast<std::size_t>(size));
            nv.push_back(combine(v, s));
            nav.push_back(combine(av, s));
        }
        v = std::move(nv);
        av = std::move(nav);
        hm.assign(cols.size(), Vector(cols.size(), 0.0));
        for (std::size_t i = 0; i < cols.size(); ++i) hm[i][i] = values[cols[i]];
    };

    while (static_cast<Index>(q.size()) < nw && res.stats.outer_iterations < cfg.max_outer) {
        // Expand the search space.
        double nt = orthogonalize(t, v, &q);
        if (!(nt > 1e-10 * std::max(1.0, norm2(t))) || !std::isfinite(nt)) {
            t = seeded_start_vector(n, cfg.seed + 0x9E3779B97F4A7C15ULL * ++fresh);
            nt = orthogonalize(t, v, &q);
        }
        scale(1.0 / nt, t);
        v.push_back(t);
        av.push_back(sym_matvec(a, t));
        const std::size_t s = v.size();
        for (auto& row : hm) row.push_back(0.0);
        hm.emplace_back(s, 0.0);
        for (std::size_t i = 0; i < s; ++i) hm[i][s - 1] = hm[s - 1][i] = dot(v[i], av[s - 1]);
        ++res.stats.outer_iterations;

        // Ritz extraction; lock every pair that has converged.
        double theta = 0.0, rnorm = 0.0;
        Vector u, r;
        bool finished = false;
        while (true) {
            const auto size = static_cast<Index>(v.size());
            if (size == 0) break;
            DenseSymMatrix hd(size);
            for (Index i = 0; i < size; ++i)
                for (Index j = 0; j < size; ++j) hd(i, j) = hm[i][j];
            const auto eig = dense_eig(hd);
            std::vector<Index> idx(static_cast<std::size_t>(size));
            std::iota(idx.begin(), idx.end(), Index{0});
            std::stable_sort(idx.begin(), idx.end(),
                             [&](Index x, Index y) { return nearer(eig.values[x], eig.values[y], tau); });
            const Index sel = idx[0];
            const std::span<const double> sv = eig.vector(sel);
            theta = eig.values[sel];
            u = combine(v, sv);
            r = combine(av, sv);
            axpy(-theta, u, r);
            rnorm = norm2(r);
            if (rnorm > tol_abs) {
                if (size >= mmax) {
                    std::vector<Index> kept(idx.begin(), idx.begin() + keep);
                    reset_space(eig.vectors, kept, eig.values, size);
                    ++res.stats.restarts;
                }
                break;
            }
            q.push_back(u);
            lambdas.push_back(theta);
            step = 0;
            if (cfg.trace) cfg.trace({"jd", res.stats.outer_iterations, theta, rnorm, 0});
            if (static_cast<Index>(q.size()) >= nw) {
                finished = true;
                break;
            }
            std::vector<Index> rest(idx.begin() + 1, idx.end());
            reset_space(eig.vectors, rest, eig.values, size);
        }
        if (finished) break;
        if (v.empty()) {
            t = seeded_start_vector(n, cfg.seed + 0x9E3779B97F4A7C15ULL * ++fresh);
            continue;
        }

        // Correction equation.
        Basis qt = q;
        qt.push_back(u);
        const double shift = rnorm < cfg.jd_theta_switch * anorm ? theta : tau;
        ++step;
        const double inner_tol = rnorm < cfg.jd_switch_residual * anorm
                                     ? cfg.jd_inner_final
                                     : std::max(std::ldexp(1.0, -static_cast<int>(std::min<Index>(step, 1000))), cfg.jd_inner_floor);
        Vector rhs(r);
        scale(-1.0, rhs);
        for (const auto& qi : qt) axpy(-dot(qi, rhs), qi, rhs);
        t.assign(static_cast<std::size_t>(n), 0.0);
        Index its = 0;
        bool usable = true;
        try {
            const auto op = make_jd_operator(a, shift, qt);
            const auto prec = make_jd_preconditioner(kinv, qt);
            SqmrOptions opt;
            opt.tol = inner_tol;
            opt.maxit = cfg.inner_maxit;
            const auto rep = sqmr_solve(op, prec, rhs, t, opt);
            its = rep.iterations;
            misses = rep.converged ? 0 : misses + 1;
            usable = rep.final_relative_residual < 1.0 && std::all_of(t.begin(), t.end(), [](double x) { return std::isfinite(x); });
        } catch (const NumericalFailure&) {
            usable = false;
        }
        if (!usable || norm2(t) == 0.0) t = rhs;  // steepest descent direction
        res.stats.inner_iterations += its;
        ++res.stats.inner_solves;
        if (cfg.trace) cfg.trace({"jd", res.stats.outer_iterations, theta, rnorm, its});
        if (misses >= 2 && refinement < 3) {
            kinv = factory(tau, ++refinement);
            ++res.stats.refactorizations;
            misses = 0;
        }
    }

    for (std::size_t i = 0; i < q.size(); ++i) res.pairs.push_back(make_pair(a, q[i], tol_abs));
    sort_pairs(res.pairs, tau);
    if (static_cast<Index>(res.pairs.size()) > cfg.n_wanted) res.pairs.resize(static_cast<std::size_t>(cfg.n_wanted));
    res.stats.all_converged = static_cast<Index>(res.pairs.size()) == std::min(cfg.n_wanted, n) &&
                              std::all_of(res.pairs.begin(), res.pairs.end(), [](const EigenPair& p) { return p.converged; });
    return res;
}

}  // namespace locsolve
