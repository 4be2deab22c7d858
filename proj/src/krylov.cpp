#include <locsolve/krylov.hpp>

#include <locsolve/dense.hpp>

namespace locsolve {

LinearOperator LinearOperator::identity(Index n) {
    return {n, [](std::span<const double> x, std::span<double> y) { std::copy(x.begin(), x.end(), y.begin()); }};
}

LinearOperator LinearOperator::shifted(const SparseSymMatrix& a, double shift) {
    auto m = std::make_shared<const SparseSymMatrix>(a);
    return {a.size(), [m, shift](std::span<const double> x, std::span<double> y) {
                sym_matvec(*m, x, y);
                if (shift != 0.0) axpy(-shift, x, y);
            }};
}

LinearOperator LinearOperator::preconditioner(const MultilevelFactor& f) {
    const MultilevelFactor* p = &f;
    return {f.size(), [p](std::span<const double> x, std::span<double> y) { p->apply(x, y); }};
}

LinearOperator LinearOperator::preconditioner(std::shared_ptr<const MultilevelFactor> f) {
    const Index n = f->size();
    return {n, [f = std::move(f)](std::span<const double> x, std::span<double> y) { f->apply(x, y); }};
}

void LinearOperator::apply(std::span<const double> x, std::span<double> y) const {
    require_same_size(x.size(), static_cast<std::size_t>(n_), "LinearOperator input");
    require_same_size(y.size(), static_cast<std::size_t>(n_), "LinearOperator output");
    fn_(x, y);
}

Vector LinearOperator::operator()(std::span<const double> x) const {
    Vector y(static_cast<std::size_t>(n_));
    apply(x, y);
    return y;
}

// ----------------------------------------------------------------------------
// SQMR
// ----------------------------------------------------------------------------

namespace {

constexpr double kBreakdownTol = 1e-14;

double true_residual(const LinearOperator& op, std::span<const double> b, std::span<const double> x, Vector& r) {
    op.apply(x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    return norm2(r);
}

}  // namespace

SqmrReport sqmr_solve(const LinearOperator& op, const LinearOperator& precond, std::span<const double> b,
                      std::span<double> x, const SqmrOptions& options) {
    const Index n = op.size();
    require_same_size(static_cast<std::size_t>(precond.size()), static_cast<std::size_t>(n), "sqmr preconditioner");
    require_same_size(b.size(), static_cast<std::size_t>(n), "sqmr right-hand side");
    require_same_size(x.size(), static_cast<std::size_t>(n), "sqmr solution");
    if (!(options.tol > 0.0)) throw InvalidInput("sqmr: tol must be positive");
    if (!(options.op_norm >= 0.0)) throw InvalidInput("sqmr: op_norm must be non-negative");

    SqmrReport rep;
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        rep.converged = true;
        return rep;
    }
    auto target_for = [&](std::span<const double> xs) {
        return options.tol * (bnorm + (options.op_norm > 0.0 ? options.op_norm * norm2(xs) : 0.0));
    };
    double target = target_for(x);
    const auto sz = static_cast<std::size_t>(n);

    Vector r(sz);
    double rnorm = true_residual(op, b, x, r);

    // Lanczos vectors v_{j-1}, v_j and w_j = P v_j; direction vectors d and op d.
    Vector v_prev(sz, 0.0), v(sz), w(sz), u(sz);
    Vector d1(sz, 0.0), d2(sz, 0.0), ad1(sz, 0.0), ad2(sz, 0.0);
    Vector dnew(sz), adnew(sz);

    auto restart = [&](double beta) {
        for (std::size_t i = 0; i < sz; ++i) v[i] = r[i] / beta;
        std::fill(v_prev.begin(), v_prev.end(), 0.0);
        std::fill(d1.begin(), d1.end(), 0.0);
        std::fill(d2.begin(), d2.end(), 0.0);
        std::fill(ad1.begin(), ad1.end(), 0.0);
        std::fill(ad2.begin(), ad2.end(), 0.0);
    };

    double beta = rnorm;     // ||v~_j||, the subdiagonal entry of the current column
    double delta_prev = 1.0; // [v_{j-1}, v_{j-1}]
    double g = rnorm;        // rotated right-hand side
    double c1 = 1.0, s1 = 0.0, c2 = 1.0, s2 = 0.0;  // rotations G_{j-1}, G_{j-2}
    bool first = true;
    Index since_check = 0;
    if (rnorm > target) restart(beta);

    while (rnorm > target && rep.iterations < options.maxit) {
        precond.apply(v, w);
        const double delta = dot(v, w);
        if (std::abs(delta) < kBreakdownTol * norm2(w)) {
            rep.breakdown = "sqmr: Lanczos breakdown, [v, v] = " + std::to_string(delta);
            break;
        }
        op.apply(w, u);
        ++rep.iterations;
        ++since_check;
        const double alpha = dot(u, w) / delta;
        const double gamma = first ? 0.0 : beta * delta / delta_prev;
        // u <- next Lanczos vector (unnormalised); keep op P v_j in adnew first.
        adnew = u;
        for (std::size_t i = 0; i < sz; ++i) u[i] -= alpha * v[i] + gamma * v_prev[i];
        const double beta_next = norm2(u);

        // Apply G_{j-2} and G_{j-1} to the new column (0, gamma, alpha, beta_next).
        const double r_jm2 = s2 * gamma;
        double t = c2 * gamma;
        const double r_jm1 = c1 * t + s1 * alpha;
        t = -s1 * t + c1 * alpha;
        const double r_jj = std::hypot(t, beta_next);
        if (r_jj <= kBreakdownTol * (std::abs(alpha) + std::abs(gamma) + beta_next)) {
            rep.breakdown = "sqmr: singular tridiagonal pivot";
            break;
        }
        const double c = t / r_jj, s = beta_next / r_jj;
        const double tau = c * g;
        g = -s * g;

        for (std::size_t i = 0; i < sz; ++i) {
            dnew[i] = (w[i] - r_jm1 * d1[i] - r_jm2 * d2[i]) / r_jj;
            adnew[i] = (adnew[i] - r_jm1 * ad1[i] - r_jm2 * ad2[i]) / r_jj;
        }
        axpy(tau, dnew, x);
        axpy(-tau, adnew, r);
        std::swap(d2, d1);
        std::swap(d1, dnew);
        std::swap(ad2, ad1);
        std::swap(ad1, adnew);
        c2 = c1;
        s2 = s1;
        c1 = c;
        s1 = s;
        rnorm = norm2(r);
        if (options.op_norm > 0.0) target = target_for(x);

        const bool check = since_check >= options.residual_check_interval;
        if (rnorm <= target || check || beta_next == 0.0) {
            const double recursive = rnorm;
            rnorm = true_residual(op, b, x, r);
            since_check = 0;
            if (rnorm <= target) break;
            if (beta_next == 0.0 || rnorm > 10.0 * recursive + target) {
                // Invariant subspace or drift: restart the Lanczos process from the true residual.
                restart(rnorm);
                beta = rnorm;
                g = rnorm;
                c1 = 1.0;
                s1 = 0.0;
                c2 = 1.0;
                s2 = 0.0;
                delta_prev = 1.0;
                first = true;
                continue;
            }
        }

        for (std::size_t i = 0; i < sz; ++i) {
            v_prev[i] = v[i];
            v[i] = u[i] / beta_next;
        }
        beta = beta_next;
        delta_prev = delta;
        first = false;
    }

    Vector rr(sz);
    const double final_res = true_residual(op, b, x, rr);
    rep.final_relative_residual = final_res / bnorm;
    rep.final_backward_error = final_res / (bnorm + options.op_norm * norm2(x));
    rep.converged = rep.final_backward_error <= options.tol;
    return rep;
}

// ----------------------------------------------------------------------------
// Jacobi-Davidson projections
// ----------------------------------------------------------------------------

void check_orthonormal(const Basis& q, Index n, double tol) {
    for (std::size_t i = 0; i < q.size(); ++i) {
        require_same_size(q[i].size(), static_cast<std::size_t>(n), "basis vector");
        for (std::size_t j = 0; j <= i; ++j) {
            const double g = dot(q[i], q[j]);
            if (std::abs(g - (i == j ? 1.0 : 0.0)) > tol) {
                throw NumericalFailure("basis is not orthonormal: q" + std::to_string(i) + "^T q" + std::to_string(j) +
                                       " = " + std::to_string(g));
            }
        }
    }
}

namespace {

void project_out(const Basis& q, std::span<double> z) {
    for (const auto& qi : q) axpy(-dot(qi, z), qi, z);
}

}  // namespace

LinearOperator make_jd_operator(const SparseSymMatrix& a, double theta, const Basis& q) {
    check_orthonormal(q, a.size());
    auto m = std::make_shared<const SparseSymMatrix>(a);
    auto basis = std::make_shared<const Basis>(q);
    return {a.size(), [m, basis, theta](std::span<const double> x, std::span<double> y) {
                Vector z(x.begin(), x.end());
                project_out(*basis, z);
                sym_matvec(*m, z, y);
                axpy(-theta, z, y);
                project_out(*basis, y);
            }};
}

LinearOperator make_jd_preconditioner(const LinearOperator& kinv, const Basis& q) {
    const Index n = kinv.size();
    check_orthonormal(q, n);
    const auto k = static_cast<Index>(q.size());
    auto basis = std::make_shared<const Basis>(q);
    auto wcols = std::make_shared<Basis>();
    for (const auto& qi : q) wcols->push_back(kinv(qi));

    DenseSymMatrix m(k);
    for (Index i = 0; i < k; ++i) {
        for (Index j = 0; j < k; ++j) m(i, j) = 0.5 * (dot(q[i], (*wcols)[j]) + dot(q[j], (*wcols)[i]));
    }
    if (k == 1 && std::abs(m(0, 0)) < 1e-14 * norm2(q[0]) * norm2((*wcols)[0])) {
        throw NumericalFailure("JD preconditioner: u^T K^{-1} u vanishes; the preconditioner is unusable for this u");
    }
    std::shared_ptr<const DenseLDLT> mf;
    if (k > 0) mf = std::make_shared<const DenseLDLT>(m);
    const LinearOperator inner = kinv;
    return {n, [inner, basis, wcols, mf, k](std::span<const double> x, std::span<double> y) {
                inner.apply(x, y);
                if (k == 0) return;
                Vector c(static_cast<std::size_t>(k));
                for (Index i = 0; i < k; ++i) c[i] = dot((*basis)[i], y);
                const auto s = mf->solve(c);
                for (Index i = 0; i < k; ++i) axpy(-s[i], (*wcols)[i], y);
            }};
}

}  // namespace locsolve
