#include <locsolve/anderson.hpp>
#include <locsolve/dense.hpp>
#include <locsolve/krylov.hpp>

#include <doctest.h>

#include "test_support.hpp"

using namespace locsolve;

namespace {

LinearOperator dense_inverse_operator(const SparseSymMatrix& a, double shift = 0.0) {
    auto f = std::make_shared<const DenseLDLT>(to_dense(a.shifted(shift)));
    return {a.size(), [f](std::span<const double> x, std::span<double> y) {
                const auto s = f->solve(x);
                std::copy(s.begin(), s.end(), y.begin());
            }};
}

Basis random_orthonormal(Index n, Index k, std::mt19937_64& rng) {
    Basis q;
    for (Index j = 0; j < k; ++j) {
        auto v = testutil::random_vector(n, rng);
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& qi : q) axpy(-dot(qi, v), qi, v);
        }
        scale(1.0 / norm2(v), v);
        q.push_back(v);
    }
    return q;
}

}  // namespace

TEST_CASE("sqmr small exact cases") {
    const Vector b{1.0, 2.0, 3.0};
    Vector x(3, 0.0);
    auto rep = sqmr_solve(LinearOperator::identity(3), LinearOperator::identity(3), b, x);
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    CHECK(testutil::max_abs_diff(x, b) <= 1e-15);

    // Indefinite diagonal: the first Lanczos step has [v, A v] = 0.
    const Vector d{1.0, -1.0};
    const auto a = SparseSymMatrix::diagonal(d);
    Vector y(2, 0.0);
    rep = sqmr_solve(LinearOperator::shifted(a), LinearOperator::identity(2), Vector{1.0, 1.0}, y);
    CHECK(rep.converged);
    CHECK(rep.iterations <= 2);
    CHECK(testutil::max_abs_diff(y, Vector{1.0, -1.0}) <= 1e-14);

    Vector z(3, 5.0);
    rep = sqmr_solve(LinearOperator::identity(3), LinearOperator::identity(3), Vector(3, 0.0), z);
    CHECK(rep.converged);
    CHECK(z == Vector(3, 0.0));

    CHECK_THROWS_AS(sqmr_solve(LinearOperator::identity(3), LinearOperator::identity(2), b, x), DimensionMismatch);
}

TEST_CASE("sqmr against a dense solve") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 5 + static_cast<Index>(rng() % 60);
        const auto a = testutil::random_sym_nonsingular(n, 0.2, rng);
        const auto b = testutil::random_vector(n, rng);
        const auto xref = DenseLDLT(to_dense(a)).solve(b);
        Vector x(static_cast<std::size_t>(n), 0.0);
        SqmrOptions opt;
        opt.maxit = 20 * n;
        const auto rep = sqmr_solve(LinearOperator::shifted(a), LinearOperator::identity(n), b, x, opt);
        if (rep.breakdown) continue;  // reported, caller restarts
        CHECK(rep.converged);
        CHECK(rep.final_relative_residual <= 1e-10);
        Vector r = sym_matvec(a, x);
        axpy(-1.0, b, r);
        CHECK(norm2(r) <= 1e-10 * norm2(b) * (1 + 1e-6));
        // Forward error is bounded by the condition number; compare loosely.
        CHECK(testutil::max_abs_diff(x, xref) <= 1e-4 * std::max(1.0, norm_inf(xref)));
    }
}

TEST_CASE("sqmr with an exact preconditioner converges at once") {
    std::mt19937_64 rng(67);
    for (int trial = 0; trial < 10; ++trial) {
        const Index n = 10 + static_cast<Index>(rng() % 290);
        const auto a = testutil::random_sym_nonsingular(n, 3.0 / static_cast<double>(n), rng);
        const auto b = testutil::random_vector(n, rng);
        Vector x(static_cast<std::size_t>(n), 0.0);
        const auto rep = sqmr_solve(LinearOperator::shifted(a), dense_inverse_operator(a), b, x);
        CHECK(rep.converged);
        CHECK(rep.iterations <= 3);
    }

    AndersonConfig cfg;
    cfg.m = 8;
    const auto a = build_anderson(cfg);
    FactorParams p;
    p.epsilon = 0.0;
    p.tau = 0.0;
    const auto f = factorize(a, p);
    std::mt19937_64 r2(71);
    const auto b = testutil::random_vector(a.size(), r2);
    Vector x(static_cast<std::size_t>(a.size()), 0.0);
    const auto rep = sqmr_solve(LinearOperator::shifted(a), LinearOperator::preconditioner(f), b, x);
    CHECK(rep.converged);
    CHECK(rep.iterations <= 2);
}

TEST_CASE("sqmr with the multilevel preconditioner") {
    AndersonConfig cfg;
    cfg.m = 8;
    cfg.w = 16.5;
    const auto a = build_anderson(cfg);
    const auto f = factorize(a, FactorParams{});
    std::mt19937_64 rng(73);
    const auto b = testutil::random_vector(a.size(), rng);
    Vector x(static_cast<std::size_t>(a.size()), 0.0);
    SqmrOptions opt;
    opt.maxit = 300;
    const auto rep = sqmr_solve(LinearOperator::shifted(a), LinearOperator::preconditioner(f), b, x, opt);
    CHECK(rep.converged);
    Vector r = sym_matvec(a, x);
    axpy(-1.0, b, r);
    CHECK(norm2(r) <= 1e-10 * norm2(b) * (1 + 1e-6));

    // Iteration cap without convergence.
    Vector x2(static_cast<std::size_t>(a.size()), 0.0);
    opt.maxit = 2;
    const auto short_run = sqmr_solve(LinearOperator::shifted(a), LinearOperator::identity(a.size()), b, x2, opt);
    CHECK_FALSE(short_run.converged);
    CHECK(short_run.iterations == 2);
}

TEST_CASE("linear operators") {
    std::mt19937_64 rng(79);
    const auto a = testutil::random_sym(40, 0.1, rng);
    const auto op = LinearOperator::shifted(a, 0.7);
    const auto x = testutil::random_vector(40, rng);
    const auto y = testutil::random_vector(40, rng);
    Vector comb(x);
    axpy(2.5, y, comb);
    Vector expect = op(x);
    axpy(2.5, op(y), expect);
    CHECK(testutil::max_abs_diff(op(comb), expect) <= 1e-12 * std::max(1.0, norm_inf(expect)));
    auto direct = sym_matvec(a, x);
    axpy(-0.7, x, direct);
    CHECK(testutil::max_abs_diff(op(x), direct) <= 1e-15);
}

TEST_CASE("JD operator projections") {
    std::mt19937_64 rng(83);
    const Index n = 50;
    const auto a = testutil::random_sym(n, 0.1, rng);
    const double theta = 0.3;

    const auto plain = make_jd_operator(a, theta, {});
    const auto x = testutil::random_vector(n, rng);
    CHECK(testutil::max_abs_diff(plain(x), LinearOperator::shifted(a, theta)(x)) <= 1e-14);

    const auto q = random_orthonormal(n, 3, rng);
    const auto op = make_jd_operator(a, theta, q);
    CHECK(norm2(op(q[1])) <= 1e-12);
    const auto y = testutil::random_vector(n, rng);
    const auto ox = op(x);
    for (const auto& qi : q) CHECK(std::abs(dot(qi, ox)) <= 1e-12 * norm2(ox));
    CHECK(std::abs(dot(ox, y) - dot(x, op(y))) <= 1e-12 * norm2(ox) * norm2(y));

    Basis bad = q;
    scale(1.1, bad[0]);
    CHECK_THROWS_AS(make_jd_operator(a, theta, bad), NumericalFailure);
}

TEST_CASE("JD preconditioner projections") {
    std::mt19937_64 rng(89);
    const Index n = 40;
    const auto q1 = random_orthonormal(n, 1, rng);
    const auto p = make_jd_preconditioner(LinearOperator::identity(n), q1);
    CHECK(norm2(p(q1[0])) <= 1e-14);
    const auto r = testutil::random_vector(n, rng);
    Vector expect(r);
    axpy(-dot(q1[0], r), q1[0], expect);
    CHECK(testutil::max_abs_diff(p(r), expect) <= 1e-14);

    const auto a = testutil::random_sym_nonsingular(n, 0.2, rng);
    const auto kinv = dense_inverse_operator(a);
    const auto q = random_orthonormal(n, 3, rng);
    const auto pk = make_jd_preconditioner(kinv, q);
    const auto z = pk(r);
    for (const auto& qi : q) CHECK(std::abs(dot(qi, z)) <= 1e-10 * norm2(z));
    const auto s = testutil::random_vector(n, rng);
    CHECK(std::abs(dot(pk(r), s) - dot(r, pk(s))) <= 1e-10 * norm2(pk(r)) * norm2(s));

    // K^{-1} = diag(1, -1) and u = (1, 1)/sqrt 2: u^T K^{-1} u = 0.
    const Vector d{1.0, -1.0};
    const auto flip = LinearOperator::shifted(SparseSymMatrix::diagonal(d));
    const Basis u{{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}};
    CHECK_THROWS_AS(make_jd_preconditioner(flip, u), NumericalFailure);
}

TEST_CASE("correction equation with exact preconditioner and eigenvector") {
    std::mt19937_64 rng(97);
    const Index n = 30;
    const auto a = testutil::random_sym(n, 0.3, rng);
    const auto eig = dense_eig(to_dense(a));
    const Index k = 7;
    const Vector u(eig.vector(k).begin(), eig.vector(k).end());
    const double theta = eig.values[k] + 1e-3;  // keep A - theta I nonsingular
    const Basis q{u};
    const auto op = make_jd_operator(a, theta, q);
    const auto prec = make_jd_preconditioner(dense_inverse_operator(a, theta), q);
    auto rhs = testutil::random_vector(n, rng);
    axpy(-dot(u, rhs), u, rhs);
    Vector t(static_cast<std::size_t>(n), 0.0);
    const auto rep = sqmr_solve(op, prec, rhs, t);
    CHECK(rep.converged);
    CHECK(rep.iterations <= 3);
    CHECK(std::abs(dot(u, t)) <= 1e-10 * norm2(t));
}
