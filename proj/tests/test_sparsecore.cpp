#include <locsolve/dense.hpp>
#include <locsolve/matrix_market.hpp>
#include <locsolve/sparse.hpp>

#include <doctest.h>

#include "test_support.hpp"

#include <sstream>

using namespace locsolve;

namespace {

Vector sorted_eigenvalues(const SparseSymMatrix& a) { return dense_eigenvalues(to_dense(a)); }

}  // namespace

TEST_CASE("from_triplets canonicalises and validates") {
    std::vector<Triplet> t{{0, 1, 2.0}, {2, 2, 3.0}};
    const auto a = SparseSymMatrix::from_triplets(3, t);
    CHECK(a.nnz() == 4);  // (0,0) (1,0) (1,1) (2,2), zero diagonals inserted
    CHECK(a.at(0, 1) == 2.0);
    CHECK(a.at(1, 0) == 2.0);
    CHECK(a.diag(0) == 0.0);
    CHECK(a.diag(2) == 3.0);

    std::vector<Triplet> dup{{0, 1, 1.0}, {1, 0, 1.0}};
    CHECK_THROWS_AS(SparseSymMatrix::from_triplets(2, dup), InvalidInput);
    std::vector<Triplet> out{{0, 3, 1.0}};
    CHECK_THROWS_AS(SparseSymMatrix::from_triplets(2, out), InvalidInput);

    // Raw CSR without a diagonal in row 1 breaks the invariant.
    CHECK_THROWS_AS(SparseSymMatrix(2, {0, 1, 2}, {0, 0}, {1.0, 1.0}), InvalidInput);
}

TEST_CASE("sym_matvec") {
    const Vector x{1, 2, 3};
    CHECK(sym_matvec(SparseSymMatrix::identity(3), x) == x);

    std::vector<Triplet> t{{0, 0, 0.0}, {1, 0, 1.0}, {1, 1, 0.0}};
    const auto swap = SparseSymMatrix::from_triplets(2, t);
    CHECK(sym_matvec(swap, Vector{1, 0}) == Vector{0, 1});

    CHECK_THROWS_AS(sym_matvec(swap, Vector{1, 2, 3}), DimensionMismatch);
}

TEST_CASE("sym_matvec agrees with the dense product on random matrices") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 1 + static_cast<Index>(rng() % 200);
        const auto a = testutil::random_sym(n, 0.05, rng);
        const auto x = testutil::random_vector(n, rng);
        const auto y = sym_matvec(a, x);
        const auto yd = to_dense(a).multiply(x);
        CHECK(testutil::max_abs_diff(y, yd) <= 1e-13 * std::max(1.0, norm_inf(yd)));
    }
}

TEST_CASE("permutation algebra") {
    const auto p = Permutation::from_ordering({2, 0, 1});  // new 0 <- old 2
    CHECK(p.forward() == std::vector<Index>{1, 2, 0});
    CHECK(p.inverse() == std::vector<Index>{2, 0, 1});
    const Vector x{10, 20, 30};
    const auto y = p.apply(x);
    CHECK(y == Vector{30, 10, 20});
    CHECK(p.apply_inverse(y) == x);

    const auto q = Permutation::from_ordering({1, 0, 2});
    const auto pq = p.then(q);
    CHECK(pq.apply(x) == q.apply(p.apply(x)));

    CHECK_THROWS_AS(Permutation::from_forward({0, 0, 1}), InvalidInput);
}

TEST_CASE("permute_sym") {
    std::mt19937_64 rng(3);
    const auto a = testutil::random_sym(6, 0.5, rng);
    CHECK(permute_sym(a, Permutation::identity(6)) == a);

    const Vector d{1.0, 2.0};
    const auto sw = permute_sym(SparseSymMatrix::diagonal(d), Permutation::from_ordering({1, 0}));
    CHECK(sw.diag(0) == 2.0);
    CHECK(sw.diag(1) == 1.0);

    // The permutation drawn in the cycle-splitting figure: ordering (1,2,4,3,5,6).
    const auto p = Permutation::from_ordering({0, 1, 3, 2, 4, 5});
    const auto b = permute_sym(a, p);
    for (Index i = 0; i < 6; ++i) {
        for (Index j = 0; j < 6; ++j) CHECK(b.at(p.forward()[i], p.forward()[j]) == a.at(i, j));
    }
    const auto ea = sorted_eigenvalues(a);
    const auto eb = sorted_eigenvalues(b);
    CHECK(testutil::max_abs_diff(ea, eb) <= 1e-12);

    CHECK_THROWS_AS(permute_sym(a, Permutation::identity(5)), DimensionMismatch);
}

TEST_CASE("scale_sym") {
    std::mt19937_64 rng(5);
    const auto a = testutil::random_sym(30, 0.2, rng);
    CHECK(scale_sym(a, DiagScaling::ones(30)) == a);

    const Vector four{4.0};
    const auto s = scale_sym(SparseSymMatrix::diagonal(four), DiagScaling(Vector{0.5}));
    CHECK(s.diag(0) == 1.0);

    CHECK_THROWS_AS(DiagScaling(Vector{1.0, 0.0}), InvalidInput);
    CHECK_THROWS_AS(DiagScaling(Vector{-1.0}), InvalidInput);

    // Congruence preserves inertia.
    Vector dv(30);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (auto& v : dv) v = u(rng);
    const auto b = scale_sym(a, DiagScaling(dv));
    auto inertia = [](const Vector& ev) {
        int neg = 0, pos = 0;
        for (double v : ev) (v < 0 ? neg : pos)++;
        return std::pair{neg, pos};
    };
    CHECK(inertia(sorted_eigenvalues(a)) == inertia(sorted_eigenvalues(b)));
}

TEST_CASE("Matrix Market round trip") {
    const Vector five{5.0};
    std::stringstream ss;
    write_matrix_market(SparseSymMatrix::diagonal(five), ss);
    CHECK(read_matrix_market(ss) == SparseSymMatrix::diagonal(five));

    std::mt19937_64 rng(17);
    const auto a = testutil::random_sym(40, 0.1, rng);
    std::stringstream s2;
    write_matrix_market(a, s2);
    CHECK(read_matrix_market(s2) == a);

    std::stringstream general("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1.0\n");
    CHECK_THROWS_AS(read_matrix_market(general), InvalidInput);
    std::stringstream bad_index("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n");
    CHECK_THROWS_AS(read_matrix_market(bad_index), InvalidInput);
    std::stringstream bad_header("hello\n");
    CHECK_THROWS_AS(read_matrix_market(bad_header), InvalidInput);
    CHECK_THROWS_AS(read_matrix_market(std::filesystem::path("/nonexistent/file.mtx")), IoError);
}

TEST_CASE("dense eigensolver") {
    const Vector d{3.0, 1.0, 2.0};
    CHECK(sorted_eigenvalues(SparseSymMatrix::diagonal(d)) == Vector{1.0, 2.0, 3.0});

    std::vector<Triplet> t{{1, 0, 1.0}};
    const auto e = sorted_eigenvalues(SparseSymMatrix::from_triplets(2, t));
    CHECK(e[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(e[1] == doctest::Approx(1.0).epsilon(1e-15));

    std::mt19937_64 rng(23);
    for (Index n : {1, 2, 5, 37, 120}) {
        const auto a = testutil::random_sym(n, 0.3, rng);
        const auto dense = to_dense(a);
        const auto eig = dense_eig(dense);
        const double anorm = std::max(dense.norm1(), 1e-300);
        for (Index k = 0; k < n; ++k) {
            const auto x = eig.vector(k);
            auto ax = dense.multiply(x);
            axpy(-eig.values[k], x, ax);
            CHECK(norm2(ax) <= 1e-10 * anorm);
            for (Index l = 0; l <= k; ++l) {
                CHECK(std::abs(dot(x, eig.vector(l)) - (k == l ? 1.0 : 0.0)) <= 1e-12);
            }
            if (k > 0) CHECK(eig.values[k - 1] <= eig.values[k]);
        }
        CHECK(testutil::max_abs_diff(eig.values, dense_eigenvalues(dense)) <= 1e-12 * anorm);
    }
    CHECK_THROWS_AS(to_dense(SparseSymMatrix::identity(10), 5), InvalidInput);
}

TEST_CASE("tridiagonal QL matches the dense path") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> g;
    const Index n = 50;
    Vector alpha(n), beta(n - 1);
    std::vector<Triplet> t;
    for (Index i = 0; i < n; ++i) {
        alpha[i] = g(rng);
        t.push_back({i, i, alpha[i]});
        if (i + 1 < n) {
            beta[i] = g(rng);
            t.push_back({i + 1, i, beta[i]});
        }
    }
    const auto ref = sorted_eigenvalues(SparseSymMatrix::from_triplets(n, t));
    tridiagonal_ql(alpha, beta, nullptr);
    CHECK(testutil::max_abs_diff(alpha, ref) <= 1e-12 * 6.0);
}

TEST_CASE("dense LDLT solves symmetric indefinite systems") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const Index n = 1 + static_cast<Index>(rng() % 60);
        const auto a = testutil::random_sym_nonsingular(n, 0.3, rng);
        const auto dense = to_dense(a);
        const auto x = testutil::random_vector(n, rng);
        const auto b = dense.multiply(x);
        const DenseLDLT f(dense);
        const auto y = f.solve(b);
        auto r = dense.multiply(y);
        axpy(-1.0, b, r);
        CHECK(norm2(r) <= 1e-11 * dense.norm1() * norm2(y));
    }
    // Zero diagonal forces a 2x2 pivot.
    std::vector<Triplet> t{{1, 0, 1.0}};
    const DenseLDLT f(to_dense(SparseSymMatrix::from_triplets(2, t)));
    CHECK(f.two_by_two_count() == 1);
    CHECK(f.solve(Vector{2.0, 3.0}) == Vector{3.0, 2.0});

    CHECK_THROWS_AS(DenseLDLT(DenseSymMatrix(3)), NumericalFailure);
}
