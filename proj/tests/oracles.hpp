#pragma once

// Independent reference implementations used only by the tests.

#include <locsolve/dense.hpp>
#include <locsolve/sparse.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using locsolve::Index;
using locsolve::Vector;

/// Dense n x n cost matrix for the sparse costs of a symmetric matrix; absent = +inf.
inline std::vector<Vector> dense_costs(const locsolve::SparseSymMatrix& a) {
    const Index n = a.size();
    std::vector<Vector> c(n, Vector(n, std::numeric_limits<double>::infinity()));
    for (Index i = 0; i < n; ++i) {
        double mx = 0.0;
        for (Index j = 0; j < n; ++j) mx = std::max(mx, std::abs(a.at(i, j)));
        for (Index j = 0; j < n; ++j) {
            if (a.at(i, j) != 0.0) c[i][j] = std::log(mx) - std::log(std::abs(a.at(i, j)));
        }
    }
    return c;
}

/// O(n^3) Hungarian method on a dense cost matrix c[row][col]. Returns the
/// minimum total cost (inf when no finite perfect matching exists) and the
/// row assigned to each column.
inline std::pair<double, std::vector<Index>> hungarian(const std::vector<Vector>& cost) {
    const Index n = static_cast<Index>(cost.size());
    constexpr double big = 1e9;
    auto c = [&](Index i, Index j) { return std::isfinite(cost[i - 1][j - 1]) ? cost[i - 1][j - 1] : big; };
    Vector u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<Index> p(n + 1, 0), way(n + 1, 0);
    for (Index i = 1; i <= n; ++i) {
        p[0] = i;
        Index j0 = 0;
        Vector minv(n + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const Index i0 = p[j0];
            double delta = std::numeric_limits<double>::infinity();
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = c(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const Index j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Index> row_of_col(n);
    double total = 0.0;
    for (Index j = 1; j <= n; ++j) {
        row_of_col[j - 1] = p[j] - 1;
        if (!std::isfinite(cost[p[j] - 1][j - 1])) return {std::numeric_limits<double>::infinity(), row_of_col};
        total += cost[p[j] - 1][j - 1];
    }
    return {total, row_of_col};
}

/// Exhaustive minimum over all permutations (n <= 9).
inline double brute_force_assignment(const std::vector<Vector>& cost) {
    const Index n = static_cast<Index>(cost.size());
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (Index j = 0; j < n && s < best; ++j) s += cost[perm[j]][j];
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Dense inverse by Gauss-Jordan with partial pivoting (row-major n x n).
inline std::vector<Vector> inverse(std::vector<Vector> a) {
    const Index n = static_cast<Index>(a.size());
    std::vector<Vector> inv(n, Vector(n, 0.0));
    for (Index i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (Index k = 0; k < n; ++k) {
        Index piv = k;
        for (Index i = k + 1; i < n; ++i) {
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        }
        std::swap(a[k], a[piv]);
        std::swap(inv[k], inv[piv]);
        const double d = a[k][k];
        for (Index j = 0; j < n; ++j) {
            a[k][j] /= d;
            inv[k][j] /= d;
        }
        for (Index i = 0; i < n; ++i) {
            if (i == k || a[i][k] == 0.0) continue;
            const double f = a[i][k];
            for (Index j = 0; j < n; ++j) {
                a[i][j] -= f * a[k][j];
                inv[i][j] -= f * inv[k][j];
            }
        }
    }
    return inv;
}

inline double norm_inf(const std::vector<Vector>& a) {
    double m = 0.0;
    for (const auto& r : a) {
        double s = 0.0;
        for (double v : r) s += std::abs(v);
        m = std::max(m, s);
    }
    return m;
}

/// Dense Cholesky-pattern fill by explicit symbolic elimination on a boolean matrix.
inline Index elimination_fill(const locsolve::SparseSymMatrix& a, const locsolve::Permutation& p) {
    const Index n = a.size();
    std::vector<std::vector<char>> s(n, std::vector<char>(n, 0));
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j || a.at(i, j) != 0.0) s[p.forward()[i]][p.forward()[j]] = 1;
        }
    }
    Index count = 0;
    for (Index k = 0; k < n; ++k) {
        for (Index i = k; i < n; ++i) count += s[i][k];
        for (Index i = k + 1; i < n; ++i) {
            if (!s[i][k]) continue;
            for (Index j = k + 1; j < n; ++j) {
                if (s[j][k]) s[i][j] = 1;
            }
        }
    }
    return count;
}

/// Number of eigenvalues of the symmetric tridiagonal (alpha, beta) below x (Sturm sequence).
inline Index sturm_count(const Vector& alpha, const Vector& beta, double x) {
    Index count = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        const double b2 = i > 0 ? beta[i - 1] * beta[i - 1] : 0.0;
        q = alpha[i] - x - (i > 0 ? b2 / q : 0.0);
        if (q == 0.0) q = -std::numeric_limits<double>::epsilon() * (std::abs(x) + 1.0);
        if (q < 0.0) ++count;
    }
    return count;
}

/// All eigenvalues of a symmetric tridiagonal matrix by bisection, ascending.
inline Vector tridiag_bisection(const Vector& alpha, const Vector& beta) {
    const auto n = static_cast<Index>(alpha.size());
    double lo = 0.0, hi = 0.0;
    for (Index i = 0; i < n; ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(beta[i - 1]);
        if (i + 1 < n) r += std::abs(beta[i]);
        lo = std::min(lo, alpha[i] - r);
        hi = std::max(hi, alpha[i] + r);
    }
    Vector out(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
        double a = lo, b = hi;
        for (int it = 0; it < 200 && b - a > 0.0; ++it) {
            const double mid = 0.5 * (a + b);
            if (mid == a || mid == b) break;
            if (sturm_count(alpha, beta, mid) > k) {
                b = mid;
            } else {
                a = mid;
            }
        }
        out[k] = 0.5 * (a + b);
    }
    return out;
}

}  // namespace oracle
