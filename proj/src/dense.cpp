#include <locsolve/dense.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace locsolve {

Vector DenseSymMatrix::multiply(std::span<const double> x) const {
    require_same_size(x.size(), static_cast<std::size_t>(n_), "DenseSymMatrix::multiply");
    Vector y(static_cast<std::size_t>(n_), 0.0);
    for (Index i = 0; i < n_; ++i) {
        double s = 0.0;
        const double* row = a_.data() + i * n_;
        for (Index j = 0; j < n_; ++j) s += row[j] * x[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = s;
    }
    return y;
}

double DenseSymMatrix::norm1() const {
    double m = 0.0;
    for (Index i = 0; i < n_; ++i) {
        double s = 0.0;
        for (Index j = 0; j < n_; ++j) s += std::abs((*this)(i, j));
        m = std::max(m, s);
    }
    return m;
}

DenseSymMatrix to_dense(const SparseSymMatrix& a, Index cap) {
    const Index n = a.size();
    if (n > cap) {
        throw InvalidInput("to_dense: dimension " + std::to_string(n) + " exceeds dense cap " + std::to_string(cap));
    }
    if (static_cast<double>(n) * static_cast<double>(n) * sizeof(double) > 4.0 * 1024 * 1024 * 1024) {
        throw InvalidInput("to_dense: dense storage would exceed 4 GiB");
    }
    DenseSymMatrix d(n);
    for (Index i = 0; i < n; ++i) {
        const auto r = a.row(i);
        for (std::size_t p = 0; p < r.cols.size(); ++p) {
            d(i, r.cols[p]) = r.vals[p];
            d(r.cols[p], i) = r.vals[p];
        }
    }
    return d;
}

// ----------------------------------------------------------------------------
// Householder tridiagonalization (EISPACK tred2), column-major V.
// On exit d holds the diagonal, e[0..n-2] the sub-diagonal; when `accumulate`
// is set V holds the orthogonal transformation.
// ----------------------------------------------------------------------------

namespace {

void householder_tridiagonalize(Index n, Vector& v, Vector& d, Vector& e, bool accumulate) {
    auto V = [&](Index row, Index col) -> double& { return v[static_cast<std::size_t>(col * n + row)]; };
    d.assign(static_cast<std::size_t>(n), 0.0);
    e.assign(static_cast<std::size_t>(n), 0.0);
    if (n == 0) return;

    for (Index j = 0; j < n; ++j) d[j] = V(n - 1, j);

    for (Index i = n - 1; i > 0; --i) {
        double scale = 0.0;
        double h = 0.0;
        for (Index k = 0; k < i; ++k) scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (Index j = 0; j < i; ++j) {
                d[j] = V(i - 1, j);
                V(i, j) = 0.0;
                V(j, i) = 0.0;
            }
        } else {
            for (Index k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0) g = -g;
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (Index j = 0; j < i; ++j) e[j] = 0.0;

            for (Index j = 0; j < i; ++j) {
                f = d[j];
                V(j, i) = f;
                g = e[j] + V(j, j) * f;
                double* col = &V(0, j);
                for (Index k = j + 1; k <= i - 1; ++k) {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (Index j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (Index j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (Index j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                double* col = &V(0, j);
                for (Index k = j; k <= i - 1; ++k) col[k] -= (f * e[k] + g * d[k]);
                d[j] = V(i - 1, j);
                V(i, j) = 0.0;
            }
        }
        d[i] = h;
    }

    if (accumulate) {
        for (Index i = 0; i < n - 1; ++i) {
            V(n - 1, i) = V(i, i);
            V(i, i) = 1.0;
            const double h = d[i + 1];
            if (h != 0.0) {
                const double* ci1 = &V(0, i + 1);
                for (Index k = 0; k <= i; ++k) d[k] = ci1[k] / h;
                for (Index j = 0; j <= i; ++j) {
                    double* cj = &V(0, j);
                    double g = 0.0;
                    for (Index k = 0; k <= i; ++k) g += ci1[k] * cj[k];
                    for (Index k = 0; k <= i; ++k) cj[k] -= g * d[k];
                }
            }
            for (Index k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
        }
        for (Index j = 0; j < n; ++j) {
            d[j] = V(n - 1, j);
            V(n - 1, j) = 0.0;
        }
        V(n - 1, n - 1) = 1.0;
    } else {
        // The tridiagonal's diagonal sits on the diagonal of the work array.
        for (Index j = 0; j < n; ++j) d[j] = V(j, j);
    }
    // Shift sub-diagonal so e[k] couples k and k+1.
    for (Index k = 0; k + 1 < n; ++k) e[k] = e[k + 1];
    e[n - 1] = 0.0;
}

}  // namespace

void tridiagonal_ql(std::span<double> d, std::span<double> offdiag, double* vectors) {
    const auto n = static_cast<Index>(d.size());
    if (n == 0) return;
    if (offdiag.size() + 1 < d.size()) throw DimensionMismatch("tridiagonal_ql: off-diagonal too short");
    Vector e(static_cast<std::size_t>(n), 0.0);
    for (Index k = 0; k + 1 < n; ++k) e[k] = offdiag[static_cast<std::size_t>(k)];

    constexpr double eps = 0x1p-52;
    double f = 0.0;
    double tst1 = 0.0;
    for (Index l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        Index m = l;
        while (m < n) {
            if (std::abs(e[m]) <= eps * tst1) break;
            ++m;
        }
        if (m > l) {
            int iter = 0;
            do {
                if (++iter > 100) throw NumericalFailure("tridiagonal_ql: no convergence");
                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (Index i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0, c2 = 1.0, c3 = 1.0;
                const double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (Index i = m - 1; i >= l; --i) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if (vectors != nullptr) {
                        double* vi = vectors + i * n;
                        double* vi1 = vectors + (i + 1) * n;
                        for (Index k = 0; k < n; ++k) {
                            const double t = vi1[k];
                            vi1[k] = s * vi[k] + c * t;
                            vi[k] = c * vi[k] - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Selection sort keeps the eigenvector columns aligned.
    for (Index i = 0; i < n - 1; ++i) {
        Index k = i;
        double p = d[i];
        for (Index j = i + 1; j < n; ++j) {
            if (d[j] < p) {
                k = j;
                p = d[j];
            }
        }
        if (k != i) {
            d[k] = d[i];
            d[i] = p;
            if (vectors != nullptr) std::swap_ranges(vectors + i * n, vectors + (i + 1) * n, vectors + k * n);
        }
    }
}

DenseEigen dense_eig(const DenseSymMatrix& a) {
    const Index n = a.size();
    DenseEigen out;
    out.n = n;
    out.vectors.assign(a.data().begin(), a.data().end());
    Vector d, e;
    householder_tridiagonalize(n, out.vectors, d, e, true);
    tridiagonal_ql(d, e, out.vectors.data());
    out.values = std::move(d);
    return out;
}

Vector dense_eigenvalues(const DenseSymMatrix& a) {
    const Index n = a.size();
    Vector work(a.data().begin(), a.data().end());
    Vector d, e;
    householder_tridiagonalize(n, work, d, e, false);
    tridiagonal_ql(d, e, nullptr);
    return d;
}

// ----------------------------------------------------------------------------
// Bunch-Kaufman
// ----------------------------------------------------------------------------

DenseLDLT::DenseLDLT(DenseSymMatrix a) : n_(a.size()), lu_(std::move(a)) {
    const Index n = n_;
    perm_.resize(static_cast<std::size_t>(n));
    std::iota(perm_.begin(), perm_.end(), Index{0});
    block_size_.assign(static_cast<std::size_t>(n), 1);
    auto& A = lu_;
    const double alpha = (1.0 + std::sqrt(17.0)) / 8.0;
    const double scale = std::max(A.norm1(), 1e-300);

    auto swap_sym = [&](Index p, Index q) {
        if (p == q) return;
        for (Index j = 0; j < n; ++j) std::swap(A(p, j), A(q, j));
        for (Index i = 0; i < n; ++i) std::swap(A(i, p), A(i, q));
        std::swap(perm_[static_cast<std::size_t>(p)], perm_[static_cast<std::size_t>(q)]);
    };

    Index k = 0;
    while (k < n) {
        const double absakk = std::abs(A(k, k));
        Index imax = k;
        double colmax = 0.0;
        for (Index i = k + 1; i < n; ++i) {
            if (std::abs(A(i, k)) > colmax) {
                colmax = std::abs(A(i, k));
                imax = i;
            }
        }
        if (std::max(absakk, colmax) <= 1e-300 * scale || std::max(absakk, colmax) == 0.0) {
            throw NumericalFailure("DenseLDLT: matrix is singular at step " + std::to_string(k));
        }
        int bs = 1;
        Index kp = k;
        if (absakk < alpha * colmax) {
            double rowmax = 0.0;
            for (Index j = k; j < n; ++j) {
                if (j != imax) rowmax = std::max(rowmax, std::abs(A(imax, j)));
            }
            if (absakk * rowmax >= alpha * colmax * colmax) {
                kp = k;
            } else if (std::abs(A(imax, imax)) >= alpha * rowmax) {
                kp = imax;
            } else {
                kp = imax;
                bs = 2;
            }
        }
        const Index kk = k + bs - 1;
        swap_sym(kk, kp);

        if (bs == 1) {
            const double dkk = A(k, k);
            for (Index i = k + 1; i < n; ++i) A(i, k) /= dkk;
            for (Index j = k + 1; j < n; ++j) {
                const double ljd = A(j, k) * dkk;
                for (Index i = j; i < n; ++i) A(i, j) -= A(i, k) * ljd;
            }
            for (Index j = k + 1; j < n; ++j) {
                for (Index i = j + 1; i < n; ++i) A(j, i) = A(i, j);
            }
        } else {
            const double a = A(k, k), b = A(k + 1, k), c = A(k + 1, k + 1);
            const double det = a * c - b * b;
            if (std::abs(det) < 1e-300) throw NumericalFailure("DenseLDLT: singular 2x2 pivot");
            for (Index i = k + 2; i < n; ++i) {
                const double s1 = A(i, k), s2 = A(i, k + 1);
                const double l1 = (s1 * c - s2 * b) / det;
                const double l2 = (s2 * a - s1 * b) / det;
                A(k, i) = s1;  // keep the unscaled column in the upper part for the update
                A(k + 1, i) = s2;
                A(i, k) = l1;
                A(i, k + 1) = l2;
            }
            for (Index j = k + 2; j < n; ++j) {
                const double s1 = A(k, j), s2 = A(k + 1, j);
                for (Index i = j; i < n; ++i) A(i, j) -= A(i, k) * s1 + A(i, k + 1) * s2;
            }
            for (Index j = k + 2; j < n; ++j) {
                for (Index i = j + 1; i < n; ++i) A(j, i) = A(i, j);
            }
            block_size_[static_cast<std::size_t>(k)] = 2;
            block_size_[static_cast<std::size_t>(k + 1)] = 0;
        }
        k += bs;
    }
}

Index DenseLDLT::two_by_two_count() const noexcept {
    return static_cast<Index>(std::count(block_size_.begin(), block_size_.end(), 2));
}

Vector DenseLDLT::solve(std::span<const double> b) const {
    require_same_size(b.size(), static_cast<std::size_t>(n_), "DenseLDLT::solve");
    const Index n = n_;
    const auto& A = lu_;
    Vector y(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) y[i] = b[static_cast<std::size_t>(perm_[i])];

    // L y = Pb
    for (Index k = 0; k < n; ++k) {
        const int bs = block_size_[k];
        if (bs == 1) {
            for (Index i = k + 1; i < n; ++i) y[i] -= A(i, k) * y[k];
        } else if (bs == 2) {
            for (Index i = k + 2; i < n; ++i) y[i] -= A(i, k) * y[k] + A(i, k + 1) * y[k + 1];
        }
    }
    // D z = y
    for (Index k = 0; k < n; ++k) {
        const int bs = block_size_[k];
        if (bs == 1) {
            y[k] /= A(k, k);
        } else if (bs == 2) {
            const double a = A(k, k), bb = A(k + 1, k), c = A(k + 1, k + 1);
            const double det = a * c - bb * bb;
            const double y0 = y[k], y1 = y[k + 1];
            y[k] = (c * y0 - bb * y1) / det;
            y[k + 1] = (a * y1 - bb * y0) / det;
        }
    }
    // L^T x = z
    for (Index k = n - 1; k >= 0; --k) {
        const int bs = block_size_[k];
        if (bs == 1) {
            double s = 0.0;
            for (Index i = k + 1; i < n; ++i) s += A(i, k) * y[i];
            y[k] -= s;
        } else if (bs == 2) {
            double s0 = 0.0, s1 = 0.0;
            for (Index i = k + 2; i < n; ++i) {
                s0 += A(i, k) * y[i];
                s1 += A(i, k + 1) * y[i];
            }
            y[k] -= s0;
            y[k + 1] -= s1;
        }
    }
    Vector x(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) x[static_cast<std::size_t>(perm_[i])] = y[i];
    return x;
}

}  // namespace locsolve
