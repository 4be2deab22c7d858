#include <locsolve/anderson.hpp>
#include <locsolve/mlildl.hpp>

#include <limits>
#include <sstream>

namespace locsolve {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinDet = 1e-300;

struct Entry {
    Index col;
    double val;
};

PivotKind decide(const PivotMetrics& m, double s11, bool has_second, double nu1, double nu2, double kappa) {
    if (has_second && m.d2 < m.d1 && nu1 <= kappa && nu2 <= kappa) return PivotKind::TwoByTwo;
    if (s11 != 0.0 && nu1 <= kappa) return PivotKind::OneByOne;
    return PivotKind::Postpone;
}

}  // namespace

void FactorParams::validate() const {
    if (!(kappa >= 1.0) || !std::isfinite(kappa)) throw InvalidInput("factor params: kappa must be finite and >= 1");
    if (epsilon && (!(*epsilon >= 0.0) || !std::isfinite(*epsilon))) {
        throw InvalidInput("factor params: epsilon must be finite and >= 0");
    }
    if (!(tau >= 0.0 && tau < 1.0)) throw InvalidInput("factor params: tau must lie in [0, 1)");
    if (!(inverse_safety >= 1.0)) throw InvalidInput("factor params: inverse_safety must be >= 1");
    if (max_levels < 1) throw InvalidInput("factor params: max_levels must be >= 1");
    if (small_block_cutoff < 0) throw InvalidInput("factor params: small_block_cutoff must be >= 0");
}

double FactorParams::epsilon_for(Index n) const {
    return epsilon ? *epsilon : 1.0 / std::sqrt(static_cast<double>(std::max<Index>(n, 1)));
}

// ----------------------------------------------------------------------------
// Inverse-norm estimation and pivot selection
// ----------------------------------------------------------------------------

InvNormEstimator::InvNormEstimator(Index n, int probes)
    : n_(n), probes_(std::max(probes, 1)), p_(static_cast<std::size_t>(n) * static_cast<std::size_t>(std::max(probes, 1)), 0.0) {}

double InvNormEstimator::candidate(Index k) const noexcept {
    double best = 0.0;
    for (int r = 0; r < probes_; ++r) best = std::max(best, std::abs(p_[static_cast<std::size_t>(r * n_ + k)]));
    return 1.0 + best;
}

double InvNormEstimator::append_column(Index k, std::span<const Index> rows, std::span<const double> vals) {
    estimate_ = std::max(estimate_, candidate(k));
    double y0 = 0.0;
    for (int r = 0; r < probes_; ++r) {
        double* p = p_.data() + static_cast<std::ptrdiff_t>(r) * n_;
        const double pk = p[k];
        auto score = [&](double y) {
            double s = std::abs(y);
            for (std::size_t t = 0; t < rows.size(); ++t) s += std::abs(p[rows[t]] + vals[t] * y);
            return s;
        };
        double y;
        if (pk == 0.0) {
            const bool flip = r > 0 && (SplitMix64(static_cast<std::uint64_t>(k) * 0x100000001B3ULL + static_cast<std::uint64_t>(r)).next() & 1U);
            y = flip ? -1.0 : 1.0;
        } else {
            const double greedy = (pk > 0.0 ? -1.0 : 1.0) - pk;
            const double other = (pk > 0.0 ? 1.0 : -1.0) - pk;
            y = score(other) > score(greedy) ? other : greedy;
        }
        for (std::size_t t = 0; t < rows.size(); ++t) p[rows[t]] += vals[t] * y;
        if (r == 0) y0 = y;
    }
    return y0;
}

double estimate_inverse_norm(Index n, std::span<const Index> col_starts, std::span<const Index> rows,
                             std::span<const double> vals) {
    InvNormEstimator est(n);
    for (Index k = 0; k < n; ++k) {
        const auto b = static_cast<std::size_t>(col_starts[k]);
        const auto e = static_cast<std::size_t>(col_starts[k + 1]);
        est.append_column(k, rows.subspan(b, e - b), vals.subspan(b, e - b));
    }
    return est.estimate();
}

PivotMetrics pivot_metrics(double s11, double s12, double s22, std::span<const double> rest1,
                           std::span<const double> rest2) {
    require_same_size(rest1.size(), rest2.size(), "pivot_metrics");
    PivotMetrics m;
    if (s11 == 0.0) {
        m.d1 = kInf;
    } else {
        double s = std::abs(s12);
        for (double v : rest1) s += std::abs(v);
        m.d1 = s / std::abs(s11);
    }
    const double det = s11 * s22 - s12 * s12;
    if (std::abs(det) < kMinDet) {
        m.d2 = kInf;
    } else {
        const double i11 = s22 / det, i12 = -s12 / det, i22 = s11 / det;
        double s = 0.0;
        for (std::size_t j = 0; j < rest1.size(); ++j) {
            s += std::abs(rest1[j] * i11 + rest2[j] * i12) + std::abs(rest1[j] * i12 + rest2[j] * i22);
        }
        m.d2 = s;
    }
    return m;
}

PivotKind choose_pivot(const DenseSymMatrix& s, double nu1, double nu2, double kappa) {
    const Index n = s.size();
    if (n == 0) throw InvalidInput("choose_pivot: empty Schur complement");
    if (n == 1) return decide({s(0, 0) == 0.0 ? kInf : 0.0, kInf}, s(0, 0), false, nu1, nu2, kappa);
    Vector rest1, rest2;
    for (Index j = 2; j < n; ++j) {
        rest1.push_back(s(j, 0));
        rest2.push_back(s(j, 1));
    }
    const auto m = pivot_metrics(s(0, 0), s(1, 0), s(1, 1), rest1, rest2);
    return decide(m, s(0, 0), true, nu1, nu2, kappa);
}

// ----------------------------------------------------------------------------
// Level solves
// ----------------------------------------------------------------------------

void LevelFactor::solve_b(std::span<double> x) const {
    const Index nb = accepted;
    for (Index k = 0; k < nb; ++k) {
        const double xk = x[k];
        if (xk == 0.0) continue;
        for (Index p = l_col_starts[k]; p < l_col_starts[k + 1]; ++p) x[l_rows[p]] -= l_vals[p] * xk;
    }
    for (const auto& blk : d_blocks) {
        const Index s = blk.start;
        if (blk.size == 1) {
            x[s] /= blk.a;
        } else {
            const double det = blk.a * blk.c - blk.b * blk.b;
            const double x0 = x[s], x1 = x[s + 1];
            x[s] = (blk.c * x0 - blk.b * x1) / det;
            x[s + 1] = (blk.a * x1 - blk.b * x0) / det;
        }
    }
    for (Index k = nb - 1; k >= 0; --k) {
        double s = 0.0;
        for (Index p = l_col_starts[k]; p < l_col_starts[k + 1]; ++p) s += l_vals[p] * x[l_rows[p]];
        x[k] -= s;
    }
}

// ----------------------------------------------------------------------------
// Preprocessing
// ----------------------------------------------------------------------------

PreprocessResult preprocess_level(const SparseSymMatrix& a, const FactorParams& params,
                                  const std::optional<Permutation>& ordering) {
    const Index n = a.size();
    PreprocessResult r;
    if (params.enable_matching) {
        auto m = symmetric_matching(a);
        r.scaling = std::move(m.scaling);
        r.blocks = std::move(m.blocks);
        r.used_matching = true;
    } else {
        Vector rmax(static_cast<std::size_t>(n), 0.0);
        for (Index i = 0; i < n; ++i) {
            const auto row = a.row(i);
            for (std::size_t p = 0; p < row.cols.size(); ++p) {
                const double v = std::abs(row.vals[p]);
                rmax[i] = std::max(rmax[i], v);
                rmax[row.cols[p]] = std::max(rmax[row.cols[p]], v);
            }
        }
        Vector d(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) d[i] = rmax[i] > 0.0 ? 1.0 / std::sqrt(rmax[i]) : 1.0;
        r.scaling = DiagScaling(std::move(d));
        r.blocks.reserve(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) r.blocks.push_back({i, -1});
    }

    const auto cg = compress_graph(a, r.blocks);
    Permutation comp;
    if (ordering) {
        require_same_size(static_cast<std::size_t>(ordering->size()), static_cast<std::size_t>(n), "preprocess_level ordering");
        std::vector<Index> super(static_cast<std::size_t>(n));
        for (Index s = 0; s < static_cast<Index>(cg.members.size()); ++s) {
            for (Index i : cg.members[s]) super[i] = s;
        }
        std::vector<char> placed(cg.members.size(), 0);
        std::vector<Index> order;
        for (Index i : ordering->inverse()) {
            if (!placed[super[i]]) {
                placed[super[i]] = 1;
                order.push_back(super[i]);
            }
        }
        comp = Permutation::from_ordering(std::move(order));
    } else {
        comp = min_degree_order(cg.graph);
    }
    r.perm = expand_ordering(comp, cg.members);
    r.matrix = permute_sym(scale_sym(a, r.scaling), r.perm);
    return r;
}

// ----------------------------------------------------------------------------
// One level of inverse-based incomplete LDL^T
// ----------------------------------------------------------------------------

LevelResult factor_level(const SparseSymMatrix& atilde, double kappa, double drop) {
    const Index n = atilde.size();
    std::vector<std::vector<Entry>> rows(static_cast<std::size_t>(n));
    Vector diag(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const auto r = atilde.row(i);
        for (std::size_t p = 0; p + 1 < r.cols.size(); ++p) {
            rows[i].push_back({r.cols[p], r.vals[p]});
            rows[r.cols[p]].push_back({i, r.vals[p]});
        }
        diag[i] = atilde.diag(i);
    }

    enum : char { kPending = 0, kAccepted = 1, kPostponed = 2 };
    std::vector<char> status(static_cast<std::size_t>(n), kPending);
    InvNormEstimator est(n);
    std::vector<Index> acc, post;
    std::vector<std::vector<Entry>> lcols(static_cast<std::size_t>(n));
    std::vector<PivotBlock> blocks;

    Vector w1(static_cast<std::size_t>(n), 0.0), w2(static_cast<std::size_t>(n), 0.0);
    std::vector<Index> mark(static_cast<std::size_t>(n), -1), pos_in_row(static_cast<std::size_t>(n), 0);
    Index stamp = 0;
    std::vector<Index> touched;
    Vector rest1, rest2;

    // Applies s_ij -= coupling(i, j) for all i, j in `cols`, dropping small off-diagonal results.
    // coupling must be symmetric bit for bit.
    auto schur_update = [&](const std::vector<Index>& cols, auto&& coupling) {
        for (std::size_t a = 0; a < cols.size(); ++a) {
            const Index i = cols[a];
            auto& ri = rows[i];
            ++stamp;
            for (std::size_t p = 0; p < ri.size(); ++p) {
                mark[ri[p].col] = stamp;
                pos_in_row[ri[p].col] = static_cast<Index>(p);
            }
            bool removed = false;
            for (std::size_t b = 0; b < cols.size(); ++b) {
                const double delta = coupling(a, b);
                if (b == a) {
                    diag[i] -= delta;
                    continue;
                }
                const Index j = cols[b];
                if (mark[j] == stamp) {
                    auto& e = ri[static_cast<std::size_t>(pos_in_row[j])];
                    e.val -= delta;
                    if (std::abs(e.val) < drop) {
                        e.col = -1;
                        removed = true;
                    }
                } else if (std::abs(delta) >= drop && delta != 0.0) {
                    ri.push_back({j, -delta});
                }
            }
            if (removed) std::erase_if(ri, [](const Entry& e) { return e.col < 0; });
        }
    };
    auto detach = [&](Index c) {
        for (const auto& e : rows[c]) {
            auto& rj = rows[e.col];
            for (std::size_t p = 0; p < rj.size(); ++p) {
                if (rj[p].col == c) {
                    rj[p] = rj.back();
                    rj.pop_back();
                    break;
                }
            }
        }
    };

    Index cursor = 0;
    auto next_pending = [&](Index from) {
        while (from < n && status[from] != kPending) ++from;
        return from;
    };

    std::vector<Index> kept_rows;
    Vector kept1, kept2;
    std::vector<Index> krows1, krows2;
    Vector kvals1, kvals2;

    while (true) {
        const Index c = next_pending(cursor);
        if (c == n) break;
        cursor = c;
        const Index c2 = next_pending(c + 1);
        const bool has2 = c2 < n;

        ++stamp;
        touched.clear();
        double s12 = 0.0;
        for (const auto& e : rows[c]) {
            if (e.col == c2) {
                s12 = e.val;
                continue;
            }
            mark[e.col] = stamp;
            touched.push_back(e.col);
            w1[e.col] = e.val;
            w2[e.col] = 0.0;
        }
        if (has2) {
            for (const auto& e : rows[c2]) {
                if (e.col == c) continue;
                if (mark[e.col] != stamp) {
                    mark[e.col] = stamp;
                    touched.push_back(e.col);
                    w1[e.col] = 0.0;
                }
                w2[e.col] = e.val;
            }
        }
        const double s11 = diag[c];
        const double s22 = has2 ? diag[c2] : 0.0;
        rest1.clear();
        rest2.clear();
        for (Index j : touched) {
            rest1.push_back(w1[j]);
            rest2.push_back(has2 ? w2[j] : 0.0);
        }
        PivotMetrics m = pivot_metrics(s11, s12, s22, rest1, rest2);
        if (!has2) m.d2 = kInf;
        const double nu1 = est.candidate(c);
        const double nu2 = has2 ? est.candidate(c2) : kInf;
        const PivotKind kind = decide(m, s11, has2, nu1, nu2, kappa);

        if (kind == PivotKind::Postpone) {
            status[c] = kPostponed;
            post.push_back(c);
            cursor = c + 1;
            continue;
        }

        if (kind == PivotKind::OneByOne) {
            krows1.clear();
            kvals1.clear();
            for (const auto& e : rows[c]) {
                const double l = e.val / s11;
                if (l != 0.0 && std::abs(l) >= drop) {
                    krows1.push_back(e.col);
                    kvals1.push_back(l);
                }
            }
            est.append_column(c, krows1, kvals1);
            schur_update(krows1, [&](std::size_t a, std::size_t b) { return s11 * (kvals1[a] * kvals1[b]); });
            detach(c);
            rows[c].clear();
            status[c] = kAccepted;
            acc.push_back(c);
            auto& col = lcols[c];
            for (std::size_t t = 0; t < krows1.size(); ++t) col.push_back({krows1[t], kvals1[t]});
            blocks.push_back({c, 1, s11, 0.0, 0.0});
            continue;
        }

        // 2x2 pivot on (c, c2)
        const double det = s11 * s22 - s12 * s12;
        const double i11 = s22 / det, i12 = -s12 / det, i22 = s11 / det;
        kept_rows.clear();
        kept1.clear();
        kept2.clear();
        krows1.clear();
        kvals1.clear();
        krows2.clear();
        kvals2.clear();
        for (Index j : touched) {
            double l1 = w1[j] * i11 + w2[j] * i12;
            double l2 = w1[j] * i12 + w2[j] * i22;
            if (std::abs(l1) < drop) l1 = 0.0;
            if (std::abs(l2) < drop) l2 = 0.0;
            if (l1 == 0.0 && l2 == 0.0) continue;
            kept_rows.push_back(j);
            kept1.push_back(l1);
            kept2.push_back(l2);
            if (l1 != 0.0) {
                krows1.push_back(j);
                kvals1.push_back(l1);
            }
            if (l2 != 0.0) {
                krows2.push_back(j);
                kvals2.push_back(l2);
            }
        }
        est.append_column(c, krows1, kvals1);
        est.append_column(c2, krows2, kvals2);
        schur_update(kept_rows, [&](std::size_t a, std::size_t b) {
            return s11 * (kept1[a] * kept1[b]) + s12 * (kept1[a] * kept2[b] + kept2[a] * kept1[b]) +
                   s22 * (kept2[a] * kept2[b]);
        });
        detach(c);
        detach(c2);
        rows[c].clear();
        rows[c2].clear();
        status[c] = kAccepted;
        status[c2] = kAccepted;
        acc.push_back(c);
        acc.push_back(c2);
        for (std::size_t t = 0; t < krows1.size(); ++t) lcols[c].push_back({krows1[t], kvals1[t]});
        for (std::size_t t = 0; t < krows2.size(); ++t) lcols[c2].push_back({krows2[t], kvals2[t]});
        blocks.push_back({c, 2, s11, s12, s22});
    }

    // Assemble the level in the order Q = accepted ++ postponed.
    const auto nb = static_cast<Index>(acc.size());
    const auto ns = static_cast<Index>(post.size());
    std::vector<Index> pos(static_cast<std::size_t>(n));
    for (Index k = 0; k < nb; ++k) pos[acc[k]] = k;
    for (Index k = 0; k < ns; ++k) pos[post[k]] = nb + k;

    LevelResult out;
    LevelFactor& lv = out.level;
    lv.perm = Permutation::from_forward(pos);
    lv.accepted = nb;
    lv.schur_dim = ns;
    lv.l_col_starts.assign(1, 0);
    for (Index k = 0; k < nb; ++k) {
        for (const auto& e : lcols[acc[k]]) {
            if (status[e.col] == kAccepted) {
                lv.l_rows.push_back(pos[e.col]);
                lv.l_vals.push_back(e.val);
            }
        }
        lv.l_col_starts.push_back(static_cast<Index>(lv.l_rows.size()));
    }
    for (auto blk : blocks) {
        blk.start = pos[blk.start];
        lv.d_blocks.push_back(blk);
    }

    std::vector<std::vector<Entry>> frows(static_cast<std::size_t>(ns));
    for (Index i = 0; i < n; ++i) {
        const auto r = atilde.row(i);
        for (std::size_t p = 0; p + 1 < r.cols.size(); ++p) {
            const Index j = r.cols[p];
            if (status[i] == kPostponed && status[j] == kAccepted) frows[pos[i] - nb].push_back({pos[j], r.vals[p]});
            if (status[j] == kPostponed && status[i] == kAccepted) frows[pos[j] - nb].push_back({pos[i], r.vals[p]});
        }
    }
    lv.f_row_starts.assign(1, 0);
    for (auto& fr : frows) {
        std::sort(fr.begin(), fr.end(), [](const Entry& x, const Entry& y) { return x.col < y.col; });
        for (const auto& e : fr) {
            lv.f_cols.push_back(e.col);
            lv.f_vals.push_back(e.val);
        }
        lv.f_row_starts.push_back(static_cast<Index>(lv.f_cols.size()));
    }

    std::vector<Triplet> st;
    for (Index k = 0; k < ns; ++k) {
        const Index i = post[k];
        st.push_back({k, k, diag[i]});
        for (const auto& e : rows[i]) {
            const Index j = pos[e.col] - nb;
            if (j < k) st.push_back({k, j, e.val});
        }
    }
    out.schur = SparseSymMatrix::from_triplets(ns, st);

    lv.stats.dim = n;
    lv.stats.accepted = nb;
    lv.stats.schur_dim = ns;
    lv.stats.two_by_two = static_cast<Index>(std::count_if(blocks.begin(), blocks.end(), [](const PivotBlock& b) { return b.size == 2; }));
    lv.stats.l_nnz = static_cast<Index>(lv.l_vals.size());
    lv.stats.inv_norm_estimate = est.estimate();
    return out;
}

double inverse_factor_norm(const LevelFactor& level) {
    const Index n = level.accepted;
    if (n == 0) return 1.0;
    const auto& cs = level.l_col_starts;
    auto solve_l = [&](Vector& z) {
        for (Index k = 0; k < n; ++k) {
            for (Index p = cs[k]; p < cs[k + 1]; ++p) z[level.l_rows[p]] -= level.l_vals[p] * z[k];
        }
    };
    auto solve_lt = [&](Vector& y) {
        for (Index k = n - 1; k >= 0; --k) {
            double s = 0.0;
            for (Index p = cs[k]; p < cs[k + 1]; ++p) s += level.l_vals[p] * y[level.l_rows[p]];
            y[k] -= s;
        }
    };
    auto norm1 = [](const Vector& v) {
        double s = 0.0;
        for (double x : v) s += std::abs(x);
        return s;
    };
    // ||L^{-1}||_inf = ||B||_1 with B = L^{-T}; power-like iteration on the 1-norm.
    Vector x(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
    double est = 0.0;
    for (int iter = 0; iter < 5; ++iter) {
        Vector y = x;
        solve_lt(y);
        const double e = norm1(y);
        if (iter > 0 && e <= est) break;
        est = e;
        Vector z(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) z[i] = y[i] >= 0.0 ? 1.0 : -1.0;
        solve_l(z);
        Index j = 0;
        for (Index i = 1; i < n; ++i) {
            if (std::abs(z[i]) > std::abs(z[j])) j = i;
        }
        if (iter > 0 && std::abs(z[j]) <= dot(z, x)) break;
        std::fill(x.begin(), x.end(), 0.0);
        x[j] = 1.0;
    }
    Vector alt(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        alt[i] = (i % 2 == 0 ? 1.0 : -1.0) * (1.0 + (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0));
    }
    solve_lt(alt);
    return std::max(est, 2.0 * norm1(alt) / (3.0 * static_cast<double>(n)));
}

double exact_inverse_factor_norm(const LevelFactor& level) {
    const Index n = level.accepted;
    const auto& cs = level.l_col_starts;
    double best = 1.0;
    Vector y(static_cast<std::size_t>(n), 0.0);
    for (Index i = 0; i < n; ++i) {
        // Row i of L^{-1} solves L^T y = e_i and is supported on 0..i.
        std::fill(y.begin(), y.begin() + i + 1, 0.0);
        y[i] = 1.0;
        double s = 1.0;
        for (Index k = i - 1; k >= 0; --k) {
            double t = 0.0;
            for (Index p = cs[k]; p < cs[k + 1]; ++p) {
                if (level.l_rows[p] <= i) t += level.l_vals[p] * y[level.l_rows[p]];
            }
            y[k] = -t;
            s += std::abs(t);
        }
        best = std::max(best, s);
    }
    return best;
}

void aggressive_drop(LevelFactor& level, double tau) {
    const Index nb = level.accepted;
    Vector z(static_cast<std::size_t>(nb), 0.0), nu(static_cast<std::size_t>(nb), 1.0);
    for (Index i = nb - 1; i >= 0; --i) {
        double q = 0.0;
        for (Index p = level.l_col_starts[i]; p < level.l_col_starts[i + 1]; ++p) q += level.l_vals[p] * z[level.l_rows[p]];
        z[i] = (q > 0.0 ? -1.0 : 1.0) - q;
        nu[i] = std::abs(z[i]);
    }
    std::vector<Index> starts{0}, rows;
    Vector vals;
    Index dropped = 0;
    double mass = 0.0;
    for (Index j = 0; j < nb; ++j) {
        const Index b = level.l_col_starts[j], e = level.l_col_starts[j + 1];
        const auto count = static_cast<double>(e - b);
        for (Index p = b; p < e; ++p) {
            const Index i = level.l_rows[p];
            const double l = level.l_vals[p];
            if (std::abs(l) <= tau / (nu[i] * count)) {
                ++dropped;
                mass += std::abs(l);
            } else {
                rows.push_back(i);
                vals.push_back(l);
            }
        }
        starts.push_back(static_cast<Index>(rows.size()));
    }
    level.l_col_starts = std::move(starts);
    level.l_rows = std::move(rows);
    level.l_vals = std::move(vals);
    level.stats.l_nnz = static_cast<Index>(level.l_vals.size());
    level.stats.aggressive_dropped += dropped;
    level.stats.aggressive_dropped_mass += mass;
}

// ----------------------------------------------------------------------------
// Multilevel driver
// ----------------------------------------------------------------------------

MultilevelFactor factorize(const SparseSymMatrix& a, const FactorParams& params) {
    params.validate();
    const Index n = a.size();
    if (n < 1) throw InvalidInput("factorize: empty matrix");
    const double drop = params.epsilon_for(n) / params.kappa;

    MultilevelFactor f;
    f.n_ = n;
    SparseSymMatrix current = a;
    int weak_levels = 0;
    for (Index level = 0;; ++level) {
        PreprocessResult pre;
        const auto ordering = level == 0 ? params.initial_ordering : std::nullopt;
        try {
            pre = preprocess_level(current, params, ordering);
        } catch (const StructurallySingular&) {
            if (level == 0) throw;
            FactorParams plain = params;
            plain.enable_matching = false;
            pre = preprocess_level(current, plain);
        } catch (const InvalidInput&) {
            if (level == 0 || !params.enable_matching) throw;
            FactorParams plain = params;
            plain.enable_matching = false;
            pre = preprocess_level(current, plain);
        }

        double kappa_used = params.kappa;
        LevelResult lr;
        for (int attempt = 0;; ++attempt) {
            lr = factor_level(pre.matrix, kappa_used, drop);
            const auto& trial = lr.level;
            const double work = static_cast<double>(trial.accepted) * static_cast<double>(trial.l_vals.size());
            const double check = work <= params.exact_check_budget ? exact_inverse_factor_norm(trial)
                                                                   : inverse_factor_norm(trial);
            lr.level.stats.inv_norm_check = check;
            lr.level.stats.kappa_used = kappa_used;
            if (check <= params.inverse_safety * params.kappa || attempt == 3 || kappa_used <= 1.0) break;
            kappa_used = std::max(1.0, 0.5 * kappa_used);
        }
        LevelFactor& lv = lr.level;
        lv.scaling = std::move(pre.scaling);
        lv.perm = pre.perm.then(lv.perm);
        lv.stats.used_matching = pre.used_matching;
        if (params.enable_aggressive_drop) aggressive_drop(lv, params.tau);

        if (static_cast<double>(lv.accepted) < 0.01 * static_cast<double>(lv.dim())) {
            if (++weak_levels >= 2) {
                throw FactorBreakdown("factorize: levels " + std::to_string(level) + " and " + std::to_string(level + 1) +
                                      " accepted fewer than 1% of their pivots (dimension " +
                                      std::to_string(lv.dim()) + "); try a larger kappa");
            }
        } else {
            weak_levels = 0;
        }
        const Index schur_dim = lv.schur_dim;
        f.levels_.push_back(std::move(lv));
        if (schur_dim == 0) break;
        if (schur_dim <= params.small_block_cutoff || level + 1 >= params.max_levels) {
            if (schur_dim > kDenseCap) {
                throw FactorBreakdown("factorize: final Schur complement of dimension " + std::to_string(schur_dim) +
                                      " is too large for the dense solver; increase max_levels or kappa");
            }
            f.final_ = DenseLDLT(to_dense(lr.schur));
            break;
        }
        current = std::move(lr.schur);
    }

    auto& st = f.stats_;
    st.nnz_a = a.nnz();
    st.final_dim = f.final_.size();
    Index nnz = st.final_dim * (st.final_dim + 1) / 2;
    for (const auto& lv : f.levels_) {
        nnz += static_cast<Index>(lv.l_vals.size());
        for (const auto& blk : lv.d_blocks) nnz += blk.size == 1 ? 1 : 3;
        st.levels.push_back(lv.stats);
    }
    st.nnz_factor = nnz;
    st.fill_ratio = static_cast<double>(nnz) / static_cast<double>(st.nnz_a);
    return f;
}

Vector MultilevelFactor::apply(std::span<const double> r) const {
    Vector z(r.size());
    apply(r, z);
    return z;
}

void MultilevelFactor::apply(std::span<const double> r, std::span<double> z) const {
    require_same_size(r.size(), static_cast<std::size_t>(n_), "MultilevelFactor::apply");
    require_same_size(z.size(), static_cast<std::size_t>(n_), "MultilevelFactor::apply");
    std::copy(r.begin(), r.end(), z.begin());
    if (levels_.empty()) {
        auto x = final_.solve(z);
        std::copy(x.begin(), x.end(), z.begin());
        return;
    }
    apply_level(0, z);
}

void MultilevelFactor::apply_level(std::size_t k, std::span<double> x) const {
    const LevelFactor& lv = levels_[k];
    const Index n = lv.dim();
    const Index nb = lv.accepted;
    const Index ns = lv.schur_dim;
    const auto& fwd = lv.perm.forward();

    Vector xh(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) xh[fwd[i]] = lv.scaling[i] * x[i];

    std::span<double> x1(xh.data(), static_cast<std::size_t>(nb));
    std::span<double> x2(xh.data() + nb, static_cast<std::size_t>(ns));
    if (ns > 0) {
        Vector w(x1.begin(), x1.end());
        lv.solve_b(w);
        for (Index i = 0; i < ns; ++i) {
            double s = 0.0;
            for (Index p = lv.f_row_starts[i]; p < lv.f_row_starts[i + 1]; ++p) s += lv.f_vals[p] * w[lv.f_cols[p]];
            x2[i] -= s;
        }
        if (k + 1 < levels_.size()) {
            apply_level(k + 1, x2);
        } else {
            const auto y = final_.solve(x2);
            std::copy(y.begin(), y.end(), x2.begin());
        }
        for (Index i = 0; i < ns; ++i) {
            const double yi = x2[i];
            if (yi == 0.0) continue;
            for (Index p = lv.f_row_starts[i]; p < lv.f_row_starts[i + 1]; ++p) x1[lv.f_cols[p]] -= lv.f_vals[p] * yi;
        }
    }
    lv.solve_b(x1);
    for (Index i = 0; i < n; ++i) x[i] = lv.scaling[i] * xh[fwd[i]];
}

std::string MultilevelFactor::report() const {
    std::ostringstream os;
    os << "multilevel factor: n=" << n_ << " levels=" << levels_.size() << " final_dense=" << stats_.final_dim
       << " fill_ratio=" << stats_.fill_ratio << '\n';
    for (std::size_t k = 0; k < stats_.levels.size(); ++k) {
        const auto& s = stats_.levels[k];
        os << "  level " << k << ": dim=" << s.dim << " accepted=" << s.accepted << " postponed=" << s.schur_dim
           << " 2x2=" << s.two_by_two << " nnz(L)=" << s.l_nnz << " inv_norm_est=" << s.inv_norm_estimate
           << " inv_norm_check=" << s.inv_norm_check << " kappa_used=" << s.kappa_used
           << " matching=" << (s.used_matching ? "yes" : "no") << " aggressive_dropped=" << s.aggressive_dropped << '\n';
    }
    return os.str();
}

}  // namespace locsolve
