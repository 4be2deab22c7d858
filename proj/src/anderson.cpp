#include <locsolve/anderson.hpp>

#include <limits>
#include <string>

namespace locsolve {

void validate(const AndersonConfig& cfg) {
    if (cfg.m < 1) throw InvalidInput("anderson: m must be positive");
    if (cfg.boundary == Boundary::Periodic && cfg.m < 3) {
        throw InvalidInput("anderson: periodic boundaries need m >= 3 (m = " + std::to_string(cfg.m) +
                           " would create duplicate neighbour pairs)");
    }
    if (!(cfg.w >= 0.0) || !std::isfinite(cfg.w)) throw InvalidInput("anderson: w must be finite and >= 0");
    if (!std::isfinite(cfg.shift)) throw InvalidInput("anderson: shift must be finite");
    if (cfg.m > 2'000'000) throw InvalidInput("anderson: m too large for the index type");
}

Index site_index(Index i, Index j, Index k, Index m) {
    if (i < 1 || j < 1 || k < 1 || i > m || j > m || k > m) {
        throw InvalidInput("site_index: coordinate out of range");
    }
    return ((k - 1) * m + (j - 1)) * m + (i - 1);
}

std::array<Index, 3> site_coords(Index index, Index m) {
    if (index < 0 || index >= m * m * m) throw InvalidInput("site_coords: index out of range");
    return {index % m + 1, (index / m) % m + 1, index / (m * m) + 1};
}

SparseSymMatrix build_anderson(const AndersonConfig& cfg) {
    validate(cfg);
    const Index m = cfg.m;
    const Index n = m * m * m;
    const bool periodic = cfg.boundary == Boundary::Periodic;
    const bool offdiag = cfg.disorder == Disorder::OffDiagonal;

    std::vector<Index> starts{0};
    std::vector<Index> cols;
    std::vector<double> vals;
    starts.reserve(static_cast<std::size_t>(n + 1));
    cols.reserve(static_cast<std::size_t>(4 * n));
    vals.reserve(static_cast<std::size_t>(4 * n));

    SplitMix64 rng(cfg.seed);
    std::vector<Index> lower;
    for (Index s = 0; s < n; ++s) {
        const auto [i, j, k] = site_coords(s, m);
        lower.clear();
        auto neighbour = [&](Index ii, Index jj, Index kk) {
            auto wrap = [&](Index c) { return c < 1 ? c + m : (c > m ? c - m : c); };
            if (!periodic && (ii < 1 || jj < 1 || kk < 1 || ii > m || jj > m || kk > m)) return;
            const Index t = site_index(wrap(ii), wrap(jj), wrap(kk), m);
            if (t < s) lower.push_back(t);
        };
        neighbour(i - 1, j, k);
        neighbour(i + 1, j, k);
        neighbour(i, j - 1, k);
        neighbour(i, j + 1, k);
        neighbour(i, j, k - 1);
        neighbour(i, j, k + 1);
        std::sort(lower.begin(), lower.end());
        for (Index t : lower) {
            cols.push_back(t);
            vals.push_back(offdiag ? rng.uniform() - 0.5 : 1.0);
        }
        cols.push_back(s);
        vals.push_back(offdiag ? cfg.shift : 0.0);
        starts.push_back(static_cast<Index>(cols.size()));
    }
    if (!offdiag) {
        for (Index s = 0; s < n; ++s) vals[static_cast<std::size_t>(starts[s + 1] - 1)] = cfg.w * (rng.uniform() - 0.5);
    }
    return SparseSymMatrix(n, std::move(starts), std::move(cols), std::move(vals));
}

Vector wavefunction_probabilities(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    if (!(s > 0.0)) throw InvalidInput("wavefunction_probabilities: zero vector");
    Vector p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = x[i] * x[i] / s;
    return p;
}

}  // namespace locsolve
