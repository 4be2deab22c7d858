#pragma once

#include <locsolve/sparse.hpp>

#include <array>
#include <cstdint>

namespace locsolve {

/**
 * SplitMix64 as a counter-based stream: draw k (0-based) is
 * mix(seed + (k + 1) * 0x9E3779B97F4A7C15) with the finaliser
 *   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
 *   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
 *   z =  z ^ (z >> 31)
 * uniform() maps the top 53 bits to [0, 1).
 */
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

enum class Boundary { Periodic, HardWall };
enum class Disorder { Diagonal, OffDiagonal };

struct AndersonConfig {
    Index m = 4;
    /// Width of the box distribution of the diagonal disorder.
    double w = 16.5;
    Boundary boundary = Boundary::Periodic;
    Disorder disorder = Disorder::Diagonal;
    /// Constant diagonal of the off-diagonal disorder model.
    double shift = 1.28;
    std::uint64_t seed = 1;
};

/// Throws InvalidInput with a readable reason.
void validate(const AndersonConfig& cfg);

/// Linear index of the 1-based site (i, j, k): (k-1) m^2 + (j-1) m + (i-1).
Index site_index(Index i, Index j, Index k, Index m);
/// Inverse of site_index, returns {i, j, k} (1-based).
std::array<Index, 3> site_coords(Index index, Index m);

/**
 * Tight-binding Hamiltonian on the m x m x m lattice.
 *
 * Diagonal disorder: unit hopping between the six nearest neighbours and
 * on-site energies uniform on [-w/2, w/2], drawn in ascending site order.
 * Off-diagonal disorder: constant diagonal `shift` and hoppings uniform on
 * [-1/2, 1/2], drawn in ascending (row, col) order of the lower triangle;
 * `w` is unused. Hard-wall boundaries drop the wrap-around bonds.
 */
SparseSymMatrix build_anderson(const AndersonConfig& cfg);

/// Normalised probabilities |x_j|^2 / ||x||^2. Throws InvalidInput for the zero vector.
Vector wavefunction_probabilities(std::span<const double> x);

}  // namespace locsolve
