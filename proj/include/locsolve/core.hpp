#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace locsolve {

using Index = std::int64_t;
using Vector = std::vector<double>;

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

/// Base class of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

/// No perfect matching exists for the sparsity pattern.
class StructurallySingular : public Error {
public:
    StructurallySingular(const std::string& what, std::vector<Index> unmatched)
        : Error(what), unmatched_(std::move(unmatched)) {}

    [[nodiscard]] const std::vector<Index>& unmatched() const noexcept { return unmatched_; }

private:
    std::vector<Index> unmatched_;
};

/// The incomplete factorization could not make progress.
class FactorBreakdown : public Error {
public:
    using Error::Error;
};

/// A numerical kernel failed (singular pivot, non-orthonormal basis, ...).
class NumericalFailure : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// ----------------------------------------------------------------------------
// Small dense vector kernels
// ----------------------------------------------------------------------------

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionMismatch(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
    }
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    require_same_size(x.size(), y.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline double norm_inf(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

/// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    require_same_size(x.size(), y.size(), "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scale(double a, std::span<double> x) {
    for (double& v : x) v *= a;
}

}  // namespace locsolve
