#pragma once

#include <locsolve/sparse.hpp>

#include <filesystem>
#include <iosfwd>

namespace locsolve {

/// Reads a `%%MatrixMarket matrix coordinate real symmetric` file (1-based indices).
SparseSymMatrix read_matrix_market(const std::filesystem::path& path);
SparseSymMatrix read_matrix_market(std::istream& in);

/// Writes the lower triangle using shortest round-trip formatting, so a read reproduces it exactly.
void write_matrix_market(const SparseSymMatrix& a, const std::filesystem::path& path);
void write_matrix_market(const SparseSymMatrix& a, std::ostream& out);

}  // namespace locsolve
