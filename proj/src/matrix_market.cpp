#include <locsolve/matrix_market.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

namespace locsolve {

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

SparseSymMatrix read_matrix_market(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("MatrixMarket: empty input");

    std::istringstream header(lowercase(line));
    std::string banner, object, format, field, symmetry;
    header >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%matrixmarket" || object != "matrix") throw InvalidInput("MatrixMarket: malformed header: " + line);
    if (format != "coordinate") throw InvalidInput("MatrixMarket: only coordinate format is supported");
    if (field != "real") throw InvalidInput("MatrixMarket: only real matrices are supported");
    if (symmetry != "symmetric") throw InvalidInput("MatrixMarket: matrix is not declared symmetric (" + symmetry + ")");

    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '%') break;
    }
    std::istringstream size_line(line);
    long long rows = -1, cols = -1, nnz = -1;
    if (!(size_line >> rows >> cols >> nnz) || rows < 0 || nnz < 0) {
        throw InvalidInput("MatrixMarket: malformed size line: " + line);
    }
    if (rows != cols) throw InvalidInput("MatrixMarket: symmetric matrix must be square");

    std::vector<Triplet> entries;
    entries.reserve(static_cast<std::size_t>(nnz));
    for (long long k = 0; k < nnz; ++k) {
        if (!std::getline(in, line)) throw InvalidInput("MatrixMarket: fewer entries than declared");
        if (line.empty() || line[0] == '%') {
            --k;
            continue;
        }
        std::istringstream es(line);
        long long i = 0, j = 0;
        std::string token;
        if (!(es >> i >> j >> token)) throw InvalidInput("MatrixMarket: malformed entry: " + line);
        double v = 0.0;
        const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
        if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
            throw InvalidInput("MatrixMarket: bad value: " + token);
        }
        if (i < 1 || j < 1 || i > rows || j > rows) {
            throw InvalidInput("MatrixMarket: index out of range: " + line);
        }
        entries.push_back({static_cast<Index>(i - 1), static_cast<Index>(j - 1), v});
    }
    return SparseSymMatrix::from_triplets(static_cast<Index>(rows), entries);
}

SparseSymMatrix read_matrix_market(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_matrix_market(in);
}

void write_matrix_market(const SparseSymMatrix& a, std::ostream& out) {
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << a.size() << ' ' << a.size() << ' ' << a.nnz() << '\n';
    char buf[64];
    for (Index i = 0; i < a.size(); ++i) {
        const auto r = a.row(i);
        for (std::size_t p = 0; p < r.cols.size(); ++p) {
            const auto res = std::to_chars(buf, buf + sizeof buf, r.vals[p]);
            out << (i + 1) << ' ' << (r.cols[p] + 1) << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf))
                << '\n';
        }
    }
}

void write_matrix_market(const SparseSymMatrix& a, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_matrix_market(a, out);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace locsolve
