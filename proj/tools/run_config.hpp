#pragma once

#include <locsolve/anderson.hpp>
#include <locsolve/eigensolvers.hpp>
#include <locsolve/mlildl.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace locsolve::cli {

enum class SolverKind { Cwi, SiLanczos, Jd };

SolverKind parse_solver(const std::string& name);
std::string solver_name(SolverKind kind);

struct BenchGrid {
    std::vector<Index> m;
    std::vector<double> w;
    /// cwi | silanczos | jd | factor (factorisation only)
    std::vector<std::string> solvers;
    /// Empty: the factor defaults.
    std::vector<double> kappa;
    std::vector<double> epsilon;
};

struct RunConfig {
    /// Matrix Market input; the Anderson generator otherwise.
    std::optional<std::filesystem::path> matrix_path;
    AndersonConfig anderson;

    SolverKind solver = SolverKind::Jd;
    FactorParams factor;
    SolverConfig eig;

    /// Directory for relative output paths; defaults to $LOCSOLVE_OUTPUT_DIR, then ".".
    std::filesystem::path output_dir;
    std::string output_file;
    /// |x|^2 per site, tab separated.
    std::string dump_file;
    bool trace = false;

    bool verify = false;
    double verify_tol = 1e-7;
    double verify_angle_tol = 1e-5;
    Index verify_max_n = 5000;

    /// Realisations: seeds anderson.seed, anderson.seed + 1, ...
    Index repetitions = 1;
    BenchGrid bench;

    /// Throws InvalidInput naming the offending setting.
    void validate() const;
    /// output_dir / p unless p is absolute.
    [[nodiscard]] std::filesystem::path resolve_output(const std::filesystem::path& p) const;
};

/// Every accepted `section.key`.
const std::vector<std::string>& known_keys();

/// Sets one `section.key` from its text form; throws InvalidInput for unknown keys or bad values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/**
 * Flat key=value text. `[section]` lines prefix the following keys with
 * "section."; `#` and `;` start comments; blank lines are ignored.
 */
std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& in);

/// Reads a config file; throws IoError when it cannot be opened.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

/// Defaults, then the environment's output directory, then `settings` in order; validated.
RunConfig make_run_config(const std::vector<std::pair<std::string, std::string>>& settings);

}  // namespace locsolve::cli
