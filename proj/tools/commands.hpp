#pragma once

#include "run_config.hpp"

#include <iosfwd>

namespace locsolve::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitIo = 3;

/// Column order of the bench CSV.
inline constexpr const char* kBenchHeader =
    "m,w,seed,solver,kappa,epsilon,time_s,fill_ratio,outer_iters,inner_avg,status";

struct VerifyReport {
    double max_eig_error = 0.0;  // absolute
    double max_residual = 0.0;   // absolute, recomputed
    double max_angle = 0.0;      // radians
    double norm1 = 0.0;
    bool complete = false;       // n_wanted pairs, all converged
    bool pass = false;
};

/// Compares a solver result with the dense eigendecomposition of `a`.
VerifyReport verify_against_dense(const SparseSymMatrix& a, const EigenResult& res, const RunConfig& cfg);

/// Each command writes its report to `out` and returns the process exit code.
/// Library errors propagate; main() maps them to exit codes.
int cmd_generate(const RunConfig& cfg, std::ostream& out);
int cmd_solve(const RunConfig& cfg, std::ostream& out);
int cmd_bench(const RunConfig& cfg, std::ostream& out);
int cmd_match(const RunConfig& cfg, std::ostream& out);
int cmd_verify(const RunConfig& cfg, std::ostream& out);

}  // namespace locsolve::cli
