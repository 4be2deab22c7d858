#include "commands.hpp"

#include <locsolve/dense.hpp>
#include <locsolve/matching.hpp>
#include <locsolve/matrix_market.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace locsolve::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string boundary_name(Boundary b) { return b == Boundary::Periodic ? "periodic" : "hardwall"; }
std::string disorder_name(Disorder d) { return d == Disorder::Diagonal ? "diagonal" : "offdiagonal"; }

struct LoadedMatrix {
    SparseSymMatrix a;
    std::string description;
    /// Lattice edge when the rows are lattice sites, 0 otherwise.
    Index lattice_m = 0;
};

LoadedMatrix load_matrix(const RunConfig& cfg, std::uint64_t seed) {
    LoadedMatrix lm;
    if (cfg.matrix_path) {
        lm.a = read_matrix_market(*cfg.matrix_path);
        lm.description = "file " + cfg.matrix_path->string();
        const auto m = static_cast<Index>(std::llround(std::cbrt(static_cast<double>(lm.a.size()))));
        if (m * m * m == lm.a.size()) lm.lattice_m = m;
        return lm;
    }
    AndersonConfig ac = cfg.anderson;
    ac.seed = seed;
    lm.a = build_anderson(ac);
    lm.lattice_m = ac.m;
    std::ostringstream d;
    d << "anderson m=" << ac.m << " w=" << ac.w << ' ' << boundary_name(ac.boundary) << ' '
      << disorder_name(ac.disorder) << " seed=" << ac.seed;
    lm.description = d.str();
    return lm;
}

EigenResult run_solver(const SparseSymMatrix& a, SolverKind kind, const SolverConfig& eig, const FactorParams& fp) {
    switch (kind) {
        case SolverKind::Cwi: return cwi_solve(a, eig);
        case SolverKind::SiLanczos: return si_lanczos_ir(a, eig, fp);
        case SolverKind::Jd: {
            auto fill = std::make_shared<double>(0.0);
            auto res = jd_solve(a, multilevel_factory(a, fp, fill), eig);
            res.stats.fill_ratio = *fill;
            return res;
        }
    }
    throw InvalidInput("unknown solver");
}

/// Rough working-set estimate in MB: factor entries (value + index) plus stored vectors.
double memory_mb(const SparseSymMatrix& a, SolverKind kind, const SolverConfig& eig, const EigenResult& res) {
    const auto n = static_cast<double>(a.size());
    double bytes = static_cast<double>(a.nnz()) * 16.0;
    if (kind == SolverKind::Cwi) {
        bytes += 6.0 * n * 8.0 + static_cast<double>(res.stats.outer_iterations) * 16.0;
    } else {
        bytes += res.stats.fill_ratio * static_cast<double>(a.nnz()) * 16.0;
        bytes += static_cast<double>(2 * eig.max_basis + eig.n_wanted) * n * 8.0;
    }
    return bytes / 1e6;
}

void print_result(std::ostream& out, const SparseSymMatrix& a, const EigenResult& res, double elapsed,
                  SolverKind kind, const RunConfig& cfg) {
    out << "  #  lambda                   residual    converged  multiplicity\n";
    for (std::size_t i = 0; i < res.pairs.size(); ++i) {
        const auto& p = res.pairs[i];
        char line[160];
        std::snprintf(line, sizeof line, "%3zu  %+.16e  %.3e  %-9s  %ld\n", i + 1, p.lambda, p.residual,
                      p.converged ? "yes" : "no", static_cast<long>(p.multiplicity_hint));
        out << line;
    }
    const auto& s = res.stats;
    out << "time_s=" << fmt("%.3f", elapsed) << " fill_ratio=" << fmt("%.3f", s.fill_ratio)
        << " outer_iters=" << s.outer_iterations << " inner_iters=" << s.inner_iterations
        << " inner_avg=" << fmt("%.2f", s.inner_average()) << " restarts=" << s.restarts
        << " refactorizations=" << s.refactorizations
        << " memory_mb=" << fmt("%.2f", memory_mb(a, kind, cfg.eig, res)) << '\n';
}

void print_verify(std::ostream& out, const VerifyReport& v, const RunConfig& cfg) {
    out << "verify: max_eig_error=" << fmt("%.3e", v.max_eig_error) << " (tol " << fmt("%.1e", cfg.verify_tol * v.norm1)
        << ") max_residual=" << fmt("%.3e", v.max_residual) << " (tol " << fmt("%.1e", cfg.eig.outer_tol * v.norm1)
        << ") max_angle=" << fmt("%.3e", v.max_angle) << " (tol " << fmt("%.1e", cfg.verify_angle_tol)
        << ") complete=" << (v.complete ? "yes" : "no") << " -> " << (v.pass ? "PASS" : "FAIL") << '\n';
}

void write_dump(const RunConfig& cfg, const LoadedMatrix& lm, const EigenResult& res) {
    const auto path = cfg.resolve_output(cfg.dump_file);
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << "site";
    if (lm.lattice_m > 0) f << "\ti\tj\tk";
    std::vector<Vector> probs;
    for (std::size_t p = 0; p < res.pairs.size(); ++p) {
        f << "\tp" << p + 1;
        probs.push_back(wavefunction_probabilities(res.pairs[p].x));
    }
    f << '\n';
    char buf[40];
    for (Index s = 0; s < lm.a.size(); ++s) {
        f << s;
        if (lm.lattice_m > 0) {
            const auto c = site_coords(s, lm.lattice_m);
            f << '\t' << c[0] << '\t' << c[1] << '\t' << c[2];
        }
        for (const auto& pr : probs) {
            std::snprintf(buf, sizeof buf, "\t%.9e", pr[s]);
            f << buf;
        }
        f << '\n';
    }
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace

VerifyReport verify_against_dense(const SparseSymMatrix& a, const EigenResult& res, const RunConfig& cfg) {
    if (a.size() > cfg.verify_max_n) {
        throw InvalidInput("verification needs a dense eigendecomposition; n = " + std::to_string(a.size()) +
                           " exceeds verify.max_n = " + std::to_string(cfg.verify_max_n));
    }
    VerifyReport v;
    v.norm1 = a.norm1();
    const auto dense = dense_eig(to_dense(a));
    const double target = cfg.eig.target_sigma;
    std::vector<Index> order(static_cast<std::size_t>(dense.n));
    for (Index i = 0; i < dense.n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) {
        const double dx = std::abs(dense.values[x] - target), dy = std::abs(dense.values[y] - target);
        return dx != dy ? dx < dy : dense.values[x] < dense.values[y];
    });

    const double cluster = 1e-8 * v.norm1;
    v.complete = static_cast<Index>(res.pairs.size()) == cfg.eig.n_wanted;
    for (std::size_t i = 0; i < res.pairs.size(); ++i) {
        const auto& p = res.pairs[i];
        if (!p.converged) v.complete = false;
        if (i < order.size()) v.max_eig_error = std::max(v.max_eig_error, std::abs(p.lambda - dense.values[order[i]]));
        Vector r = sym_matvec(a, p.x);
        axpy(-p.lambda, p.x, r);
        v.max_residual = std::max(v.max_residual, norm2(r));
        // Angle between x and the dense eigenspace of the nearest eigenvalue (with its cluster).
        Index best = 0;
        for (Index k = 1; k < dense.n; ++k) {
            if (std::abs(dense.values[k] - p.lambda) < std::abs(dense.values[best] - p.lambda)) best = k;
        }
        Vector rest = p.x;
        for (Index k = 0; k < dense.n; ++k) {
            if (std::abs(dense.values[k] - dense.values[best]) <= cluster) {
                const auto y = dense.vector(k);
                axpy(-dot(y, rest), y, rest);
            }
        }
        const double nx = norm2(p.x);
        const double s = nx > 0.0 ? std::min(1.0, norm2(rest) / nx) : 1.0;
        v.max_angle = std::max(v.max_angle, std::asin(s));
    }
    v.pass = v.complete && v.max_eig_error <= cfg.verify_tol * v.norm1 && v.max_residual <= cfg.eig.outer_tol * v.norm1 &&
             v.max_angle <= cfg.verify_angle_tol;
    return v;
}

int cmd_generate(const RunConfig& cfg, std::ostream& out) {
    if (cfg.matrix_path) throw InvalidInput("generate builds Anderson matrices; drop matrix.path");
    for (Index r = 0; r < cfg.repetitions; ++r) {
        const auto seed = cfg.anderson.seed + static_cast<std::uint64_t>(r);
        const auto lm = load_matrix(cfg, seed);
        std::filesystem::path file = cfg.output_file;
        if (file.empty() || cfg.repetitions > 1) {
            std::ostringstream name;
            name << "anderson_m" << cfg.anderson.m << "_w" << cfg.anderson.w << '_' << boundary_name(cfg.anderson.boundary)
                 << '_' << disorder_name(cfg.anderson.disorder) << "_s" << seed << ".mtx";
            file = file.empty() ? std::filesystem::path(name.str()) : file.parent_path() / name.str();
        }
        const auto path = cfg.resolve_output(file);
        write_matrix_market(lm.a, path);
        out << "wrote " << path.string() << ": n=" << lm.a.size() << " nnz=" << lm.a.nnz() << " seed=" << seed << '\n';
    }
    return kExitOk;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
    const Index reps = cfg.matrix_path ? 1 : cfg.repetitions;
    bool ok = true;
    for (Index r = 0; r < reps; ++r) {
        const auto lm = load_matrix(cfg, cfg.anderson.seed + static_cast<std::uint64_t>(r));
        SolverConfig eig = cfg.eig;
        if (cfg.trace) {
            eig.trace = [&out](const TraceEvent& e) {
                out << "trace solver=" << e.solver << " outer=" << e.outer << " theta=" << fmt("%.12e", e.theta)
                    << " residual=" << fmt("%.3e", e.residual) << " inner=" << e.inner_iterations << '\n';
            };
        }
        out << "matrix: " << lm.description << " n=" << lm.a.size() << " nnz=" << lm.a.nnz()
            << " norm1=" << fmt("%.6g", lm.a.norm1()) << '\n';
        out << "solver: " << solver_name(cfg.solver) << " target=" << cfg.eig.target_sigma
            << " n_wanted=" << cfg.eig.n_wanted << " outer_tol=" << cfg.eig.outer_tol << '\n';
        const auto t0 = Clock::now();
        const auto res = run_solver(lm.a, cfg.solver, eig, cfg.factor);
        const double elapsed = seconds_since(t0);
        print_result(out, lm.a, res, elapsed, cfg.solver, cfg);
        if (!res.stats.all_converged) {
            out << "warning: not all " << cfg.eig.n_wanted << " eigenpairs converged\n";
            ok = false;
        }
        if (!cfg.dump_file.empty()) {
            write_dump(cfg, lm, res);
            out << "dump: " << cfg.resolve_output(cfg.dump_file).string() << '\n';
        }
        if (cfg.verify) {
            const auto v = verify_against_dense(lm.a, res, cfg);
            print_verify(out, v, cfg);
            ok = ok && v.pass;
        }
    }
    return ok ? kExitOk : kExitNumerical;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
    const auto lm = load_matrix(cfg, cfg.anderson.seed);
    if (lm.a.size() > cfg.verify_max_n) {
        throw InvalidInput("n = " + std::to_string(lm.a.size()) + " exceeds verify.max_n = " +
                           std::to_string(cfg.verify_max_n));
    }
    out << "matrix: " << lm.description << " n=" << lm.a.size() << '\n';
    out << "solver: " << solver_name(cfg.solver) << '\n';
    const auto res = run_solver(lm.a, cfg.solver, cfg.eig, cfg.factor);
    const auto v = verify_against_dense(lm.a, res, cfg);
    print_verify(out, v, cfg);
    return v.pass ? kExitOk : kExitNumerical;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
    std::ofstream file;
    std::ostream* csv = &out;
    if (!cfg.output_file.empty()) {
        const auto path = cfg.resolve_output(cfg.output_file);
        file.open(path);
        if (!file) throw IoError("cannot write " + path.string());
        csv = &file;
    }
    *csv << kBenchHeader << '\n';
    const std::vector<double> kappas = cfg.bench.kappa.empty() ? std::vector<double>{cfg.factor.kappa} : cfg.bench.kappa;
    const std::vector<std::optional<double>> epsilons = [&] {
        std::vector<std::optional<double>> e;
        if (cfg.bench.epsilon.empty()) {
            e.push_back(cfg.factor.epsilon);
        } else {
            for (double x : cfg.bench.epsilon) e.emplace_back(x);
        }
        return e;
    }();

    for (Index m : cfg.bench.m) {
        for (double w : cfg.bench.w) {
            for (Index r = 0; r < cfg.repetitions; ++r) {
                RunConfig rc = cfg;
                rc.matrix_path.reset();
                rc.anderson.m = m;
                rc.anderson.w = w;
                const auto seed = cfg.anderson.seed + static_cast<std::uint64_t>(r);
                const auto a = load_matrix(rc, seed).a;
                for (double kappa : kappas) {
                    for (const auto& eps : epsilons) {
                        FactorParams fp = cfg.factor;
                        fp.kappa = kappa;
                        fp.epsilon = eps;
                        const double eps_used = fp.epsilon_for(a.size());
                        for (const auto& solver : cfg.bench.solvers) {
                            double elapsed = 0.0, fill = 0.0, inner_avg = 0.0;
                            Index outer = 0;
                            std::string status = "ok";
                            const auto t0 = Clock::now();
                            try {
                                fp.validate();
                                if (solver == "factor") {
                                    const auto f = factorize(a.shifted(cfg.eig.target_sigma), fp);
                                    fill = f.stats().fill_ratio;
                                } else {
                                    const auto res = run_solver(a, parse_solver(solver), cfg.eig, fp);
                                    fill = res.stats.fill_ratio;
                                    outer = res.stats.outer_iterations;
                                    inner_avg = res.stats.inner_average();
                                    if (!res.stats.all_converged) status = "unconverged";
                                }
                            } catch (const FactorBreakdown&) {
                                status = "breakdown";
                            } catch (const StructurallySingular&) {
                                status = "structurally_singular";
                            } catch (const NumericalFailure&) {
                                status = "numerical_failure";
                            } catch (const InvalidInput&) {
                                status = "invalid_input";
                            }
                            elapsed = seconds_since(t0);
                            char row[320];
                            std::snprintf(row, sizeof row, "%ld,%g,%llu,%s,%g,%g,%.4f,%.4f,%ld,%.2f,%s\n",
                                          static_cast<long>(m), w, static_cast<unsigned long long>(seed), solver.c_str(),
                                          kappa, eps_used, elapsed, fill, static_cast<long>(outer), inner_avg,
                                          status.c_str());
                            *csv << row;
                            csv->flush();
                        }
                    }
                }
            }
        }
    }
    if (file.is_open() && !file) throw IoError("write failed: " + cfg.output_file);
    return kExitOk;
}

int cmd_match(const RunConfig& cfg, std::ostream& out) {
    const auto lm = load_matrix(cfg, cfg.anderson.seed);
    const auto& a = lm.a;
    const auto t0 = Clock::now();
    const auto sm = symmetric_matching(a);
    const double elapsed = seconds_since(t0);
    const auto scaled = scale_sym(a, sm.scaling);

    double max_mod = 0.0, matched_lo = 1e300, matched_hi = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
        const auto row = scaled.row(i);
        for (std::size_t k = 0; k < row.cols.size(); ++k) max_mod = std::max(max_mod, std::abs(row.vals[k]));
        const double mv = std::abs(scaled.at(i, sm.assignment.sigma.forward()[i]));
        matched_lo = std::min(matched_lo, mv);
        matched_hi = std::max(matched_hi, mv);
    }
    const auto cycles = cycles_of_permutation(sm.assignment.sigma);
    std::map<std::size_t, Index> lengths;
    for (const auto& c : cycles) ++lengths[c.size()];
    Index pairs = 0;
    for (const auto& b : sm.blocks) pairs += b.is_pair() ? 1 : 0;

    out << "matrix: " << lm.description << " n=" << a.size() << " nnz=" << a.nnz() << '\n';
    out << "lap_objective=" << fmt("%.12g", sm.assignment.objective) << " time_s=" << fmt("%.3f", elapsed)
        << " scaling_clamped=" << (sm.scaling_clamped ? "yes" : "no") << '\n';
    out << "cycles:";
    for (const auto& [len, count] : lengths) out << ' ' << count << "x" << len;
    out << '\n';
    out << "blocks: 1x1=" << static_cast<Index>(sm.blocks.size()) - pairs << " 2x2=" << pairs << '\n';
    out << "scaled max modulus=" << fmt("%.15g", max_mod) << " matched entries in [" << fmt("%.15g", matched_lo) << ", "
        << fmt("%.15g", matched_hi) << "]\n";
    if (a.size() <= 64) {
        out << "P_S blocks (1-based):";
        for (const auto& b : sm.blocks) {
            out << " {" << b.first + 1;
            if (b.is_pair()) out << ',' << b.second + 1;
            out << '}';
        }
        out << '\n';
    }
    if (!cfg.output_file.empty()) {
        const auto path = cfg.resolve_output(cfg.output_file);
        std::ofstream f(path);
        if (!f) throw IoError("cannot write " + path.string());
        f << "row,p_s_position,scaling\n";
        for (Index i = 0; i < a.size(); ++i) {
            f << i + 1 << ',' << sm.p_s.forward()[i] + 1 << ',' << fmt("%.17g", sm.scaling[i]) << '\n';
        }
        if (!f) throw IoError("write failed: " + path.string());
        out << "wrote " << path.string() << '\n';
    }
    return kExitOk;
}

}  // namespace locsolve::cli
