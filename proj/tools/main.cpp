#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

using namespace locsolve;
using namespace locsolve::cli;

namespace {

/// Shortcut flags; each sets one config key.
struct Shortcut {
    const char* flag;
    const char* key;
    const char* help;
};

constexpr Shortcut kShortcuts[] = {
    {"--matrix", "matrix.path", "Matrix Market input instead of the Anderson generator"},
    {"--m", "matrix.m", "lattice edge"},
    {"--w", "matrix.w", "disorder strength"},
    {"--seed", "matrix.seed", "disorder seed (first realisation)"},
    {"--boundary", "matrix.boundary", "periodic | hardwall"},
    {"--disorder", "matrix.disorder", "diagonal | offdiagonal"},
    {"--solver", "solver.name", "cwi | silanczos | jd"},
    {"--nev", "solver.n_wanted", "number of eigenpairs"},
    {"--target", "solver.target", "target eigenvalue sigma"},
    {"--tol", "solver.outer_tol", "eigenpair residual tolerance relative to ||A||_1"},
    {"--kappa", "factor.kappa", "bound on ||L^{-1}||"},
    {"--epsilon", "factor.epsilon", "drop tolerance (or auto)"},
    {"--out", "output.file", "output file"},
    {"--out-dir", "output.dir", "directory for relative output paths"},
    {"--dump", "output.dump", "write |x|^2 per site (TSV)"},
    {"--reps", "run.repetitions", "number of realisations"},
};

struct Invocation {
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> shortcut_values;
    bool trace = false;
    bool verify = false;
};

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, Invocation& inv,
                      std::vector<CLI::Option*>& shortcut_opts) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", inv.config_file, "key=value config file with [sections]");
    sub->add_option("--set", inv.sets, "override one setting, section.key=value (repeatable)");
    for (const auto& s : kShortcuts) {
        shortcut_opts.push_back(sub->add_option(s.flag, inv.shortcut_values[s.key], std::string(s.help) + " (" + s.key + ")"));
    }
    sub->add_flag("--trace", inv.trace, "print one line per outer step");
    sub->add_flag("--verify", inv.verify, "compare with the dense eigendecomposition");
    return sub;
}

std::vector<std::pair<std::string, std::string>> collect_settings(const Invocation& inv,
                                                                  const std::vector<CLI::Option*>& shortcut_opts) {
    std::vector<std::pair<std::string, std::string>> settings;
    if (!inv.config_file.empty()) settings = read_config_file(inv.config_file);
    for (const auto& s : inv.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw InvalidInput("--set expects section.key=value, got '" + s + "'");
        settings.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    for (std::size_t i = 0; i < shortcut_opts.size(); ++i) {
        const auto* opt = shortcut_opts[i];
        if (opt->count() > 0) {
            const std::string key = kShortcuts[i % std::size(kShortcuts)].key;
            settings.emplace_back(key, inv.shortcut_values.at(key));
        }
    }
    if (inv.trace) settings.emplace_back("output.trace", "true");
    if (inv.verify) settings.emplace_back("verify.enabled", "true");
    return settings;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interior eigenvalues of Anderson-model matrices with multilevel ILDL preconditioning"};
    app.require_subcommand(1);
    std::string keys = "Config keys:";
    for (const auto& k : known_keys()) keys += "\n  " + k;
    app.footer(keys + "\nEnvironment: LOCSOLVE_OUTPUT_DIR is the default output directory.\n"
                      "Exit codes: 0 success, 1 usage, 2 numerical failure, 3 I/O.");

    Invocation inv;
    std::vector<CLI::Option*> shortcut_opts;
    auto* gen = add_command(app, "generate", "write an Anderson matrix in Matrix Market format", inv, shortcut_opts);
    auto* solve = add_command(app, "solve", "compute the eigenpairs nearest the target", inv, shortcut_opts);
    auto* bench = add_command(app, "bench", "sweep bench.{m,w,solvers,kappa,epsilon}; CSV rows", inv, shortcut_opts);
    auto* match = add_command(app, "match", "symmetric weighted matching and scaling report", inv, shortcut_opts);
    auto* verify = add_command(app, "verify", "run a solver and compare with the dense eigendecomposition", inv,
                               shortcut_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        CLI::App* sub = nullptr;
        for (auto* s : {gen, solve, bench, match, verify}) {
            if (s->parsed()) sub = s;
        }
        const auto cfg = make_run_config(collect_settings(inv, shortcut_opts));
        if (sub == gen) return cmd_generate(cfg, std::cout);
        if (sub == solve) return cmd_solve(cfg, std::cout);
        if (sub == bench) return cmd_bench(cfg, std::cout);
        if (sub == match) return cmd_match(cfg, std::cout);
        return cmd_verify(cfg, std::cout);
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DimensionMismatch& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
