#include "run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace locsolve::cli {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& expected, const std::string& value) {
    throw InvalidInput(key + ": expected " + expected + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto t = trim(v);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty() || !std::isfinite(x)) bad_value(key, "a number", v);
    return x;
}

Index to_index(const std::string& key, const std::string& v) {
    Index x = 0;
    const auto t = trim(v);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty()) bad_value(key, "an integer", v);
    return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto t = trim(v);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty()) bad_value(key, "a non-negative integer", v);
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    const auto t = lower(trim(v));
    if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
    if (t == "0" || t == "false" || t == "no" || t == "off") return false;
    bad_value(key, "true or false", v);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        // [matrix]
        t["matrix.path"] = [](RunConfig& c, auto&, auto& v) {
            if (trim(v).empty()) {
                c.matrix_path.reset();
            } else {
                c.matrix_path = trim(v);
            }
        };
        t["matrix.m"] = [](RunConfig& c, auto& k, auto& v) { c.anderson.m = to_index(k, v); };
        t["matrix.w"] = [](RunConfig& c, auto& k, auto& v) { c.anderson.w = to_double(k, v); };
        t["matrix.seed"] = [](RunConfig& c, auto& k, auto& v) { c.anderson.seed = to_u64(k, v); };
        t["matrix.shift"] = [](RunConfig& c, auto& k, auto& v) { c.anderson.shift = to_double(k, v); };
        t["matrix.boundary"] = [](RunConfig& c, auto& k, auto& v) {
            const auto s = lower(trim(v));
            if (s == "periodic") {
                c.anderson.boundary = Boundary::Periodic;
            } else if (s == "hardwall" || s == "hard-wall") {
                c.anderson.boundary = Boundary::HardWall;
            } else {
                bad_value(k, "periodic or hardwall", v);
            }
        };
        t["matrix.disorder"] = [](RunConfig& c, auto& k, auto& v) {
            const auto s = lower(trim(v));
            if (s == "diagonal") {
                c.anderson.disorder = Disorder::Diagonal;
            } else if (s == "offdiagonal" || s == "off-diagonal") {
                c.anderson.disorder = Disorder::OffDiagonal;
            } else {
                bad_value(k, "diagonal or offdiagonal", v);
            }
        };
        // [solver]
        t["solver.name"] = [](RunConfig& c, auto&, auto& v) { c.solver = parse_solver(trim(v)); };
        t["solver.n_wanted"] = [](RunConfig& c, auto& k, auto& v) { c.eig.n_wanted = to_index(k, v); };
        t["solver.target"] = [](RunConfig& c, auto& k, auto& v) { c.eig.target_sigma = to_double(k, v); };
        t["solver.max_basis"] = [](RunConfig& c, auto& k, auto& v) { c.eig.max_basis = to_index(k, v); };
        t["solver.restart_size"] = [](RunConfig& c, auto& k, auto& v) { c.eig.restart_size = to_index(k, v); };
        t["solver.outer_tol"] = [](RunConfig& c, auto& k, auto& v) { c.eig.outer_tol = to_double(k, v); };
        t["solver.inner_tol"] = [](RunConfig& c, auto& k, auto& v) { c.eig.inner_tol = to_double(k, v); };
        t["solver.inner_maxit"] = [](RunConfig& c, auto& k, auto& v) { c.eig.inner_maxit = to_index(k, v); };
        t["solver.max_outer"] = [](RunConfig& c, auto& k, auto& v) { c.eig.max_outer = to_index(k, v); };
        t["solver.seed"] = [](RunConfig& c, auto& k, auto& v) { c.eig.seed = to_u64(k, v); };
        t["solver.cwi_factor"] = [](RunConfig& c, auto& k, auto& v) { c.eig.cwi_factor = to_double(k, v); };
        t["solver.cwi_max_steps"] = [](RunConfig& c, auto& k, auto& v) { c.eig.cwi_max_steps = to_index(k, v); };
        t["solver.cwi_tol"] = [](RunConfig& c, auto& k, auto& v) { c.eig.cwi_tol = to_double(k, v); };
        t["solver.jd_inner_floor"] = [](RunConfig& c, auto& k, auto& v) { c.eig.jd_inner_floor = to_double(k, v); };
        t["solver.jd_switch_residual"] = [](RunConfig& c, auto& k, auto& v) {
            c.eig.jd_switch_residual = to_double(k, v);
        };
        t["solver.jd_inner_final"] = [](RunConfig& c, auto& k, auto& v) { c.eig.jd_inner_final = to_double(k, v); };
        t["solver.jd_theta_switch"] = [](RunConfig& c, auto& k, auto& v) { c.eig.jd_theta_switch = to_double(k, v); };
        t["solver.jd_guard"] = [](RunConfig& c, auto& k, auto& v) { c.eig.jd_guard = to_index(k, v); };
        // [factor]
        t["factor.kappa"] = [](RunConfig& c, auto& k, auto& v) { c.factor.kappa = to_double(k, v); };
        t["factor.epsilon"] = [](RunConfig& c, auto& k, auto& v) {
            if (lower(trim(v)) == "auto") {
                c.factor.epsilon.reset();
            } else {
                c.factor.epsilon = to_double(k, v);
            }
        };
        t["factor.tau"] = [](RunConfig& c, auto& k, auto& v) { c.factor.tau = to_double(k, v); };
        t["factor.max_levels"] = [](RunConfig& c, auto& k, auto& v) { c.factor.max_levels = to_index(k, v); };
        t["factor.small_block_cutoff"] = [](RunConfig& c, auto& k, auto& v) {
            c.factor.small_block_cutoff = to_index(k, v);
        };
        t["factor.inverse_safety"] = [](RunConfig& c, auto& k, auto& v) { c.factor.inverse_safety = to_double(k, v); };
        t["factor.matching"] = [](RunConfig& c, auto& k, auto& v) { c.factor.enable_matching = to_bool(k, v); };
        t["factor.aggressive_drop"] = [](RunConfig& c, auto& k, auto& v) {
            c.factor.enable_aggressive_drop = to_bool(k, v);
        };
        // [output]
        t["output.dir"] = [](RunConfig& c, auto&, auto& v) { c.output_dir = trim(v); };
        t["output.file"] = [](RunConfig& c, auto&, auto& v) { c.output_file = trim(v); };
        t["output.dump"] = [](RunConfig& c, auto&, auto& v) { c.dump_file = trim(v); };
        t["output.trace"] = [](RunConfig& c, auto& k, auto& v) { c.trace = to_bool(k, v); };
        // [verify]
        t["verify.enabled"] = [](RunConfig& c, auto& k, auto& v) { c.verify = to_bool(k, v); };
        t["verify.tol"] = [](RunConfig& c, auto& k, auto& v) { c.verify_tol = to_double(k, v); };
        t["verify.angle_tol"] = [](RunConfig& c, auto& k, auto& v) { c.verify_angle_tol = to_double(k, v); };
        t["verify.max_n"] = [](RunConfig& c, auto& k, auto& v) { c.verify_max_n = to_index(k, v); };
        // [run]
        t["run.repetitions"] = [](RunConfig& c, auto& k, auto& v) { c.repetitions = to_index(k, v); };
        // [bench]
        t["bench.m"] = [](RunConfig& c, auto& k, auto& v) {
            c.bench.m.clear();
            for (const auto& s : split_list(v)) c.bench.m.push_back(to_index(k, s));
        };
        t["bench.w"] = [](RunConfig& c, auto& k, auto& v) {
            c.bench.w.clear();
            for (const auto& s : split_list(v)) c.bench.w.push_back(to_double(k, s));
        };
        t["bench.solvers"] = [](RunConfig& c, auto& k, auto& v) {
            c.bench.solvers.clear();
            for (const auto& s : split_list(v)) {
                const auto name = lower(s);
                if (name != "factor") (void)parse_solver(name);
                if (name.empty()) bad_value(k, "solver names", v);
                c.bench.solvers.push_back(name);
            }
        };
        t["bench.kappa"] = [](RunConfig& c, auto& k, auto& v) {
            c.bench.kappa.clear();
            for (const auto& s : split_list(v)) c.bench.kappa.push_back(to_double(k, s));
        };
        t["bench.epsilon"] = [](RunConfig& c, auto& k, auto& v) {
            c.bench.epsilon.clear();
            for (const auto& s : split_list(v)) c.bench.epsilon.push_back(to_double(k, s));
        };
        return t;
    }();
    return table;
}

}  // namespace

SolverKind parse_solver(const std::string& name) {
    const auto s = lower(name);
    if (s == "cwi") return SolverKind::Cwi;
    if (s == "silanczos") return SolverKind::SiLanczos;
    if (s == "jd") return SolverKind::Jd;
    throw InvalidInput("unknown solver '" + name + "' (expected cwi, silanczos or jd)");
}

std::string solver_name(SolverKind kind) {
    switch (kind) {
        case SolverKind::Cwi: return "cwi";
        case SolverKind::SiLanczos: return "silanczos";
        case SolverKind::Jd: return "jd";
    }
    return "?";
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, fn] : setters()) k.push_back(name);
        return k;
    }();
    return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto k = lower(trim(key));
    const auto it = setters().find(k);
    if (it == setters().end()) throw InvalidInput("unknown setting '" + key + "'; see --help for the accepted keys");
    it->second(cfg, k, value);
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string line, section;
    Index lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto cut = line.find_first_of("#;");
        if (cut != std::string::npos) line.erase(cut);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw InvalidInput("config line " + std::to_string(lineno) + ": unterminated section");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidInput("config line " + std::to_string(lineno) + ": expected key = value, got '" + line + "'");
        }
        auto key = trim(std::string_view(line).substr(0, eq));
        if (!section.empty()) key = section + "." + key;
        out.emplace_back(key, trim(std::string_view(line).substr(eq + 1)));
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    return parse_config_text(in);
}

void RunConfig::validate() const {
    if (!matrix_path) locsolve::validate(anderson);
    factor.validate();
    eig.validate();
    if (repetitions < 1) throw InvalidInput("run.repetitions must be >= 1");
    if (!(verify_tol > 0.0) || !(verify_angle_tol > 0.0)) throw InvalidInput("verify tolerances must be positive");
    for (Index m : bench.m) {
        AndersonConfig a = anderson;
        a.m = m;
        locsolve::validate(a);
    }
    for (double k : bench.kappa) {
        if (!(k >= 1.0)) throw InvalidInput("bench.kappa entries must be >= 1");
    }
    for (double e : bench.epsilon) {
        if (!(e >= 0.0 && e < 1.0)) throw InvalidInput("bench.epsilon entries must lie in [0, 1)");
    }
}

std::filesystem::path RunConfig::resolve_output(const std::filesystem::path& p) const {
    if (p.is_absolute() || output_dir.empty()) return p;
    return output_dir / p;
}

RunConfig make_run_config(const std::vector<std::pair<std::string, std::string>>& settings) {
    RunConfig cfg;
    if (const char* env = std::getenv("LOCSOLVE_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
    for (const auto& [k, v] : settings) apply_setting(cfg, k, v);
    cfg.validate();
    return cfg;
}

}  // namespace locsolve::cli
