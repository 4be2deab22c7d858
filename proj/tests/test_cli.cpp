#include "commands.hpp"

#include <locsolve/matrix_market.hpp>

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace locsolve;
using namespace locsolve::cli;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("locsolve_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

RunConfig config(std::vector<std::pair<std::string, std::string>> settings) {
    settings.insert(settings.begin(), {"output.dir", scratch_dir().string()});
    return make_run_config(settings);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string f; std::getline(in, f, sep);) out.push_back(f);
    return out;
}

int run_tool(const std::string& args) {
    const std::string cmd = std::string(LOCSOLVE_TOOL) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config text with sections and overrides") {
    std::istringstream in(R"(# comment
[matrix]
m = 7
w = 12.0   ; trailing comment
boundary = hardwall
[solver]
name = cwi
n_wanted = 3
[bench]
kappa = 5, 10 ,20
)");
    auto settings = parse_config_text(in);
    REQUIRE(settings.size() == 6);
    CHECK(settings[0] == std::pair<std::string, std::string>{"matrix.m", "7"});
    settings.emplace_back("matrix.m", "9");
    const auto cfg = make_run_config(settings);
    CHECK(cfg.anderson.m == 9);
    CHECK(cfg.anderson.w == 12.0);
    CHECK(cfg.anderson.boundary == Boundary::HardWall);
    CHECK(cfg.solver == SolverKind::Cwi);
    CHECK(cfg.eig.n_wanted == 3);
    CHECK(cfg.bench.kappa == std::vector<double>{5.0, 10.0, 20.0});

    CHECK_THROWS_AS(make_run_config({{"matrix.colour", "red"}}), InvalidInput);
    CHECK_THROWS_AS(make_run_config({{"matrix.m", "seven"}}), InvalidInput);
    CHECK_THROWS_AS(make_run_config({{"solver.name", "arpack"}}), InvalidInput);
    CHECK_THROWS_AS(make_run_config({{"solver.restart_size", "30"}}), InvalidInput);
    CHECK_THROWS_AS(make_run_config({{"factor.matching", "maybe"}}), InvalidInput);
    std::istringstream broken("[matrix\nm=3\n");
    CHECK_THROWS_AS(parse_config_text(broken), InvalidInput);
    CHECK_THROWS_AS(read_config_file(scratch_dir() / "missing.cfg"), IoError);

    const auto eps = make_run_config({{"factor.epsilon", "0.01"}, {"factor.epsilon", "auto"}});
    CHECK_FALSE(eps.factor.epsilon.has_value());
}

TEST_CASE("generate writes deterministic Anderson matrices") {
    std::ostringstream out;
    auto cfg = config({{"matrix.m", "4"}, {"matrix.seed", "1"}, {"output.file", "a.mtx"}});
    CHECK(cmd_generate(cfg, out) == kExitOk);
    const auto a = read_matrix_market(scratch_dir() / "a.mtx");
    CHECK(a.size() == 64);
    CHECK(a.nnz() == 64 + 3 * 64);  // diagonal + 3N periodic bonds
    CHECK(out.str().find("n=64 nnz=256 seed=1") != std::string::npos);

    cfg.output_file = "b.mtx";
    cmd_generate(cfg, out);
    CHECK(slurp(scratch_dir() / "a.mtx") == slurp(scratch_dir() / "b.mtx"));

    CHECK_THROWS_AS(config({{"matrix.m", "2"}}), InvalidInput);
}

TEST_CASE("solve reports converged pairs and dumps probabilities") {
    std::ostringstream out;
    const auto cfg = config({{"matrix.m", "8"}, {"solver.name", "jd"}, {"output.dump", "x.tsv"}, {"verify.enabled", "1"}});
    CHECK(cmd_solve(cfg, out) == kExitOk);
    const auto text = out.str();
    CHECK(text.find("-> PASS") != std::string::npos);
    Index rows = 0;
    for (const auto& l : lines(text)) {
        if (l.size() > 4 && l[3] == ' ' && l.find(" yes ") != std::string::npos) ++rows;
    }
    CHECK(rows == 5);

    const auto dump = lines(slurp(scratch_dir() / "x.tsv"));
    REQUIRE(dump.size() == 513);
    CHECK(dump[0] == "site\ti\tj\tk\tp1\tp2\tp3\tp4\tp5");
    double total = 0.0;
    for (std::size_t r = 1; r < dump.size(); ++r) total += std::stod(split(dump[r], '\t')[4]);
    CHECK(std::abs(total - 1.0) <= 1e-6);
}

TEST_CASE("verify against the dense oracle") {
    for (const char* s : {"cwi", "silanczos", "jd"}) {
        std::ostringstream out;
        CHECK(cmd_verify(config({{"matrix.m", "6"}, {"solver.name", s}}), out) == kExitOk);
    }
    // Negative control: a useless outer tolerance.
    std::ostringstream loose;
    CHECK(cmd_verify(config({{"matrix.m", "6"}, {"solver.name", "jd"}, {"solver.outer_tol", "1"}}), loose) ==
          kExitNumerical);
    CHECK(loose.str().find("FAIL") != std::string::npos);

    // Same contract for a matrix read from a file.
    std::ostringstream gen, out;
    cmd_generate(config({{"matrix.m", "5"}, {"matrix.w", "12"}, {"output.file", "m5.mtx"}}), gen);
    const auto path = (scratch_dir() / "m5.mtx").string();
    CHECK(cmd_verify(config({{"matrix.path", path}, {"solver.name", "silanczos"}}), out) == kExitOk);

    std::ostringstream big;
    CHECK_THROWS_AS(cmd_verify(config({{"matrix.m", "6"}, {"verify.max_n", "100"}}), big), InvalidInput);
}

TEST_CASE("bench CSV") {
    std::ostringstream empty;
    CHECK(cmd_bench(config({}), empty) == kExitOk);
    CHECK(empty.str() == std::string(kBenchHeader) + "\n");

    const std::vector<std::pair<std::string, std::string>> grid{{"bench.m", "10"},
                                                                {"bench.w", "16.5"},
                                                                {"bench.solvers", "factor"},
                                                                {"bench.kappa", "5,10,20"},
                                                                {"bench.epsilon", "0.01"}};
    std::ostringstream first, second;
    cmd_bench(config(grid), first);
    cmd_bench(config(grid), second);
    const auto rows = lines(first.str());
    const auto rows2 = lines(second.str());
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == kBenchHeader);
    double prev_fill = 0.0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto f = split(rows[r], ',');
        const auto g = split(rows2[r], ',');
        REQUIRE(f.size() == 11);
        CHECK(f[10] == "ok");
        const double fill = std::stod(f[7]);
        CHECK(fill > prev_fill);
        prev_fill = fill;
        for (std::size_t c = 0; c < f.size(); ++c) {
            if (c != 6) CHECK(f[c] == g[c]);  // all but time_s
            if (c != 3 && c != 10) CHECK(std::isfinite(std::stod(f[c])));
        }
    }

    // A failing configuration marks its row and the sweep goes on.
    std::ostringstream marked;
    cmd_bench(config({{"bench.m", "4"},
                      {"bench.w", "16.5"},
                      {"bench.solvers", "jd,factor"},
                      {"solver.max_outer", "2"}}),
              marked);
    const auto mrows = lines(marked.str());
    REQUIRE(mrows.size() == 3);
    CHECK(split(mrows[1], ',')[10] == "unconverged");
    CHECK(split(mrows[2], ',')[10] == "ok");
}

TEST_CASE("match report") {
    std::ostringstream out;
    CHECK(cmd_match(config({{"matrix.m", "4"}, {"output.file", "ps.csv"}}), out) == kExitOk);
    CHECK(out.str().find("scaled max modulus=1 ") != std::string::npos);
    const auto rows = lines(slurp(scratch_dir() / "ps.csv"));
    CHECK(rows.size() == 65);
}

TEST_CASE("exit codes of the command-line tool") {
    const auto dir = scratch_dir().string();
    CHECK(run_tool("generate --m 4 --out " + dir + "/t.mtx") == kExitOk);
    CHECK(run_tool("solve --solver bogus") == kExitUsage);
    CHECK(run_tool("frobnicate") == kExitUsage);
    CHECK(run_tool("generate --m 2") == kExitUsage);
    CHECK(run_tool("verify --m 5 --solver jd --tol 1") == kExitNumerical);
    CHECK(run_tool("solve --matrix " + dir + "/does_not_exist.mtx") == kExitIo);
    CHECK(run_tool("generate --m 4 --out /nonexistent_dir/x.mtx") == kExitIo);
    CHECK(run_tool("--help") == kExitOk);
    CHECK(run_tool("solve --m 5 --solver cwi --nev 3") == kExitOk);
    const std::string env = "LOCSOLVE_OUTPUT_DIR=" + dir + " ";
    CHECK(std::system((env + LOCSOLVE_TOOL + " generate --m 3 --out env.mtx > /dev/null").c_str()) == 0);
    CHECK(fs::exists(scratch_dir() / "env.mtx"));
}
