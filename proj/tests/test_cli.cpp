#include "pphi2/cli.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using pphi2::cli::Json;

namespace {

const std::string cli_path = PPHI2_CLI_PATH;
const fs::path config_dir = PPHI2_CONFIG_DIR;

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("pphi2_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& text)
{
    const fs::path p = dir / "config.yaml";
    std::ofstream(p) << text;
    return p;
}

struct Invocation {
    int code = -1;
    std::string err;
    std::string out;
};

Invocation invoke(const std::string& args, const fs::path& dir)
{
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = "\"" + cli_path + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Invocation r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

const std::string well_model = R"(model:
  length: 2
  nodes: 16
  potential:
    example: {a: 1, x0: 1}
)";

} // namespace

TEST_CASE("gap-scan writes the CSV contract", "[cli]")
{
    const auto dir = scratch("gap");
    const auto r = pphi2::cli::run((config_dir / "gap_scan_fast.yaml").string(), dir.string(), std::nullopt, std::nullopt);
    REQUIRE(r.exit_code == 0);
    std::ifstream is(dir / "table.csv");
    std::string header, columns, row;
    std::getline(is, header);
    std::getline(is, columns);
    CHECK(header == "# pphi2 " + std::string(pphi2::version) + " config " + r.config_hash);
    CHECK(columns == "lambda,E1,E2,gap,log_gap,slope");
    int rows = 0;
    while (std::getline(is, row)) {
        ++rows;
        CHECK(std::count(row.begin(), row.end(), ',') == 5);
        CHECK(row.find(' ') == std::string::npos);
    }
    CHECK(rows == 5);
    const auto plot = slurp(dir / "plot.dat");
    CHECK(plot.rfind("# pphi2 " + std::string(pphi2::version) + " config " + r.config_hash + "\n", 0) == 0);
    const Json report = Json::parse(slurp(dir / "report.json"));
    CHECK(report.begin().key() == "header");
    CHECK(report["config_hash"] == r.config_hash);
    CHECK(report["status"] == "ok");
    CHECK(report["results"]["rows"].size() == 5);
}

TEST_CASE("free-field agmon report", "[cli]")
{
    const auto dir = scratch("free");
    const auto r = pphi2::cli::run((config_dir / "free_field_agmon.yaml").string(), dir.string(), std::nullopt, std::nullopt);
    REQUIRE(r.exit_code == 0);
    const Json report = Json::parse(slurp(dir / "report.json"));
    CHECK(std::abs(report["results"]["distance"].get<double>() - 0.353553) <= 0.02 * 0.353553);
    CHECK(report["results"]["free_field_lower_bound"].get<double>() == Catch::Approx(0.353553).epsilon(1e-5));
    CHECK_FALSE(fs::exists(dir / "table.csv"));
    CHECK(fs::exists(dir / "plot.dat"));
}

TEST_CASE("JSON configs are accepted", "[cli]")
{
    const auto dir = scratch("json");
    const auto r = pphi2::cli::run((config_dir / "spectrum.json").string(), dir.string(), std::nullopt, std::nullopt);
    REQUIRE(r.exit_code == 0);
    const Json report = Json::parse(slurp(dir / "report.json"));
    CHECK(report["seed"] == 7);
    CHECK(report["results"]["eigenvalues"].size() == 4);
}

TEST_CASE("every shipped config validates", "[cli]")
{
    for (const auto& entry : fs::directory_iterator(config_dir)) {
        const std::string name = entry.path().filename().string();
        if (name == "gap_scan.yaml") continue;  // the quad-precision scan runs in the acceptance driver
        const auto dir = scratch("all_" + name);
        const auto r = pphi2::cli::run(entry.path().string(), dir.string(), std::nullopt, std::nullopt);
        INFO(name << ": " << r.message);
        CHECK(r.exit_code == 0);
    }
}

TEST_CASE("validation errors name the field", "[cli]")
{
    const auto dir = scratch("invalid");
    struct Case {
        std::string text, field;
    };
    const std::vector<Case> cases{
        {"model: {length: 2, nodes: 16, boundary: toroidal, potential: {example: {a: 1, x0: 1}}}\ntask: {kind: minimize}\n",
         "model.boundary"},
        {"model: {length: -2, nodes: 16, potential: {example: {a: 1, x0: 1}}}\ntask: {kind: minimize}\n", "model.length"},
        {"model: {length: 2, nodes: 1, potential: {example: {a: 1, x0: 1}}}\ntask: {kind: minimize}\n", "model.nodes"},
        {"model: {length: 2, nodes: 16, potential: {example: {a: -1, x0: 1}}}\ntask: {kind: minimize}\n",
         "model.potential.example.a"},
        {"model: {length: 2, nodes: 16, potential: {polynomial: [0, 0, 1]}}\ntask: {kind: minimize}\n",
         "model.potential.polynomial"},
        {well_model + "task: {kind: agmon, from: zero}\n", "task.to"},
        {well_model + "task: {kind: agmon, from: zero, to: mode:99}\n", "task.to"},
        {well_model + "task: {kind: agmon, from: zero, to: 'constant:x'}\n", "task.to"},
        {well_model + "task: {kind: teleport}\n", "task.kind"},
        {well_model + "task: {kind: gap-scan, lambdas: [4, 3], N_max: 50}\n", "task.lambdas"},
        {well_model + "task: {kind: gap-scan, lambdas: [4, 5], N_max: 50, precision: half}\n", "task.precision"},
        {well_model + "task: {kind: instanton, from: zero, to: zero, T: 1, T_list: [1, 2]}\n", "task"},
        {well_model + "task: {kind: spectrum, lambda: 1, K: 1, N_max: 2}\n", "task.N_max"},
        {well_model + "task: {kind: minimize, colour: blue}\n", "task.colour"},
        {well_model + "task: {kind: minimize}\nthreads: 0\n", "threads"},
    };
    for (const auto& c : cases) {
        const auto cfg = write_config(dir, c.text);
        const auto r = pphi2::cli::run(cfg.string(), (dir / "out").string(), std::nullopt, std::nullopt);
        INFO(c.text << " -> " << r.message);
        CHECK(r.exit_code == 1);
        CHECK(r.message.rfind(c.field + ":", 0) == 0);
    }
}

TEST_CASE("exit codes of the binary", "[cli]")
{
    const auto dir = scratch("exit");
    const auto bad = write_config(
        dir, "model: {length: 2, nodes: 16, boundary: toroidal, potential: {example: {a: 1, x0: 1}}}\ntask: {kind: minimize}\n");
    auto r = invoke("run \"" + bad.string() + "\" --out-dir \"" + (dir / "bad").string() + "\"", dir);
    CHECK(r.code == 1);
    CHECK(r.err.find("model.boundary") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "bad" / "report.json"));

    r = invoke("run \"" + (dir / "missing.yaml").string() + "\"", dir);
    CHECK(r.code == 1);

    r = invoke("frobnicate", dir);
    CHECK(r.code == 1);

    r = invoke("verify everything", dir);
    CHECK(r.code == 1);

    // harmonic expansion about the saddle at 0: m^2 - Delta + 4v is not positive
    const auto saddle = write_config(dir, well_model + "task: {kind: harmonic, field: zero}\n");
    r = invoke("run \"" + saddle.string() + "\" --out-dir \"" + (dir / "saddle").string() + "\"", dir);
    CHECK(r.code == 2);
    REQUIRE(fs::exists(dir / "saddle" / "report.json"));
    Json report = Json::parse(slurp(dir / "saddle" / "report.json"));
    CHECK(report["status"] == "numerical_failure");
    CHECK(report.contains("error"));

    // one Newton step cannot converge: the partial report is still written
    const auto stalled =
        write_config(dir, well_model + "task: {kind: instanton, from: constant:-1, to: constant:1, T_list: [1, 2], max_iterations: 1}\n");
    r = invoke("run \"" + stalled.string() + "\" --out-dir \"" + (dir / "stalled").string() + "\"", dir);
    CHECK(r.code == 2);
    report = Json::parse(slurp(dir / "stalled" / "report.json"));
    CHECK(report["status"] == "not_converged");
    CHECK(report["results"]["rows"].size() == 2);
    CHECK(fs::exists(dir / "stalled" / "table.csv"));

    r = invoke("verify invariants --seed 3", dir);
    CHECK(r.code == 0);
    CHECK(r.out.find("l <= sqrt(e T) on 100 random paths") != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("identical config and seed give identical files", "[cli]")
{
    const auto dir = scratch("determinism");
    const std::string cfg = (config_dir / "spectrum.json").string();
    const auto a = invoke("run \"" + cfg + "\" --out-dir \"" + (dir / "a").string() + "\"", dir);
    const auto b = invoke("run \"" + cfg + "\" --out-dir \"" + (dir / "b").string() + "\" --threads 2", dir);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
    CHECK(slurp(dir / "a" / "plot.dat") == slurp(dir / "b" / "plot.dat"));

    const std::string scan = (config_dir / "instanton_scan.yaml").string();
    REQUIRE(invoke("run \"" + scan + "\" --out-dir \"" + (dir / "c").string() + "\"", dir).code == 0);
    REQUIRE(invoke("run \"" + scan + "\" --out-dir \"" + (dir / "d").string() + "\" --threads 3", dir).code == 0);
    for (const char* f : {"report.json", "table.csv", "plot.dat"}) CHECK(slurp(dir / "c" / f) == slurp(dir / "d" / f));

    const auto e = invoke("run \"" + cfg + "\" --out-dir \"" + (dir / "e").string() + "\" --seed 8", dir);
    REQUIRE(e.code == 0);
    const Json ja = Json::parse(slurp(dir / "a" / "report.json")), je = Json::parse(slurp(dir / "e" / "report.json"));
    CHECK(ja["config_hash"] != je["config_hash"]);
    CHECK(je["seed"] == 8);
}
