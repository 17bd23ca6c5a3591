#include <doctest.h>

#include "stockbound/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace stockbound;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "stockbound");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

std::filesystem::path scratch() {
    auto dir = std::filesystem::temp_directory_path() / "stockbound_cli_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("compute writes one row per delta") {
    const Run r = invoke({"compute", "--model", "gauss2", "--sigma", "1", "--rho", "0.9", "--L", "10", "--delta", "0.05"});
    REQUIRE(r.code == 0);
    const auto rows = parse_csv(r.out);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][0] == "delta");
    CHECK(rows[0][6] == "p_rig");
    const double ratio = std::stod(rows[1][7]);
    CHECK(ratio >= 1.2);
    CHECK(ratio <= 1.9);

    const Run grid = invoke({"compute", "--grid", "5"});
    REQUIRE(grid.code == 0);
    CHECK(parse_csv(grid.out).size() == 6);
}

TEST_CASE("compute usage errors") {
    CHECK(invoke({"compute", "--model", "gauss2"}).code == 2);
    const Run range = invoke({"compute", "--delta", "1.5"});
    CHECK(range.code == 2);
    CHECK(range.err.find("delta") != std::string::npos);
    CHECK(invoke({"compute", "--delta", "0.05", "--model", "gauss7"}).code == 2);
    CHECK(invoke({"compute", "--delta", "0.05", "--rho", "2"}).code == 2);
    CHECK(invoke({"compute", "--delta", "0.05", "--grid", "4"}).code == 2);
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("compute for one commodity") {
    const Run r = invoke({"compute", "--model", "gauss1", "--delta", "0.05", "--L", "10"});
    REQUIRE(r.code == 0);
    const auto rows = parse_csv(r.out);
    CHECK(std::stod(rows[1][1]) == doctest::Approx(std::sqrt(10.0) * 1.6448536269514722).epsilon(1e-9));
}

TEST_CASE("config files and overrides") {
    const auto dir = scratch();
    std::ofstream(dir / "run.json") << R"({"model":"gauss2","sigma":2,"rho":0.5,"L":4,"delta":0.01})";
    const Run from_file = invoke({"compute", "--config", (dir / "run.json").string()});
    REQUIRE(from_file.code == 0);
    const Run explicit_flags = invoke({"compute", "--sigma", "2", "--rho", "0.5", "--L", "4", "--delta", "0.01"});
    CHECK(from_file.out == explicit_flags.out);

    const Run overridden = invoke({"compute", "--config", (dir / "run.json").string(), "--delta", "0.02"});
    CHECK(parse_csv(overridden.out)[1][0] == "0.02");

    std::ofstream(dir / "bad.json") << R"({"model":"gauss2","colour":1})";
    CHECK(invoke({"compute", "--config", (dir / "bad.json").string()}).code == 2);
    std::ofstream(dir / "broken.json") << "{";
    CHECK(invoke({"compute", "--config", (dir / "broken.json").string()}).code == 2);
}

TEST_CASE("compute with sample-based models") {
    const auto dir = scratch();
    std::ofstream(dir / "weibull.json") << R"({"model":{"type":"weibull","shape":2,"scale":1},"L":5,"delta":0.05,"trials":200000})";
    CHECK(invoke({"compute", "--config", (dir / "weibull.json").string()}).code == 2);  // no seed
    const Run w = invoke({"compute", "--config", (dir / "weibull.json").string(), "--seed", "4"});
    REQUIRE(w.code == 0);
    const auto rows = parse_csv(w.out);
    CHECK(std::stod(rows[1][5]) <= 0.05);  // simulated rate at the Chernoff stock

    {
        std::ofstream csv(dir / "demand.csv");
        for (int a = 0; a < 400; ++a) csv << (a % 7) << ',' << (a % 5) << ',' << (a % 3) << '\n';
    }
    std::ofstream(dir / "emp.json") << R"({"model":{"type":"empirical","path":"demand.csv"},"L":3,"delta":0.1})";
    const Run e = invoke({"compute", "--config", (dir / "emp.json").string()});
    REQUIRE(e.code == 0);
    CHECK(std::stod(parse_csv(e.out)[1][5]) <= 0.1);

    std::ofstream(dir / "g3.json")
        << R"({"model":{"type":"gaussian","mu":[0,0,0],"sigma":[[1,0.5,0.2],[0.5,1,0.3],[0.2,0.3,1]]},"L":4,"delta":0.01,"trials":100000,"seed":2})";
    const Run g3 = invoke({"compute", "--config", (dir / "g3.json").string()});
    REQUIRE(g3.code == 0);
    const auto g3rows = parse_csv(g3.out);
    CHECK(std::stod(g3rows[1][2]) >= std::stod(g3rows[1][3]));
}

TEST_CASE("figures") {
    const Run f1 = invoke({"figure", "fig1"});
    REQUIRE(f1.code == 0);
    const auto rows = parse_csv(f1.out);
    CHECK(rows.size() == 41);
    CHECK(rows[0] == std::vector<std::string>{"delta", "ratio_pro", "ratio_pre"});

    const Run f2 = invoke({"figure", "fig2", "--grid", "10"});
    REQUIRE(f2.code == 0);
    for (std::size_t k = 1; k < parse_csv(f2.out).size(); ++k) CHECK(std::stod(parse_csv(f2.out)[k][1]) <= 1.0);

    CHECK(invoke({"figure", "fig9"}).code == 2);
    CHECK(invoke({"figure", "figest"}).code == 2);  // no seed

    const Run est = invoke({"figure", "figest", "--seed", "3", "--replicates", "5", "--points", "5"});
    REQUIRE(est.code == 0);
    const auto erows = parse_csv(est.out);
    CHECK(erows[0].size() == 5);
    for (std::size_t k = 1; k < erows.size(); ++k) CHECK(std::stod(erows[k][4]) <= std::stod(erows[k][1]));
}

TEST_CASE("validate") {
    const Run pass = invoke({"validate", "--seed", "1", "--trials", "100000"});
    CHECK(pass.code == 0);
    CHECK(pass.out.find("result: pass") != std::string::npos);
    CHECK(invoke({"validate", "--seed", "1", "--trials", "100000"}).out == pass.out);

    const Run fail = invoke({"validate", "--seed", "1", "--ss", "0", "--delta", "0.01", "--trials", "100000"});
    CHECK(fail.code == 1);
    CHECK(fail.out.find("result: fail") != std::string::npos);

    CHECK(invoke({"validate"}).code == 2);
    CHECK(invoke({"validate", "--seed", "1", "--trials", "100"}).code == 2);
    CHECK(invoke({"validate", "--seed", "1", "--pattern", "any"}).code == 2);
    CHECK(invoke({"validate", "--seed", "1", "--pattern", "fungible", "--trials", "100000"}).code == 0);
}

TEST_CASE("seed from the environment") {
    ::setenv("STOCKBOUND_SEED", "1", 1);
    const Run env = invoke({"validate", "--trials", "100000"});
    ::unsetenv("STOCKBOUND_SEED");
    CHECK(env.code == 0);
    CHECK(env.out == invoke({"validate", "--trials", "100000", "--seed", "1"}).out);
}

TEST_CASE("output file") {
    const auto path = scratch() / "out.csv";
    std::filesystem::remove(path);
    const Run r = invoke({"compute", "--delta", "0.1", "--out", path.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("delta,ss_pre,ss_pro,ss_rig,p_pre,p_pro,p_rig", 0) == 0);
}

TEST_CASE("estimate-cgf") {
    const auto dir = scratch();
    {
        std::ofstream csv(dir / "normal.csv");
        csv << "period\n";
        for (int a = 0; a < 50; ++a) csv << (a % 2 == 0 ? 1.0 : -1.0) << '\n';
    }
    const Run r = invoke({"estimate-cgf", "--data", (dir / "normal.csv").string(), "--header", "--points", "3"});
    REQUIRE(r.code == 0);
    const auto rows = parse_csv(r.out);
    REQUIRE(rows.size() == 4);
    // Values +-1 with equal weight: phi_hat(u) = log cosh u.
    CHECK(std::stod(rows[3][1]) == doctest::Approx(std::log(std::cosh(1.0))).epsilon(1e-9));
    CHECK(std::stod(rows[2][1]) == 0.0);
    CHECK(rows[1][7] == "0.0002");

    std::ofstream(dir / "ragged.csv") << "1,2\n3\n";
    const Run bad = invoke({"estimate-cgf", "--data", (dir / "ragged.csv").string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("row 2") != std::string::npos);
    CHECK(invoke({"estimate-cgf", "--data", (dir / "normal.csv").string(), "--u-max", "9"}).code == 2);
}
