#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gff/fieldio.hpp"
#include "gff/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
};

// run the installed binary, capture stdout and the exit code;
// stderr is dropped so diagnostics never pollute parsed output
RunResult run_cli(const std::string& args) {
    std::string cmd = std::string(GFF_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
    int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

std::vector<std::string> fields_of(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string f;
    while (std::getline(in, f, ',')) out.push_back(f);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / ("gff_cli_" + name);
    fs::remove_all(d);
    return d;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

} // namespace

TEST_CASE("kernels single evaluations") {
    RunResult r = run_cli("kernels --nu 3 --p 1 --t 1 --s 1 --dist 0");
    CHECK(r.exit_code == 0);
    auto ls = lines_of(r.out);
    REQUIRE(ls.size() == 2);
    CHECK(ls[0] == "nu,p,t,s,dist,value,method,est_error");
    auto f = fields_of(ls[1]);
    REQUIRE(f.size() == 8);
    CHECK(f[0] == "3");
    CHECK(f[1] == "1");
    // G(1) for nu = 3: e^-1 / (4 pi sinh 1) = 0.024910556524700641 (mpmath dps=30)
    CHECK(rel_err(std::stod(f[5]), 0.024910556524700641) < 1e-14);
    CHECK(f[6] == "closed_concentric");

    r = run_cli("kernels --nu 3 --p 1 --dist 1 --t 0.3 --s 0.3");
    CHECK(r.exit_code == 0);
    f = fields_of(lines_of(r.out)[1]);
    // renormalized disjoint value e^-1/(4 pi) = 0.029274915762159580, radius-free
    CHECK(rel_err(std::stod(f[5]), 0.029274915762159580) < 1e-14);
    CHECK(f[6] == "closed_disjoint");
}

TEST_CASE("kernels table mode") {
    RunResult r = run_cli("kernels --nu 3 --table --points 5 --t-min 0.1 --t-max 1");
    CHECK(r.exit_code == 0);
    auto ls = lines_of(r.out);
    REQUIRE(ls.size() == 6);
    gff::kernels::KernelConfig kc;
    double prev_t = 0.0;
    for (std::size_t i = 1; i < ls.size(); ++i) {
        auto f = fields_of(ls[i]);
        REQUIRE(f.size() == 8);
        double t = std::stod(f[2]);
        CHECK(t > prev_t);
        prev_t = t;
        CHECK(f[2] == f[3]);  // concentric grid: s = t
        CHECK(std::stod(f[4]) == 0.0);
        CHECK(rel_err(std::stod(f[5]), gff::kernels::g_fn(kc, t)) < 1e-15);
    }
    CHECK(std::stod(fields_of(ls[1])[2]) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(std::stod(fields_of(ls[5])[2]) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("kernels argument errors exit 2") {
    CHECK(run_cli("kernels --t 1 --s 1").exit_code == 2);           // missing --nu
    CHECK(run_cli("kernels --nu 3 --t 1").exit_code == 2);          // missing --s
    CHECK(run_cli("kernels --nu 3 --p 5 --t 1 --s 1").exit_code == 2);  // p out of range
    CHECK(run_cli("kernels --nu 3 --table --points 0").exit_code == 2);
}

TEST_CASE("verify subcommand exit codes and report shape") {
    RunResult r = run_cli("verify specfun");
    CHECK(r.exit_code == 0);
    json rep = json::parse(r.out);
    CHECK(rep.at("suite") == "specfun");
    CHECK(rep.at("pass").get<bool>());
    for (const auto& c : rep.at("checks")) {
        CHECK(c.contains("name"));
        CHECK(c.contains("measured"));
        CHECK(c.contains("tolerance"));
        CHECK(c.contains("pass"));
    }

    r = run_cli("verify covariance --nu 3 --cases 20 --tol 1e-3");
    CHECK(r.exit_code == 0);
    CHECK(json::parse(r.out).at("pass").get<bool>());

    // unattainable tolerance: honest failure, exit 1
    r = run_cli("verify covariance --cases 5 --tol 1e-18");
    CHECK(r.exit_code == 1);
    CHECK_FALSE(json::parse(r.out).at("pass").get<bool>());

    CHECK(run_cli("verify bogus").exit_code == 2);
}

TEST_CASE("sample writes a field container matching the request") {
    fs::path d = fresh_dir("sample");
    RunResult r = run_cli("sample --nu 3 --seq geometric:0.5,2 --levels 4 --grid 8 --seed 42 "
                          "--replicas 3 --out-dir " + d.string());
    CHECK(r.exit_code == 0);
    gff::fieldio::FieldContainer fc = gff::fieldio::read_gffs((d / "field.gffs").string());
    CHECK(fc.nu == 3);
    CHECK(fc.seed == 42);
    REQUIRE(fc.levels.size() == 4);
    CHECK(fc.levels[0].count == 64);  // level 1 needs only ceil(1/0.25) = 4 per axis
    CHECK(fc.levels[1].count == 512);
    CHECK(fc.levels[2].count == 512);
    CHECK(fc.levels[3].count == 512);
    CHECK(fc.levels[0].radius == 0.25);
    CHECK(fc.levels[1].radius == 0.0625);
    CHECK(fc.levels[3].radius == doctest::Approx(std::pow(0.5, 16.0)).epsilon(1e-15));
    REQUIRE(fc.replicas.size() == 3);
    CHECK(fc.points_per_replica() == 1600);

    json man = gff::fieldio::read_json((d / "field_manifest.json").string());
    CHECK(man.at("values_file") == "field.gffs");
    json run_man = gff::fieldio::read_json((d / "run_manifest.json").string());
    CHECK(run_man.at("seed") == 42);
    CHECK(run_man.contains("config_hash"));
}

TEST_CASE("sample determinism and resource limit") {
    fs::path d1 = fresh_dir("sample_det1"), d2 = fresh_dir("sample_det2");
    std::string args = "sample --nu 3 --levels 3 --grid 4 --seed 7 --replicas 2 --out-dir ";
    CHECK(run_cli(args + d1.string()).exit_code == 0);
    CHECK(run_cli(args + d2.string()).exit_code == 0);
    CHECK(slurp(d1 / "field.gffs") == slurp(d2 / "field.gffs"));
    CHECK(slurp(d1 / "field_manifest.json") == slurp(d2 / "field_manifest.json"));

    CHECK(run_cli("sample --nu 3 --levels 4 --grid 8 --max-points 10 --out-dir " +
                  fresh_dir("sample_res").string())
              .exit_code == 4);
}

TEST_CASE("detect reports flags and dimension block") {
    fs::path d = fresh_dir("detect0");
    RunResult r = run_cli("detect --gamma 0 --replicas 3 --levels 3 --cap 216 --seed 31 "
                          "--out-dir " + d.string());
    CHECK(r.exit_code == 0);
    json rep = json::parse(r.out);
    CHECK(rep.at("mode") == "limsup");
    CHECK(rep.at("threshold").get<double>() == 0.0);
    REQUIRE(rep.at("flagged").at("per_replica").size() == 3);
    CHECK(rep.at("flagged").at("total").get<long long>() > 0);  // gamma 0 flags nearly all
    CHECK(rep.at("dimension").at("applicable").get<int>() == 3);
    double est = rep.at("dimension").at("estimate").get<double>();
    CHECK(est > 2.0);
    CHECK(est < 3.3);
    // stdout and the artifact agree
    json file_rep = gff::fieldio::read_json((d / "detect.json").string());
    CHECK(file_rep == rep);

    fs::path d2 = fresh_dir("detect_high");
    r = run_cli("detect --gamma 1.5 --replicas 3 --levels 3 --cap 216 --seed 31 --out-dir " +
                d2.string());
    CHECK(r.exit_code == 0);
    rep = json::parse(r.out);
    CHECK(rep.at("threshold").get<double>() == 3.0);
    CHECK(rep.at("flagged").at("total").get<long long>() == 0);
    CHECK(rep.at("dimension").at("applicable").get<int>() == 0);
}

TEST_CASE("detect mode validation") {
    CHECK(run_cli("detect --mode bogus --replicas 1 --levels 3 --cap 64").exit_code == 2);
    // perfect surrogate needs at least 6 levels
    CHECK(run_cli("detect --mode perfect --replicas 1 --levels 3 --cap 64").exit_code == 2);
}

TEST_CASE("dimension CSV shape, per-gamma rows, determinism") {
    fs::path d1 = fresh_dir("dim1"), d2 = fresh_dir("dim2");
    std::string args = "dimension --gamma 0 --gamma 0.8 --replicas 3 --levels 3 --cap 216 "
                       "--seed 13 --out-dir ";
    RunResult r = run_cli(args + d1.string());
    CHECK(r.exit_code == 0);
    auto ls = lines_of(r.out);
    REQUIRE(ls.size() == 3);
    CHECK(ls[0] == "gamma,estimate,ci,replicas");
    auto row0 = fields_of(ls[1]), row1 = fields_of(ls[2]);
    CHECK(std::stod(row0[0]) == 0.0);
    CHECK(std::stod(row1[0]) == 0.8);
    CHECK(std::stod(row0[1]) > std::stod(row1[1]));  // higher gamma, thinner set
    CHECK(row0[3] == "3");
    CHECK(slurp(d1 / "dimension.csv") == r.out);

    CHECK(run_cli(args + d2.string()).exit_code == 0);
    CHECK(slurp(d1 / "dimension.csv") == slurp(d2 / "dimension.csv"));
}

TEST_CASE("measure CSV and certificate summary") {
    fs::path d = fresh_dir("measure");
    RunResult r = run_cli("measure --gamma 0.3 --alpha 1.2 --replicas 4 --levels 2 --cap 64 "
                          "--seed 3 --out-dir " + d.string());
    CHECK(r.exit_code == 0);
    json summary = json::parse(r.out);
    CHECK(summary.at("alpha") == 1.2);
    CHECK(summary.at("total") == 4);
    int passed = summary.at("passed").get<int>();
    CHECK(summary.at("fraction").get<double>() == doctest::Approx(passed / 4.0));

    auto ls = lines_of(slurp(d / "measure.csv"));
    REQUIRE(ls.size() == 5);
    CHECK(ls[0] == "replica,n,mass,I_alpha,pass_certificate");
    int rows_passed = 0;
    for (std::size_t i = 1; i < ls.size(); ++i) {
        auto f = fields_of(ls[i]);
        REQUIRE(f.size() == 5);
        CHECK(f[0] == std::to_string(i - 1));
        CHECK(f[1] == "2");
        CHECK(std::stod(f[2]) >= 0.0);
        CHECK(std::stod(f[3]) >= 0.0);
        CHECK((f[4] == "0" || f[4] == "1"));
        rows_passed += f[4] == "1" ? 1 : 0;
    }
    CHECK(rows_passed == passed);  // per-replica bits match the certificate
}

TEST_CASE("config file merge with flag overrides") {
    fs::path d = fresh_dir("cfgmerge");
    fs::create_directories(d);
    {
        std::ofstream f(d / "cfg.json");
        f << R"({"config_version": 1, "sampling": {"seed": 5, "replicas": 2},)"
          << R"( "sequence": {"kind": "geometric_power", "rho": 0.5, "c": 2.0, "n_max": 3}})";
    }
    RunResult r = run_cli("sample --config " + (d / "cfg.json").string() +
                          " --seed 9 --grid 4 --out-dir " + d.string());
    CHECK(r.exit_code == 0);
    gff::fieldio::FieldContainer fc = gff::fieldio::read_gffs((d / "field.gffs").string());
    CHECK(fc.seed == 9);               // flag wins
    CHECK(fc.replicas.size() == 2);    // file value kept
    CHECK(fc.levels.size() == 3);      // file n_max kept

    {
        std::ofstream f(d / "bad.json");
        f << R"({"config_version": 1, "bogus_key": 1})";
    }
    CHECK(run_cli("sample --config " + (d / "bad.json").string()).exit_code == 2);
    CHECK(run_cli("sample --seq geometric:abc").exit_code == 2);
}
