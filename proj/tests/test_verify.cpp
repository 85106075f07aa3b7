#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>

#include "gff/errors.hpp"
#include "gff/verify.hpp"

using nlohmann::json;

namespace {

// every check row carries the full schema and pass == (measured <= tolerance)
void check_schema(const json& rep, const std::string& suite, int nu) {
    CHECK(rep.at("suite") == suite);
    CHECK(rep.at("nu") == nu);
    REQUIRE(rep.at("checks").is_array());
    REQUIRE(rep.at("checks").size() > 0);
    bool all = true;
    for (const auto& c : rep.at("checks")) {
        REQUIRE(c.contains("name"));
        REQUIRE(c.contains("measured"));
        REQUIRE(c.contains("tolerance"));
        REQUIRE(c.contains("pass"));
        CHECK(c.at("pass").get<bool>() ==
              (c.at("measured").get<double>() <= c.at("tolerance").get<double>()));
        all = all && c.at("pass").get<bool>();
    }
    CHECK(rep.at("pass").get<bool>() == all);
}

} // namespace

TEST_CASE("all suites pass at defaults") {
    gff::verify::SuiteOptions opt;
    opt.cases = 60;  // keep the quadrature-heavy suites quick in unit runs
    for (const std::string& name : gff::verify::suite_names()) {
        INFO("suite ", name);
        json rep = gff::verify::run_suite(name, opt);
        check_schema(rep, name, 3);
        CHECK(rep.at("pass").get<bool>());
    }
}

TEST_CASE("suite catalogue") {
    const auto& names = gff::verify::suite_names();
    CHECK(names.size() == 5);
    CHECK(std::set<std::string>(names.begin(), names.end()).size() == 5);
}

TEST_CASE("covariance suite honors nu") {
    gff::verify::SuiteOptions opt;
    opt.cases = 25;
    for (int nu : {4, 5}) {
        opt.nu = nu;
        json rep = gff::verify::run_suite("covariance", opt);
        check_schema(rep, "covariance", nu);
        CHECK(rep.at("pass").get<bool>());
        // the elementary cross-check is a nu = 3 form only
        CHECK(rep.at("checks").size() == 1);
    }
    opt.nu = 3;
    json rep = gff::verify::run_suite("covariance", opt);
    CHECK(rep.at("checks").size() == 2);
}

TEST_CASE("tolerance override propagates and can force an honest failure") {
    gff::verify::SuiteOptions opt;
    opt.cases = 10;
    opt.tol = 1e-18;  // below quadrature accuracy, so the headline check must fail
    json rep = gff::verify::run_suite("covariance", opt);
    CHECK_FALSE(rep.at("pass").get<bool>());
    CHECK(rep.at("checks")[0].at("tolerance").get<double>() == 1e-18);

    opt.tol = 1e-3;  // looser than default, still passes
    rep = gff::verify::run_suite("covariance", opt);
    CHECK(rep.at("pass").get<bool>());
}

TEST_CASE("validation") {
    gff::verify::SuiteOptions opt;
    CHECK_THROWS_AS((void)gff::verify::run_suite("bogus", opt), gff::validation_error);
    opt.cases = 0;
    CHECK_THROWS_AS((void)gff::verify::run_suite("specfun", opt), gff::validation_error);
}

TEST_CASE("deterministic given seed") {
    gff::verify::SuiteOptions opt;
    opt.cases = 15;
    json a = gff::verify::run_suite("covariance", opt);
    json b = gff::verify::run_suite("covariance", opt);
    CHECK(a == b);
    opt.seed += 1;
    json c = gff::verify::run_suite("covariance", opt);
    // different draws, same verdict
    CHECK(c.at("pass").get<bool>());
    CHECK(c.at("checks")[0].at("measured").get<double>() !=
          a.at("checks")[0].at("measured").get<double>());
}
