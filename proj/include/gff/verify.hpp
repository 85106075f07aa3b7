#pragma once

// Runtime oracle suites: each suite re-runs a family of independent
// cross-checks (frozen reference values, dual-route computations, identity
// scans) and reports a machine-readable verdict with the measured error
// against the tolerance for every check.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace gff::verify {

struct SuiteOptions {
    int nu = 3;             // dimension for the checks that take one
    int cases = 200;        // sample count for randomized scans
    double tol = 0.0;       // 0 = per-check defaults; > 0 overrides the
                            // suite's headline tolerance
    std::uint64_t seed = 20260815;  // seed of the deterministic case generator
};

// suite name in {specfun, covariance, sampler, probabilities, energy};
// unknown names throw validation_error. The result object:
//   { "suite": name, "nu": nu, "pass": bool,
//     "checks": [ {"name", "measured", "tolerance", "pass"}, ... ] }
nlohmann::json run_suite(const std::string& name, const SuiteOptions& opt);

const std::vector<std::string>& suite_names();

} // namespace gff::verify
