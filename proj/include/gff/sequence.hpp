#pragma once

// Decreasing radius sequences r_0 = 1 > r_1 > ... > r_N used by the
// multi-scale lattices and detectors, with the two asymptotic growth
// conditions reported as diagnostics.

#include <vector>

namespace gff::seq {

enum class SequenceKind { paper_double_exp, geometric_power, custom };

const char* kind_name(SequenceKind k);

struct ScaleSequence {
    SequenceKind kind = SequenceKind::custom;
    std::vector<double> radii;       // r_0 = 1, strictly decreasing
    std::vector<double> cond1_diag;  // n^2 ln r_{n-1} / ln r_n, n = 1..N
    std::vector<double> cond2_diag;  // ln(-ln r_{n+1}) / (-ln r_n), n = 1..N-1
    int max_level() const { return static_cast<int>(radii.size()) - 1; }
};

struct SequenceParams {
    double rho = 0.5;   // geometric_power: r_n = rho^(c^n) for n >= 1
    double c = 2.0;
    int n_max = 64;     // deepest requested level
    double floor = 1e-300;  // underflow floor; generation stops above it
    std::vector<double> custom_radii;
};

// Build a sequence. The double-exponential kind uses r_n = 2^{-2^{n^2}+1};
// the geometric-power kind uses r_n = rho^{c^n} for n >= 1 with r_0 = 1.
// Generation stops at the last radius representable above params.floor, so
// the returned depth may be smaller than n_max (never silently: the
// result's max_level() is the contract).
ScaleSequence make_sequence(SequenceKind kind, const SequenceParams& params);

struct SequenceDiagnostics {
    double max_cond1 = 0.0;
    double max_cond2 = 0.0;
    bool cond1_decaying = true;
    bool cond2_decaying = true;
    bool pass = true;  // both prefixes exhibit decay
};

// Report the maxima and decay of both condition diagnostics. Never
// rejects a sequence (the conditions are asymptotic); requires N >= 2.
SequenceDiagnostics validate_sequence(const ScaleSequence& s);

} // namespace gff::seq
