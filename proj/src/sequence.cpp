#include "gff/sequence.hpp"

#include <algorithm>
#include <cmath>

#include "gff/errors.hpp"

namespace gff::seq {

namespace {

void fill_diagnostics(ScaleSequence& s) {
    const auto& r = s.radii;
    const int n_levels = static_cast<int>(r.size());
    s.cond1_diag.clear();
    s.cond2_diag.clear();
    for (int n = 1; n < n_levels; ++n)
        s.cond1_diag.push_back(n * n * std::log(r[n - 1]) / std::log(r[n]));
    for (int n = 1; n + 1 < n_levels; ++n)
        s.cond2_diag.push_back(std::log(-std::log(r[n + 1])) / (-std::log(r[n])));
}

} // namespace

const char* kind_name(SequenceKind k) {
    switch (k) {
    case SequenceKind::paper_double_exp: return "paper_double_exp";
    case SequenceKind::geometric_power: return "geometric_power";
    case SequenceKind::custom: return "custom";
    }
    return "unknown";
}

ScaleSequence make_sequence(SequenceKind kind, const SequenceParams& params) {
    if (!(params.floor > 0.0) || params.floor >= 1.0)
        throw validation_error("sequence: underflow floor must lie in (0, 1)");
    if (params.n_max < 0)
        throw validation_error("sequence: n_max must be >= 0");

    ScaleSequence s;
    s.kind = kind;
    const double ln_floor = std::log(params.floor);

    switch (kind) {
    case SequenceKind::paper_double_exp: {
        const double ln2 = std::log(2.0);
        for (int n = 0; n <= params.n_max; ++n) {
            // r_n = 2^{-(2^{n^2} - 1)}; decide representability in logs
            double expo = std::exp2(static_cast<double>(n) * n) - 1.0;
            if (-expo * ln2 < ln_floor)
                break;
            s.radii.push_back(std::ldexp(1.0, -static_cast<int>(expo)));
        }
        break;
    }
    case SequenceKind::geometric_power: {
        if (!(params.rho > 0.0) || params.rho >= 1.0)
            throw validation_error("sequence: geometric_power requires rho in (0, 1)");
        if (!(params.c > 1.0))
            throw validation_error("sequence: geometric_power requires c > 1");
        s.radii.push_back(1.0);
        const double ln_rho = std::log(params.rho);
        for (int n = 1; n <= params.n_max; ++n) {
            const double expo = std::pow(params.c, n);
            if (expo * ln_rho < ln_floor)
                break;
            // direct pow keeps exactly-representable values exact
            // (e.g. rho = 1/2, c = 2, n = 3 gives 0.00390625)
            s.radii.push_back(std::pow(params.rho, expo));
        }
        break;
    }
    case SequenceKind::custom: {
        const auto& r = params.custom_radii;
        if (r.empty() || r.front() != 1.0)
            throw validation_error("sequence: custom radii must start at r_0 = 1");
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (!std::isfinite(r[i]) || r[i] <= 0.0 || r[i] > 1.0)
                throw validation_error("sequence: custom radii must lie in (0, 1]");
            if (i > 0 && r[i] >= r[i - 1])
                throw validation_error("sequence: custom radii must be strictly decreasing");
            if (r[i] < params.floor)
                throw validation_error("sequence: custom radius below the underflow floor");
        }
        s.radii = r;
        break;
    }
    }
    if (s.radii.empty())
        throw validation_error("sequence: no representable radii");
    fill_diagnostics(s);
    return s;
}

SequenceDiagnostics validate_sequence(const ScaleSequence& s) {
    if (s.max_level() < 2)
        throw validation_error("validate_sequence requires N >= 2");
    SequenceDiagnostics d;
    // the n = 1 entry of condition 1 is identically 0 (ln r_0 = 0); decay
    // is judged on the informative prefix
    const auto& c1 = s.cond1_diag;
    const auto& c2 = s.cond2_diag;
    d.max_cond1 = *std::max_element(c1.begin(), c1.end());
    d.max_cond2 = *std::max_element(c2.begin(), c2.end());
    if (c1.size() >= 3)
        d.cond1_decaying = c1.back() <= c1[1] * (1.0 + 1e-12);
    if (c2.size() >= 2)
        d.cond2_decaying = c2.back() <= c2.front() * (1.0 + 1e-12);
    d.pass = d.cond1_decaying && d.cond2_decaying;
    return d;
}

} // namespace gff::seq
