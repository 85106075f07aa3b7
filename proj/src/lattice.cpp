#include "gff/lattice.hpp"

#include <cmath>

#include "gff/errors.hpp"

namespace gff::lat {

namespace {

// largest m with m^nu <= cap (integer-safe)
std::int64_t cap_per_axis(std::int64_t cap, int nu) {
    std::int64_t m = static_cast<std::int64_t>(std::floor(std::pow(static_cast<double>(cap), 1.0 / nu)));
    auto pow_ok = [nu, cap](std::int64_t mm) {
        std::int64_t v = 1;
        for (int k = 0; k < nu; ++k) {
            if (mm != 0 && v > cap / mm)
                return false;
            v *= mm;
        }
        return v <= cap;
    };
    while (m > 1 && !pow_ok(m))
        --m;
    while (pow_ok(m + 1))
        ++m;
    return m;
}

} // namespace

std::vector<double> MultiLattice::center(int lev, std::int64_t idx) const {
    if (lev < 0 || lev >= static_cast<int>(levels.size()))
        throw domain_error("lattice center: level out of range");
    const LatticeLevel& L = levels[lev];
    if (idx < 0 || idx >= L.count)
        throw domain_error("lattice center: cell index out of range");
    std::vector<double> x(nu);
    for (int k = 0; k < nu; ++k) {
        std::int64_t digit = idx % L.per_axis;
        idx /= L.per_axis;
        // midpoint of cell `digit` along axis k of [-1, 1]
        x[k] = -1.0 + (2.0 * digit + 1.0) / static_cast<double>(L.per_axis);
    }
    return x;
}

MultiLattice build_lattice(const kernels::KernelConfig& cfg, const seq::ScaleSequence& s,
                           std::int64_t per_level_cap) {
    cfg.validate();
    std::int64_t min_cap = 1;
    for (int k = 0; k < cfg.nu; ++k)
        min_cap *= 2;
    if (per_level_cap < min_cap)
        throw validation_error("build_lattice: per_level_cap must be >= 2^nu");

    MultiLattice ml;
    ml.nu = cfg.nu;
    ml.per_level_cap = per_level_cap;
    const std::int64_t m_cap = cap_per_axis(per_level_cap, cfg.nu);

    for (int n = 0; n < static_cast<int>(s.radii.size()); ++n) {
        double r = s.radii[n];
        LatticeLevel L;
        L.level = n;
        L.radius = r;
        double inv = 1.0 / r;
        std::int64_t ideal_m;
        if (inv > 9e17) {
            ideal_m = m_cap;  // beyond int64: the cap decides anyway
        } else {
            ideal_m = static_cast<std::int64_t>(std::ceil(inv - 1e-12));
            if (ideal_m < 1)
                ideal_m = 1;
        }
        L.per_axis = std::min(ideal_m, m_cap);
        L.cell_size = 2.0 / static_cast<double>(L.per_axis);
        L.count = 1;
        for (int k = 0; k < cfg.nu; ++k)
            L.count *= L.per_axis;
        L.ideal_count = std::pow(r, -static_cast<double>(cfg.nu));
        L.ideal_count_log10 = -cfg.nu * std::log10(r);
        ml.levels.push_back(L);
    }
    return ml;
}

std::vector<LatticePoint> window_points(const MultiLattice& ml, int lo, int hi) {
    if (lo < 0 || hi >= static_cast<int>(ml.levels.size()) || lo > hi)
        throw validation_error("window_points: invalid level window");
    std::vector<LatticePoint> pts;
    for (int n = lo; n <= hi; ++n) {
        const LatticeLevel& L = ml.levels[n];
        for (std::int64_t j = 0; j < L.count; ++j)
            pts.push_back(LatticePoint{n, j, L.radius, ml.center(n, j)});
    }
    return pts;
}

std::vector<LatticePoint> stack_points(const MultiLattice& ml, int lev) {
    if (lev < 0 || lev >= static_cast<int>(ml.levels.size()))
        throw validation_error("stack_points: level out of range");
    const LatticeLevel& L = ml.levels[lev];
    std::vector<LatticePoint> pts;
    for (std::int64_t j = 0; j < L.count; ++j) {
        std::vector<double> x = ml.center(lev, j);
        for (int n = 0; n <= lev; ++n)
            pts.push_back(LatticePoint{n, j, ml.levels[n].radius, x});
    }
    return pts;
}

} // namespace gff::lat
