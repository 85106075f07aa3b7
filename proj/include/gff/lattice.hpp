#pragma once

// Multi-level midpoint lattices over the cube S(O,1) = [-1,1]^nu. Level n
// uses per-axis count min(ceil(1/r_n), cap-implied), giving cell side
// ~2 r_n; the ideal cell count K_n = r_n^{-nu} is recorded alongside the
// realized (capped) one.

#include <cstdint>
#include <vector>

#include "gff/kernels.hpp"
#include "gff/sequence.hpp"

namespace gff::lat {

struct LatticeLevel {
    int level = 0;
    double radius = 1.0;
    std::int64_t per_axis = 1;       // realized centers per axis
    double cell_size = 2.0;          // 2 / per_axis
    std::int64_t count = 1;          // per_axis^nu
    double ideal_count = 1.0;        // r^{-nu}, may overflow to inf
    double ideal_count_log10 = 0.0;  // always finite
};

struct MultiLattice {
    int nu = 3;
    std::int64_t per_level_cap = 0;
    std::vector<LatticeLevel> levels;

    // center coordinates of cell idx (base-per_axis digits) at level lev
    std::vector<double> center(int lev, std::int64_t idx) const;
};

// Build the nested lattice family for all levels of the sequence.
// per_level_cap must be >= 2^nu.
MultiLattice build_lattice(const kernels::KernelConfig& cfg, const seq::ScaleSequence& s,
                           std::int64_t per_level_cap);

struct LatticePoint {
    int level = 0;
    std::int64_t cell = 0;
    double radius = 1.0;
    std::vector<double> pos;
};

// all (level, cell) points with level in [lo, hi]
std::vector<LatticePoint> window_points(const MultiLattice& ml, int lo, int hi);

// the centers of level `lev`, each carrying every radius r_0..r_lev
// (per-point scale stacks for increment-based detectors)
std::vector<LatticePoint> stack_points(const MultiLattice& ml, int lev);

} // namespace gff::lat
