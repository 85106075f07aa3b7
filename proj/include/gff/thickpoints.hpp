#pragma once

// Thick-point machinery: finite-level detectors (limsup / sequential /
// perfect surrogates), the per-level pinning events and their exact
// Gaussian probabilities, the upper-bound cell scheme, shift-energy
// diagnostics of the Cameron-Martin direction, and box-counting dimension
// estimation over detected point sets.
//
// All detectors operate on "stack fields": joint samples of the running
// averages theta_bar_{r_i}(x_c) for every center x_c of one lattice level
// and every radius r_0..r_N of the scale ladder. The asymptotic
// definitions are replaced by explicit finite surrogates (max over a
// window of finest levels for limsup; all-levels-within-tol for limits);
// window and tol are configuration, never hidden constants.

#include <cstdint>
#include <vector>

#include "gff/kernels.hpp"
#include "gff/lattice.hpp"
#include "gff/sequence.hpp"

namespace gff::thick {

struct ThickConfig {
    double gamma = 0.5;  // thickness parameter, >= 0
    double tol = 0.05;   // detector tolerance
    int window = 3;      // number of finest levels inspected
};

// detection threshold sqrt(2 nu gamma)
double threshold(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg);

// theta_bar / D(t); requires t in (0,1) since D(1) = 0
double ratio(const kernels::KernelConfig& kcfg, double theta_bar, double t);

// joint sample of the scale stacks over the centers of one lattice level
struct LevelField {
    std::vector<double> radii;                 // r_0 .. r_N, decreasing, r_0 = 1
    std::vector<std::vector<double>> centers;  // coordinates; may be empty for synthetic fields
    std::int64_t n_centers = 0;
    std::vector<double> values;                // center-major: c * (N+1) + i

    double at(std::int64_t c, int i) const {
        return values[static_cast<std::size_t>(c) * radii.size() + static_cast<std::size_t>(i)];
    }
    int depth() const { return static_cast<int>(radii.size()) - 1; }
};

// replicas of the joint Gaussian over stack_points(ml, lev); one dense
// factorization shared by all replicas
std::vector<LevelField> sample_stack_fields(const kernels::KernelConfig& kcfg,
                                            const lat::MultiLattice& ml, int lev,
                                            std::uint64_t seed, int n_replicas,
                                            std::int64_t max_points = 4096);

enum class DetectMode { limsup, sequential, perfect_surrogate };
const char* mode_name(DetectMode m);

struct ThickPointReport {
    DetectMode mode = DetectMode::limsup;
    double gamma = 0.0;
    double threshold = 0.0;
    double tol = 0.0;
    int window = 0;
    std::int64_t n_centers = 0;
    std::vector<std::int64_t> flagged;  // cell indices at the field's level
};

// flag centers whose max ratio over the window of finest levels reaches
// threshold - tol (finite surrogate of the limsup criterion)
ThickPointReport detect_limsup(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                               const LevelField& field);

// flag centers whose ratios at ALL window levels lie within tol of the
// threshold (finite surrogate of the limit along the sequence)
ThickPointReport detect_sequential(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                                   const LevelField& field);

// centers whose pinning events hold at every level up to n (default: the
// field depth): |theta_0 - a D(r_0)| <= sqrt(G(r_0)) and
// |delta_i - a dD_i| <= sqrt(dG_i) for 1 <= i <= n, with a = sqrt(2 nu gamma)
std::vector<std::int64_t> xi_set(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                                 const LevelField& field, int n = -1);

// the whole prefix family: element n holds the xi_set for depth n
std::vector<std::vector<std::int64_t>> xi_sets(const kernels::KernelConfig& kcfg,
                                               const ThickConfig& tcfg, const LevelField& field);

// upper-bound scheme: centers whose max ratio over radii in
// [r_N, 2 r_N] (excluding r = 1) exceeds sqrt(2 nu gamma_prime)
std::vector<std::int64_t> upper_bound_cells(const kernels::KernelConfig& kcfg,
                                            double gamma_prime, const LevelField& field);

// count of centers within tol of the threshold at ALL of the tcfg.window
// finest levels; evidence scan for the perfect-thick-point emptiness.
// Requires gamma > 0, window >= 2, and a field with >= 6 levels.
std::int64_t perfect_surrogate_count(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                                     const LevelField& field);

// exact Gaussian probability of the level-n pinning event:
// Phi(b+1) - Phi(b-1) with b = sqrt(2 nu gamma) dD_n / sqrt(dG_n)
// (b = 0 at n = 0 since D(r_0) = D(1) = 0); stable in log scale for any b
double pin_offset(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                  const seq::ScaleSequence& s, int n);  // the offset b
double ln_prob_P(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                 const seq::ScaleSequence& s, int n);
double prob_P(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
              const seq::ScaleSequence& s, int n);
double ln_prob_Phi(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                   const seq::ScaleSequence& s, int n);
double prob_Phi(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                const seq::ScaleSequence& s, int n);

struct ProbEstimates {
    std::vector<double> b;        // pin offsets, n = 0..N
    std::vector<double> ln_p;     // ln W(P_n)
    std::vector<double> p;        // W(P_n), may underflow to 0 for huge b
    std::vector<double> ln_phi;   // ln W(Phi_n) = partial sums
    std::vector<double> phi;      // W(Phi_n)
    std::vector<double> c_fit;    // |ln W(P_n) - nu gamma ln r_n| / sqrt(-ln r_n), n >= 1
    double c_max = 0.0;
    double c_min = 0.0;
    double c_ratio = 0.0;         // c_max / c_min
};

ProbEstimates prob_estimates(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                             const seq::ScaleSequence& s);

struct BoxDimension {
    bool applicable = false;  // false iff the point set is empty
    double estimate = 0.0;
    double ci_half_width = 0.0;  // standard error of the fitted slope
    std::int64_t n_points = 0;
    std::vector<std::int64_t> box_counts;  // per scale
};

// least-squares slope of ln(box count) vs -ln(scale) over the half-open
// axis-aligned partition of [-1,1]^d at each scale
BoxDimension box_dimension(const std::vector<std::vector<double>>& points,
                           const std::vector<double>& scales);

struct ShiftEnergy {
    double energy = 0.0;    // integral of (-D')(t) F(t) dt over [s_cur, s_prev]
    double boundary = 0.0;  // F(s_prev) D(s_prev) = (I_mu K_mu(s_prev) - ln s_prev)/2
};

// Cameron-Martin energy of the shift profile between two radii,
// integrated in u = -ln t where the integrand is smooth:
//   energy = int (u + IK(e^-u))^2 / (4 u IK(e^-u)) du,  IK = I_mu K_mu
ShiftEnergy shift_energy(const kernels::KernelConfig& kcfg, double s_prev, double s_cur);

struct DimensionResult {
    double estimate = 0.0;        // mean over applicable replicas
    double ci_half_width = 0.0;   // 1.96 * SE of the mean
    int replicas = 0;             // requested
    int applicable = 0;           // replicas with nonempty detection
    std::int64_t total_flagged = 0;
    std::vector<double> per_replica;  // estimates of applicable replicas
    std::vector<double> scales;       // box scales used
};

// detection-based box dimension over replicas: sample stack fields at
// level `lev`, detect (limsup mode), box-count the flagged centers at the
// realized cell sizes of levels 1..lev
DimensionResult estimate_dimension(const kernels::KernelConfig& kcfg, const ThickConfig& tcfg,
                                   const lat::MultiLattice& ml, int lev, std::uint64_t seed,
                                   int n_replicas, std::int64_t max_points = 4096);

} // namespace gff::thick
