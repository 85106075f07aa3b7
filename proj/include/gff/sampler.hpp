#pragma once

// Exact joint Gaussian sampling of the renormalized spherical averages:
// dense covariance assembly over lattice point sets (Cholesky with jitter
// escalation) and the fast independent-increment path for the concentric
// process. Replica streams are derived from a 64-bit master seed as
//   stream(seed, k) = splitmix64(seed XOR (k+1) * 0x9E3779B97F4A7C15)
// feeding std::mt19937_64, with Gaussians from Box-Muller (no rejection),
// so any implementation can reproduce the partition of randomness.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gff/kernels.hpp"
#include "gff/lattice.hpp"
#include "gff/sequence.hpp"

namespace gff::sampler {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

// deterministic standard-normal stream (mt19937_64 + Box-Muller)
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}
    double next();

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
    double uniform01();  // strictly inside (0,1)
};

struct ConcentricPaths {
    std::vector<double> radii;  // r_0 .. r_N
    int n_paths = 0;
    std::vector<double> values;  // row-major: path * (N+1) + level
    double at(int path, int level) const {
        return values[static_cast<std::size_t>(path) * radii.size() + level];
    }
};

// independent-increment sampler for the concentric process at one center
// (p = 1): theta_0 ~ N(0, G(1)), increments N(0, G(r_n) - G(r_{n-1}))
ConcentricPaths sample_concentric(const kernels::KernelConfig& cfg, const seq::ScaleSequence& s,
                                  int n_paths, std::uint64_t seed);

// dense covariance over an explicit point list; entries via cov_general
// with (t, s, dist) memoization; exactly symmetric; diagonal = G(r)
Eigen::MatrixXd assemble_covariance(const kernels::KernelConfig& cfg,
                                    const std::vector<lat::LatticePoint>& pts,
                                    std::int64_t max_points = 4096);

// convenience wrapper over a level window of a lattice
Eigen::MatrixXd assemble_covariance(const kernels::KernelConfig& cfg, const lat::MultiLattice& ml,
                                    int level_lo, int level_hi, std::int64_t max_points = 4096);

struct FieldSample {
    std::uint64_t seed = 0;
    int replica_id = 0;
    std::vector<double> values;  // aligned with the point list used for cov
};

// Cholesky factor with jitter escalation (eps * max-diag * I for
// eps in {0, 1e-12, 1e-10, 1e-8, 1e-6}); throws numerical_error with the
// most negative eigenvalue estimate if the ladder fails.
Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov);

// replicas of L * z with z standard normal from the replica's own stream;
// deterministic given (seed, replica ordering)
std::vector<FieldSample> sample_field(const Eigen::MatrixXd& cov, std::uint64_t seed,
                                      int n_replicas);

// median over paths of max_n |theta_n| / sqrt(2 G(r_n) ln ln G(r_n)),
// the discrete iterated-logarithm ratio; levels with G(r_n) <= e are
// skipped (the normalization is only defined once ln ln G > 0)
double lil_median_statistic(const kernels::KernelConfig& cfg, const ConcentricPaths& paths);

// two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|
double ks_two_sample(std::vector<double> a, std::vector<double> b);

} // namespace gff::sampler
