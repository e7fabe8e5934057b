#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cbilab/discrete.hpp"
#include "cbilab/mechanisms.hpp"
#include "cbilab/rng.hpp"
#include "json.hpp"

namespace cbilab {

/// Runs fn(rep) for rep = 0..n-1 on `threads` workers (0 = hardware
/// concurrency). Results are stored by replication index, so the output does
/// not depend on the worker count.
std::vector<double> run_replications(std::size_t n, unsigned threads, const std::function<double(std::size_t)>& fn);

/// Profile of one simulated CBI path at the Euler grid t_i = i sigma.
struct CbiPath {
    double sigma = 0.0;
    std::vector<double> times;
    std::vector<double> z;  // +inf from the explosion time on
    std::vector<double> c;  // cumulative population at the grid times
    bool exploded = false;
    double explosion_time = std::numeric_limits<double>::infinity();
};

/// Euler scheme of span sigma for c' = [X(c) + x + Y(t)]^+ with X served
/// lazily at the non-decreasing arguments c(t_{i-1}) and Y sampled at the grid
/// times; z_i = [X(c(t_i)) + x + Y(t_i)]^+. X and Y use streams
/// (seed, stream_id(rep, X)) and (seed, stream_id(rep, Y)).
CbiPath simulate_cbi_path(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double x, double horizon,
                          double sigma, std::uint64_t seed, std::uint64_t rep = 0, double ceiling = 1e12);

/// Test fixture: X is sampled once on the value grid j * spacing up to c_max
/// and linearly interpolated (+inf past c_max), so runs that differ only in x
/// share the same driver function.
CbiPath simulate_cbi_path_pinned(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double x,
                                 double horizon, double sigma, std::uint64_t seed, double spacing, double c_max,
                                 std::uint64_t rep = 0);

/// e^{-lambda z} with the limits 1{z < inf} at lambda = 0 and 1{z = 0} at
/// lambda = inf.
double laplace_weight(double lambda, double z);

struct McReport {
    std::string experiment;
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::size_t n_replications = 0;
    std::uint64_t master_seed = 0;
    double oracle = 0.0;
    double statistical_tolerance = 0.0;      // 3 * stderr
    double discretization_allowance = 0.0;   // K * sigma
    bool passed = false;
    nlohmann::json metadata = nlohmann::json::object();

    double difference() const { return estimate - oracle; }
    double tolerance() const { return statistical_tolerance + discretization_allowance; }
};

nlohmann::json to_json(const McReport& report);

struct VerifyOptions {
    double k_disc = 1.0;
    unsigned threads = 0;
    double oracle_step = 1e-3;
    double ceiling = 1e12;
};

/// Mean of e^{-lambda Z_t} over n independent Euler paths against
/// cbi_laplace; passes iff |difference| <= 3 stderr + k_disc * sigma.
McReport verify_laplace(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double x, double t,
                        double lambda, std::size_t n, double sigma, std::uint64_t master_seed,
                        const VerifyOptions& opts = {});

/// Normalizations a_n = a_coef n^a_exponent and b_n = b_coef n^b_exponent
/// with X^n_{a_n} / n and Y^n_{b_n} / n converging, k_n = round(x n).
struct GwiScaling {
    double x = 1.0;
    double a_coef = 1.0;
    double a_exponent = 2.0;
    double b_coef = 1.0;
    double b_exponent = 1.0;
};

struct GwiLevel {
    std::size_t n = 0;
    long long k_n = 0;
    double e_n = 0.0;
    std::size_t generation = 0;  // floor(e_n t)
    double estimate = 0.0;
    double stderr_ = 0.0;
    double gap = 0.0;            // |estimate - oracle|
};

struct GwiReport {
    std::vector<GwiLevel> levels;
    double oracle = 0.0;
    /// c in the first regime; +inf selects the second regime (target CB(Psi)).
    double c = 0.0;
    bool trend_ok = false;  // gap at the largest n below gap at the smallest n
    std::uint64_t master_seed = 0;
    nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json to_json(const GwiReport& report);

/// Laplace value at (t, lambda) of S^{k_n/x}_{e_n} Z^n for each n, where Z^n
/// is the GWI(mu, nu) started at k_n, against cbi_laplace of the limit. The
/// regime follows from the growth of k_n b_m / (x a_m), m = floor(k_n / x);
/// psi and phi are the limit exponents of the rescaled walks.
GwiReport gwi_scaling_experiment(const DiscreteLaw& mu, const DiscreteLaw& nu, const GwiScaling& scaling,
                                 const std::vector<std::size_t>& ns, const BranchingMechanism& psi,
                                 const ImmigrationMechanism& phi, double t, double lambda, std::size_t samples,
                                 std::uint64_t master_seed, unsigned threads = 0);

struct PitmanOptions {
    double a_coef = 1.0;
    double a_exponent = 0.5;  // a_n = a_coef n^a_exponent
    std::size_t samples = 2000;
    std::vector<double> times{0.25, 0.5, 1.0};
    double ks_time = 0.5;
    std::uint64_t budget = 1'000'000;
    unsigned threads = 0;
};

struct PitmanLevel {
    std::size_t n = 0;
    long long k_n = 0;
    double a_n = 0.0;
    double scaled_max_mean = 0.0;
    double scaled_max_stderr = 0.0;
    double scaled_total_mean = 0.0;  // (a_n / n) * sum of scaled generations; 1 exactly
    std::vector<double> profile_means;
    double ks_to_largest = 0.0;      // KS distance of Z_{ks_time} samples to the largest n
    std::vector<double> ks_samples;
};

struct PitmanReport {
    std::vector<PitmanLevel> levels;
    std::vector<double> times;
    double ks_time = 0.0;
    bool trend_ok = false;  // KS of the second-largest n below KS of the smallest
    std::uint64_t master_seed = 0;
};

nlohmann::json to_json(const PitmanReport& report);

/// Samples S^{a_n}_{n/a_n} Z^n, Z^n a GW(mu) tree with k_n = round(l a_n)
/// roots conditioned on total progeny n, and summarizes each n.
PitmanReport pitman_experiment(const DiscreteLaw& mu, double l, const std::vector<std::size_t>& ns,
                               std::uint64_t master_seed, const PitmanOptions& opts = {});

}  // namespace cbilab
