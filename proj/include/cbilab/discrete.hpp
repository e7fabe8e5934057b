#pragma once

#include <cstdint>
#include <vector>

#include "cbilab/rng.hpp"
#include "json.hpp"

namespace cbilab {

/// Law on {0, 1, 2, ...}: a finite pmf, Poisson(mean) or Geometric(p) with
/// P(j) = p (1-p)^j.
struct DiscreteLaw {
    enum class Kind { Finite, Poisson, Geometric };
    Kind kind = Kind::Finite;
    std::vector<double> pmf{1.0};
    double param = 0.0;

    static DiscreteLaw finite(std::vector<double> pmf);
    static DiscreteLaw dirac(long long j);
    static DiscreteLaw bernoulli(double p);
    static DiscreteLaw poisson(double mean);
    static DiscreteLaw geometric(double p);

    /// Throws InvalidArgument unless the masses are >= 0 and sum to 1 within 1e-12.
    void validate() const;
    double prob(long long j) const;
    double mean() const;
    double variance() const;
    long long min_support() const;
    /// -1 for unbounded support.
    long long max_support() const;
    /// gcd of the differences between support points (0 for a point mass).
    long long support_gcd() const;

    long long sample(Stream& rng) const;
    /// Sum of `count` independent draws, sampled in aggregate.
    long long sample_sum(long long count, Stream& rng) const;

    bool operator==(const DiscreteLaw&) const = default;
};

struct GwiConfig {
    DiscreteLaw offspring;
    DiscreteLaw immigration = DiscreteLaw::dirac(0);
    long long initial = 1;

    void validate() const;
};

/// Breadth-first walk x (steps chi - 1 >= -1) and immigration walk y (steps
/// >= 0), both starting at 0.
struct WalkPair {
    std::vector<long long> x{0};
    std::vector<long long> y{0};

    /// x from child counts and y from immigrant counts.
    static WalkPair from_counts(const std::vector<long long>& children, const std::vector<long long>& immigrants);
    void validate() const;
};

struct LampertiResult {
    std::vector<long long> z;  // generation sizes, z[0] = k
    std::vector<long long> c;  // c[n] = z[0] + ... + z[n]
    bool truncated = false;    // x was too short to continue
};

/// z_{n+1} = k + x_{c_n} + y_{n+1}, c_{n+1} = c_n + z_{n+1}, with c_0 = z_0 = k.
/// y is held constant past its end. Stops after max_generations steps, when x
/// is exhausted (truncated), or when z reaches 0 with y exhausted (z stays 0).
LampertiResult discrete_lamperti(const WalkPair& walks, long long k, std::size_t max_generations = 1'000'000);

/// Generation-by-generation simulation with one draw per individual. Child
/// counts come from stream (seed, 0) in breadth-first order and immigrant
/// counts from stream (seed, 1), so draw_walks with the same seed couples.
std::vector<long long> simulate_gwi_direct(const GwiConfig& cfg, std::size_t generations, std::uint64_t seed);

/// Walks built from the same streams simulate_gwi_direct reads.
WalkPair draw_walks(const GwiConfig& cfg, std::size_t children, std::size_t immigrants, std::uint64_t seed);

/// Same law as simulate_gwi_direct, drawing each generation's offspring total
/// in one aggregate draw. Uses `rng` as given.
std::vector<long long> simulate_gwi_aggregated(const GwiConfig& cfg, std::size_t generations, Stream& rng);

struct BridgeWalk {
    std::vector<long long> steps;   // eta_i = chi_i - 1
    std::size_t valid_rotations = 0;
    std::size_t rotation = 0;       // index the returned walk starts from
    std::uint64_t attempts = 0;     // rejection attempts (1 for the exact path)
};

/// Offspring walk of length n conditioned to first hit -k at step n: steps
/// conditioned on summing to -k (exact multinomial for Poisson laws,
/// rejection otherwise), then a uniformly chosen rotation among the k that
/// are first-passage paths. Throws InfeasibleError or BudgetExceeded.
BridgeWalk first_passage_bridge_walk(const DiscreteLaw& mu, long long k, long long n, std::uint64_t seed,
                                     std::uint64_t budget = 1'000'000, std::uint64_t stream = 0);

/// Generation sizes of a GW tree with k roots conditioned on total progeny n
/// (sum of z equals n, roots included).
std::vector<long long> conditioned_gw(const DiscreteLaw& mu, long long k, long long n, std::uint64_t seed,
                                      std::uint64_t budget = 1'000'000, std::uint64_t stream = 0);

nlohmann::json to_json(const DiscreteLaw& law);
/// {"kind":"poisson","mean":m} | {"kind":"geometric","p":p} |
/// {"kind":"finite","pmf":[...]} | {"kind":"dirac","value":j} | {"kind":"bernoulli","p":p}
DiscreteLaw discrete_law_from_json(const nlohmann::json& spec);

}  // namespace cbilab
