#include "cbilab/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

#include "cbilab/errors.hpp"

namespace cbilab {

DiscreteLaw DiscreteLaw::finite(std::vector<double> pmf) {
    DiscreteLaw law;
    law.kind = Kind::Finite;
    law.pmf = std::move(pmf);
    law.validate();
    return law;
}

DiscreteLaw DiscreteLaw::dirac(long long j) {
    if (j < 0) throw InvalidArgument("point mass must sit on a non-negative integer");
    std::vector<double> pmf(static_cast<std::size_t>(j) + 1, 0.0);
    pmf.back() = 1.0;
    return finite(std::move(pmf));
}

DiscreteLaw DiscreteLaw::bernoulli(double p) { return finite({1.0 - p, p}); }

DiscreteLaw DiscreteLaw::poisson(double mean) {
    DiscreteLaw law;
    law.kind = Kind::Poisson;
    law.pmf.clear();
    law.param = mean;
    law.validate();
    return law;
}

DiscreteLaw DiscreteLaw::geometric(double p) {
    DiscreteLaw law;
    law.kind = Kind::Geometric;
    law.pmf.clear();
    law.param = p;
    law.validate();
    return law;
}

void DiscreteLaw::validate() const {
    switch (kind) {
        case Kind::Finite: {
            if (pmf.empty()) throw InvalidArgument("finite law needs at least one mass");
            double sum = 0.0;
            for (double p : pmf) {
                if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("probability masses must be finite and >= 0");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12) throw InvalidArgument("probability masses must sum to 1 within 1e-12");
            return;
        }
        case Kind::Poisson:
            if (!(param >= 0.0) || !std::isfinite(param)) throw InvalidArgument("Poisson mean must be finite and >= 0");
            return;
        case Kind::Geometric:
            if (!(param > 0.0 && param <= 1.0)) throw InvalidArgument("geometric parameter must lie in (0, 1]");
            return;
    }
}

double DiscreteLaw::prob(long long j) const {
    if (j < 0) return 0.0;
    switch (kind) {
        case Kind::Finite: return static_cast<std::size_t>(j) < pmf.size() ? pmf[static_cast<std::size_t>(j)] : 0.0;
        case Kind::Poisson:
            if (param == 0.0) return j == 0 ? 1.0 : 0.0;
            return std::exp(static_cast<double>(j) * std::log(param) - param - std::lgamma(static_cast<double>(j) + 1.0));
        case Kind::Geometric: return param * std::pow(1.0 - param, static_cast<double>(j));
    }
    return 0.0;
}

double DiscreteLaw::mean() const {
    switch (kind) {
        case Kind::Finite: {
            double m = 0.0;
            for (std::size_t j = 0; j < pmf.size(); ++j) m += static_cast<double>(j) * pmf[j];
            return m;
        }
        case Kind::Poisson: return param;
        case Kind::Geometric: return (1.0 - param) / param;
    }
    return 0.0;
}

double DiscreteLaw::variance() const {
    switch (kind) {
        case Kind::Finite: {
            const double m = mean();
            double v = 0.0;
            for (std::size_t j = 0; j < pmf.size(); ++j) v += (static_cast<double>(j) - m) * (static_cast<double>(j) - m) * pmf[j];
            return v;
        }
        case Kind::Poisson: return param;
        case Kind::Geometric: return (1.0 - param) / (param * param);
    }
    return 0.0;
}

long long DiscreteLaw::min_support() const {
    if (kind != Kind::Finite) return 0;
    for (std::size_t j = 0; j < pmf.size(); ++j)
        if (pmf[j] > 0.0) return static_cast<long long>(j);
    return 0;
}

long long DiscreteLaw::max_support() const {
    if (kind == Kind::Poisson) return param == 0.0 ? 0 : -1;
    if (kind == Kind::Geometric) return param == 1.0 ? 0 : -1;
    for (std::size_t j = pmf.size(); j-- > 0;)
        if (pmf[j] > 0.0) return static_cast<long long>(j);
    return 0;
}

long long DiscreteLaw::support_gcd() const {
    if (kind != Kind::Finite) return max_support() == 0 ? 0 : 1;
    const long long lo = min_support();
    long long g = 0;
    for (std::size_t j = 0; j < pmf.size(); ++j)
        if (pmf[j] > 0.0) g = std::gcd(g, static_cast<long long>(j) - lo);
    return g;
}

long long DiscreteLaw::sample(Stream& rng) const {
    switch (kind) {
        case Kind::Finite: return std::discrete_distribution<long long>(pmf.begin(), pmf.end())(rng);
        case Kind::Poisson: return param == 0.0 ? 0 : std::poisson_distribution<long long>(param)(rng);
        case Kind::Geometric: return param == 1.0 ? 0 : std::geometric_distribution<long long>(param)(rng);
    }
    return 0;
}

long long DiscreteLaw::sample_sum(long long count, Stream& rng) const {
    if (count <= 0) return 0;
    switch (kind) {
        case Kind::Poisson: {
            const double m = static_cast<double>(count) * param;
            return m == 0.0 ? 0 : std::poisson_distribution<long long>(m)(rng);
        }
        case Kind::Geometric:
            return param == 1.0 ? 0 : std::negative_binomial_distribution<long long>(count, param)(rng);
        case Kind::Finite: {
            // Multinomial counts by sequential binomials.
            const long long top = max_support();
            long long remaining = count, total = 0;
            double mass_left = 1.0;
            for (long long j = 0; j <= top && remaining > 0; ++j) {
                const double p = pmf[static_cast<std::size_t>(j)];
                if (p == 0.0) continue;
                long long n_j;
                if (j == top) {
                    n_j = remaining;
                } else {
                    const double q = std::clamp(p / mass_left, 0.0, 1.0);
                    n_j = std::binomial_distribution<long long>(remaining, q)(rng);
                }
                total += j * n_j;
                remaining -= n_j;
                mass_left -= p;
            }
            return total;
        }
    }
    return 0;
}

void GwiConfig::validate() const {
    offspring.validate();
    immigration.validate();
    if (initial < 0) throw InvalidArgument("initial population must be >= 0");
}

WalkPair WalkPair::from_counts(const std::vector<long long>& children, const std::vector<long long>& immigrants) {
    WalkPair w;
    for (long long chi : children) w.x.push_back(w.x.back() + chi - 1);
    for (long long i : immigrants) w.y.push_back(w.y.back() + i);
    w.validate();
    return w;
}

void WalkPair::validate() const {
    if (x.empty() || y.empty() || x.front() != 0 || y.front() != 0)
        throw InvalidArgument("walks must start at 0");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i] - x[i - 1] < -1) throw InvalidArgument("breadth-first walk steps must be >= -1");
    for (std::size_t i = 1; i < y.size(); ++i)
        if (y[i] < y[i - 1]) throw InvalidArgument("immigration walk must be non-decreasing");
}

LampertiResult discrete_lamperti(const WalkPair& walks, long long k, std::size_t max_generations) {
    walks.validate();
    if (k < 0) throw InvalidArgument("initial population must be >= 0");
    LampertiResult out;
    out.z.push_back(k);
    out.c.push_back(k);
    const std::size_t y_end = walks.y.size() - 1;
    for (std::size_t n = 0; n < max_generations; ++n) {
        const long long c = out.c.back();
        if (static_cast<std::size_t>(c) >= walks.x.size()) {
            out.truncated = true;
            break;
        }
        const long long y = walks.y[std::min(n + 1, y_end)];
        const long long z = k + walks.x[static_cast<std::size_t>(c)] + y;
        if (z < 0) throw std::logic_error("discrete Lamperti recursion produced a negative generation");
        out.z.push_back(z);
        out.c.push_back(c + z);
        if (z == 0 && n + 1 >= y_end) break;
    }
    return out;
}

std::vector<long long> simulate_gwi_direct(const GwiConfig& cfg, std::size_t generations, std::uint64_t seed) {
    cfg.validate();
    Stream children(seed, 0);
    Stream immigrants(seed, 1);
    std::vector<long long> z{cfg.initial};
    for (std::size_t n = 0; n < generations; ++n) {
        long long next = 0;
        for (long long j = 0; j < z.back(); ++j) next += cfg.offspring.sample(children);
        next += cfg.immigration.sample(immigrants);
        z.push_back(next);
    }
    return z;
}

WalkPair draw_walks(const GwiConfig& cfg, std::size_t children, std::size_t immigrants, std::uint64_t seed) {
    cfg.validate();
    Stream child_rng(seed, 0);
    Stream imm_rng(seed, 1);
    std::vector<long long> chi(children), imm(immigrants);
    for (auto& c : chi) c = cfg.offspring.sample(child_rng);
    for (auto& i : imm) i = cfg.immigration.sample(imm_rng);
    return WalkPair::from_counts(chi, imm);
}

std::vector<long long> simulate_gwi_aggregated(const GwiConfig& cfg, std::size_t generations, Stream& rng) {
    cfg.validate();
    std::vector<long long> z{cfg.initial};
    z.reserve(generations + 1);
    for (std::size_t n = 0; n < generations; ++n) {
        long long next = cfg.offspring.sample_sum(z.back(), rng);
        next += cfg.immigration.sample(rng);
        z.push_back(next);
    }
    return z;
}

namespace {

// Exact reachability of `total` as a sum of n draws from a finite support.
bool finite_sum_reachable(const DiscreteLaw& mu, long long n, long long total) {
    std::vector<long long> support;
    for (std::size_t j = 0; j < mu.pmf.size(); ++j)
        if (mu.pmf[j] > 0.0) support.push_back(static_cast<long long>(j));
    std::vector<char> reach(static_cast<std::size_t>(total) + 1, 0), next;
    reach[0] = 1;
    for (long long i = 0; i < n; ++i) {
        next.assign(reach.size(), 0);
        for (std::size_t s = 0; s < reach.size(); ++s) {
            if (!reach[s]) continue;
            for (long long a : support)
                if (s + static_cast<std::size_t>(a) < next.size()) next[s + static_cast<std::size_t>(a)] = 1;
        }
        reach.swap(next);
    }
    return reach[static_cast<std::size_t>(total)] != 0;
}

void check_bridge_feasible(const DiscreteLaw& mu, long long k, long long n) {
    const long long total = n - k;  // sum of child counts
    const long long lo = mu.min_support(), hi = mu.max_support(), g = mu.support_gcd();
    auto infeasible = [&] {
        throw InfeasibleError("no offspring walk of length " + std::to_string(n) + " reaches -" + std::to_string(k));
    };
    if (total < 0 || total < n * lo || (hi >= 0 && total > n * hi)) infeasible();
    if (g == 0 ? total != n * lo : (total - n * lo) % g != 0) infeasible();
    if (mu.kind == DiscreteLaw::Kind::Finite && static_cast<double>(n) * static_cast<double>(total) <= 5e7 &&
        !finite_sum_reachable(mu, n, total))
        infeasible();
}

}  // namespace

BridgeWalk first_passage_bridge_walk(const DiscreteLaw& mu, long long k, long long n, std::uint64_t seed,
                                     std::uint64_t budget, std::uint64_t stream) {
    mu.validate();
    if (k < 1 || n < 1) throw InvalidArgument("bridge needs k >= 1 and n >= 1");
    check_bridge_feasible(mu, k, n);

    Stream rng(seed, stream);
    const long long total = n - k;
    std::vector<long long> chi(static_cast<std::size_t>(n), 0);
    BridgeWalk out;
    if (mu.kind == DiscreteLaw::Kind::Poisson) {
        // Given their sum, iid Poisson counts are multinomial with equal cells.
        std::uniform_int_distribution<long long> cell(0, n - 1);
        for (long long b = 0; b < total; ++b) ++chi[static_cast<std::size_t>(cell(rng))];
        out.attempts = 1;
    } else {
        for (;;) {
            if (out.attempts >= budget)
                throw BudgetExceeded("bridge rejection sampling exceeded its budget", out.attempts);
            ++out.attempts;
            long long sum = 0;
            for (auto& c : chi) {
                c = mu.sample(rng);
                sum += c;
            }
            if (sum == total) break;
        }
    }

    // Doubled partial sums; rotation r is a first-passage path iff every
    // D[m] for m in (r, r + n) stays above D[r] - k.
    const std::size_t len = static_cast<std::size_t>(n);
    std::vector<long long> d(2 * len, 0);
    for (std::size_t m = 1; m < 2 * len; ++m) d[m] = d[m - 1] + chi[(m - 1) % len] - 1;
    std::vector<std::size_t> valid;
    std::deque<std::size_t> window;  // indices with increasing d values
    std::size_t pushed = 1;
    for (std::size_t r = 0; r < len; ++r) {
        // Window is m in [r + 1, r + n - 1].
        while (pushed <= r + len - 1) {
            while (!window.empty() && d[window.back()] >= d[pushed]) window.pop_back();
            window.push_back(pushed);
            ++pushed;
        }
        while (!window.empty() && window.front() < r + 1) window.pop_front();
        if (window.empty() || d[window.front()] > d[r] - k) valid.push_back(r);
    }
    if (valid.size() != static_cast<std::size_t>(k))
        throw std::logic_error("cycle lemma violated: " + std::to_string(valid.size()) + " valid rotations for k = " +
                               std::to_string(k));

    out.valid_rotations = valid.size();
    out.rotation = valid[std::uniform_int_distribution<std::size_t>(0, valid.size() - 1)(rng)];
    out.steps.resize(len);
    for (std::size_t j = 0; j < len; ++j) out.steps[j] = chi[(out.rotation + j) % len] - 1;
    return out;
}

std::vector<long long> conditioned_gw(const DiscreteLaw& mu, long long k, long long n, std::uint64_t seed,
                                      std::uint64_t budget, std::uint64_t stream) {
    const auto bridge = first_passage_bridge_walk(mu, k, n, seed, budget, stream);
    WalkPair walks;
    walks.x.reserve(bridge.steps.size() + 1);
    for (long long s : bridge.steps) walks.x.push_back(walks.x.back() + s);
    const auto result = discrete_lamperti(walks, k, static_cast<std::size_t>(n) + 1);
    // Total progeny n and c_m < n before the last generation.
    long long sum = 0;
    for (std::size_t m = 0; m < result.z.size(); ++m) {
        sum += result.z[m];
        if (m + 1 < result.z.size() && result.z[m + 1] != 0 && result.c[m] >= n)
            throw std::logic_error("conditioned tree reached its total progeny early");
    }
    if (result.truncated || sum != n || result.z.back() != 0)
        throw std::logic_error("conditioned tree does not have total progeny n");
    return result.z;
}

nlohmann::json to_json(const DiscreteLaw& law) {
    switch (law.kind) {
        case DiscreteLaw::Kind::Finite: return {{"kind", "finite"}, {"pmf", law.pmf}};
        case DiscreteLaw::Kind::Poisson: return {{"kind", "poisson"}, {"mean", law.param}};
        case DiscreteLaw::Kind::Geometric: return {{"kind", "geometric"}, {"p", law.param}};
    }
    return nullptr;
}

DiscreteLaw discrete_law_from_json(const nlohmann::json& spec) {
    try {
        if (!spec.is_object() || !spec.contains("kind") || !spec.at("kind").is_string())
            throw ConfigError("law spec needs a 'kind' string");
        const auto kind = spec.at("kind").get<std::string>();
        auto only = [&](std::set<std::string> keys) {
            keys.insert("kind");
            for (const auto& [key, _] : spec.items())
                if (!keys.count(key)) throw ConfigError("unknown law key '" + key + "'");
        };
        auto number = [&](const char* key) {
            if (!spec.contains(key) || !spec.at(key).is_number())
                throw ConfigError(std::string("law key '") + key + "' must be a number");
            return spec.at(key).get<double>();
        };
        if (kind == "poisson") {
            only({"mean"});
            return DiscreteLaw::poisson(number("mean"));
        }
        if (kind == "geometric") {
            only({"p"});
            return DiscreteLaw::geometric(number("p"));
        }
        if (kind == "bernoulli") {
            only({"p"});
            return DiscreteLaw::bernoulli(number("p"));
        }
        if (kind == "dirac") {
            only({"value"});
            if (!spec.at("value").is_number_integer()) throw ConfigError("dirac value must be an integer");
            return DiscreteLaw::dirac(spec.at("value").get<long long>());
        }
        if (kind == "finite") {
            only({"pmf"});
            return DiscreteLaw::finite(spec.at("pmf").get<std::vector<double>>());
        }
        throw ConfigError("unknown law kind '" + kind + "'");
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed law spec: ") + e.what());
    }
}

}  // namespace cbilab
