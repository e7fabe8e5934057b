#include <map>
#include <vector>

#include "cbilab/discrete.hpp"
#include "cbilab/errors.hpp"
#include "doctest.h"
#include "support/enumeration.hpp"

using namespace cbilab;
using cbilab::testing::Rational;

namespace {

using Z = std::vector<long long>;

Z run_lamperti(const std::vector<long long>& chi, long long k) {
    return discrete_lamperti(WalkPair::from_counts(chi, {}), k).z;
}

}  // namespace

TEST_CASE("discrete Lamperti on hand-built walks") {
    CHECK(run_lamperti({2, 0, 1, 0}, 1) == Z{1, 2, 1, 0});

    const auto flat = discrete_lamperti(WalkPair::from_counts(std::vector<long long>(200, 1), {}), 5, 30);
    CHECK(flat.z.size() == 31);
    for (long long z : flat.z) CHECK(z == 5);

    CHECK(run_lamperti({}, 0) == Z{0, 0});

    const auto r = discrete_lamperti(WalkPair::from_counts({2, 0, 1, 0}, {1, 0, 2}), 1);
    CHECK(r.c.front() == 1);
    for (std::size_t n = 1; n < r.z.size(); ++n) CHECK(r.c[n] == r.c[n - 1] + r.z[n]);
}

TEST_CASE("discrete Lamperti flags a walk that is too short") {
    const auto r = discrete_lamperti(WalkPair::from_counts({2, 2}, {}), 1);
    CHECK(r.truncated);
}

TEST_CASE("walk invariants are enforced") {
    WalkPair w;
    w.x = {0, -2};
    CHECK_THROWS_AS(w.validate(), InvalidArgument);
    w.x = {0};
    w.y = {0, 1, 0};
    CHECK_THROWS_AS(w.validate(), InvalidArgument);
    CHECK_THROWS_AS(DiscreteLaw::finite({0.5, 0.4}), InvalidArgument);
    CHECK_THROWS_AS(DiscreteLaw::geometric(0.0), InvalidArgument);
    CHECK_NOTHROW(DiscreteLaw::finite({0.5, 0.5 + 1e-13}));
}

TEST_CASE("direct simulation trivial cases") {
    GwiConfig critical{DiscreteLaw::dirac(1), DiscreteLaw::dirac(0), 3};
    for (long long z : simulate_gwi_direct(critical, 20, 7)) CHECK(z == 3);

    GwiConfig immigration_only{DiscreteLaw::dirac(0), DiscreteLaw::dirac(2), 0};
    const auto z = simulate_gwi_direct(immigration_only, 10, 7);
    CHECK(z.front() == 0);
    for (std::size_t n = 1; n < z.size(); ++n) CHECK(z[n] == 2);
}

TEST_CASE("law moments and support") {
    const auto mu = DiscreteLaw::finite({0.25, 0.5, 0.25});
    CHECK(mu.mean() == doctest::Approx(1.0));
    CHECK(mu.variance() == doctest::Approx(0.5));
    CHECK(mu.support_gcd() == 1);
    CHECK(DiscreteLaw::finite({0.5, 0.0, 0.5}).support_gcd() == 2);
    CHECK(DiscreteLaw::dirac(3).support_gcd() == 0);
    CHECK(DiscreteLaw::poisson(1.0).max_support() == -1);
    CHECK(DiscreteLaw::geometric(0.25).mean() == doctest::Approx(3.0));
    CHECK(DiscreteLaw::poisson(2.0).prob(3) == doctest::Approx(std::exp(-2.0) * 8.0 / 6.0));

    Stream rng(3, 0);
    double sum = 0.0;
    const int reps = 20000;
    for (int i = 0; i < reps; ++i) sum += static_cast<double>(mu.sample_sum(10, rng));
    CHECK(sum / reps == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("z_2 of the direct simulation matches enumeration") {
    const testing::RationalPmf mu{Rational(1, 4), Rational(1, 2), Rational(1, 4)};
    const testing::RationalPmf nu{Rational(1)};
    const auto exact = testing::direct_branching_law(mu, nu, 1, 2);
    std::map<long long, double> exact_z2;
    for (const auto& [z, p] : exact) exact_z2[z[2]] += static_cast<double>(p);

    GwiConfig cfg{DiscreteLaw::finite({0.25, 0.5, 0.25}), DiscreteLaw::dirac(0), 1};
    const int seeds = 100000;
    std::map<long long, double> empirical;
    for (int s = 0; s < seeds; ++s) empirical[simulate_gwi_direct(cfg, 2, static_cast<std::uint64_t>(s))[2]] += 1.0 / seeds;
    double tv = 0.0;
    for (const auto& [z2, p] : exact_z2) tv += std::abs(p - empirical[z2]);
    for (const auto& [z2, p] : empirical)
        if (!exact_z2.count(z2)) tv += p;
    CHECK(tv / 2 < 0.01);
}

TEST_CASE("walk construction and direct branching have the same law exactly") {
    const std::vector<testing::RationalPmf> laws{
        {Rational(1, 4), Rational(1, 2), Rational(1, 4)},
        {Rational(1, 3), Rational(0), Rational(2, 3)},
        {Rational(1, 2), Rational(1, 2)},
        {Rational(1)},
    };
    for (const auto& mu : laws)
        for (const auto& nu : laws) {
            const auto direct = testing::direct_branching_law(mu, nu, 1, 2);
            const auto walk = testing::lamperti_law(mu, nu, 1, 2);
            CHECK(testing::total_variation(direct, walk) == 0);
        }
}

TEST_CASE("direct simulation and the walk transform couple sample by sample") {
    GwiConfig cfg{DiscreteLaw::poisson(1.0), DiscreteLaw::bernoulli(0.5), 2};
    const std::size_t gens = 12;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        const auto direct = simulate_gwi_direct(cfg, gens, seed);
        long long individuals = 0;
        for (std::size_t n = 0; n < gens; ++n) individuals += direct[n];
        const auto walks = draw_walks(cfg, static_cast<std::size_t>(individuals), gens, seed);
        auto lamperti = discrete_lamperti(walks, cfg.initial, gens);
        lamperti.z.resize(gens + 1, 0);
        REQUIRE(lamperti.z == direct);
    }
}

TEST_CASE("first passage bridges") {
    const auto mu = DiscreteLaw::finite({0.25, 0.5, 0.25});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto b = first_passage_bridge_walk(mu, 1, 2, seed);
        CHECK(b.steps == Z{0, -1});
        CHECK(b.valid_rotations == 1);
    }
    const auto all_down = first_passage_bridge_walk(mu, 6, 6, 1);
    CHECK(all_down.steps == Z(6, -1));
    CHECK(all_down.valid_rotations == 6);

    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto b = first_passage_bridge_walk(DiscreteLaw::poisson(1.0), 3, 40, seed);
        long long s = 0;
        for (std::size_t i = 0; i < b.steps.size(); ++i) {
            s += b.steps[i];
            if (i + 1 < b.steps.size()) CHECK(s > -3);
        }
        CHECK(s == -3);
        CHECK(b.valid_rotations == 3);
        CHECK(b.attempts == 1);
    }
}

TEST_CASE("infeasible or expensive bridges raise") {
    CHECK_THROWS_AS(first_passage_bridge_walk(DiscreteLaw::dirac(1), 1, 5, 0), InfeasibleError);
    CHECK_THROWS_AS(first_passage_bridge_walk(DiscreteLaw::finite({0.5, 0.0, 0.5}), 1, 4, 0), InfeasibleError);
    CHECK_THROWS_AS(first_passage_bridge_walk(DiscreteLaw::finite({0.0, 0.5, 0.0, 0.5}), 1, 2, 0), InfeasibleError);
    CHECK_THROWS_AS(first_passage_bridge_walk(DiscreteLaw::finite({0.25, 0.5, 0.25}), 2, 1, 0), InfeasibleError);
    try {
        first_passage_bridge_walk(DiscreteLaw::finite({0.5, 0.5 - 1e-9, 1e-9}), 1, 60, 0, 10);
        FAIL("expected BudgetExceeded");
    } catch (const BudgetExceeded& e) {
        CHECK(e.attempts == 10);
    }
}

TEST_CASE("conditioned trees") {
    const auto mu = DiscreteLaw::finite({0.25, 0.5, 0.25});
    CHECK(conditioned_gw(mu, 1, 2, 4) == Z{1, 1, 0});
    CHECK(conditioned_gw(mu, 5, 5, 4) == Z{5, 0});
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const auto z = conditioned_gw(DiscreteLaw::poisson(1.0), 2, 100, seed);
        long long total = 0;
        for (long long v : z) total += v;
        CHECK(total == 100);
    }
}

TEST_CASE("conditioned tree law matches enumeration") {
    const testing::RationalPmf mu_exact{Rational(1, 4), Rational(1, 2), Rational(1, 4)};
    const auto mu = DiscreteLaw::finite({0.25, 0.5, 0.25});
    const long long n = 7, k = 2;
    const auto exact = testing::conditioned_gw_law(mu_exact, k, n);
    const int samples = 100000;
    std::map<Z, double> empirical;
    for (int s = 0; s < samples; ++s) empirical[conditioned_gw(mu, k, n, static_cast<std::uint64_t>(s))] += 1.0 / samples;
    double tv = 0.0;
    for (const auto& [z, p] : exact) tv += std::abs(static_cast<double>(p) - empirical[z]);
    for (const auto& [z, p] : empirical)
        if (!exact.count(z)) tv += p;
    CHECK(tv / 2 < 0.01);
}

TEST_CASE("law JSON round trip") {
    for (const auto& law : {DiscreteLaw::poisson(1.5), DiscreteLaw::geometric(0.3), DiscreteLaw::finite({0.2, 0.8})})
        CHECK(discrete_law_from_json(to_json(law)) == law);
    CHECK(discrete_law_from_json({{"kind", "dirac"}, {"value", 2}}) == DiscreteLaw::dirac(2));
    CHECK_THROWS_AS(discrete_law_from_json({{"kind", "poisson"}, {"rate", 1}}), ConfigError);
    CHECK_THROWS_AS(discrete_law_from_json({{"kind", "finite"}, {"pmf", {0.5}}}), ConfigError);
}
