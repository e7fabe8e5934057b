#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cbilab/errors.hpp"
#include "cbilab/ivp.hpp"
#include "doctest.h"
#include "support/random_pairs.hpp"

using namespace cbilab;

namespace {

double sqrt_fixture(double x) { return std::sqrt(std::abs(1.0 - x)); }

SteppedPath sqrt_fixture_path(double spacing = 1e-4) {
    const double extra[] = {1.0};
    return interpolate(sqrt_fixture, 4.0, spacing, extra);
}

double sup_grid_distance(const EulerSolution& e, const CumulativePopulation& c) {
    double d = 0.0;
    for (std::size_t i = 0; i < e.c.size(); ++i) d = std::max(d, std::abs(e.c[i] - c.c(e.times[i])));
    return d;
}

EulerSolution euler_on(const SteppedPath& f, const SteppedPath& g, double sigma, double horizon) {
    return solve_euler([&](double x) { return f(x); }, [&](double t) { return g(t); }, sigma, horizon);
}

}  // namespace

TEST_CASE("phi helpers agree with long double references") {
    for (double z : {-30.0, -2.0, -0.6, -0.4, -1e-3, -1e-9, 0.0, 1e-9, 1e-6, 1e-3, 0.3, 0.49, 0.51, 4.0}) {
        const long double zl = z;
        const long double p1 = z == 0.0 ? 1.0L : std::expm1(zl) / zl;
        const long double p2 = z == 0.0 ? 0.5L : (std::expm1(zl) - zl) / (zl * zl);
        CHECK(phi1(z) == doctest::Approx(static_cast<double>(p1)).epsilon(1e-14));
        if (std::abs(z) > 1e-4) CHECK(phi2(z) == doctest::Approx(static_cast<double>(p2)).epsilon(1e-12));
    }
    CHECK(phi2(1e-9) == doctest::Approx(0.5 + 1e-9 / 6.0).epsilon(1e-15));
}

TEST_CASE("exact solver on the non-uniqueness fixture returns the absorbed solution") {
    const auto sol = solve_exact(sqrt_fixture_path(), SteppedPath::constant(0.0, 3.0), 3.0);
    CHECK(std::abs(sol.c(1.0) - 0.75) <= 1e-6);
    double c_err = 0.0, h_err = 0.0;
    for (int i = 0; i <= 3000; ++i) {
        const double t = i * 1e-3;
        c_err = std::max(c_err, std::abs(sol.c(t) - (t <= 2.0 ? t - t * t / 4.0 : 1.0)));
        if (t <= 1.5) h_err = std::max(h_err, std::abs(sol.h(t) - (2.0 - t) / 2.0));
    }
    CHECK(c_err <= 1e-4);
    CHECK(h_err <= 1e-6);
    CHECK(sol.c(3.0) <= 1.0);
    CHECK(sol.h(3.0) < 1e-40);
    CHECK_FALSE(sol.exploded());
}

TEST_CASE("exact solver desk cases") {
    SUBCASE("zero pair") {
        const auto sol = solve_exact(SteppedPath::constant(0.0, 1.0), SteppedPath::constant(0.0, 2.0), 2.0);
        for (double t : {0.0, 0.5, 2.0}) CHECK(sol.c(t) == 0.0);
    }
    SUBCASE("unit rate stepping to 2 at x = 1") {
        SteppedPath f({0.0, 1.0}, {1.0, 2.0}, {0.0, 0.0}, 5.0);
        const auto sol = solve_exact(f, SteppedPath::constant(0.0, 3.0), 3.0);
        CHECK(sol.c(0.5) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(sol.c(1.0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(sol.c(2.5) == doctest::Approx(4.0).epsilon(1e-15));
        CHECK(sol.h(0.99) == 1.0);
        CHECK(sol.h(1.0) == 2.0);
    }
    SUBCASE("zero is not left without immigration") {
        const auto sol = solve_exact(SteppedPath::line(0.0, 1.0, 5.0), SteppedPath::constant(0.0, 2.0), 2.0);
        CHECK(sol.c(2.0) == 0.0);
        CHECK(sol.h(1.0) == 0.0);
    }
    SUBCASE("a stalled population restarts at the next immigration event") {
        SteppedPath g({0.0, 1.0}, {0.0, 1.0}, {0.0, 0.0}, 3.0);
        const auto sol = solve_exact(SteppedPath::constant(0.0, 1.0), g, 3.0);
        CHECK(sol.c(0.999) == 0.0);
        CHECK(sol.c(2.5) == doctest::Approx(1.5).epsilon(1e-15));
    }
    SUBCASE("unit-slope reproduction gives e^t - 1") {
        const auto sol = solve_exact(SteppedPath::line(1.0, 1.0, 10.0), SteppedPath::constant(0.0, 2.0), 2.0);
        for (double t : {0.1, 1.0, 2.0}) CHECK(sol.c(t) == doctest::Approx(std::expm1(t)).epsilon(1e-14));
    }
    SUBCASE("affine immigration with constant reproduction") {
        // c' = 1 + 2t gives c = t + t^2.
        const auto sol = solve_exact(SteppedPath::constant(1.0, 1.0), SteppedPath::line(0.0, 2.0, 3.0), 3.0);
        for (double t : {0.3, 1.7, 3.0}) CHECK(sol.c(t) == doctest::Approx(t + t * t).epsilon(1e-14));
    }
    SUBCASE("absorbed immigration explodes at its absorption time") {
        SteppedPath g({0.0}, {1.0}, {0.0}, 3.0, 1.25);
        const auto sol = solve_exact(SteppedPath::constant(0.0, 1.0), g, 3.0);
        CHECK(sol.explosion_time() == 1.25);
        CHECK(std::isinf(sol.c(1.3)));
        CHECK(sol.c(1.2) == doctest::Approx(1.2));
    }
    SUBCASE("absorbed reproduction explodes when c reaches its absorption level") {
        SteppedPath f({0.0}, {2.0}, {0.0}, 1.0, 1.0);
        const auto sol = solve_exact(f, SteppedPath::constant(0.0, 3.0), 3.0);
        CHECK(sol.explosion_time() == doctest::Approx(0.5));
        CHECK(std::isinf(sol.h(0.6)));
    }
    SUBCASE("inadmissible pairs are rejected") {
        SteppedPath neg_jump({0.0, 1.0}, {1.0, 0.0}, {0.0, 0.0}, 2.0);
        CHECK_THROWS_AS(solve_exact(neg_jump, SteppedPath::constant(0.0, 1.0), 1.0), AdmissibilityError);
        CHECK_THROWS_AS(solve_exact(SteppedPath::constant(-1.0, 1.0), SteppedPath::constant(0.5, 1.0), 1.0),
                        AdmissibilityError);
        CHECK_THROWS_AS(solve_exact(SteppedPath::constant(1.0, 1.0), SteppedPath::line(1.0, -1.0, 1.0), 1.0),
                        AdmissibilityError);
    }
}

TEST_CASE("profiles are non-negative and integrate to c") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto pair = testing::random_pair(seed, 1.5, 3.0, seed % 2 == 0);
        const auto sol = solve_exact(pair.f, pair.g, 1.5);
        std::vector<double> cuts;
        for (const auto& s : sol.segments()) cuts.push_back(s.t0);
        cuts.push_back(1.5);
        double integral = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            if (cuts[i + 1] <= cuts[i]) continue;
            integral += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                [&](double t) { return sol.h(t); }, cuts[i], cuts[i + 1], 5, 1e-13);
        }
        CHECK(integral == doctest::Approx(sol.c(1.5)).epsilon(1e-9));
        for (int k = 0; k <= 300; ++k) CHECK(sol.h(k * 0.005) >= 0.0);
    }
}

TEST_CASE("monotone in immigration") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto pair = testing::random_pair(seed, 2.0);
        const auto more = shifted(pair.g, 0.1);
        const auto lo = solve_exact(pair.f, pair.g, 2.0);
        const auto hi = solve_exact(pair.f, more, 2.0);
        for (int k = 0; k <= 200; ++k) CHECK(lo.c(k * 0.01) <= hi.c(k * 0.01) + 1e-12);
    }
}

TEST_CASE("refining breakpoints with zero jumps changes nothing") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto pair = testing::random_pair(seed, 2.0);
        std::vector<double> t(pair.f.times().begin(), pair.f.times().end());
        std::vector<double> v(pair.f.values().begin(), pair.f.values().end());
        std::vector<double> s(pair.f.slopes().begin(), pair.f.slopes().end());
        // Split the first segment at its midpoint.
        const double mid = t.size() > 1 ? 0.5 * t[1] : 1.0;
        t.insert(t.begin() + 1, mid);
        v.insert(v.begin() + 1, v[0] + s[0] * mid);
        s.insert(s.begin() + 1, s[0]);
        const SteppedPath refined(t, v, s, pair.f.horizon());
        const auto a = solve_exact(pair.f, pair.g, 2.0);
        const auto b = solve_exact(refined, pair.g, 2.0);
        for (int k = 0; k <= 200; ++k)
            CHECK(a.c(k * 0.01) == doctest::Approx(b.c(k * 0.01)).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("Euler scheme desk values") {
    SUBCASE("constant unit rate") {
        for (double sigma : {0.5, 0.1, 0.03}) {
            const auto e = solve_euler([](double) { return 1.0; }, [](double) { return 0.0; }, sigma, 3.0);
            for (std::size_t i = 0; i < e.c.size(); ++i) CHECK(e.c[i] == doctest::Approx(e.times[i]).epsilon(1e-14));
        }
    }
    SUBCASE("two hand-computed steps") {
        const auto e = solve_euler(sqrt_fixture, [](double) { return 0.0; }, 0.5, 1.0);
        REQUIRE(e.c.size() == 3);
        CHECK(e.c[1] == 0.5);
        CHECK(e.c[2] == doctest::Approx(0.5 + 0.5 * std::sqrt(0.5)).epsilon(1e-15));
    }
    SUBCASE("recursion holds bit for bit") {
        const auto pair = testing::random_pair(3, 2.0);
        const auto e = euler_on(pair.f, pair.g, 0.01, 2.0);
        for (std::size_t i = 1; i < e.c.size(); ++i) {
            CHECK(e.c[i] == e.c[i - 1] + 0.01 * e.rates[i]);
            CHECK(e.rates[i] >= 0.0);
        }
    }
    SUBCASE("ceiling sets the explosion flag") {
        const auto e = solve_euler([](double x) { return 1.0 + x * x; }, [](double) { return 0.0; }, 0.01, 5.0);
        CHECK(e.exploded);
        CHECK(e.explosion_time < 5.0);
        CHECK(std::isinf(e.c.back()));
        CHECK(std::isinf(e.c_at(4.9)));
    }
}

TEST_CASE("Euler on the fixture: order one up to t = 2, another solution after") {
    const auto exact = solve_exact(sqrt_fixture_path(), SteppedPath::constant(0.0, 3.0), 3.0);
    std::vector<double> err;
    for (double sigma : {1e-2, 5e-3, 2.5e-3})
        err.push_back(sup_grid_distance(solve_euler(sqrt_fixture, [](double) { return 0.0; }, sigma, 2.0), exact));
    CHECK(err[1] / err[0] == doctest::Approx(0.5).epsilon(0.2));
    CHECK(err[2] / err[1] == doctest::Approx(0.5).epsilon(0.2));
    // Past t = 2 the Euler iterates leave x = 1 and approach 1 + (t-2)^2/4.
    const auto late = solve_euler(sqrt_fixture, [](double) { return 0.0; }, 1e-3, 3.0);
    CHECK(late.c.back() == doctest::Approx(1.25).epsilon(5e-3));
    CHECK(exact.c(3.0) <= 1.0);
}

TEST_CASE("Euler converges to the exact solution along dyadic spans") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto pair = testing::random_pair(seed, 1.0, 2.0);
        const auto exact = solve_exact(pair.f, pair.g, 1.0);
        const double coarse = sup_grid_distance(euler_on(pair.f, pair.g, 1.0 / 16, 1.0), exact);
        const double fine = sup_grid_distance(euler_on(pair.f, pair.g, 1.0 / 4096, 1.0), exact);
        CHECK(fine < coarse / 50.0);
    }
}

TEST_CASE("classical Lamperti time change") {
    SUBCASE("unit drive") {
        const auto c = lamperti_time_change(SteppedPath::constant(0.0, 1.0), 1.0, 2.0);
        for (double t : {0.5, 2.0}) CHECK(c.c(t) == doctest::Approx(t).epsilon(1e-15));
    }
    SUBCASE("unit slope") {
        const auto c = lamperti_time_change(SteppedPath::line(0.0, 1.0, 1.0), 1.0, 2.0);
        for (double t : {0.5, 2.0}) CHECK(c.c(t) == doctest::Approx(std::expm1(t)).epsilon(1e-14));
    }
    SUBCASE("agrees with the exact solver on random paths") {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const auto pair = testing::random_pair(seed, 2.0);
            const double x = std::max(0.0, -pair.f.values()[0]) + 0.05 * static_cast<double>(seed % 3);
            const auto lt = lamperti_time_change(pair.f, x, 2.0);
            const auto ex = solve_exact(shifted(pair.f, x), SteppedPath::constant(0.0, 2.0), 2.0);
            double d = 0.0;
            for (int k = 0; k <= 400; ++k) d = std::max(d, std::abs(lt.c(k * 0.005) - ex.c(k * 0.005)));
            CHECK(d < 1e-9);
        }
    }
}

TEST_CASE("scaling identity") {
    const auto one = SteppedPath::constant(1.0, 10.0);
    const auto zero = SteppedPath::constant(0.0, 10.0);
    CHECK(scale(one, 1.0, 1.0) == one);
    const auto desk = scale_commutes(one, zero, 0.5, 2.0, 4.0, 8);
    CHECK(desk.holds);
    CHECK(desk.max_deviation == 0.0);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto pair = testing::random_pair(seed, 2.0);
        Stream rng(seed, 5);
        std::uniform_real_distribution<double> u(0.2, 5.0);
        const double a = u(rng), b = u(rng), sigma = 0.01 + 0.05 * rng.uniform_open();
        const auto check = scale_commutes(pair.f, pair.g, sigma, a, b, static_cast<std::size_t>(2.0 / sigma));
        CHECK_MESSAGE(check.holds, "seed " << seed << " deviation " << check.max_deviation);
    }
}

TEST_CASE("deterministic explosion criterion") {
    using F = ReproductionTail::Family;
    CHECK(detect_explosion({F::Power, 0.0, 1.0, 2.0}, 10.0) == ExplosionOutcome::Explosion);
    CHECK(detect_explosion({F::Power, 0.0, 1.0, 1.0}, 10.0) == ExplosionOutcome::NoExplosion);
    CHECK(detect_explosion({F::Power, 0.0, 1.0, 2.0}, 0.0) == ExplosionOutcome::Indeterminate);
    CHECK(detect_explosion({F::Exponential, -2.0, 1.0, 1.0}, 1.5) == ExplosionOutcome::Explosion);
    CHECK(detect_explosion({F::Exponential, -2.0, 1.0, 1.0}, 0.5) == ExplosionOutcome::Indeterminate);
    CHECK(detect_explosion({F::Power, 5.0, -1.0, 3.0}, 100.0) == ExplosionOutcome::NoExplosion);
    CHECK(std::string(to_string(ExplosionOutcome::Explosion)) == "explosion");
}
