#include <cmath>
#include <vector>

#include "cbilab/errors.hpp"
#include "cbilab/mechanisms.hpp"
#include "doctest.h"

using namespace cbilab;

namespace {

// lambda^alpha with alpha < 1 has infinite slope at 0, so the probe for the
// limit at 0 has to sit closer to 0 for those families.
double zero_probe(const auto& jumps) {
    if (const auto* s = std::get_if<StableJumps>(&jumps); s && s->alpha < 1.0) return 1e-16;
    return 1e-8;
}

std::vector<BranchingMechanism> branching_zoo() {
    return {
        BranchingMechanism::besq(),
        BranchingMechanism::stable(1.5),
        BranchingMechanism::stable(2.0, 0.7),
        BranchingMechanism::stable(0.5),
        {0.3, 0.0, 0.0, NoJumps{}},
        {0.1, -0.5, 1.0, CompoundPoissonJumps{2.0, ExponentialJumps{1.5}}},
        {0.0, 1.0, 0.0, CompoundPoissonJumps{1.0, DiracJumps{0.7}}},
        {0.0, 0.2, 0.3, CompoundPoissonJumps{0.5, GammaJumps{2.0, 3.0}}},
    };
}

std::vector<ImmigrationMechanism> immigration_zoo() {
    return {
        ImmigrationMechanism::pure_drift(2.0),
        {0.2, 0.0, StableJumps{0.5, 1.0, StableSign::Positive}},
        {0.0, 0.5, CompoundPoissonJumps{1.0, DiracJumps{1.0}}},
        {0.0, 0.0, GammaSubordinatorJumps{1.0, 1.0}},
        {0.4, 0.1, CompoundPoissonJumps{3.0, GammaJumps{0.5, 2.0}}},
    };
}

}  // namespace

TEST_CASE("eval_psi desk values") {
    CHECK(eval_psi(BranchingMechanism::besq(), 1.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(eval_psi(BranchingMechanism::stable(1.5), 4.0) == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(eval_psi({0.3, 0.0, 0.0, NoJumps{}}, 1.0) == doctest::Approx(-0.3).epsilon(1e-15));
    CHECK(eval_psi(BranchingMechanism::stable(0.5), 4.0) == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("eval_phi desk values") {
    CHECK(eval_phi(ImmigrationMechanism::pure_drift(2.0), 3.0) == doctest::Approx(6.0));
    const ImmigrationMechanism gamma{0.0, 0.0, GammaSubordinatorJumps{1.0, 1.0}};
    CHECK(eval_phi(gamma, std::exp(1.0) - 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    const ImmigrationMechanism cp{0.0, 0.0, CompoundPoissonJumps{1.0, DiracJumps{1.0}}};
    CHECK(eval_phi(cp, 2.0) == doctest::Approx(1.0 - std::exp(-2.0)));
    CHECK(eval_phi(cp, INFINITY) == 1.0);
    CHECK(eval_phi(cp, 1e300) == doctest::Approx(1.0));
}

TEST_CASE("non-finite parameters are rejected") {
    BranchingMechanism bad{NAN, 0.0, 0.0, NoJumps{}};
    CHECK_THROWS_AS(eval_psi(bad, 1.0), InvalidMechanism);
    BranchingMechanism bad2{0.0, INFINITY, 0.0, NoJumps{}};
    CHECK_THROWS_AS(eval_psi(bad2, 1.0), InvalidMechanism);
    ImmigrationMechanism bad3{0.0, -1.0, NoJumps{}};
    CHECK_THROWS_AS(eval_phi(bad3, 1.0), InvalidMechanism);
    BranchingMechanism wrong_sign{0.0, 0.0, 0.0, StableJumps{1.5, 1.0, StableSign::Negative}};
    CHECK_THROWS_AS(wrong_sign.validate(), InvalidMechanism);
    CHECK_THROWS_AS(eval_psi(BranchingMechanism::besq(), -1.0), InvalidArgument);
}

TEST_CASE("Psi is convex with Psi(0+) = -killing") {
    for (const auto& m : branching_zoo()) {
        CHECK(eval_psi(m, zero_probe(m.jumps)) == doctest::Approx(-m.killing).epsilon(1e-6).scale(1.0));
        for (double l = 0.01; l < 20.0; l *= 1.3) {
            const double h = 0.3 * l;
            const double mid = eval_psi(m, l);
            const double chord = 0.5 * (eval_psi(m, l - h) + eval_psi(m, l + h));
            CHECK(chord - mid >= -1e-9 * (1.0 + std::abs(mid)));
        }
    }
}

TEST_CASE("Phi is non-negative, non-decreasing, concave with Phi(0+) = killing") {
    for (const auto& m : immigration_zoo()) {
        CHECK(eval_phi(m, zero_probe(m.jumps)) == doctest::Approx(m.killing).epsilon(1e-6).scale(1.0));
        double prev = eval_phi(m, 0.0);
        for (double l = 0.01; l < 20.0; l *= 1.3) {
            const double h = 0.3 * l;
            const double mid = eval_phi(m, l);
            CHECK(mid >= 0.0);
            CHECK(mid >= prev);
            prev = mid;
            const double chord = 0.5 * (eval_phi(m, l - h) + eval_phi(m, l + h));
            CHECK(mid - chord >= -1e-9 * (1.0 + std::abs(mid)));
        }
    }
}

TEST_CASE("explosion classification table") {
    const ImmigrationMechanism drift2 = ImmigrationMechanism::pure_drift(2.0);
    CHECK(classify_explosion(BranchingMechanism::besq(), drift2) == ExplosionVerdict{false, false, false});
    CHECK(classify_explosion(BranchingMechanism::stable(0.5), ImmigrationMechanism::pure_drift(1.0)) ==
          ExplosionVerdict{false, true, true});
    CHECK(classify_explosion({0.3, 0.0, 0.0, NoJumps{}}, ImmigrationMechanism::zero()).jumps_to_infinity_possible);
    CHECK(classify_explosion(BranchingMechanism::stable(1.5), ImmigrationMechanism::zero()) ==
          ExplosionVerdict{false, false, false});
    // Explosive but no immigration: possible, not certain.
    CHECK(classify_explosion(BranchingMechanism::stable(0.5), ImmigrationMechanism::zero()) ==
          ExplosionVerdict{false, true, false});
    // Immigration killing blocks certainty.
    CHECK(classify_explosion(BranchingMechanism::stable(0.5), {0.1, 1.0, NoJumps{}}) ==
          ExplosionVerdict{true, true, false});
}

TEST_CASE("quadrature verdict matches the analytic antiderivative") {
    // -c l^alpha, alpha in (0,1): integral of l^-alpha converges near 0.
    for (double alpha : {0.1, 0.3, 0.5, 0.8, 0.9}) CHECK(is_explosive(BranchingMechanism::stable(alpha)));
    // c l^alpha >= 0 near 0: integral is +inf.
    for (double alpha : {1.1, 1.5, 2.0}) CHECK_FALSE(is_explosive(BranchingMechanism::stable(alpha)));
    CHECK_FALSE(is_explosive(BranchingMechanism::besq()));
    // Supercritical with finite mean: Psi ~ Psi'(0) l, log-divergent integral.
    CHECK_FALSE(is_explosive({0.0, -1.0, 1.0, NoJumps{}}));
    CHECK_FALSE(is_explosive({0.0, 0.5, 0.0, CompoundPoissonJumps{2.0, ExponentialJumps{1.0}}}));
    // Killing alone makes the integral converge.
    CHECK(is_explosive({0.2, 0.0, 1.0, NoJumps{}}));
}

TEST_CASE("classification is invariant under Psi -> c Psi") {
    for (const auto& m : branching_zoo())
        for (double c : {0.01, 0.5, 3.0, 100.0})
            for (const auto& im : immigration_zoo())
                CHECK(classify_explosion(scaled(m, c), im) == classify_explosion(m, im));
}

TEST_CASE("mechanism JSON round-trips and rejects unknown keys") {
    for (const auto& m : branching_zoo()) CHECK(branching_from_json(to_json(m)) == m);
    for (const auto& m : immigration_zoo()) CHECK(immigration_from_json(to_json(m)) == m);
    CHECK(branching_from_json(nlohmann::json("besq")) == BranchingMechanism::besq());
    auto stable = branching_from_json(nlohmann::json::parse(R"({"kind":"stable","alpha":0.5,"sign":"negative"})"));
    CHECK(eval_psi(stable, 4.0) == doctest::Approx(-2.0));
    auto drift = immigration_from_json(nlohmann::json::parse(R"({"kind":"drift","d":1})"));
    CHECK(drift == ImmigrationMechanism::pure_drift(1.0));
    CHECK_THROWS_AS(branching_from_json(nlohmann::json::parse(R"({"kind":"stable","alpha":1.5,"bogus":1})")),
                    ConfigError);
    CHECK_THROWS_AS(immigration_from_json(nlohmann::json::parse(R"({"kind":"warp"})")), ConfigError);
    CHECK_THROWS_AS(branching_from_json(nlohmann::json::parse(R"({"kind":"stable","alpha":1.5,"sign":"negative"})")),
                    ConfigError);
}
