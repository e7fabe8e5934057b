#pragma once

#include <variant>
#include <vector>

#include "json.hpp"

namespace cbilab {

// ---------------------------------------------------------------------------
// Jump parts. Only families with closed-form Laplace exponents are supported,
// which keeps both evaluation and increment sampling exact.
// ---------------------------------------------------------------------------

struct NoJumps {
    bool operator==(const NoJumps&) const = default;
};

enum class StableSign { Positive, Negative };

/// Stable jump part contributing sign * scale * lambda^alpha to the exponent.
/// In a branching mechanism alpha in (1,2] requires Positive (a spectrally
/// positive stable process) and alpha in (0,1) requires Negative (a stable
/// subordinator seen as a spLp). In an immigration mechanism alpha in (0,1)
/// and Positive.
struct StableJumps {
    double alpha = 1.5;
    double scale = 1.0;
    StableSign sign = StableSign::Positive;
    bool operator==(const StableJumps&) const = default;
};

struct ExponentialJumps {
    double rate = 1.0;
    bool operator==(const ExponentialJumps&) const = default;
};

struct DiracJumps {
    double size = 1.0;
    bool operator==(const DiracJumps&) const = default;
};

struct GammaJumps {
    double shape = 1.0;
    double rate = 1.0;
    bool operator==(const GammaJumps&) const = default;
};

using JumpLaw = std::variant<ExponentialJumps, DiracJumps, GammaJumps>;

/// E[exp(-lambda J)] for one jump J.
double jump_laplace(const JumpLaw& law, double lambda);
/// 1 - E[exp(-lambda J)], accurate for small lambda.
double jump_laplace_deficit(const JumpLaw& law, double lambda);
double jump_mean(const JumpLaw& law);

struct CompoundPoissonJumps {
    double rate = 1.0;
    JumpLaw law = ExponentialJumps{};
    bool operator==(const CompoundPoissonJumps&) const = default;
};

/// Gamma subordinator part: shape * log(1 + lambda / rate).
struct GammaSubordinatorJumps {
    double shape = 1.0;
    double rate = 1.0;
    bool operator==(const GammaSubordinatorJumps&) const = default;
};

using BranchingJumps = std::variant<NoJumps, StableJumps, CompoundPoissonJumps>;
using ImmigrationJumps =
    std::variant<NoJumps, StableJumps, CompoundPoissonJumps, GammaSubordinatorJumps>;

/// Laplace exponent of a (possibly killed) spectrally positive Levy process:
///   Psi(l) = -killing + drift*l + diffusion*l^2/2 + jump part,
/// with E[exp(-l X_t)] = exp(t Psi(l)). The path of the drift part is -drift*t.
struct BranchingMechanism {
    double killing = 0.0;
    double drift = 0.0;
    double diffusion = 0.0;
    BranchingJumps jumps = NoJumps{};

    bool operator==(const BranchingMechanism&) const = default;

    /// Throws InvalidMechanism.
    void validate() const;

    static BranchingMechanism zero() { return {}; }
    /// Psi(l) = 2 l^2, the squared Bessel branching mechanism.
    static BranchingMechanism besq() { return {0.0, 0.0, 4.0, NoJumps{}}; }
    static BranchingMechanism stable(double alpha, double scale = 1.0);
};

/// Laplace exponent of a (possibly killed) subordinator:
///   Phi(l) = killing + drift*l + jump part,  E[exp(-l Y_t)] = exp(-t Phi(l)).
struct ImmigrationMechanism {
    double killing = 0.0;
    double drift = 0.0;
    ImmigrationJumps jumps = NoJumps{};

    bool operator==(const ImmigrationMechanism&) const = default;

    void validate() const;

    static ImmigrationMechanism zero() { return {}; }
    static ImmigrationMechanism pure_drift(double d) { return {0.0, d, NoJumps{}}; }
};

/// Psi(lambda) for lambda >= 0; lambda == 0 returns the limit Psi(0+) = -killing,
/// lambda == +inf returns the limit.
double eval_psi(const BranchingMechanism& mech, double lambda);
/// Phi(lambda) for lambda >= 0, same conventions.
double eval_phi(const ImmigrationMechanism& mech, double lambda);

bool is_zero(const ImmigrationMechanism& mech);
bool is_zero(const BranchingMechanism& mech);

/// c * Psi as a mechanism (every coefficient scales linearly).
BranchingMechanism scaled(const BranchingMechanism& mech, double c);

// ---------------------------------------------------------------------------
// Explosion classification
// ---------------------------------------------------------------------------

struct ExplosionVerdict {
    bool jumps_to_infinity_possible = false;
    bool continuous_explosion_possible = false;
    bool continuous_explosion_certain = false;
    bool operator==(const ExplosionVerdict&) const = default;
};

struct ExplosionOptions {
    double eps = 1e-3;           // neighbourhood (0, eps) for the sign test
    double rel_tol = 1e-6;       // relative change that counts as settled
    int consecutive = 3;         // settled pieces needed in a row
    int sign_probes = 60;        // probes eps * 2^-j, j = 0..sign_probes
    int max_halvings = 1000;
};

/// Operational Ogura-Grey test: Psi < 0 on some (0, eps) and the integral of
/// 1/(-Psi) over (delta, eps) converges as delta -> 0. Throws
/// IndeterminateError when the sign near zero is mixed or the dyadic sequence
/// neither settles nor shows divergence.
bool is_explosive(const BranchingMechanism& psi, const ExplosionOptions& opts = {});

ExplosionVerdict classify_explosion(const BranchingMechanism& psi,
                                    const ImmigrationMechanism& phi,
                                    const ExplosionOptions& opts = {});

// ---------------------------------------------------------------------------
// JSON schema (see README). Unknown keys are rejected.
// ---------------------------------------------------------------------------

nlohmann::json to_json(const BranchingMechanism& mech);
nlohmann::json to_json(const ImmigrationMechanism& mech);
BranchingMechanism branching_from_json(const nlohmann::json& spec);
ImmigrationMechanism immigration_from_json(const nlohmann::json& spec);

nlohmann::json to_json(const ExplosionVerdict& verdict);

}  // namespace cbilab
