#include "cbilab/mechanisms.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "cbilab/errors.hpp"

namespace cbilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }
bool finite_pos(double v) { return std::isfinite(v) && v > 0.0; }

void check_lambda(double lambda) {
    if (std::isnan(lambda) || lambda < 0.0)
        throw InvalidArgument("Laplace exponent evaluated at lambda = " + std::to_string(lambda));
}

void validate_law(const JumpLaw& law) {
    std::visit(
        [](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, ExponentialJumps>) {
                if (!finite_pos(l.rate)) throw InvalidMechanism("exponential jump rate must be > 0");
            } else if constexpr (std::is_same_v<T, DiracJumps>) {
                if (!finite_pos(l.size)) throw InvalidMechanism("dirac jump size must be > 0");
            } else {
                if (!finite_pos(l.shape) || !finite_pos(l.rate))
                    throw InvalidMechanism("gamma jump shape and rate must be > 0");
            }
        },
        law);
}

// sign * scale * lambda^alpha, with the lambda = inf limit.
double stable_term(const StableJumps& s, double lambda) {
    const double mag = lambda == kInf ? kInf : s.scale * std::pow(lambda, s.alpha);
    return s.sign == StableSign::Positive ? mag : -mag;
}

}  // namespace

double jump_laplace(const JumpLaw& law, double lambda) {
    return std::visit(
        [lambda](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, ExponentialJumps>) {
                return l.rate / (l.rate + lambda);
            } else if constexpr (std::is_same_v<T, DiracJumps>) {
                return std::exp(-lambda * l.size);
            } else {
                return std::pow(l.rate / (l.rate + lambda), l.shape);
            }
        },
        law);
}

double jump_laplace_deficit(const JumpLaw& law, double lambda) {
    if (lambda == kInf) return 1.0;
    return std::visit(
        [lambda](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, ExponentialJumps>) {
                return lambda / (l.rate + lambda);
            } else if constexpr (std::is_same_v<T, DiracJumps>) {
                return -std::expm1(-lambda * l.size);
            } else {
                return -std::expm1(-l.shape * std::log1p(lambda / l.rate));
            }
        },
        law);
}

double jump_mean(const JumpLaw& law) {
    return std::visit(
        [](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, ExponentialJumps>) {
                return 1.0 / l.rate;
            } else if constexpr (std::is_same_v<T, DiracJumps>) {
                return l.size;
            } else {
                return l.shape / l.rate;
            }
        },
        law);
}

BranchingMechanism BranchingMechanism::stable(double alpha, double scale) {
    BranchingMechanism m;
    m.jumps = StableJumps{alpha, scale, alpha > 1.0 ? StableSign::Positive : StableSign::Negative};
    m.validate();
    return m;
}

void BranchingMechanism::validate() const {
    if (!finite_nonneg(killing)) throw InvalidMechanism("branching killing rate must be finite and >= 0");
    if (!std::isfinite(drift)) throw InvalidMechanism("branching drift must be finite");
    if (!finite_nonneg(diffusion)) throw InvalidMechanism("diffusion coefficient must be finite and >= 0");
    std::visit(
        [](const auto& j) {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, StableJumps>) {
                if (!finite_pos(j.scale)) throw InvalidMechanism("stable scale must be > 0");
                if (!std::isfinite(j.alpha)) throw InvalidMechanism("stable index must be finite");
                if (j.alpha > 1.0 && j.alpha <= 2.0) {
                    if (j.sign != StableSign::Positive)
                        throw InvalidMechanism("stable index in (1,2] needs the positive sign");
                } else if (j.alpha > 0.0 && j.alpha < 1.0) {
                    if (j.sign != StableSign::Negative)
                        throw InvalidMechanism("stable index in (0,1) needs the negative sign in a branching mechanism");
                } else {
                    throw InvalidMechanism("stable index must lie in (0,1) or (1,2]");
                }
            } else if constexpr (std::is_same_v<T, CompoundPoissonJumps>) {
                if (!finite_nonneg(j.rate)) throw InvalidMechanism("compound Poisson rate must be >= 0");
                validate_law(j.law);
            }
        },
        jumps);
}

void ImmigrationMechanism::validate() const {
    if (!finite_nonneg(killing)) throw InvalidMechanism("immigration killing rate must be finite and >= 0");
    if (!finite_nonneg(drift)) throw InvalidMechanism("subordinator drift must be finite and >= 0");
    std::visit(
        [](const auto& j) {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, StableJumps>) {
                if (!finite_pos(j.scale)) throw InvalidMechanism("stable scale must be > 0");
                if (!(j.alpha > 0.0 && j.alpha < 1.0))
                    throw InvalidMechanism("stable subordinator index must lie in (0,1)");
                if (j.sign != StableSign::Positive)
                    throw InvalidMechanism("stable subordinator needs the positive sign");
            } else if constexpr (std::is_same_v<T, CompoundPoissonJumps>) {
                if (!finite_nonneg(j.rate)) throw InvalidMechanism("compound Poisson rate must be >= 0");
                validate_law(j.law);
            } else if constexpr (std::is_same_v<T, GammaSubordinatorJumps>) {
                if (!finite_pos(j.shape) || !finite_pos(j.rate))
                    throw InvalidMechanism("gamma subordinator shape and rate must be > 0");
            }
        },
        jumps);
}

double eval_psi(const BranchingMechanism& mech, double lambda) {
    mech.validate();
    check_lambda(lambda);
    double v = -mech.killing;
    if (lambda == 0.0) return v;
    if (mech.drift != 0.0) v += mech.drift * lambda;
    if (mech.diffusion != 0.0) v += 0.5 * mech.diffusion * lambda * lambda;
    v += std::visit(
        [lambda](const auto& j) -> double {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, StableJumps>) {
                return stable_term(j, lambda);
            } else if constexpr (std::is_same_v<T, CompoundPoissonJumps>) {
                if (j.rate == 0.0) return 0.0;
                return -j.rate * jump_laplace_deficit(j.law, lambda);
            } else {
                return 0.0;
            }
        },
        mech.jumps);
    return v;
}

double eval_phi(const ImmigrationMechanism& mech, double lambda) {
    mech.validate();
    check_lambda(lambda);
    double v = mech.killing;
    if (lambda == 0.0) return v;
    if (mech.drift != 0.0) v += mech.drift * lambda;
    v += std::visit(
        [lambda](const auto& j) -> double {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, StableJumps>) {
                return stable_term(j, lambda);
            } else if constexpr (std::is_same_v<T, CompoundPoissonJumps>) {
                if (j.rate == 0.0) return 0.0;
                return j.rate * jump_laplace_deficit(j.law, lambda);
            } else if constexpr (std::is_same_v<T, GammaSubordinatorJumps>) {
                return j.shape * std::log1p(lambda / j.rate);
            } else {
                return 0.0;
            }
        },
        mech.jumps);
    return v;
}

bool is_zero(const ImmigrationMechanism& mech) {
    if (mech.killing != 0.0 || mech.drift != 0.0) return false;
    if (std::holds_alternative<NoJumps>(mech.jumps)) return true;
    if (const auto* cp = std::get_if<CompoundPoissonJumps>(&mech.jumps)) return cp->rate == 0.0;
    return false;
}

bool is_zero(const BranchingMechanism& mech) {
    if (mech.killing != 0.0 || mech.drift != 0.0 || mech.diffusion != 0.0) return false;
    if (std::holds_alternative<NoJumps>(mech.jumps)) return true;
    if (const auto* cp = std::get_if<CompoundPoissonJumps>(&mech.jumps)) return cp->rate == 0.0;
    return false;
}

BranchingMechanism scaled(const BranchingMechanism& mech, double c) {
    if (!finite_pos(c)) throw InvalidArgument("mechanism scale factor must be > 0");
    BranchingMechanism out = mech;
    out.killing *= c;
    out.drift *= c;
    out.diffusion *= c;
    std::visit(
        [c](auto& j) {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, StableJumps>) j.scale *= c;
            if constexpr (std::is_same_v<T, CompoundPoissonJumps>) j.rate *= c;
        },
        out.jumps);
    return out;
}

// ---------------------------------------------------------------------------

bool is_explosive(const BranchingMechanism& psi, const ExplosionOptions& opts) {
    psi.validate();
    if (!(opts.eps > 0.0)) throw InvalidArgument("explosion test neighbourhood must be > 0");

    // Sign of Psi on the probes eps * 2^-j. Convexity with Psi(0+) <= 0 means a
    // negative value at some point forces negativity on everything to its left.
    const int probes = opts.sign_probes;
    std::vector<bool> negative(static_cast<std::size_t>(probes) + 1);
    for (int j = 0; j <= probes; ++j)
        negative[j] = eval_psi(psi, std::ldexp(opts.eps, -j)) < 0.0;

    if (!negative[probes]) {
        for (int j = 0; j < probes; ++j)
            if (negative[j])
                throw IndeterminateError("branching mechanism changes sign near 0 against convexity", {});
        return false;
    }
    int first = probes;
    while (first > 0 && negative[first - 1]) --first;
    const double top = std::ldexp(opts.eps, -first);

    // Dyadic pieces of the integral of 1/(-Psi), each done in log-space with a
    // fixed Gauss-Legendre rule (the integrand is smooth on every piece).
    auto piece = [&](double lo, double hi) {
        auto integrand = [&](double s) {
            const double l = std::exp(s);
            return l / -eval_psi(psi, l);
        };
        return boost::math::quadrature::gauss<double, 20>::integrate(integrand, std::log(lo),
                                                                     std::log(hi));
    };

    std::vector<double> partial;
    double total = 0.0;
    double previous_piece = 0.0;
    int settled = 0;
    int flat = 0;
    for (int k = 0; k < opts.max_halvings; ++k) {
        const double hi = std::ldexp(top, -k);
        const double lo = std::ldexp(top, -(k + 1));
        if (lo == 0.0) break;
        const double p = piece(lo, hi);
        if (!std::isfinite(p)) return false;  // non-integrable singularity away from 0
        total += p;
        partial.push_back(total);

        settled = (p <= opts.rel_tol * total) ? settled + 1 : 0;
        if (settled >= opts.consecutive) return true;

        // Pieces of a divergent integral stop shrinking (ratio -> 1 or more).
        if (k > 0 && p >= previous_piece * (1.0 - 1e-9)) ++flat;
        else flat = 0;
        if (flat >= opts.consecutive && k >= 30) return false;
        previous_piece = p;
    }
    throw IndeterminateError("explosion integral neither settled nor diverged", std::move(partial));
}

ExplosionVerdict classify_explosion(const BranchingMechanism& psi, const ImmigrationMechanism& phi,
                                    const ExplosionOptions& opts) {
    psi.validate();
    phi.validate();
    ExplosionVerdict v;
    v.jumps_to_infinity_possible = psi.killing > 0.0 || phi.killing > 0.0;
    v.continuous_explosion_possible = psi.killing == 0.0 && is_explosive(psi, opts);
    v.continuous_explosion_certain =
        v.continuous_explosion_possible && phi.killing == 0.0 && !is_zero(phi);
    return v;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

void reject_unknown(const json& spec, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : spec.items()) {
        (void)value;
        if (!allowed.count(key)) throw ConfigError("unknown mechanism key '" + key + "'");
    }
}

double number(const json& spec, const char* key, double fallback) {
    if (!spec.contains(key)) return fallback;
    const auto& v = spec.at(key);
    if (!v.is_number()) throw ConfigError(std::string("mechanism key '") + key + "' must be a number");
    return v.get<double>();
}

double required_number(const json& spec, const char* key) {
    if (!spec.contains(key)) throw ConfigError(std::string("mechanism key '") + key + "' is required");
    return number(spec, key, 0.0);
}

json law_to_json(const JumpLaw& law) {
    return std::visit(
        [](const auto& l) -> json {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, ExponentialJumps>) {
                return {{"law", "exponential"}, {"rate", l.rate}};
            } else if constexpr (std::is_same_v<T, DiracJumps>) {
                return {{"law", "dirac"}, {"size", l.size}};
            } else {
                return {{"law", "gamma"}, {"shape", l.shape}, {"rate", l.rate}};
            }
        },
        law);
}

JumpLaw law_from_json(const json& spec) {
    if (!spec.is_object() || !spec.contains("law") || !spec.at("law").is_string())
        throw ConfigError("jump law must be an object with a 'law' string");
    const auto name = spec.at("law").get<std::string>();
    if (name == "exponential") {
        reject_unknown(spec, {"law", "rate"});
        return ExponentialJumps{required_number(spec, "rate")};
    }
    if (name == "dirac") {
        reject_unknown(spec, {"law", "size"});
        return DiracJumps{required_number(spec, "size")};
    }
    if (name == "gamma") {
        reject_unknown(spec, {"law", "shape", "rate"});
        return GammaJumps{required_number(spec, "shape"), required_number(spec, "rate")};
    }
    throw ConfigError("unknown jump law '" + name + "'");
}

StableSign sign_from_json(const json& spec, StableSign fallback) {
    if (!spec.contains("sign")) return fallback;
    const auto& s = spec.at("sign");
    if (s == "positive") return StableSign::Positive;
    if (s == "negative") return StableSign::Negative;
    throw ConfigError("stable sign must be \"positive\" or \"negative\"");
}

const char* sign_name(StableSign s) { return s == StableSign::Positive ? "positive" : "negative"; }

std::string kind_of(const json& spec) {
    if (!spec.contains("kind") || !spec.at("kind").is_string())
        throw ConfigError("mechanism spec needs a 'kind' string");
    return spec.at("kind").get<std::string>();
}

double drift_value(const json& spec, const char* canonical) {
    if (spec.contains(canonical) && spec.contains("drift"))
        throw ConfigError(std::string("give either '") + canonical + "' or 'drift', not both");
    return spec.contains("drift") ? number(spec, "drift", 0.0) : number(spec, canonical, 0.0);
}

}  // namespace

json to_json(const BranchingMechanism& m) {
    json out = {{"killing", m.killing}, {"a", m.drift}, {"sigma2", m.diffusion}};
    std::visit(
        [&out](const auto& j) {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, StableJumps>) {
                out["kind"] = "stable";
                out["alpha"] = j.alpha;
                out["scale"] = j.scale;
                out["sign"] = sign_name(j.sign);
            } else if constexpr (std::is_same_v<T, CompoundPoissonJumps>) {
                out["kind"] = "compound_poisson";
                out["rate"] = j.rate;
                out["jump"] = law_to_json(j.law);
            } else {
                out["kind"] = "none";
            }
        },
        m.jumps);
    return out;
}

json to_json(const ImmigrationMechanism& m) {
    json out = {{"killing", m.killing}, {"d", m.drift}};
    std::visit(
        [&out](const auto& j) {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, StableJumps>) {
                out["kind"] = "stable";
                out["alpha"] = j.alpha;
                out["scale"] = j.scale;
                out["sign"] = sign_name(j.sign);
            } else if constexpr (std::is_same_v<T, CompoundPoissonJumps>) {
                out["kind"] = "compound_poisson";
                out["rate"] = j.rate;
                out["jump"] = law_to_json(j.law);
            } else if constexpr (std::is_same_v<T, GammaSubordinatorJumps>) {
                out["kind"] = "gamma";
                out["shape"] = j.shape;
                out["rate"] = j.rate;
            } else {
                out["kind"] = "none";
            }
        },
        m.jumps);
    return out;
}

BranchingMechanism branching_from_json(const json& spec) {
    if (spec.is_string()) {
        const auto name = spec.get<std::string>();
        if (name == "besq") return BranchingMechanism::besq();
        if (name == "zero") return BranchingMechanism::zero();
        throw ConfigError("unknown branching preset '" + name + "'");
    }
    if (!spec.is_object()) throw ConfigError("branching mechanism must be a JSON object or preset name");
    const auto kind = kind_of(spec);

    BranchingMechanism m;
    const std::set<std::string> base = {"kind", "killing", "a", "drift", "sigma2"};
    auto with = [&base](std::initializer_list<std::string> extra) {
        auto s = base;
        s.insert(extra);
        return s;
    };

    if (kind == "none" || kind == "drift" || kind == "diffusion" || kind == "killing") {
        reject_unknown(spec, base);
    } else if (kind == "besq") {
        reject_unknown(spec, {"kind"});
        return BranchingMechanism::besq();
    } else if (kind == "stable") {
        reject_unknown(spec, with({"alpha", "scale", "sign"}));
        StableJumps s;
        s.alpha = required_number(spec, "alpha");
        s.scale = number(spec, "scale", 1.0);
        s.sign = sign_from_json(spec, s.alpha > 1.0 ? StableSign::Positive : StableSign::Negative);
        m.jumps = s;
    } else if (kind == "compound_poisson") {
        reject_unknown(spec, with({"rate", "jump"}));
        CompoundPoissonJumps cp;
        cp.rate = required_number(spec, "rate");
        if (!spec.contains("jump")) throw ConfigError("compound_poisson needs a 'jump' law");
        cp.law = law_from_json(spec.at("jump"));
        m.jumps = cp;
    } else {
        throw ConfigError("unknown branching kind '" + kind + "'");
    }
    m.killing = number(spec, "killing", 0.0);
    m.drift = drift_value(spec, "a");
    m.diffusion = number(spec, "sigma2", 0.0);
    try {
        m.validate();
    } catch (const InvalidMechanism& e) {
        throw ConfigError(e.what());
    }
    return m;
}

ImmigrationMechanism immigration_from_json(const json& spec) {
    if (spec.is_string()) {
        const auto name = spec.get<std::string>();
        if (name == "zero") return ImmigrationMechanism::zero();
        throw ConfigError("unknown immigration preset '" + name + "'");
    }
    if (!spec.is_object()) throw ConfigError("immigration mechanism must be a JSON object or preset name");
    const auto kind = kind_of(spec);

    ImmigrationMechanism m;
    const std::set<std::string> base = {"kind", "killing", "d", "drift"};
    auto with = [&base](std::initializer_list<std::string> extra) {
        auto s = base;
        s.insert(extra);
        return s;
    };

    if (kind == "none" || kind == "drift" || kind == "killing") {
        reject_unknown(spec, base);
    } else if (kind == "stable") {
        reject_unknown(spec, with({"alpha", "scale", "sign"}));
        StableJumps s;
        s.alpha = required_number(spec, "alpha");
        s.scale = number(spec, "scale", 1.0);
        s.sign = sign_from_json(spec, StableSign::Positive);
        m.jumps = s;
    } else if (kind == "compound_poisson") {
        reject_unknown(spec, with({"rate", "jump"}));
        CompoundPoissonJumps cp;
        cp.rate = required_number(spec, "rate");
        if (!spec.contains("jump")) throw ConfigError("compound_poisson needs a 'jump' law");
        cp.law = law_from_json(spec.at("jump"));
        m.jumps = cp;
    } else if (kind == "gamma") {
        reject_unknown(spec, with({"shape", "rate"}));
        m.jumps = GammaSubordinatorJumps{number(spec, "shape", 1.0), number(spec, "rate", 1.0)};
    } else {
        throw ConfigError("unknown immigration kind '" + kind + "'");
    }
    m.killing = number(spec, "killing", 0.0);
    m.drift = drift_value(spec, "d");
    try {
        m.validate();
    } catch (const InvalidMechanism& e) {
        throw ConfigError(e.what());
    }
    return m;
}

json to_json(const ExplosionVerdict& v) {
    return {{"jumps", v.jumps_to_infinity_possible},
            {"continuous", v.continuous_explosion_possible},
            {"certain", v.continuous_explosion_certain}};
}

}  // namespace cbilab
