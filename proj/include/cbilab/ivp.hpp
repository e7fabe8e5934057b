#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "cbilab/paths.hpp"

namespace cbilab {

/// One piece of a cumulative population. With tau = t - t0 the rate solves
/// r' = beta r + s, so
///   r(tau) = r0 e^{beta tau} + s tau phi1(beta tau)
///   c(tau) = c0 + r0 tau phi1(beta tau) + s tau^2 phi2(beta tau)
/// where phi1(z) = (e^z - 1)/z and phi2(z) = (e^z - 1 - z)/z^2.
struct PopulationSegment {
    double t0 = 0.0;
    double c0 = 0.0;
    double r0 = 0.0;
    double beta = 0.0;
    double s = 0.0;

    double c_at(double tau) const;
    double r_at(double tau) const;
    bool operator==(const PopulationSegment&) const = default;
};

double phi1(double z);
double phi2(double z);

/// Continuous non-decreasing c with c(0) = 0 and right derivative h, both +inf
/// from the explosion time on. The last segment is valid up to the horizon.
class CumulativePopulation {
public:
    CumulativePopulation(std::vector<PopulationSegment> segments, double horizon,
                         double explosion_time = std::numeric_limits<double>::infinity());

    double c(double t) const;
    /// Population profile: right derivative of c.
    double h(double t) const;
    double operator()(double t) const { return c(t); }

    double horizon() const { return horizon_; }
    double explosion_time() const { return explosion_time_; }
    bool exploded() const { return explosion_time_ <= horizon_; }
    const std::vector<PopulationSegment>& segments() const { return segments_; }

private:
    std::size_t segment_index(double t) const;

    std::vector<PopulationSegment> segments_;
    double horizon_;
    double explosion_time_;
};

/// Throws AdmissibilityError unless f(0) + g(0) >= 0, f has no negative jumps
/// and g is non-decreasing.
void check_admissible(const SteppedPath& f, const SteppedPath& g);

/// Event-driven solution of c'_+ = f(c) + g on [0, horizon] for stepped f
/// (a function of space) and g (a function of time). A zero rate with g
/// locally constant is held until the next immigration event, so the result is
/// the solution without spontaneous generation.
CumulativePopulation solve_exact(const SteppedPath& f, const SteppedPath& g, double horizon);

struct EulerSolution {
    double sigma = 0.0;
    std::vector<double> times;  // t_i = i sigma
    std::vector<double> c;      // c(t_i); +inf once the ceiling is crossed
    std::vector<double> rates;  // rates[i] is the slope on [t_{i-1}, t_i); rates[0] = 0
    bool exploded = false;
    double explosion_time = std::numeric_limits<double>::infinity();

    /// Piecewise-linear c between grid points.
    double c_at(double t) const;
    /// Right derivative of the piecewise-linear c.
    double h_at(double t) const;
};

using RealFunction = std::function<double(double)>;

/// Span-sigma Euler scheme
///   c(t_i) = c(t_{i-1}) + sigma [f(c(t_{i-1})) + g(t_{i-1})]^+
/// on ceil(horizon / sigma) steps. f is queried at non-decreasing arguments
/// and g at the grid times in order. Crossing the ceiling freezes c at +inf.
EulerSolution solve_euler(const RealFunction& f, const RealFunction& g, double sigma, double horizon,
                          double ceiling = 1e12);
/// Same recursion with an explicit number of steps.
EulerSolution euler_steps(const RealFunction& f, const RealFunction& g, double sigma, std::size_t steps,
                          double ceiling = 1e12);

/// Classical Lamperti transform of x + f: the inverse of
/// i(y) = integral_0^y dz / (x + f(z)), built segment by segment in closed form.
CumulativePopulation lamperti_time_change(const SteppedPath& f, double x, double horizon);

struct ScalingCheck {
    bool holds = false;
    double max_deviation = 0.0;
};

/// Compares S_a^b c^sigma(f, g) with c^{sigma/a}(S_b^{b/a} f, S_a^{b/a} g) on
/// the shared grid t'_i = i sigma / a, i = 0..steps.
ScalingCheck scale_commutes(const SteppedPath& f, const SteppedPath& g, double sigma, double a, double b,
                            std::size_t steps, double tolerance = 1e-12);

// ---------------------------------------------------------------------------
// Explosion of deterministic solutions
// ---------------------------------------------------------------------------

/// Reproduction functions with a closed-form tail:
///   Power:        f(x) = offset + coef * x^exponent
///   Exponential:  f(x) = offset + coef * e^{exponent * x}
struct ReproductionTail {
    enum class Family { Power, Exponential };
    Family family = Family::Power;
    double offset = 0.0;
    double coef = 1.0;
    double exponent = 1.0;

    double operator()(double x) const;
};

enum class ExplosionOutcome { NoExplosion, Explosion, Indeterminate };

/// Deterministic explosion criterion: a divergent tail integral of 1/f^+ rules
/// explosion out; a convergent one together with f -> inf and
/// g(inf) > max(-f) forces it; anything else is Indeterminate.
ExplosionOutcome detect_explosion(const ReproductionTail& f, double g_infinity);

const char* to_string(ExplosionOutcome outcome);

}  // namespace cbilab
