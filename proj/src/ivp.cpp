#include "cbilab/ivp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <boost/math/tools/roots.hpp>

#include "cbilab/errors.hpp"

namespace cbilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double phi1(double z) {
    if (z == 0.0) return 1.0;
    if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0;
    return std::expm1(z) / z;
}

double phi2(double z) {
    if (std::abs(z) < 0.5) {
        // sum_k z^k / (k + 2)!
        double term = 0.5, sum = 0.5;
        for (int k = 1; k < 25; ++k) {
            term *= z / (k + 2);
            sum += term;
        }
        return sum;
    }
    return (std::expm1(z) - z) / (z * z);
}

double PopulationSegment::c_at(double tau) const {
    double v = c0;
    if (r0 != 0.0) v += r0 * tau * phi1(beta * tau);
    if (s != 0.0) v += s * tau * tau * phi2(beta * tau);
    return v;
}

double PopulationSegment::r_at(double tau) const {
    double v = 0.0;
    if (r0 != 0.0) v += r0 * std::exp(beta * tau);
    if (s != 0.0) v += s * tau * phi1(beta * tau);
    return std::max(v, 0.0);
}

CumulativePopulation::CumulativePopulation(std::vector<PopulationSegment> segments, double horizon,
                                           double explosion_time)
    : segments_(std::move(segments)), horizon_(horizon), explosion_time_(explosion_time) {
    if (segments_.empty()) throw InvalidArgument("cumulative population needs a segment");
    if (segments_.front().t0 != 0.0 || segments_.front().c0 != 0.0)
        throw InvalidArgument("cumulative population must start at c(0) = 0");
    for (std::size_t i = 1; i < segments_.size(); ++i)
        if (segments_[i].t0 < segments_[i - 1].t0)
            throw InvalidArgument("population segments must be ordered in time");
}

std::size_t CumulativePopulation::segment_index(double t) const {
    const auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                     [](double v, const PopulationSegment& s) { return v < s.t0; });
    return it == segments_.begin() ? 0 : static_cast<std::size_t>(it - segments_.begin()) - 1;
}

double CumulativePopulation::c(double t) const {
    if (t >= explosion_time_) return kInf;
    if (!(t > 0.0)) return 0.0;
    const auto& seg = segments_[segment_index(t)];
    return seg.c_at(t - seg.t0);
}

double CumulativePopulation::h(double t) const {
    if (t >= explosion_time_) return kInf;
    const auto& seg = segments_[segment_index(std::max(t, 0.0))];
    return seg.r_at(std::max(t, 0.0) - seg.t0);
}

void check_admissible(const SteppedPath& f, const SteppedPath& g) {
    if (!(f.value(0.0) + g.value(0.0) >= 0.0))
        throw AdmissibilityError("f(0) + g(0) must be >= 0");
    if (!has_no_negative_jumps(f)) throw AdmissibilityError("reproduction path has a negative jump");
    if (!is_non_decreasing(g)) throw AdmissibilityError("immigration path must be non-decreasing");
}

namespace {

// Time for the segment to add delta to c, or +inf if that does not happen
// within tau_max.
double time_to_advance(const PopulationSegment& seg, double delta, double tau_max) {
    if (!(delta > 0.0)) return 0.0;
    if (std::isinf(delta)) return kInf;
    const double r0 = seg.r0, beta = seg.beta, s = seg.s;
    if (r0 == 0.0 && s == 0.0) return kInf;
    if (beta == 0.0 && s == 0.0) return delta / r0;
    if (beta == 0.0) return 2.0 * delta / (r0 + std::sqrt(r0 * r0 + 2.0 * s * delta));
    if (s == 0.0) {
        const double arg = beta * delta / r0;
        if (arg <= -1.0) return kInf;
        return std::log1p(arg) / beta;
    }
    // Exponential-affine with forcing: monotone in tau, bracket on [0, tau_max].
    auto gain = [&](double tau) { return seg.c_at(tau) - seg.c0 - delta; };
    if (!std::isfinite(tau_max) || gain(tau_max) < 0.0) return kInf;
    std::uintmax_t iters = 200;
    const auto [lo, hi] =
        boost::math::tools::toms748_solve(gain, 0.0, tau_max, -delta, gain(tau_max),
                                          boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (lo + hi);
}

}  // namespace

CumulativePopulation solve_exact(const SteppedPath& f, const SteppedPath& g, double horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be finite and > 0");
    check_admissible(f, g);

    const double f_absorb = f.absorption_time().value_or(kInf);
    const double g_absorb = g.absorption_time().value_or(kInf);

    std::vector<PopulationSegment> segments;
    double t = 0.0, c = 0.0;
    double explosion = kInf;
    while (t < horizon) {
        if (t >= g_absorb || c >= f_absorb) {
            explosion = t;
            break;
        }
        const std::size_t gi = g.segment_index(t);
        const std::size_t fi = f.segment_index(c);
        PopulationSegment seg{t, c, std::max(0.0, f.value(c) + g.value(t)), f.slopes()[fi], g.slopes()[gi]};
        segments.push_back(seg);

        double next_g = gi + 1 < g.size() ? g.times()[gi + 1] : kInf;
        next_g = std::min(next_g, g_absorb);
        const double t_end = std::min(next_g, horizon);
        double next_f = fi + 1 < f.size() ? f.times()[fi + 1] : kInf;
        next_f = std::min(next_f, f_absorb);

        if (seg.r0 == 0.0 && seg.s == 0.0) {
            t = t_end;
            continue;
        }
        const double tau_f = time_to_advance(seg, next_f - c, t_end - t);
        if (tau_f < t_end - t) {
            t += tau_f;
            c = next_f;
        } else {
            c = seg.c_at(t_end - t);
            t = t_end;
        }
        if (std::isinf(c)) {
            explosion = t;
            break;
        }
    }
    if (segments.empty()) segments.push_back({});
    return CumulativePopulation(std::move(segments), horizon, explosion);
}

// ---------------------------------------------------------------------------

double EulerSolution::c_at(double t) const {
    if (t >= explosion_time) return kInf;
    if (!(t > 0.0)) return 0.0;
    const auto i = static_cast<std::size_t>(std::floor(t / sigma));
    if (i + 1 >= c.size()) return c.back() + (t - times.back()) * rates.back();
    return c[i] + (t - times[i]) * rates[i + 1];
}

double EulerSolution::h_at(double t) const {
    if (t >= explosion_time) return kInf;
    const auto i = static_cast<std::size_t>(std::floor(std::max(t, 0.0) / sigma));
    if (i + 1 >= rates.size()) return rates.back();
    return rates[i + 1];
}

EulerSolution euler_steps(const RealFunction& f, const RealFunction& g, double sigma, std::size_t steps,
                          double ceiling) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("Euler span must be finite and > 0");
    EulerSolution out;
    out.sigma = sigma;
    out.times.reserve(steps + 1);
    out.c.reserve(steps + 1);
    out.rates.reserve(steps + 1);
    out.times.push_back(0.0);
    out.c.push_back(0.0);
    out.rates.push_back(0.0);
    for (std::size_t i = 1; i <= steps; ++i) {
        const double t_prev = static_cast<double>(i - 1) * sigma;
        const double t = static_cast<double>(i) * sigma;
        out.times.push_back(t);
        if (out.exploded) {
            out.c.push_back(kInf);
            out.rates.push_back(kInf);
            continue;
        }
        const double c_prev = out.c.back();
        const double drive = f(c_prev) + g(t_prev);
        const double rate = drive > 0.0 ? drive : 0.0;
        const double c = c_prev + sigma * rate;
        out.rates.push_back(rate);
        if (!(c <= ceiling)) {
            out.exploded = true;
            out.explosion_time = t;
            out.c.push_back(kInf);
        } else {
            out.c.push_back(c);
        }
    }
    return out;
}

EulerSolution solve_euler(const RealFunction& f, const RealFunction& g, double sigma, double horizon,
                          double ceiling) {
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be finite and >= 0");
    if (!(sigma > 0.0)) throw InvalidArgument("Euler span must be > 0");
    // The 1e-9 guard keeps horizon = k sigma from gaining a spurious extra step.
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / sigma - 1e-9));
    return euler_steps(f, g, sigma, steps, ceiling);
}

// ---------------------------------------------------------------------------

CumulativePopulation lamperti_time_change(const SteppedPath& f, double x, double horizon) {
    if (!(x >= 0.0)) throw InvalidArgument("initial value must be >= 0");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be finite and > 0");
    const SteppedPath drive = shifted(f, x);
    check_admissible(drive, SteppedPath::constant(0.0, horizon));
    const double absorb = drive.absorption_time().value_or(kInf);

    std::vector<PopulationSegment> segments;
    double t = 0.0, y = 0.0;
    double explosion = kInf;
    while (t < horizon) {
        if (y >= absorb) {
            explosion = t;
            break;
        }
        const std::size_t k = drive.segment_index(y);
        const double level = drive.value(y);
        const double slope = drive.slopes()[k];
        segments.push_back({t, y, level, slope, 0.0});
        if (level <= 0.0) break;  // zero is absorbing for the time change
        double next = k + 1 < drive.size() ? drive.times()[k + 1] : kInf;
        next = std::min(next, absorb);
        if (std::isinf(next)) break;
        // i(next) - i(y) = integral of dz / (level + slope (z - y)).
        const double span = next - y;
        double dt;
        if (slope == 0.0) {
            dt = span / level;
        } else {
            const double arg = slope * span / level;
            dt = arg <= -1.0 ? kInf : std::log1p(arg) / slope;
        }
        if (std::isinf(dt)) break;
        t += dt;
        y = next;
    }
    if (segments.empty()) segments.push_back({});
    return CumulativePopulation(std::move(segments), horizon, explosion);
}

ScalingCheck scale_commutes(const SteppedPath& f, const SteppedPath& g, double sigma, double a, double b,
                            std::size_t steps, double tolerance) {
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("scaling factors must be > 0");
    const auto lhs = euler_steps([&](double x) { return f(x); }, [&](double t) { return g(t); }, sigma, steps);
    const SteppedPath fs = scale(f, b, b / a);
    const SteppedPath gs = scale(g, a, b / a);
    const auto rhs =
        euler_steps([&](double x) { return fs(x); }, [&](double t) { return gs(t); }, sigma / a, steps);
    ScalingCheck out;
    for (std::size_t i = 0; i <= steps; ++i) {
        const double l = lhs.c[i] / b;
        const double r = rhs.c[i];
        if (std::isinf(l) && std::isinf(r)) continue;
        out.max_deviation = std::max(out.max_deviation, std::abs(l - r));
    }
    out.holds = out.max_deviation <= tolerance;
    return out;
}

// ---------------------------------------------------------------------------

double ReproductionTail::operator()(double x) const {
    if (family == Family::Power) return offset + coef * std::pow(x, exponent);
    return offset + coef * std::exp(exponent * x);
}

ExplosionOutcome detect_explosion(const ReproductionTail& f, double g_infinity) {
    if (!std::isfinite(f.offset) || !std::isfinite(f.coef) || !std::isfinite(f.exponent))
        throw InvalidArgument("reproduction tail parameters must be finite");
    const bool grows = f.coef > 0.0 && f.exponent > 0.0;
    const bool tail_finite = f.family == ReproductionTail::Family::Power ? grows && f.exponent > 1.0 : grows;
    if (!tail_finite) return ExplosionOutcome::NoExplosion;
    // f is increasing here, so max(-f) = -f(0).
    if (g_infinity > -f(0.0)) return ExplosionOutcome::Explosion;
    return ExplosionOutcome::Indeterminate;
}

const char* to_string(ExplosionOutcome outcome) {
    switch (outcome) {
        case ExplosionOutcome::NoExplosion: return "no-explosion";
        case ExplosionOutcome::Explosion: return "explosion";
        case ExplosionOutcome::Indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

}  // namespace cbilab
