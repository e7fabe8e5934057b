#include "cbilab/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbilab/errors.hpp"
#include "cbilab/io.hpp"
#include "cbilab/stats.hpp"

namespace cbilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool pure_stable(const BranchingMechanism& psi) {
    return psi.killing == 0.0 && psi.drift == 0.0 && psi.diffusion == 0.0 &&
           std::holds_alternative<StableJumps>(psi.jumps);
}

bool no_jumps(const BranchingMechanism& psi) { return std::holds_alternative<NoJumps>(psi.jumps); }

std::size_t step_count(double t_max, double step, std::size_t minimum) {
    const auto n = static_cast<std::size_t>(std::ceil(t_max / step - 1e-9));
    return std::max(n, minimum);
}

// u can sit at 0 only when it starts there (lambda = 0 and Psi(0) = 0).
bool in_domain(double u, double lambda) { return std::isfinite(u) && (u > 0.0 || (u == 0.0 && lambda == 0.0)); }

std::vector<double> rk4_u(const BranchingMechanism& psi, double lambda, double t_max, std::size_t n) {
    const double h = t_max / static_cast<double>(n);
    std::vector<double> u(n + 1);
    u[0] = lambda;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * h;
        const double x = u[i];
        // Stage values outside the domain are reported with the last valid state.
        auto rhs = [&](double stage, double) {
            if (!in_domain(stage, lambda))
                throw DomainExitError("u left (0, inf) after t = " + format_double(t), t, x);
            return -eval_psi(psi, stage);
        };
        const double k1 = rhs(x, t);
        const double k2 = rhs(x + 0.5 * h * k1, t);
        const double k3 = rhs(x + 0.5 * h * k2, t);
        const double k4 = rhs(x + h * k3, t);
        const double next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!in_domain(next, lambda))
            throw DomainExitError("u left (0, inf) at t = " + format_double(t + h), t, x);
        u[i + 1] = next;
    }
    return u;
}

// Cumulative integral of Phi(u) on a uniform grid with n >= 2 intervals:
// Simpson at even indices, Simpson plus a final 3/8 panel at odd ones, and a
// three-point rule for the first interval.
std::vector<double> simpson_v(const ImmigrationMechanism& phi, const std::vector<double>& u, double h) {
    const std::size_t n = u.size() - 1;
    std::vector<double> F(n + 1), v(n + 1, 0.0);
    for (std::size_t i = 0; i <= n; ++i) F[i] = eval_phi(phi, u[i]);
    if (n >= 2) v[1] = h / 12.0 * (5.0 * F[0] + 8.0 * F[1] - F[2]);
    for (std::size_t i = 2; i <= n; ++i) {
        if (i % 2 == 0) {
            v[i] = v[i - 2] + h / 3.0 * (F[i - 2] + 4.0 * F[i - 1] + F[i]);
        } else {
            v[i] = v[i - 3] + 3.0 * h / 8.0 * (F[i - 3] + 3.0 * F[i - 2] + 3.0 * F[i - 1] + F[i]);
        }
    }
    return v;
}

void check_inputs(double lambda, double t_max, double step) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be finite and >= 0");
    if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw InvalidArgument("t must be finite and >= 0");
    if (!(step > 0.0)) throw InvalidArgument("step must be > 0");
}

SemigroupSolution run(const BranchingMechanism& psi, const ImmigrationMechanism* phi, double lambda,
                      double t_max, double step) {
    psi.validate();
    check_inputs(lambda, t_max, step);
    SemigroupSolution out;
    out.lambda = lambda;
    if (t_max == 0.0) {
        out.times = {0.0};
        out.u = {lambda};
        if (phi) out.v = {0.0};
        return out;
    }
    const std::size_t n = step_count(t_max, step, phi ? 2 : 1);
    out.step = t_max / static_cast<double>(n);
    const auto coarse = rk4_u(psi, lambda, t_max, n);
    const auto fine = rk4_u(psi, lambda, t_max, 2 * n);
    out.times.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        out.times[i] = static_cast<double>(i) * out.step;
        out.u_error = std::max(out.u_error, std::abs(coarse[i] - fine[2 * i]) / 15.0);
    }
    out.u = coarse;
    if (phi) {
        phi->validate();
        out.v = simpson_v(*phi, coarse, out.step);
        const auto fine_v = simpson_v(*phi, fine, out.step / 2.0);
        for (std::size_t i = 0; i <= n; ++i)
            out.v_error = std::max(out.v_error, std::abs(out.v[i] - fine_v[2 * i]) / 15.0);
    }
    return out;
}

}  // namespace

SemigroupSolution solve_u(const BranchingMechanism& psi, double lambda, double t_max, double step) {
    return run(psi, nullptr, lambda, t_max, step);
}

SemigroupSolution solve_v(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double lambda,
                          double t_max, double step) {
    return run(psi, &phi, lambda, t_max, step);
}

std::optional<double> analytic_u(const BranchingMechanism& psi, double lambda, double t) {
    psi.validate();
    if (is_zero(psi)) return lambda;
    if (no_jumps(psi)) {
        if (psi.drift == 0.0 && psi.diffusion == 0.0) return lambda + psi.killing * t;
        if (psi.killing != 0.0) return std::nullopt;
        const double a = psi.drift, s2 = psi.diffusion;
        if (s2 == 0.0) return lambda * std::exp(-a * t);
        if (a == 0.0) return lambda / (1.0 + 0.5 * s2 * lambda * t);
        // Logistic solution; -expm1(-a t)/a stays accurate as a -> 0.
        return lambda * std::exp(-a * t) / (1.0 + 0.5 * s2 * lambda * (-std::expm1(-a * t) / a));
    }
    if (pure_stable(psi)) {
        const auto& s = std::get<StableJumps>(psi.jumps);
        // (u^{1-alpha})' = (alpha - 1) * c for Psi = c u^alpha, and the
        // opposite sign for Psi = -c u^alpha.
        const double k = s.sign == StableSign::Positive ? (s.alpha - 1.0) : (1.0 - s.alpha);
        const double base = std::pow(lambda, 1.0 - s.alpha) + k * s.scale * t;
        return std::pow(base, 1.0 / (1.0 - s.alpha));
    }
    return std::nullopt;
}

std::pair<double, double> adaptive_uv(const BranchingMechanism& psi, const ImmigrationMechanism& phi,
                                      double lambda, double t, double rel_tol) {
    psi.validate();
    phi.validate();
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("adaptive start must be finite and > 0");
    struct State {
        double u, v;
    };
    auto rk4 = [&](State s, double h) -> std::optional<State> {
        auto du = [&](double x) -> std::optional<double> {
            if (!(x > 0.0) || !std::isfinite(x)) return std::nullopt;
            return -eval_psi(psi, x);
        };
        const auto k1 = du(s.u);
        if (!k1) return std::nullopt;
        const auto k2 = du(s.u + 0.5 * h * *k1);
        if (!k2) return std::nullopt;
        const auto k3 = du(s.u + 0.5 * h * *k2);
        if (!k3) return std::nullopt;
        const auto k4 = du(s.u + h * *k3);
        if (!k4) return std::nullopt;
        const double u1 = s.u + 0.5 * h * *k1, u2 = s.u + 0.5 * h * *k2, u3 = s.u + h * *k3;
        State next{s.u + h / 6.0 * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4),
                   s.v + h / 6.0 * (eval_phi(phi, s.u) + 2.0 * eval_phi(phi, u1) + 2.0 * eval_phi(phi, u2) +
                                    eval_phi(phi, u3))};
        if (!(next.u > 0.0) || !std::isfinite(next.u) || !std::isfinite(next.v)) return std::nullopt;
        return next;
    };

    State s{lambda, 0.0};
    double time = 0.0;
    const double rate = std::abs(eval_psi(psi, lambda));
    double h = rate > 0.0 ? std::min(t, 1e-3 * lambda / rate) : t;
    for (long iter = 0; time < t; ++iter) {
        if (iter > 50'000'000 || !(h > 0.0))
            throw DomainExitError("adaptive integration of u stalled", time, s.u);
        h = std::min(h, t - time);
        const auto full = rk4(s, h);
        const auto half = rk4(s, 0.5 * h);
        const auto two = half ? rk4(*half, 0.5 * h) : std::nullopt;
        if (!full || !two) {
            h *= 0.25;
            continue;
        }
        const double err_u = std::abs(two->u - full->u) / 15.0 / two->u;
        const double err_v = std::abs(two->v - full->v) / 15.0 / std::max(std::abs(two->v), 1e-8);
        const double err = std::max(err_u, err_v);
        if (err <= rel_tol) {
            s = {two->u + (two->u - full->u) / 15.0, two->v + (two->v - full->v) / 15.0};
            if (!(s.u > 0.0)) s.u = two->u;
            time += h;
        }
        const double factor = err == 0.0 ? 4.0 : std::clamp(0.9 * std::pow(rel_tol / err, 0.2), 0.2, 4.0);
        h *= factor;
    }
    return {s.u, s.v};
}

double u_infinity(const BranchingMechanism& psi, double t, const ExtinctionOptions& opts) {
    psi.validate();
    if (!(t >= 0.0)) throw InvalidArgument("t must be >= 0");
    if (t == 0.0) return kInf;
    if (no_jumps(psi) && psi.killing == 0.0 && psi.diffusion > 0.0) {
        const double a = psi.drift;
        if (a == 0.0) return 2.0 / (psi.diffusion * t);
        return 2.0 * a / (psi.diffusion * std::expm1(a * t));
    }
    if (pure_stable(psi)) {
        const auto& s = std::get<StableJumps>(psi.jumps);
        if (s.sign == StableSign::Positive) return std::pow((s.alpha - 1.0) * s.scale * t, -1.0 / (s.alpha - 1.0));
    }
    return adaptive_uv(psi, ImmigrationMechanism::zero(), opts.lambda_big, t, opts.rel_tol).first;
}

LaplaceValue cbi_laplace(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double x, double t,
                         double lambda, double step) {
    psi.validate();
    phi.validate();
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("initial state must be finite and >= 0");
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("t must be finite and >= 0");
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");

    LaplaceValue out;
    if (std::isinf(lambda)) {
        const ExtinctionOptions opts;
        out.u = x > 0.0 ? u_infinity(psi, t, opts) : 0.0;
        if (!is_zero(phi) && t > 0.0) {
            const double v_big = adaptive_uv(psi, phi, opts.lambda_big, t, opts.rel_tol).second;
            const double v_less = adaptive_uv(psi, phi, opts.lambda_big * 1e-2, t, opts.rel_tol).second;
            out.v = v_big;
            out.err_estimate = std::abs(v_big - v_less);
        }
        const double exponent = (x > 0.0 ? x * out.u : 0.0) + out.v;
        out.value = std::exp(-exponent);
        out.err_estimate *= out.value;
        return out;
    }

    // A fixed step is stable only while step * |Psi(u)| / u stays small.
    const double stiffness = lambda > 0.0 ? step * std::abs(eval_psi(psi, lambda)) / lambda : 0.0;
    if (stiffness > 0.05) {
        const auto [u, v] = adaptive_uv(psi, phi, lambda, t);
        out.u = u;
        out.v = v;
        out.err_estimate = 1e-10 * (x * u + v);
    } else {
        const auto sol = solve_v(psi, phi, lambda, t, step);
        out.u = sol.u.back();
        out.v = sol.v.back();
        out.err_estimate = x * sol.u_error + sol.v_error;
    }
    out.value = std::exp(-(x * out.u + out.v));
    out.err_estimate *= out.value;
    return out;
}

CharacterizationResult check_characterization(std::span<const std::vector<double>> paths,
                                              std::span<const double> grid, const BranchingMechanism& psi,
                                              const ImmigrationMechanism& phi, double lambda, double t) {
    if (paths.size() < 100)
        throw InsufficientData("characterization check needs at least 100 paths, got " +
                               std::to_string(paths.size()));
    if (grid.empty() || grid.front() != 0.0) throw InvalidArgument("path grid must start at 0");
    if (!(grid.back() >= t) || !(t >= 0.0)) throw InvalidArgument("path grid must cover [0, t]");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw InvalidArgument("path grid must be strictly increasing");

    const double psi_l = eval_psi(psi, lambda);
    const double phi_l = eval_phi(phi, lambda);
    // Index of the last grid point <= t.
    const auto last = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), t) - grid.begin()) - 1;

    auto weight = [lambda](double z) { return std::isinf(z) ? 0.0 : std::exp(-lambda * z); };
    auto drift = [&](double z) {
        if (std::isinf(z)) return 0.0;
        const double e = std::exp(-lambda * z);
        return (psi_l * z - phi_l) * e;
    };

    RunningStats stats;
    for (const auto& path : paths) {
        if (path.size() < last + 1) throw InvalidArgument("path shorter than the grid up to t");
        double integral = 0.0;
        for (std::size_t i = 0; i < last; ++i) integral += drift(path[i]) * (grid[i + 1] - grid[i]);
        if (grid[last] < t) integral += drift(path[last]) * (t - grid[last]);
        stats.add(weight(path[last]) - weight(path[0]) - integral);
    }
    return {stats.mean(), stats.stderr_of_mean(), stats.count()};
}

}  // namespace cbilab
