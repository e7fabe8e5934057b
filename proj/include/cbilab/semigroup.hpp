#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbilab/mechanisms.hpp"

namespace cbilab {

/// Solution of u' = -Psi(u), u_0 = lambda, and v' = Phi(u), v_0 = 0, on the
/// grid t_i = i * step (step is t_max / n for the smallest admissible n).
struct SemigroupSolution {
    double lambda = 0.0;
    double step = 0.0;
    std::vector<double> times;
    std::vector<double> u;
    std::vector<double> v;  // empty for solve_u
    /// Richardson estimate of the max error of u (and of v when present) over
    /// the grid, from one run at half the step.
    double u_error = 0.0;
    double v_error = 0.0;
    std::string method = "rk4";
};

/// Classical RK4 for u. Throws DomainExitError if u leaves (0, inf).
SemigroupSolution solve_u(const BranchingMechanism& psi, double lambda, double t_max, double step = 1e-3);

/// u as in solve_u plus v by composite Simpson on the u grid.
SemigroupSolution solve_v(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double lambda,
                          double t_max, double step = 1e-3);

/// Closed-form u_t(lambda) for the built-in families that have one (zero,
/// killing only, drift-diffusion without killing, pure stable).
std::optional<double> analytic_u(const BranchingMechanism& psi, double lambda, double t);

struct ExtinctionOptions {
    double lambda_big = 1e12;
    double rel_tol = 1e-11;  // per-step tolerance of the adaptive integrator
};

/// u_t(inf) = lim u_t(lambda). Closed form where available, otherwise
/// adaptive RK4 from lambda_big.
double u_infinity(const BranchingMechanism& psi, double t, const ExtinctionOptions& opts = {});

/// u_t(lambda) and v_t(lambda) by adaptive RK4 (step doubling); used for large
/// lambda where a fixed step would be unstable.
std::pair<double, double> adaptive_uv(const BranchingMechanism& psi, const ImmigrationMechanism& phi,
                                      double lambda, double t, double rel_tol = 1e-11);

struct LaplaceValue {
    double value = 1.0;
    double err_estimate = 0.0;
    double u = 0.0;
    double v = 0.0;
};

/// E[exp(-lambda Z_t)] = exp(-x u_t(lambda) - v_t(lambda)) for a CBI(Psi, Phi)
/// started at x. lambda = +inf gives P(Z_t = 0); lambda = 0 gives P(Z_t < inf).
LaplaceValue cbi_laplace(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double x, double t,
                         double lambda, double step = 1e-3);

struct CharacterizationResult {
    double residual = 0.0;
    double stderr_ = 0.0;
    std::size_t n_paths = 0;
};

/// Monte-Carlo residual of
///   E e^{-l Z_t} - E e^{-l Z_0} - int_0^t E[(Psi(l) Z_s - Phi(l)) e^{-l Z_s}] ds
/// from paths sampled on a common grid starting at 0 (left-point rule in s).
/// Refuses fewer than 100 paths with InsufficientData.
CharacterizationResult check_characterization(std::span<const std::vector<double>> paths,
                                              std::span<const double> grid, const BranchingMechanism& psi,
                                              const ImmigrationMechanism& phi, double lambda, double t);

}  // namespace cbilab
