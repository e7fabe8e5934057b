#include "cbilab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "cbilab/errors.hpp"
#include "cbilab/ivp.hpp"
#include "cbilab/paths.hpp"
#include "cbilab/rng.hpp"
#include "cbilab/semigroup.hpp"
#include "cbilab/stats.hpp"

namespace cbilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent master seed per level of an experiment.
std::uint64_t level_seed(std::uint64_t master_seed, std::uint64_t level) { return mix64(master_seed ^ mix64(level)); }

CbiPath path_from_euler(const EulerSolution& e, std::size_t steps) {
    CbiPath out;
    out.sigma = e.sigma;
    out.times.assign(e.times.begin(), e.times.begin() + static_cast<std::ptrdiff_t>(steps) + 1);
    out.z.assign(e.rates.begin() + 1, e.rates.end());
    out.c.assign(e.c.begin(), e.c.begin() + static_cast<std::ptrdiff_t>(steps) + 1);
    if (e.exploded && e.explosion_time <= out.times.back()) {
        out.exploded = true;
        out.explosion_time = e.explosion_time;
    }
    return out;
}

std::size_t grid_steps(double horizon, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("Euler span must be finite and > 0");
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be finite and >= 0");
    return static_cast<std::size_t>(std::ceil(horizon / sigma - 1e-9));
}

std::pair<double, double> mean_and_stderr(const std::vector<double>& values) {
    RunningStats stats;
    for (double v : values) stats.add(v);
    return {stats.mean(), stats.stderr_of_mean()};
}

nlohmann::json finite_or_string(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace

std::vector<double> run_replications(std::size_t n, unsigned threads, const std::function<double(std::size_t)>& fn) {
    std::vector<double> results(n, 0.0);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t rep = 0; rep < n; ++rep) results[rep] = fn(rep);
        return results;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t rep = w; rep < n; rep += threads) results[rep] = fn(rep);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& worker : workers) worker.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

CbiPath simulate_cbi_path(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double x, double horizon,
                          double sigma, std::uint64_t seed, std::uint64_t rep, double ceiling) {
    psi.validate();
    phi.validate();
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("initial value must be finite and >= 0");
    const std::size_t steps = grid_steps(horizon, sigma);
    LazyLevySampler X(psi, Stream(seed, stream_id(rep, StreamRole::X)));
    LazyLevySampler Y(phi, Stream(seed, stream_id(rep, StreamRole::Y)));
    // One extra step evaluates the profile at the last grid time.
    const auto e = euler_steps([&](double c) { return X(c); }, [&](double t) { return x + Y(t); }, sigma, steps + 1,
                               ceiling);
    return path_from_euler(e, steps);
}

CbiPath simulate_cbi_path_pinned(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double x,
                                 double horizon, double sigma, std::uint64_t seed, double spacing, double c_max,
                                 std::uint64_t rep) {
    psi.validate();
    phi.validate();
    if (!(spacing > 0.0) || !(c_max > 0.0)) throw InvalidArgument("pinned grid needs spacing > 0 and c_max > 0");
    const std::size_t steps = grid_steps(horizon, sigma);
    LazyLevySampler sampler(psi, Stream(seed, stream_id(rep, StreamRole::X)));
    const auto cells = static_cast<std::size_t>(std::ceil(c_max / spacing));
    std::vector<double> pinned(cells + 1);
    for (std::size_t j = 0; j <= cells; ++j) pinned[j] = sampler(static_cast<double>(j) * spacing);
    auto X = [&](double c) {
        const double pos = c / spacing;
        if (!(pos < static_cast<double>(cells))) return kInf;
        const auto j = static_cast<std::size_t>(pos);
        const double w = pos - static_cast<double>(j);
        if (!std::isfinite(pinned[j + 1])) return pinned[j];
        return pinned[j] + w * (pinned[j + 1] - pinned[j]);
    };
    LazyLevySampler Y(phi, Stream(seed, stream_id(rep, StreamRole::Y)));
    const auto e = euler_steps(X, [&](double t) { return x + Y(t); }, sigma, steps + 1, 1e12);
    return path_from_euler(e, steps);
}

double laplace_weight(double lambda, double z) {
    if (std::isinf(z)) return 0.0;
    if (lambda == 0.0) return 1.0;
    if (std::isinf(lambda)) return z == 0.0 ? 1.0 : 0.0;
    return std::exp(-lambda * z);
}

nlohmann::json to_json(const McReport& r) {
    return {{"experiment", r.experiment},
            {"estimate", r.estimate},
            {"stderr", r.stderr_},
            {"n_replications", r.n_replications},
            {"master_seed", r.master_seed},
            {"oracle", r.oracle},
            {"difference", r.difference()},
            {"statistical_tolerance", r.statistical_tolerance},
            {"discretization_allowance", r.discretization_allowance},
            {"tolerance", r.tolerance()},
            {"passed", r.passed},
            {"metadata", r.metadata}};
}

McReport verify_laplace(const BranchingMechanism& psi, const ImmigrationMechanism& phi, double x, double t,
                        double lambda, std::size_t n, double sigma, std::uint64_t master_seed,
                        const VerifyOptions& opts) {
    if (n < 100) throw InsufficientData("verify_laplace needs at least 100 replications");
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
    const auto values = run_replications(n, opts.threads, [&](std::size_t rep) {
        const auto path = simulate_cbi_path(psi, phi, x, t, sigma, master_seed, rep, opts.ceiling);
        return laplace_weight(lambda, path.z.back());
    });
    std::size_t exploded = 0;
    for (double v : values)
        if (v == 0.0 && lambda == 0.0) ++exploded;

    McReport r;
    r.experiment = "verify-laplace";
    std::tie(r.estimate, r.stderr_) = mean_and_stderr(values);
    r.n_replications = n;
    r.master_seed = master_seed;
    r.oracle = cbi_laplace(psi, phi, x, t, lambda, opts.oracle_step).value;
    r.statistical_tolerance = 3.0 * r.stderr_;
    r.discretization_allowance = opts.k_disc * sigma;
    r.passed = std::abs(r.difference()) <= r.tolerance();
    r.metadata = {{"sigma", sigma},   {"horizon", t},        {"lambda", finite_or_string(lambda)},
                  {"x", x},           {"psi", to_json(psi)}, {"phi", to_json(phi)},
                  {"k_disc", opts.k_disc}};
    if (lambda == 0.0) r.metadata["exploded_paths"] = exploded;
    return r;
}

nlohmann::json to_json(const GwiReport& r) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : r.levels)
        levels.push_back({{"n", l.n},
                          {"k_n", l.k_n},
                          {"e_n", l.e_n},
                          {"generation", l.generation},
                          {"estimate", l.estimate},
                          {"stderr", l.stderr_},
                          {"gap", l.gap}});
    return {{"experiment", "gwi-limit"}, {"oracle", r.oracle},           {"c", finite_or_string(r.c)},
            {"levels", levels},          {"trend_ok", r.trend_ok},       {"master_seed", r.master_seed},
            {"metadata", r.metadata}};
}

GwiReport gwi_scaling_experiment(const DiscreteLaw& mu, const DiscreteLaw& nu, const GwiScaling& s,
                                 const std::vector<std::size_t>& ns, const BranchingMechanism& psi,
                                 const ImmigrationMechanism& phi, double t, double lambda, std::size_t samples,
                                 std::uint64_t master_seed, unsigned threads) {
    if (ns.empty()) throw InvalidArgument("gwi experiment needs at least one n");
    if (!(s.x > 0.0)) throw InvalidArgument("scaling x must be > 0");
    if (samples < 100) throw InsufficientData("gwi experiment needs at least 100 samples per n");
    // k_n b_m / (x a_m) with m ~ n grows like n^(1 + b_exponent - a_exponent).
    const double growth = 1.0 + s.b_exponent - s.a_exponent;
    GwiReport report;
    report.master_seed = master_seed;
    if (std::abs(growth) < 1e-12) report.c = s.b_coef / s.a_coef;
    else report.c = growth < 0.0 ? 0.0 : kInf;
    const bool second_regime = std::isinf(report.c);
    const auto target_psi = second_regime ? psi : scaled(psi, report.c);
    const auto target_phi = second_regime ? ImmigrationMechanism::zero() : phi;
    const double target_x = s.x;
    report.oracle = cbi_laplace(target_psi, target_phi, target_x, t, lambda).value;

    for (std::size_t level = 0; level < ns.size(); ++level) {
        GwiLevel out;
        out.n = ns[level];
        out.k_n = std::llround(s.x * static_cast<double>(out.n));
        if (out.k_n < 1) throw InvalidArgument("k_n = round(x n) must be >= 1");
        const double ratio = static_cast<double>(out.k_n) / s.x;
        const double m = std::floor(ratio);
        const double a_m = s.a_coef * std::pow(m, s.a_exponent);
        const double b_m = s.b_coef * std::pow(m, s.b_exponent);
        out.e_n = second_regime ? s.x * a_m / static_cast<double>(out.k_n) : b_m;
        out.generation = static_cast<std::size_t>(std::floor(out.e_n * t + 1e-9));
        const GwiConfig cfg{mu, second_regime ? DiscreteLaw::dirac(0) : nu, out.k_n};
        const auto seed = level_seed(master_seed, out.n);
        const auto values = run_replications(samples, threads, [&](std::size_t rep) {
            Stream rng(seed, stream_id(rep, StreamRole::Aux));
            const auto z = simulate_gwi_aggregated(cfg, out.generation, rng);
            return laplace_weight(lambda, static_cast<double>(z.back()) / ratio);
        });
        std::tie(out.estimate, out.stderr_) = mean_and_stderr(values);
        out.gap = std::abs(out.estimate - report.oracle);
        report.levels.push_back(out);
    }
    report.trend_ok = report.levels.back().gap < report.levels.front().gap;
    report.metadata = {{"t", t},
                       {"lambda", finite_or_string(lambda)},
                       {"samples", samples},
                       {"offspring", to_json(mu)},
                       {"immigration", to_json(nu)},
                       {"x", s.x},
                       {"target_psi", to_json(target_psi)},
                       {"target_phi", to_json(target_phi)}};
    return report;
}

nlohmann::json to_json(const PitmanReport& r) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : r.levels)
        levels.push_back({{"n", l.n},
                          {"k_n", l.k_n},
                          {"a_n", l.a_n},
                          {"scaled_max_mean", l.scaled_max_mean},
                          {"scaled_max_stderr", l.scaled_max_stderr},
                          {"scaled_total_mean", l.scaled_total_mean},
                          {"profile_means", l.profile_means},
                          {"ks_to_largest", l.ks_to_largest}});
    return {{"experiment", "pitman"}, {"times", r.times},        {"ks_time", r.ks_time},
            {"levels", levels},       {"trend_ok", r.trend_ok}, {"master_seed", r.master_seed}};
}

PitmanReport pitman_experiment(const DiscreteLaw& mu, double l, const std::vector<std::size_t>& ns,
                               std::uint64_t master_seed, const PitmanOptions& opts) {
    if (ns.empty()) throw InvalidArgument("pitman experiment needs at least one n");
    if (!(l > 0.0)) throw InvalidArgument("start level l must be > 0");
    if (opts.samples == 0) throw InvalidArgument("pitman experiment needs samples > 0");
    PitmanReport report;
    report.times = opts.times;
    report.ks_time = opts.ks_time;
    report.master_seed = master_seed;

    for (std::size_t n : ns) {
        PitmanLevel out;
        out.n = n;
        out.a_n = opts.a_coef * std::pow(static_cast<double>(n), opts.a_exponent);
        out.k_n = std::max<long long>(1, std::llround(l * out.a_n));
        const double time_unit = out.a_n / static_cast<double>(n);  // scaled time per generation
        const auto seed = level_seed(master_seed, n);
        auto scaled_at = [&](const std::vector<long long>& z, double t) {
            const auto g = static_cast<std::size_t>(std::floor(t / time_unit + 1e-9));
            return g < z.size() ? static_cast<double>(z[g]) / out.a_n : 0.0;
        };
        // Each replication yields max, total, profile values and the KS value.
        const std::size_t width = 3 + opts.times.size();
        std::vector<double> table(opts.samples * width);
        run_replications(opts.samples, opts.threads, [&](std::size_t rep) {
            const auto z = conditioned_gw(mu, out.k_n, static_cast<long long>(n), seed, opts.budget,
                                          stream_id(rep, StreamRole::Aux));
            double* row = &table[rep * width];
            double total = 0.0, top = 0.0;
            for (long long v : z) {
                total += static_cast<double>(v) / out.a_n * time_unit;
                top = std::max(top, static_cast<double>(v) / out.a_n);
            }
            row[0] = top;
            row[1] = total;
            row[2] = scaled_at(z, opts.ks_time);
            for (std::size_t j = 0; j < opts.times.size(); ++j) row[3 + j] = scaled_at(z, opts.times[j]);
            return 0.0;
        });
        RunningStats maxima, totals;
        std::vector<RunningStats> profile(opts.times.size());
        for (std::size_t rep = 0; rep < opts.samples; ++rep) {
            const double* row = &table[rep * width];
            maxima.add(row[0]);
            totals.add(row[1]);
            out.ks_samples.push_back(row[2]);
            for (std::size_t j = 0; j < profile.size(); ++j) profile[j].add(row[3 + j]);
        }
        out.scaled_max_mean = maxima.mean();
        out.scaled_max_stderr = maxima.stderr_of_mean();
        out.scaled_total_mean = totals.mean();
        for (const auto& p : profile) out.profile_means.push_back(p.mean());
        report.levels.push_back(std::move(out));
    }
    const auto& largest = report.levels.back().ks_samples;
    for (auto& level : report.levels) level.ks_to_largest = ks_two_sample(level.ks_samples, largest).statistic;
    report.trend_ok = report.levels.size() >= 3 &&
                      report.levels[report.levels.size() - 2].ks_to_largest < report.levels.front().ks_to_largest;
    return report;
}

}  // namespace cbilab
