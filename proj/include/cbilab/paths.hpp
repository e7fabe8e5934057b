#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "cbilab/mechanisms.hpp"
#include "cbilab/rng.hpp"
#include "json.hpp"

namespace cbilab {

/// Right-continuous piecewise-affine path with jumps at breakpoints:
/// on [t_i, t_{i+1}) the value is values[i] + slopes[i] * (t - t_i).
/// The last segment extends past the horizon; arguments below 0 evaluate to
/// values[0]. When absorbed, the path is +inf from absorption_time on.
class SteppedPath {
public:
    SteppedPath() : SteppedPath({0.0}, {0.0}, {0.0}, 0.0) {}
    SteppedPath(std::vector<double> times, std::vector<double> values, std::vector<double> slopes,
                double horizon, std::optional<double> absorption_time = std::nullopt);

    static SteppedPath constant(double value, double horizon);
    /// t -> intercept + slope * t on [0, horizon].
    static SteppedPath line(double intercept, double slope, double horizon);

    double operator()(double t) const { return value(t); }
    double value(double t) const;
    double left_limit(double t) const;
    /// Jump at breakpoint i (0 for i == 0).
    double jump(std::size_t i) const;

    /// Index of the segment containing t (right-continuous convention).
    std::size_t segment_index(double t) const;

    std::span<const double> times() const { return times_; }
    std::span<const double> values() const { return values_; }
    std::span<const double> slopes() const { return slopes_; }
    double horizon() const { return horizon_; }
    std::optional<double> absorption_time() const { return absorption_; }
    bool absorbed() const { return absorption_.has_value(); }
    std::size_t size() const { return times_.size(); }

    bool operator==(const SteppedPath&) const = default;

private:
    std::vector<double> times_;
    std::vector<double> values_;
    std::vector<double> slopes_;
    double horizon_;
    std::optional<double> absorption_;
};

/// Jumps are all >= 0 (an admissible reproduction path).
bool has_no_negative_jumps(const SteppedPath& path);
/// Slopes and jumps all >= 0 (an admissible immigration path).
bool is_non_decreasing(const SteppedPath& path);

/// path + x.
SteppedPath shifted(const SteppedPath& path, double x);

/// Scaling operator (S_a^b f)(t) = f(a t) / b.
SteppedPath scale(const SteppedPath& path, double a, double b);

/// Piecewise-affine interpolation of fn on [0, x_max] with uniform spacing,
/// plus the given extra breakpoints; the last segment continues with the
/// slope of the final cell.
SteppedPath interpolate(const std::function<double(double)>& fn, double x_max, double spacing,
                        std::span<const double> extra_breakpoints = {});

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

using AnyMechanism = std::variant<BranchingMechanism, ImmigrationMechanism>;

/// Draw from the standard totally skewed stable law S_alpha(1, 1, 0)
/// (Chambers-Mallows-Stuck), alpha in (0,1) or (1,2).
double sample_skewed_stable(double alpha, Stream& rng);

/// Scale sigma such that sigma * S_alpha(1,1,0) over a time dt has Laplace
/// exponent scale * dt * lambda^alpha (absolute value of the exponent).
double stable_increment_scale(double alpha, double scale, double dt);

/// Stateful on-demand sampler of a Levy path queried at non-decreasing times.
/// Increments over [last, t] come from the exact increment law of each part
/// (Gaussian, Chambers-Mallows-Stuck, compound Poisson, Gamma), summed
/// independently. Killing draws one Exp(killing) time at construction.
class LazyLevySampler {
public:
    LazyLevySampler(BranchingMechanism mech, Stream rng);
    LazyLevySampler(ImmigrationMechanism mech, Stream rng);

    /// Path value at t >= last_query_time(); throws OrderingError otherwise.
    double query(double t);
    double operator()(double t) { return query(t); }

    double last_query_time() const { return last_time_; }
    double last_value() const { return last_value_; }
    /// +inf when the mechanism has no killing.
    double killing_time() const { return killing_time_; }

private:
    double increment(double dt);

    AnyMechanism mech_;
    Stream rng_;
    double last_time_ = 0.0;
    double last_value_ = 0.0;
    double killing_time_;
};

/// Exact path of a compound-Poisson-with-drift spLp on [0, horizon]: slope
/// -drift, Poisson(rate * horizon) upward jumps at uniform times, absorbed at
/// +inf from an independent Exp(killing) time when that falls in the horizon.
/// Throws UnsupportedFamily for diffusion or stable parts.
SteppedPath sample_stepped_splp(const BranchingMechanism& mech, double horizon, std::uint64_t seed,
                                std::uint64_t stream = 0);

/// Subordinator values at the grid times (exact joint law), interpolated as
/// right-continuous steps. grid must start at 0 and be strictly increasing.
SteppedPath sample_subordinator_grid(const ImmigrationMechanism& mech, std::span<const double> grid,
                                     std::uint64_t seed, std::uint64_t stream = 0);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// CSV with header `time,value,jump`: one row per breakpoint, an `inf` row at
/// the absorption time, and a final row at the horizon holding the
/// unabsorbed left limit there (slopes are recovered from consecutive rows).
void write_csv(std::ostream& out, const SteppedPath& path);
SteppedPath read_csv(std::istream& in);

/// Lossless JSON envelope with optional provenance.
nlohmann::json to_json(const SteppedPath& path, const std::optional<AnyMechanism>& mech = std::nullopt,
                       std::optional<std::uint64_t> seed = std::nullopt);
SteppedPath path_from_json(const nlohmann::json& envelope);

}  // namespace cbilab
