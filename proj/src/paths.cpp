#include "cbilab/paths.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "cbilab/errors.hpp"
#include "cbilab/io.hpp"

namespace cbilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Jumps are recomputed from values and slopes, so a continuous breakpoint can
// come out as a rounding-sized negative number.
bool nonneg_up_to_rounding(double jump, double scale) {
    return jump >= -1e-12 * (1.0 + std::abs(scale));
}

}  // namespace

SteppedPath::SteppedPath(std::vector<double> times, std::vector<double> values,
                         std::vector<double> slopes, double horizon,
                         std::optional<double> absorption_time)
    : times_(std::move(times)),
      values_(std::move(values)),
      slopes_(std::move(slopes)),
      horizon_(horizon),
      absorption_(absorption_time) {
    if (times_.empty()) throw InvalidArgument("path needs at least one breakpoint");
    if (times_.size() != values_.size() || times_.size() != slopes_.size())
        throw InvalidArgument("path breakpoints, values and slopes differ in length");
    if (times_.front() != 0.0) throw InvalidArgument("path must start at time 0");
    for (std::size_t i = 1; i < times_.size(); ++i)
        if (!(times_[i] > times_[i - 1]) || !std::isfinite(times_[i]))
            throw InvalidArgument("path breakpoints must be finite and strictly increasing");
    for (std::size_t i = 0; i < times_.size(); ++i)
        if (!std::isfinite(values_[i]) || !std::isfinite(slopes_[i]))
            throw InvalidArgument("path values and slopes must be finite");
    if (!(horizon_ >= times_.back()) || !std::isfinite(horizon_))
        throw InvalidArgument("path horizon must be finite and cover every breakpoint");
    if (absorption_ && !(*absorption_ >= 0.0))
        throw InvalidArgument("absorption time must be >= 0");
}

SteppedPath SteppedPath::constant(double value, double horizon) {
    return SteppedPath({0.0}, {value}, {0.0}, horizon);
}

SteppedPath SteppedPath::line(double intercept, double slope, double horizon) {
    return SteppedPath({0.0}, {intercept}, {slope}, horizon);
}

std::size_t SteppedPath::segment_index(double t) const {
    if (!(t > 0.0)) return 0;
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    return static_cast<std::size_t>(it - times_.begin()) - 1;
}

double SteppedPath::value(double t) const {
    if (absorption_ && t >= *absorption_) return kInf;
    if (!(t > 0.0)) return values_.front();
    const auto i = segment_index(t);
    return values_[i] + slopes_[i] * (t - times_[i]);
}

double SteppedPath::left_limit(double t) const {
    if (absorption_ && t > *absorption_) return kInf;
    if (!(t > 0.0)) return values_.front();
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    const auto i = static_cast<std::size_t>(it - times_.begin()) - 1;
    return values_[i] + slopes_[i] * (t - times_[i]);
}

double SteppedPath::jump(std::size_t i) const {
    if (i == 0) return 0.0;
    return values_[i] - (values_[i - 1] + slopes_[i - 1] * (times_[i] - times_[i - 1]));
}

bool has_no_negative_jumps(const SteppedPath& path) {
    for (std::size_t i = 1; i < path.size(); ++i)
        if (!nonneg_up_to_rounding(path.jump(i), path.values()[i])) return false;
    return true;
}

bool is_non_decreasing(const SteppedPath& path) {
    for (double s : path.slopes())
        if (s < 0.0) return false;
    return has_no_negative_jumps(path);
}

SteppedPath shifted(const SteppedPath& path, double x) {
    std::vector<double> values(path.values().begin(), path.values().end());
    for (double& v : values) v += x;
    return SteppedPath({path.times().begin(), path.times().end()}, std::move(values),
                       {path.slopes().begin(), path.slopes().end()}, path.horizon(),
                       path.absorption_time());
}

SteppedPath scale(const SteppedPath& path, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("scaling factors must be > 0");
    std::vector<double> times, values, slopes;
    times.reserve(path.size());
    values.reserve(path.size());
    slopes.reserve(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) {
        times.push_back(path.times()[i] / a);
        values.push_back(path.values()[i] / b);
        slopes.push_back(path.slopes()[i] * a / b);
    }
    std::optional<double> absorption;
    if (path.absorption_time()) absorption = *path.absorption_time() / a;
    return SteppedPath(std::move(times), std::move(values), std::move(slopes), path.horizon() / a,
                       absorption);
}

SteppedPath interpolate(const std::function<double(double)>& fn, double x_max, double spacing,
                        std::span<const double> extra_breakpoints) {
    if (!(x_max > 0.0) || !(spacing > 0.0)) throw InvalidArgument("interpolation range and spacing must be > 0");
    const auto cells = static_cast<std::size_t>(std::ceil(x_max / spacing - 1e-9));
    std::vector<double> xs;
    xs.reserve(cells + 1 + extra_breakpoints.size());
    for (std::size_t i = 0; i < cells; ++i) xs.push_back(static_cast<double>(i) * spacing);
    xs.push_back(x_max);
    for (double x : extra_breakpoints)
        if (x > 0.0 && x < x_max) xs.push_back(x);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    std::vector<double> values(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) values[i] = fn(xs[i]);
    std::vector<double> slopes(xs.size(), 0.0);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        slopes[i] = (values[i + 1] - values[i]) / (xs[i + 1] - xs[i]);
    if (xs.size() > 1) slopes.back() = slopes[xs.size() - 2];
    return SteppedPath(std::move(xs), std::move(values), std::move(slopes), x_max);
}

// ---------------------------------------------------------------------------

double sample_skewed_stable(double alpha, Stream& rng) {
    using std::numbers::pi;
    const double v = pi * (rng.uniform_open() - 0.5);
    const double w = -std::log(rng.uniform_open());
    const double tan_term = std::tan(pi * alpha / 2.0);
    const double b = std::atan(tan_term) / alpha;
    const double s = std::pow(1.0 + tan_term * tan_term, 1.0 / (2.0 * alpha));
    const double shifted_angle = alpha * (v + b);
    return s * std::sin(shifted_angle) / std::pow(std::cos(v), 1.0 / alpha) *
           std::pow(std::cos(v - shifted_angle) / w, (1.0 - alpha) / alpha);
}

double stable_increment_scale(double alpha, double scale, double dt) {
    using std::numbers::pi;
    return std::pow(scale * dt * std::abs(std::cos(pi * alpha / 2.0)), 1.0 / alpha);
}

namespace {

double sample_jump(const JumpLaw& law, Stream& rng) {
    return std::visit(
        [&rng](const auto& l) -> double {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, ExponentialJumps>) {
                return std::exponential_distribution<double>(l.rate)(rng);
            } else if constexpr (std::is_same_v<T, DiracJumps>) {
                return l.size;
            } else {
                return std::gamma_distribution<double>(l.shape, 1.0 / l.rate)(rng);
            }
        },
        law);
}

double compound_poisson_increment(const CompoundPoissonJumps& cp, double dt, Stream& rng) {
    const double mean = cp.rate * dt;
    if (!(mean > 0.0)) return 0.0;
    const auto n = std::poisson_distribution<long long>(mean)(rng);
    double sum = 0.0;
    for (long long k = 0; k < n; ++k) sum += sample_jump(cp.law, rng);
    return sum;
}

double stable_increment(const StableJumps& s, double dt, Stream& rng) {
    if (s.alpha == 2.0) return std::sqrt(2.0 * s.scale * dt) * std::normal_distribution<double>()(rng);
    return stable_increment_scale(s.alpha, s.scale, dt) * sample_skewed_stable(s.alpha, rng);
}

double draw_killing_time(double killing, Stream& rng) {
    if (!(killing > 0.0)) return kInf;
    return -std::log(rng.uniform_open()) / killing;
}

}  // namespace

LazyLevySampler::LazyLevySampler(BranchingMechanism mech, Stream rng)
    : mech_(std::move(mech)), rng_(rng) {
    std::get<BranchingMechanism>(mech_).validate();
    killing_time_ = draw_killing_time(std::get<BranchingMechanism>(mech_).killing, rng_);
}

LazyLevySampler::LazyLevySampler(ImmigrationMechanism mech, Stream rng)
    : mech_(std::move(mech)), rng_(rng) {
    std::get<ImmigrationMechanism>(mech_).validate();
    killing_time_ = draw_killing_time(std::get<ImmigrationMechanism>(mech_).killing, rng_);
}

double LazyLevySampler::query(double t) {
    if (std::isnan(t) || t < last_time_)
        throw OrderingError("lazy sampler queried at " + format_double(t) + " after " +
                            format_double(last_time_));
    const double dt = t - last_time_;
    last_time_ = t;
    if (t >= killing_time_) last_value_ = kInf;
    if (dt == 0.0 || last_value_ == kInf) return last_value_;
    last_value_ += increment(dt);
    return last_value_;
}

double LazyLevySampler::increment(double dt) {
    if (const auto* b = std::get_if<BranchingMechanism>(&mech_)) {
        double v = -b->drift * dt;
        if (b->diffusion > 0.0)
            v += std::sqrt(b->diffusion * dt) * std::normal_distribution<double>()(rng_);
        v += std::visit(
            [&](const auto& j) -> double {
                using T = std::decay_t<decltype(j)>;
                if constexpr (std::is_same_v<T, StableJumps>) return stable_increment(j, dt, rng_);
                else if constexpr (std::is_same_v<T, CompoundPoissonJumps>)
                    return compound_poisson_increment(j, dt, rng_);
                else return 0.0;
            },
            b->jumps);
        return v;
    }
    const auto& im = std::get<ImmigrationMechanism>(mech_);
    double v = im.drift * dt;
    v += std::visit(
        [&](const auto& j) -> double {
            using T = std::decay_t<decltype(j)>;
            if constexpr (std::is_same_v<T, StableJumps>) return stable_increment(j, dt, rng_);
            else if constexpr (std::is_same_v<T, CompoundPoissonJumps>)
                return compound_poisson_increment(j, dt, rng_);
            else if constexpr (std::is_same_v<T, GammaSubordinatorJumps>)
                return std::gamma_distribution<double>(j.shape * dt, 1.0 / j.rate)(rng_);
            else return 0.0;
        },
        im.jumps);
    return v;
}

SteppedPath sample_stepped_splp(const BranchingMechanism& mech, double horizon, std::uint64_t seed,
                                std::uint64_t stream) {
    mech.validate();
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("horizon must be finite and > 0");
    if (mech.diffusion != 0.0 || std::holds_alternative<StableJumps>(mech.jumps))
        throw UnsupportedFamily("stepped sampling needs a compound-Poisson-with-drift mechanism");

    Stream rng(seed, stream);
    const double killing_time = draw_killing_time(mech.killing, rng);

    std::vector<double> jump_times;
    std::vector<double> jump_sizes;
    if (const auto* cp = std::get_if<CompoundPoissonJumps>(&mech.jumps); cp && cp->rate > 0.0) {
        const auto n = std::poisson_distribution<long long>(cp->rate * horizon)(rng);
        jump_times.resize(static_cast<std::size_t>(n));
        for (auto& t : jump_times) t = horizon * rng.uniform_open();
        std::sort(jump_times.begin(), jump_times.end());
        jump_sizes.resize(jump_times.size());
        for (auto& j : jump_sizes) j = sample_jump(cp->law, rng);
    }

    const double slope = -mech.drift;
    std::vector<double> times{0.0}, values{0.0};
    for (std::size_t k = 0; k < jump_times.size(); ++k) {
        const double t = jump_times[k];
        if (t >= killing_time) break;
        if (t == times.back()) {
            values.back() += jump_sizes[k];
            continue;
        }
        values.push_back(values.back() + slope * (t - times.back()) + jump_sizes[k]);
        times.push_back(t);
    }
    std::vector<double> slopes(times.size(), slope);
    std::optional<double> absorption;
    if (killing_time <= horizon) absorption = killing_time;
    return SteppedPath(std::move(times), std::move(values), std::move(slopes), horizon, absorption);
}

SteppedPath sample_subordinator_grid(const ImmigrationMechanism& mech, std::span<const double> grid,
                                     std::uint64_t seed, std::uint64_t stream) {
    if (grid.empty() || grid.front() != 0.0) throw InvalidArgument("subordinator grid must start at 0");
    LazyLevySampler sampler(mech, Stream(seed, stream));
    std::vector<double> times, values;
    times.reserve(grid.size());
    values.reserve(grid.size());
    std::optional<double> absorption;
    for (double t : grid) {
        if (!times.empty() && !(t > times.back()))
            throw InvalidArgument("subordinator grid must be strictly increasing");
        const double y = sampler.query(t);
        if (y == kInf) {
            absorption = sampler.killing_time();
            break;
        }
        times.push_back(t);
        values.push_back(y);
    }
    if (times.empty()) {
        // Killed at time 0 exactly; keep a well-formed path.
        times.push_back(0.0);
        values.push_back(0.0);
    }
    std::vector<double> slopes(times.size(), 0.0);
    return SteppedPath(std::move(times), std::move(values), std::move(slopes), grid.back(), absorption);
}

// ---------------------------------------------------------------------------

void write_csv(std::ostream& out, const SteppedPath& path) {
    out << "time,value,jump\n";
    const auto tau = path.absorption_time();
    bool absorption_written = false;
    auto write_absorption = [&] {
        out << format_double(*tau) << ",inf,inf\n";
        absorption_written = true;
    };
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (tau && !absorption_written && *tau < path.times()[i]) write_absorption();
        out << format_double(path.times()[i]) << ',' << format_double(path.values()[i]) << ','
            << format_double(path.jump(i)) << '\n';
    }
    if (tau && !absorption_written) write_absorption();
    const std::size_t last = path.size() - 1;
    const double terminal =
        path.values()[last] + path.slopes()[last] * (path.horizon() - path.times()[last]);
    out << format_double(path.horizon()) << ',' << format_double(terminal) << ",0\n";
}

SteppedPath read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty path CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "time,value,jump") throw ConfigError("path CSV header must be 'time,value,jump'");

    struct Row {
        double t, v, j;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw ConfigError("path CSV row needs three columns: '" + line + "'");
        rows.push_back({parse_double(a), parse_double(b), parse_double(c)});
    }
    if (rows.size() < 2) throw ConfigError("path CSV needs at least one breakpoint and a terminal row");

    const Row terminal = rows.back();
    rows.pop_back();
    std::optional<double> absorption;
    std::vector<Row> finite;
    for (const auto& r : rows) {
        if (std::isinf(r.v)) {
            if (!absorption) absorption = r.t;
            continue;
        }
        finite.push_back(r);
    }
    if (finite.empty()) throw ConfigError("path CSV has no finite breakpoint");
    std::vector<double> times, values, slopes(finite.size(), 0.0);
    for (std::size_t k = 0; k < finite.size(); ++k) {
        const Row& r = finite[k];
        times.push_back(r.t);
        values.push_back(r.v);
        if (k + 1 < finite.size()) {
            // Left limit at the next breakpoint is its value minus its jump.
            const Row& nr = finite[k + 1];
            slopes[k] = ((nr.v - nr.j) - r.v) / (nr.t - r.t);
        } else if (terminal.t > r.t && std::isfinite(terminal.v)) {
            slopes[k] = (terminal.v - r.v) / (terminal.t - r.t);
        }
    }
    return SteppedPath(std::move(times), std::move(values), std::move(slopes), terminal.t, absorption);
}

nlohmann::json to_json(const SteppedPath& path, const std::optional<AnyMechanism>& mech,
                       std::optional<std::uint64_t> seed) {
    nlohmann::json out;
    out["times"] = std::vector<double>(path.times().begin(), path.times().end());
    out["values"] = std::vector<double>(path.values().begin(), path.values().end());
    out["slopes"] = std::vector<double>(path.slopes().begin(), path.slopes().end());
    out["horizon"] = path.horizon();
    out["absorption_time"] = path.absorption_time() ? nlohmann::json(*path.absorption_time()) : nullptr;
    if (mech) {
        if (const auto* b = std::get_if<BranchingMechanism>(&*mech)) out["mechanism"] = {{"branching", to_json(*b)}};
        else out["mechanism"] = {{"immigration", to_json(std::get<ImmigrationMechanism>(*mech))}};
    } else {
        out["mechanism"] = nullptr;
    }
    out["seed"] = seed ? nlohmann::json(*seed) : nullptr;
    return out;
}

SteppedPath path_from_json(const nlohmann::json& env) {
    try {
        std::optional<double> absorption;
        if (env.contains("absorption_time") && !env.at("absorption_time").is_null())
            absorption = env.at("absorption_time").get<double>();
        return SteppedPath(env.at("times").get<std::vector<double>>(),
                           env.at("values").get<std::vector<double>>(),
                           env.at("slopes").get<std::vector<double>>(), env.at("horizon").get<double>(),
                           absorption);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed path envelope: ") + e.what());
    }
}

}  // namespace cbilab
