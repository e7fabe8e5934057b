#include "cbilab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "cbilab/discrete.hpp"
#include "cbilab/errors.hpp"
#include "cbilab/io.hpp"
#include "cbilab/ivp.hpp"
#include "cbilab/mechanisms.hpp"
#include "cbilab/montecarlo.hpp"
#include "cbilab/paths.hpp"
#include "cbilab/semigroup.hpp"
#include "toml.hpp"

namespace cbilab {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Experiment config schema
// ---------------------------------------------------------------------------

enum class FieldType { Number, Integer, String, NumberArray, IntegerArray, Branching, Immigration, Law, Table };

struct Field {
    FieldType type;
    json fallback;  // null means required
    std::vector<std::pair<std::string, Field>> table = {};
};

using Schema = std::vector<std::pair<std::string, Field>>;

const Field kRequiredNumber{FieldType::Number, nullptr};
const Field kRequiredInteger{FieldType::Integer, nullptr};

const std::map<std::string, Schema>& schemas() {
    static const std::map<std::string, Schema> all = {
        {"verify-laplace",
         {{"seed", {FieldType::Integer, 1}},
          {"x", {FieldType::Number, 1.0}},
          {"t", kRequiredNumber},
          {"lambda", kRequiredNumber},
          {"n", kRequiredInteger},
          {"sigma", kRequiredNumber},
          {"k_disc", {FieldType::Number, 1.0}},
          {"psi", {FieldType::Branching, nullptr}},
          {"phi", {FieldType::Immigration, "zero"}}}},
        {"gwi-limit",
         {{"seed", {FieldType::Integer, 1}},
          {"samples", kRequiredInteger},
          {"t", kRequiredNumber},
          {"lambda", kRequiredNumber},
          {"ns", {FieldType::IntegerArray, nullptr}},
          {"offspring", {FieldType::Law, nullptr}},
          {"immigration", {FieldType::Law, json{{"kind", "dirac"}, {"value", 0}}}},
          {"scaling",
           {FieldType::Table,
            json::object(),
            {{"x", {FieldType::Number, 1.0}},
             {"a_coef", {FieldType::Number, 1.0}},
             {"a_exponent", {FieldType::Number, 2.0}},
             {"b_coef", {FieldType::Number, 1.0}},
             {"b_exponent", {FieldType::Number, 1.0}}}}},
          {"psi", {FieldType::Branching, nullptr}},
          {"phi", {FieldType::Immigration, "zero"}}}},
        {"pitman",
         {{"seed", {FieldType::Integer, 1}},
          {"l", kRequiredNumber},
          {"ns", {FieldType::IntegerArray, nullptr}},
          {"offspring", {FieldType::Law, nullptr}},
          {"samples", {FieldType::Integer, 2000}},
          {"a_coef", {FieldType::Number, 1.0}},
          {"a_exponent", {FieldType::Number, 0.5}},
          {"times", {FieldType::NumberArray, json::array({0.25, 0.5, 1.0})}},
          {"ks_time", {FieldType::Number, 0.5}},
          {"budget", {FieldType::Integer, 1000000}}}},
    };
    return all;
}

json toml_to_json(const toml::node& node) {
    if (const auto* t = node.as_table()) {
        json out = json::object();
        for (auto&& [key, value] : *t) out[std::string(key.str())] = toml_to_json(value);
        return out;
    }
    if (const auto* a = node.as_array()) {
        json out = json::array();
        for (const auto& value : *a) out.push_back(toml_to_json(value));
        return out;
    }
    if (const auto* i = node.as_integer()) return i->get();
    if (const auto* f = node.as_floating_point()) return f->get();
    if (const auto* s = node.as_string()) return s->get();
    if (const auto* b = node.as_boolean()) return b->get();
    throw ConfigError("dates and times are not valid config values");
}

double number_value(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_double(v.get<std::string>());
    throw ConfigError("'" + where + "' must be a number");
}

json check_value(const json& v, const Field& field, const std::string& where);

json check_table(const json& v, const Schema& schema, const std::string& where) {
    if (!v.is_object()) throw ConfigError("'" + where + "' must be a table");
    for (const auto& [key, _] : v.items()) {
        bool known = false;
        for (const auto& [name, f] : schema) known = known || name == key;
        if (!known) throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
    json out = json::object();
    for (const auto& [name, field] : schema) {
        const auto path = where.empty() ? name : where + "." + name;
        if (v.contains(name)) {
            out[name] = check_value(v.at(name), field, path);
        } else if (field.type == FieldType::Table) {
            out[name] = check_table(json::object(), field.table, path);
        } else if (field.fallback.is_null()) {
            throw ConfigError("missing required key '" + path + "'");
        } else {
            out[name] = field.fallback;
        }
    }
    return out;
}

json check_value(const json& v, const Field& field, const std::string& where) {
    switch (field.type) {
        case FieldType::Number: {
            const double d = number_value(v, where);
            return std::isfinite(d) ? json(d) : json(format_double(d));
        }
        case FieldType::Integer:
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw ConfigError("'" + where + "' must be a non-negative integer");
            return v;
        case FieldType::String:
            if (!v.is_string()) throw ConfigError("'" + where + "' must be a string");
            return v;
        case FieldType::NumberArray: {
            if (!v.is_array()) throw ConfigError("'" + where + "' must be an array of numbers");
            json out = json::array();
            for (const auto& e : v) out.push_back(number_value(e, where));
            return out;
        }
        case FieldType::IntegerArray:
            if (!v.is_array() || v.empty()) throw ConfigError("'" + where + "' must be a non-empty array of integers");
            for (const auto& e : v)
                if (!e.is_number_integer() || e.get<long long>() < 1)
                    throw ConfigError("'" + where + "' entries must be positive integers");
            return v;
        case FieldType::Branching: branching_from_json(v); return v;
        case FieldType::Immigration: immigration_from_json(v); return v;
        case FieldType::Law: discrete_law_from_json(v); return v;
        case FieldType::Table: return check_table(v, field.table, where);
    }
    return v;
}

std::string toml_scalar(const json& v) {
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_float()) {
        auto s = format_double(v.get<double>());
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
        return s;
    }
    if (v.is_string()) return json(v.get<std::string>()).dump();
    if (v.is_array()) {
        std::string out = "[";
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + toml_scalar(v[i]);
        return out + "]";
    }
    std::string out = "{ ";
    bool first = true;
    for (const auto& [key, value] : v.items()) {
        out += (first ? "" : ", ") + key + " = " + toml_scalar(value);
        first = false;
    }
    return out + (first ? "}" : " }");
}

// ---------------------------------------------------------------------------
// Argument helpers
// ---------------------------------------------------------------------------

json spec_arg(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);  // bare preset name
    }
}

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("CBILAB_SEED");
    if (s == nullptr || *s == '\0') return std::nullopt;
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != std::strlen(s)) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("CBILAB_SEED must be a non-negative integer");
    }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t config_seed) {
    if (flag) return *flag;
    if (auto e = env_seed()) return *e;
    return config_seed;
}

std::filesystem::path artifact_path(const std::string& out_dir, const std::string& name) {
    std::filesystem::path p(name);
    if (!out_dir.empty() && p.is_relative()) p = std::filesystem::path(out_dir) / p;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    return p;
}

std::ofstream open_artifact(const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot write '" + p.string() + "'");
    return f;
}

std::string read_file(const std::string& name) {
    std::ifstream f(name);
    if (!f) throw ConfigError("cannot read '" + name + "'");
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

double required(const json& spec, const char* key) {
    if (!spec.contains(key)) throw ConfigError(std::string("path spec needs '") + key + "'");
    return number_value(spec.at(key), key);
}

/// A stepped path from a CSV file, a JSON envelope file or an inline spec.
SteppedPath stepped_arg(const std::string& arg, double horizon) {
    if (std::filesystem::is_regular_file(arg)) {
        if (std::filesystem::path(arg).extension() == ".json") return path_from_json(json::parse(read_file(arg)));
        std::ifstream f(arg);
        return read_csv(f);
    }
    const json spec = spec_arg(arg);
    if (!spec.is_object()) throw ConfigError("'" + arg + "' is neither a file nor a path spec");
    if (!spec.contains("kind")) return path_from_json(spec);
    const auto kind = spec.at("kind").get<std::string>();
    auto only = [&](std::initializer_list<const char*> keys) {
        for (const auto& [key, _] : spec.items()) {
            bool ok = key == "kind";
            for (const char* k : keys) ok = ok || key == k;
            if (!ok) throw ConfigError("unknown path spec key '" + key + "'");
        }
    };
    if (kind == "constant") {
        only({"value"});
        return SteppedPath::constant(required(spec, "value"), horizon);
    }
    if (kind == "line") {
        only({"intercept", "slope"});
        return SteppedPath::line(required(spec, "intercept"), required(spec, "slope"), horizon);
    }
    if (kind == "steps") {
        only({"times", "values", "slopes", "horizon"});
        auto times = spec.at("times").get<std::vector<double>>();
        auto values = spec.at("values").get<std::vector<double>>();
        auto slopes = spec.contains("slopes") ? spec.at("slopes").get<std::vector<double>>()
                                              : std::vector<double>(times.size(), 0.0);
        const double h = spec.contains("horizon") ? required(spec, "horizon") : std::max(horizon, times.back());
        return SteppedPath(std::move(times), std::move(values), std::move(slopes), h);
    }
    if (kind == "sqrt_abs") {
        only({"center", "x_max", "spacing"});
        const double center = spec.contains("center") ? required(spec, "center") : 1.0;
        const double x_max = spec.contains("x_max") ? required(spec, "x_max") : 4.0;
        const double spacing = spec.contains("spacing") ? required(spec, "spacing") : 1e-4;
        const double extra[] = {center};
        return interpolate([center](double x) { return std::sqrt(std::abs(center - x)); }, x_max, spacing,
                           center > 0.0 && center < x_max ? std::span<const double>(extra) : std::span<const double>());
    }
    throw ConfigError("unknown path spec kind '" + kind + "'");
}

double lambda_arg(const std::string& s) {
    const double v = parse_double(s);
    if (!(v >= 0.0)) throw ConfigError("lambda must be >= 0");
    return v;
}

json number_json(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct Common {
    std::string out_dir;
    unsigned threads = 0;
};

int cmd_classify(const std::string& psi_arg, const std::string& phi_arg, std::ostream& out) {
    const auto psi = branching_from_json(spec_arg(psi_arg));
    const auto phi = immigration_from_json(spec_arg(phi_arg));
    out << to_json(classify_explosion(psi, phi)).dump() << '\n';
    return 0;
}

int cmd_semigroup(const std::string& psi_arg, const std::string& phi_arg, const std::string& lambda_text, double t,
                  double x, double step, std::ostream& out) {
    const auto psi = branching_from_json(spec_arg(psi_arg));
    const auto phi = immigration_from_json(spec_arg(phi_arg));
    const auto r = cbi_laplace(psi, phi, x, t, lambda_arg(lambda_text), step);
    json j = {{"u", number_json(r.u)},
              {"v", number_json(r.v)},
              {"laplace", r.value},
              {"err_estimate", r.err_estimate}};
    out << std::setprecision(17) << j.dump() << '\n';
    return 0;
}

struct IvpArgs {
    std::string f, g = R"({"kind":"constant","value":0})", method = "exact", out = "c.csv";
    double sigma = 1e-2, horizon = 1.0, grid = 0.0;
};

int cmd_ivp(const IvpArgs& a, const Common& common, std::ostream& out) {
    if (!(a.horizon >= 0.0) || !std::isfinite(a.horizon)) throw ConfigError("horizon must be finite and >= 0");
    const auto f = stepped_arg(a.f, std::max(1.0, a.horizon));
    const auto g = stepped_arg(a.g, a.horizon);
    check_admissible(f, g);
    const auto path = artifact_path(common.out_dir, a.out);
    auto csv = open_artifact(path);
    csv << "time,c,h\n";
    json summary = {{"method", a.method}, {"out", path.string()}};
    auto row = [&](double t, double c, double h) {
        csv << format_double(t) << ',' << format_double(c) << ',' << format_double(h) << '\n';
    };
    if (a.method == "exact") {
        const auto sol = solve_exact(f, g, a.horizon);
        std::vector<double> times;
        for (const auto& s : sol.segments()) times.push_back(s.t0);
        if (a.grid > 0.0)
            for (double t = 0.0; t < a.horizon; t += a.grid) times.push_back(t);
        times.push_back(a.horizon);
        if (sol.exploded()) times.push_back(sol.explosion_time());
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());
        for (double t : times)
            if (t <= a.horizon) row(t, sol.c(t), sol.h(t));
        summary["c_horizon"] = number_json(sol.c(a.horizon));
        summary["exploded"] = sol.exploded();
        summary["explosion_time"] = number_json(sol.explosion_time());
        summary["segments"] = sol.segments().size();
    } else if (a.method == "euler") {
        const auto sol = solve_euler([&](double c) { return f(c); }, [&](double t) { return g(t); }, a.sigma, a.horizon);
        for (std::size_t i = 0; i < sol.times.size(); ++i) row(sol.times[i], sol.c[i], sol.h_at(sol.times[i]));
        summary["sigma"] = a.sigma;
        summary["c_horizon"] = number_json(sol.c.back());
        summary["exploded"] = sol.exploded;
        summary["explosion_time"] = number_json(sol.explosion_time);
    } else {
        throw ConfigError("method must be 'exact' or 'euler'");
    }
    out << summary.dump() << '\n';
    return 0;
}

struct SimulateArgs {
    std::string psi, phi = "zero", out = "path.csv";
    double x = 1.0, horizon = 1.0, sigma = 1e-3;
    std::optional<std::uint64_t> seed;
    std::uint64_t rep = 0;
};

int cmd_simulate(const SimulateArgs& a, const Common& common, std::ostream& out) {
    const auto psi = branching_from_json(spec_arg(a.psi));
    const auto phi = immigration_from_json(spec_arg(a.phi));
    const auto seed = resolve_seed(a.seed, 1);
    const auto p = simulate_cbi_path(psi, phi, a.x, a.horizon, a.sigma, seed, a.rep);
    const auto path = artifact_path(common.out_dir, a.out);
    auto csv = open_artifact(path);
    csv << "time,z,c\n";
    for (std::size_t i = 0; i < p.z.size(); ++i)
        csv << format_double(p.times[i]) << ',' << format_double(p.z[i]) << ',' << format_double(p.c[i]) << '\n';
    out << json{{"out", path.string()},
                {"seed", seed},
                {"steps", p.z.size() - 1},
                {"z_horizon", number_json(p.z.back())},
                {"exploded", p.exploded},
                {"explosion_time", number_json(p.explosion_time)}}
               .dump()
        << '\n';
    return 0;
}

struct GwArgs {
    std::string mu, nu = R"({"kind":"dirac","value":0})", method = "direct", out = "z.csv";
    long long k = 1, n = 10;
    std::optional<std::uint64_t> seed;
    std::uint64_t budget = 1'000'000;
};

int cmd_gw(const std::string& mode, const GwArgs& a, const Common& common, std::ostream& out) {
    const auto mu = discrete_law_from_json(spec_arg(a.mu));
    const auto seed = resolve_seed(a.seed, 1);
    if (a.k < 0 || a.n < 0) throw ConfigError("-k and -n must be >= 0");
    std::vector<long long> z;
    if (mode == "simulate") {
        const GwiConfig cfg{mu, discrete_law_from_json(spec_arg(a.nu)), a.k};
        if (a.method == "direct") {
            z = simulate_gwi_direct(cfg, static_cast<std::size_t>(a.n), seed);
        } else if (a.method == "aggregated") {
            Stream rng(seed, 0);
            z = simulate_gwi_aggregated(cfg, static_cast<std::size_t>(a.n), rng);
        } else {
            throw ConfigError("method must be 'direct' or 'aggregated'");
        }
    } else {
        z = conditioned_gw(mu, a.k, a.n, seed, a.budget);
    }
    const auto path = artifact_path(common.out_dir, a.out);
    auto csv = open_artifact(path);
    csv << "generation,z\n";
    long long total = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        csv << i << ',' << z[i] << '\n';
        total += z[i];
    }
    out << json{{"out", path.string()}, {"seed", seed}, {"generations", z.size()}, {"total", total}}.dump() << '\n';
    return 0;
}

int cmd_mc(const std::string& kind, const std::string& config_file, const std::string& out_name,
           const std::optional<std::uint64_t>& seed_flag, const Common& common, std::ostream& out) {
    const auto cfg = parse_experiment_config(read_file(config_file), kind);
    const auto& p = cfg.params;
    const auto seed = resolve_seed(seed_flag, p.at("seed").get<std::uint64_t>());
    json report;
    bool passed = false;
    if (kind == "verify-laplace") {
        VerifyOptions opts;
        opts.k_disc = number_value(p.at("k_disc"), "k_disc");
        opts.threads = common.threads;
        const auto r = verify_laplace(branching_from_json(p.at("psi")), immigration_from_json(p.at("phi")),
                                      number_value(p.at("x"), "x"), number_value(p.at("t"), "t"),
                                      number_value(p.at("lambda"), "lambda"), p.at("n").get<std::size_t>(),
                                      number_value(p.at("sigma"), "sigma"), seed, opts);
        report = to_json(r);
        passed = r.passed;
    } else if (kind == "gwi-limit") {
        const auto& s = p.at("scaling");
        GwiScaling scaling{s.at("x").get<double>(), s.at("a_coef").get<double>(), s.at("a_exponent").get<double>(),
                           s.at("b_coef").get<double>(), s.at("b_exponent").get<double>()};
        const auto r = gwi_scaling_experiment(
            discrete_law_from_json(p.at("offspring")), discrete_law_from_json(p.at("immigration")), scaling,
            p.at("ns").get<std::vector<std::size_t>>(), branching_from_json(p.at("psi")),
            immigration_from_json(p.at("phi")), number_value(p.at("t"), "t"), number_value(p.at("lambda"), "lambda"),
            p.at("samples").get<std::size_t>(), seed, common.threads);
        report = to_json(r);
        passed = r.trend_ok;
    } else {
        PitmanOptions opts;
        opts.a_coef = p.at("a_coef").get<double>();
        opts.a_exponent = p.at("a_exponent").get<double>();
        opts.samples = p.at("samples").get<std::size_t>();
        opts.times = p.at("times").get<std::vector<double>>();
        opts.ks_time = p.at("ks_time").get<double>();
        opts.budget = p.at("budget").get<std::uint64_t>();
        opts.threads = common.threads;
        const auto r = pitman_experiment(discrete_law_from_json(p.at("offspring")), p.at("l").get<double>(),
                                         p.at("ns").get<std::vector<std::size_t>>(), seed, opts);
        report = to_json(r);
        passed = r.trend_ok;
    }
    report["config"] = cfg.params;
    const auto path = artifact_path(common.out_dir, out_name);
    open_artifact(path) << report.dump(2) << '\n';
    out << json{{"experiment", kind}, {"out", path.string()}, {"seed", seed}, {"passed", passed}}.dump() << '\n';
    return passed ? 0 : 2;
}

void write_error(std::ostream& err, const std::string& kind, const std::string& message) {
    err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view toml_text, std::string_view expected_kind) {
    json raw;
    try {
        raw = toml_to_json(toml::parse(toml_text));
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(msg.str());
    }
    if (!raw.contains("experiment") || !raw.at("experiment").is_string())
        throw ConfigError("config needs an 'experiment' string");
    ExperimentConfig cfg;
    cfg.kind = raw.at("experiment").get<std::string>();
    const auto it = schemas().find(cfg.kind);
    if (it == schemas().end()) throw ConfigError("unknown experiment '" + cfg.kind + "'");
    if (!expected_kind.empty() && cfg.kind != expected_kind)
        throw ConfigError("config declares experiment '" + cfg.kind + "' but '" + std::string(expected_kind) +
                          "' was requested");
    raw.erase("experiment");
    cfg.params = check_table(raw, it->second, "");
    return cfg;
}

std::string to_toml(const ExperimentConfig& config) {
    std::string out = "experiment = " + json(config.kind).dump() + "\n";
    for (const auto& [key, value] : config.params.items()) out += key + " = " + toml_scalar(value) + "\n";
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"cbilab: simulation and verification of branching processes with immigration", "cbilab"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--out-dir", common.out_dir, "Directory for output artifacts");
    app.add_option("--threads", common.threads, "Worker threads (0 = logical cores)");

    std::string psi = "", phi = "zero", lambda_text;
    double t = 1.0, x = 1.0, step = 1e-3;

    auto* classify = app.add_subcommand("classify", "Explosion verdict for a pair of mechanisms");
    classify->add_option("--psi", psi, "Branching mechanism (JSON or preset)")->required();
    classify->add_option("--phi", phi, "Immigration mechanism (JSON or preset)");

    auto* semigroup = app.add_subcommand("semigroup", "u_t(lambda), v_t(lambda) and the Laplace transform");
    semigroup->add_option("--psi", psi, "Branching mechanism")->required();
    semigroup->add_option("--phi", phi, "Immigration mechanism");
    semigroup->add_option("--lambda", lambda_text, "Laplace argument (may be inf)")->required();
    semigroup->add_option("--t", t, "Time")->required();
    semigroup->add_option("--x", x, "Initial value");
    semigroup->add_option("--step", step, "RK4 step");

    IvpArgs ivp_args;
    auto* ivp = app.add_subcommand("ivp", "Initial value problem c' = f(c) + g");
    ivp->require_subcommand(1);
    auto* ivp_solve = ivp->add_subcommand("solve", "Solve for stepped f and g");
    ivp_solve->add_option("--f", ivp_args.f, "Reproduction path: CSV, JSON envelope or spec")->required();
    ivp_solve->add_option("--g", ivp_args.g, "Immigration path: CSV, JSON envelope or spec");
    ivp_solve->add_option("--method", ivp_args.method, "exact or euler");
    ivp_solve->add_option("--sigma", ivp_args.sigma, "Euler span");
    ivp_solve->add_option("--horizon", ivp_args.horizon, "Time horizon");
    ivp_solve->add_option("--grid", ivp_args.grid, "Extra uniform output spacing (exact method)");
    ivp_solve->add_option("--out", ivp_args.out, "Output CSV");

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "One CBI path by the Euler scheme");
    simulate->add_option("--psi", sim_args.psi, "Branching mechanism")->required();
    simulate->add_option("--phi", sim_args.phi, "Immigration mechanism");
    simulate->add_option("--x", sim_args.x, "Initial value");
    simulate->add_option("--horizon", sim_args.horizon, "Time horizon");
    simulate->add_option("--sigma", sim_args.sigma, "Euler span");
    simulate->add_option("--seed", sim_args.seed, "Master seed");
    simulate->add_option("--rep", sim_args.rep, "Replication index");
    simulate->add_option("--out", sim_args.out, "Output CSV");

    std::string mc_config, mc_out = "report.json";
    std::optional<std::uint64_t> mc_seed;
    auto* mc = app.add_subcommand("mc", "Monte-Carlo experiments");
    mc->require_subcommand(1);
    std::vector<CLI::App*> mc_subs;
    for (const char* name : {"verify-laplace", "gwi-limit", "pitman"}) {
        auto* sub = mc->add_subcommand(name, std::string("Run a ") + name + " experiment");
        sub->add_option("--config", mc_config, "TOML experiment file")->required();
        sub->add_option("--out", mc_out, "Report JSON");
        sub->add_option("--seed", mc_seed, "Master seed (overrides config and CBILAB_SEED)");
        mc_subs.push_back(sub);
    }

    GwArgs gw_args;
    auto* gw = app.add_subcommand("gw", "Galton-Watson generation sizes");
    gw->require_subcommand(1);
    auto* gw_sim = gw->add_subcommand("simulate", "Galton-Watson process with immigration");
    auto* gw_cond = gw->add_subcommand("condition", "Tree conditioned on total progeny n");
    for (auto* sub : {gw_sim, gw_cond}) {
        sub->add_option("--mu", gw_args.mu, "Offspring law (JSON)")->required();
        sub->add_option("-k", gw_args.k, "Initial population");
        sub->add_option("-n", gw_args.n, sub == gw_sim ? "Generations" : "Total progeny");
        sub->add_option("--seed", gw_args.seed, "Master seed");
        sub->add_option("--out", gw_args.out, "Output CSV");
    }
    gw_sim->add_option("--nu", gw_args.nu, "Immigration law (JSON)");
    gw_sim->add_option("--method", gw_args.method, "direct or aggregated");
    gw_cond->add_option("--budget", gw_args.budget, "Rejection budget");

    if (args.empty()) {
        err << app.help();
        return 1;
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        write_error(err, "usage", e.what());
        return 1;
    }

    try {
        if (*classify) return cmd_classify(psi, phi, out);
        if (*semigroup) return cmd_semigroup(psi, phi, lambda_text, t, x, step, out);
        if (*ivp) return cmd_ivp(ivp_args, common, out);
        if (*simulate) return cmd_simulate(sim_args, common, out);
        if (*mc)
            for (auto* sub : mc_subs)
                if (*sub) return cmd_mc(sub->get_name(), mc_config, mc_out, mc_seed, common, out);
        if (*gw) return cmd_gw(*gw_sim ? "simulate" : "condition", gw_args, common, out);
    } catch (const Error& e) {
        write_error(err, e.kind(), e.what());
        return 1;
    } catch (const json::exception& e) {
        write_error(err, "config", e.what());
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        write_error(err, "io", e.what());
        return 1;
    } catch (const std::exception& e) {
        write_error(err, "internal", e.what());
        return 1;
    }
    return 1;
}

}  // namespace cbilab
