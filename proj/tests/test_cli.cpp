#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cbilab/cli.hpp"
#include "cbilab/errors.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cbilab;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "cbilab_cli_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("classify prints the explosion verdict") {
    const auto r = invoke({"classify", "--psi", R"({"kind":"stable","alpha":0.5,"sign":"negative"})", "--phi",
                           R"({"kind":"drift","d":1})"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out) == json{{"jumps", false}, {"continuous", true}, {"certain", true}});
}

TEST_CASE("semigroup matches the squared Bessel closed form") {
    const auto r = invoke({"semigroup", "--psi", "besq", "--lambda", "1", "--t", "1"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(std::abs(j.at("u").get<double>() - 1.0 / 3.0) < 1e-8);
    CHECK(j.contains("v"));
    CHECK(j.contains("laplace"));
    CHECK(j.contains("err_estimate"));
}

TEST_CASE("usage and validation errors exit with 1") {
    const auto empty = invoke({});
    CHECK(empty.code == 1);
    CHECK(empty.err.find("Usage") != std::string::npos);

    const auto bad = invoke({"semigroup", "--psi", R"({"kind":"stable"})", "--lambda", "1", "--t", "1"});
    CHECK(bad.code == 1);
    const auto j = json::parse(bad.err);
    CHECK(j.contains("error"));
    CHECK(j.contains("message"));

    CHECK(invoke({"frobnicate"}).code == 1);
}

TEST_CASE("experiment configs are strict and round trip") {
    const std::string text = R"(
experiment = "gwi-limit"
samples = 200
t = 1
lambda = "inf"
ns = [10, 20]
offspring = { kind = "poisson", mean = 1.0 }
psi = { kind = "diffusion", sigma2 = 1.0 }
[scaling]
x = 0.5
)";
    const auto cfg = parse_experiment_config(text);
    CHECK(cfg.kind == "gwi-limit");
    CHECK(cfg.params.at("scaling").at("a_exponent") == 2.0);
    CHECK(cfg.params.at("immigration") == json{{"kind", "dirac"}, {"value", 0}});
    CHECK(parse_experiment_config(to_toml(cfg)) == cfg);

    CHECK_THROWS_AS(parse_experiment_config(text + "bogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config("experiment = \"pitman\"\nl = 1.0\n"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config("experiment = \"pitman\"\nl = [\n"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(text, "pitman"), ConfigError);

    const std::string verify = R"(
experiment = "verify-laplace"
t = 0.5
lambda = 1.25e-3
n = 100
sigma = 0.01
psi = "besq"
)";
    const auto v = parse_experiment_config(verify);
    CHECK(parse_experiment_config(to_toml(v)) == v);
}

TEST_CASE("malformed config file gives a JSON error") {
    const auto cfg = scratch("broken.toml");
    write(cfg, "experiment = \"verify-laplace\"\nt = 1.0\nunknown = 3\n");
    const auto r = invoke({"mc", "verify-laplace", "--config", cfg.string(), "--out", scratch("r.json").string()});
    CHECK(r.code == 1);
    CHECK(json::parse(r.err).at("error") == "config");
}

TEST_CASE("mc runs are deterministic and honor CBILAB_SEED") {
    const auto cfg = scratch("verify.toml");
    write(cfg, R"(
experiment = "verify-laplace"
seed = 5
t = 0.2
lambda = 1.0
n = 200
sigma = 0.01
psi = "besq"
phi = { kind = "drift", d = 2.0 }
)");
    const auto a = scratch("a.json"), b = scratch("b.json"), c = scratch("c.json");
    REQUIRE(invoke({"mc", "verify-laplace", "--config", cfg.string(), "--out", a.string()}).code == 0);
    REQUIRE(invoke({"--threads", "3", "mc", "verify-laplace", "--config", cfg.string(), "--out", b.string()}).code ==
            0);
    CHECK(slurp(a) == slurp(b));
    CHECK(json::parse(slurp(a)).at("master_seed") == 5);

    ::setenv("CBILAB_SEED", "17", 1);
    const auto r = invoke({"mc", "verify-laplace", "--config", cfg.string(), "--out", c.string()});
    ::unsetenv("CBILAB_SEED");
    REQUIRE(r.code == 0);
    CHECK(json::parse(slurp(c)).at("master_seed") == 17);
}

TEST_CASE("failed trend exits with 2") {
    const auto cfg = scratch("flat.toml");
    write(cfg, R"(
experiment = "gwi-limit"
samples = 100
t = 1.0
lambda = 1.0
ns = [20, 20]
offspring = { kind = "poisson", mean = 1.0 }
psi = { kind = "diffusion", sigma2 = 1.0 }
)");
    const auto r = invoke({"mc", "gwi-limit", "--config", cfg.string(), "--out", scratch("flat.json").string()});
    CHECK(r.code == 2);
    CHECK(json::parse(r.out).at("passed") == false);
}

TEST_CASE("ivp, simulate and gw write artifacts under --out-dir") {
    const auto dir = scratch("artifacts");
    std::filesystem::remove_all(dir);
    auto r = invoke({"--out-dir", dir.string(), "ivp", "solve", "--f", R"({"kind":"sqrt_abs"})", "--horizon", "1",
                     "--out", "c.csv"});
    REQUIRE(r.code == 0);
    CHECK(std::abs(json::parse(r.out).at("c_horizon").get<double>() - 0.75) < 1e-6);
    CHECK(slurp(dir / "c.csv").rfind("time,c,h\n", 0) == 0);

    r = invoke({"simulate", "--psi", "besq", "--horizon", "0.1", "--sigma", "0.01", "--seed", "3", "--out-dir",
                dir.string()});
    REQUIRE(r.code == 0);
    const auto first = slurp(dir / "path.csv");
    REQUIRE(invoke({"simulate", "--psi", "besq", "--horizon", "0.1", "--sigma", "0.01", "--seed", "3", "--out-dir",
                    dir.string()})
                .code == 0);
    CHECK(slurp(dir / "path.csv") == first);

    r = invoke({"gw", "condition", "--mu", R"({"kind":"poisson","mean":1})", "-k", "2", "-n", "30", "--out-dir",
                dir.string()});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("total") == 30);

    r = invoke({"gw", "condition", "--mu", R"({"kind":"dirac","value":1})", "-k", "1", "-n", "5"});
    CHECK(r.code == 1);
    CHECK(json::parse(r.err).at("error") == "infeasible");
}
