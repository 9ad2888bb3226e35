#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "escape/errors.hpp"
#include "escape/experiment.hpp"
#include "escape/renewal.hpp"

using namespace escape;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("escape_experiment_test") / name;
    fs::remove_all(p);
    return p;
}

struct Csv {
    std::vector<double> n, survival, stderr_;
};

Csv read_curve(const fs::path& p)
{
    std::ifstream is(p);
    REQUIRE(is);
    Csv c;
    std::string line;
    std::getline(is, line); // source
    std::getline(is, line); // header
    CHECK(line == "n,survival,stderr,samples,seed");
    while (std::getline(is, line)) {
        std::stringstream ss(line);
        std::string f;
        std::vector<double> v;
        while (std::getline(ss, f, ','))
            v.push_back(std::stod(f));
        c.n.push_back(v[0]);
        c.survival.push_back(v[1]);
        c.stderr_.push_back(v[2]);
    }
    return c;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p)
{
    std::ifstream is(p);
    return json::parse(is);
}

const json kLsv = json::parse(R"({
  "map": {"family": "lsv", "alpha": 0.5},
  "base": {"m": 3},
  "holes": [{"name": "a", "center": 0.437, "width": 0.001}],
  "horizon": 40,
  "engines": ["mc", "predict"],
  "mc": {"samples": 4000, "seed": 9, "burn_in": 500},
  "induced": {"cells": 256, "subsamples": 16},
  "tail": {"horizon": 200, "scan_cells": 4000}
})");

} // namespace

TEST_CASE("config round-trips through serialisation")
{
    const ExperimentConfig c = parse_config(kLsv);
    CHECK(c.map.family == Family::Lsv);
    CHECK(c.base.kind == BaseSpec::Kind::Level);
    CHECK(c.base.m == 3);
    CHECK(c.holes.size() == 1);
    CHECK(*c.holes[0].width == 0.001);
    CHECK(c.run_mc);
    CHECK(!c.run_ulam);
    CHECK(c.mc_burn_in == 500);
    CHECK(c.sigma == 0.05); // default

    const ExperimentConfig back = parse_config(json::parse(to_json(c).dump()));
    CHECK(back == c);
    CHECK(to_json(back).dump() == to_json(c).dump());

    json j = json::parse(R"({
      "map": {"family": "intermittent", "l1": 0.3, "k2": 2.5},
      "base": {"side": "minus", "n": 2},
      "holes": [{"center": -0.3, "mu": 0.012345678901234567}, {"empty": true}],
      "engines": ["ulam"],
      "mc": {"seed": 18446744073709551615},
      "admissibility": {"sigma": 0.1, "depth": 3, "required": false},
      "output": "x"
    })");
    const ExperimentConfig i = parse_config(j);
    CHECK(i.holes[0].name == "H1");
    CHECK(i.holes[1].name == "H2");
    CHECK(i.holes[1].empty);
    CHECK(i.mc_seed == 18446744073709551615ULL);
    CHECK(*i.holes[0].mu == 0.012345678901234567);
    const ExperimentConfig i2 = parse_config(json::parse(to_json(i).dump()));
    CHECK(i2 == i);
    CHECK(*i2.holes[0].mu == *i.holes[0].mu);
}

TEST_CASE("config errors name the offending key")
{
    auto message = [](json j) -> std::string {
        try {
            parse_config(j);
        } catch (const ConfigError& e) {
            return e.what();
        }
        return "";
    };
    json j = kLsv;
    j["horizn"] = 5;
    CHECK(message(j).find("horizn") != std::string::npos);

    j = kLsv;
    j.erase("map");
    CHECK(message(j).find("config.map") != std::string::npos);

    j = kLsv;
    j["map"]["alpha"] = 1.5;
    CHECK(message(j).find("map:") != std::string::npos);

    j = kLsv;
    j["map"]["family"] = "tent";
    CHECK(message(j).find("tent") != std::string::npos);

    j = kLsv;
    j["holes"][0]["mu"] = 0.01;
    CHECK(message(j).find("exactly one") != std::string::npos);

    j = kLsv;
    j["engines"] = json::array({"mc", "mc"});
    CHECK(message(j).find("twice") != std::string::npos);

    j = kLsv;
    j["engines"] = json::array();
    CHECK(message(j).find("engines") != std::string::npos);

    j = kLsv;
    j["horizon"] = 2.5;
    CHECK(message(j).find("integer") != std::string::npos);

    j = kLsv;
    j["holes"].push_back({{"name", "a"}, {"center", 0.6}, {"width", 0.01}});
    CHECK(message(j).find("duplicate") != std::string::npos);

    j = kLsv;
    j["mc"]["seed"] = -1;
    CHECK(message(j).find("mc.seed") != std::string::npos);

    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("empty hole survives in every engine")
{
    json j = kLsv;
    j["holes"] = json::array({{{"name", "none"}, {"empty", true}}});
    j["engines"] = json::array({"mc", "ulam", "predict"});
    j["ulam"] = {{"cells", 512}};
    const auto out = scratch("empty");
    const RunResult r = run_experiment(parse_config(j), out);
    CHECK(r.exit_code == kExitOk);
    for (const char* f : {"mc_none.csv", "ulam_none.csv"}) {
        const Csv c = read_curve(out / f);
        CHECK(c.survival.size() == 41);
        for (double s : c.survival)
            CHECK(s == 1.0);
    }
    CHECK(!fs::exists(out / "prediction_none.csv"));
    CHECK(read_json(out / "verdict.json")["comparisons"].empty());
}

TEST_CASE("doubling Markov config: engines agree")
{
    const auto out = scratch("doubling");
    const json j = json::parse(R"({
      "map": {"family": "doubling"},
      "holes": [{"name": "markov", "center": 0.375, "width": 0.25}],
      "horizon": 30,
      "engines": ["mc", "ulam"],
      "mc": {"samples": 100000, "seed": 5},
      "ulam": {"cells": 4},
      "induced": {"cells": 64},
      "admissibility": {"sigma": 0.5, "required": false}
    })");
    const RunResult r = run_experiment(parse_config(j), out);
    CHECK(r.exit_code == kExitOk);
    // the orbit of 3/8 lands on the partition point 1/2
    const json holes = read_json(out / "holes.json");
    CHECK(holes[0]["report"]["admissible"] == false);
    CHECK(r.summary["ulam"]["holes"][0]["lambda"].get<double>() == doctest::Approx(0.5).epsilon(1e-10));

    const Csv mc = read_curve(out / "mc_markov.csv");
    const Csv ul = read_curve(out / "ulam_markov.csv");
    // masses of the cells [0,1/4), [1/4,1/2), [1/2,3/4), [3/4,1); mass arriving in
    // the hole cell [1/4,1/2) is removed
    double m[4] = {0.25, 0.25, 0.25, 0.25};
    for (int n = 1; n <= 30; ++n) {
        const double next[4] = {0.5 * (m[0] + m[2]), 0.0, 0.5 * (m[1] + m[3]), 0.5 * (m[1] + m[3])};
        std::copy(next, next + 4, m);
        const double exact = m[0] + m[2] + m[3];
        CHECK(std::abs(ul.survival[n] - exact) <= 1e-12);
        const double se = std::sqrt(exact * (1 - exact) / 100000.0);
        CHECK(std::abs(mc.survival[n] - exact) <= 3.0 * se);
    }
}

TEST_CASE("Farey two-hole config: verdict follows the b trend")
{
    const auto out = scratch("farey");
    const double z = 1.0 / (2.0 - std::pow(2.0, -1.5)); // fixed point on level 1
    json j = {{"map", {{"family", "farey"}, {"theta", 1.5}, {"levels", 2000}}},
              {"base", {{"m", 2}}},
              {"holes",
               {{{"name", "periodic"}, {"center", z}, {"mu", 0.01}},
                {{"name", "generic"}, {"center", 0.7}, {"mu", 0.01}}}},
              {"horizon", 200},
              {"engines", {"mc", "predict"}},
              {"mc", {{"samples", 20000}, {"seed", 2}}},
              {"induced", {{"cells", 512}}},
              {"tail", {{"horizon", 2000}}}};
    const RunResult r = run_experiment(parse_config(j), out);
    REQUIRE(r.exit_code == kExitOk);
    const json v = read_json(out / "verdict.json");
    CHECK(v["tail"]["source"] == "analytic-farey");
    CHECK(v["mu_Delta_X"].get<double>() == doctest::Approx(1.0 / 2.612375348685488).epsilon(1e-6));

    // independent trend: b_n = sum_b (n-b+1)^-1.5 b^-1.5 over the verdict window
    auto bn = [](long n) {
        long double s = 0;
        for (long b = 1; b <= n; ++b)
            s += std::pow(static_cast<long double>(n - b + 1), -1.5L) *
                 std::pow(static_cast<long double>(b), -1.5L);
        return static_cast<double>(s);
    };
    const long from = v["b_trend"]["window"][0], to = v["b_trend"]["window"][1];
    bool dec = true, inc = true;
    for (long n = from; n <= to; ++n) {
        const double d = bn(n - 1) - bn(n);
        dec = dec && d > 0;
        inc = inc && d < 0;
    }
    const std::string expected = dec ? "decreasing" : inc ? "increasing" : "mixed";
    CHECK(v["b_trend"]["trend"] == expected);

    REQUIRE(v["comparisons"].size() == 1);
    const json& cmp = v["comparisons"][0];
    // c_H = 1 - 1/|f'| = t_2 at the level-1 fixed point
    CHECK(cmp["holes"][0]["c_H"].get<double>() == doctest::Approx(std::pow(2.0, -1.5)));
    CHECK(cmp["holes"][1]["c_H"].get<double>() == 1.0);
    CHECK(cmp["survival_larger_late"] == "periodic");
    // pmf ordering flips exactly when b_n is increasing
    CHECK(cmp["pmf_flip"].get<bool>() == (expected == "increasing"));
    CHECK(cmp["pmf_larger_late"] == (expected == "increasing" ? "generic" : "periodic"));
    CHECK(cmp["badges"].size() == prediction_badges().size());
    CHECK(cmp["measured_mc"]["survival_larger"] == "periodic");

    // prediction CSV header and telescoping on the written values
    std::ifstream is(out / "prediction_periodic.csv");
    std::string line;
    std::getline(is, line);
    std::getline(is, line);
    CHECK(line == "n,first_order,b_n,second_order,survival_pred,pmf_pred");
    std::vector<double> surv, pmf;
    while (std::getline(is, line)) {
        std::stringstream ss(line);
        std::string f;
        std::vector<double> row;
        while (std::getline(ss, f, ','))
            row.push_back(std::stod(f));
        surv.push_back(row[4]);
        pmf.push_back(row[5]);
    }
    REQUIRE(surv.size() == 200);
    for (std::size_t i = 1; i < surv.size(); ++i)
        CHECK(std::abs(pmf[i] - (surv[i - 1] - surv[i])) <= 1e-12 * surv[i - 1]);
}

TEST_CASE("unequal hole measures are reported, not ordered")
{
    json j = kLsv;
    j["holes"] = json::array({{{"name", "a"}, {"center", 0.437}, {"width", 0.001}},
                              {{"name", "b"}, {"center", 0.8}, {"width", 0.002}}});
    j["engines"] = json::array({"predict"});
    const auto out = scratch("mismatch");
    const RunResult r = run_experiment(parse_config(j), out);
    REQUIRE(r.exit_code == kExitOk);
    const json v = read_json(out / "verdict.json");
    CHECK(v["comparisons"][0].contains("error"));
    CHECK(!v["comparisons"][0].contains("survival_larger_late"));
}

TEST_CASE("inadmissible holes stop the run with exit code 3")
{
    json j = kLsv;
    j["holes"][0]["center"] = 0.5; // partition point
    const auto out = scratch("inadmissible");
    const RunResult r = run_experiment(parse_config(j), out);
    CHECK(r.exit_code == kExitInadmissible);
    CHECK(fs::exists(out / "holes.json"));
    CHECK(!fs::exists(out / "mc_a.csv"));
    const json h = read_json(out / "holes.json");
    CHECK(h[0]["report"]["admissible"] == false);
    CHECK(!h[0]["report"]["failures"].empty());

    j["holes"][0]["center"] = 0.2; // outside the base (a_3, 1]
    CHECK(run_experiment(parse_config(j), scratch("outside")).exit_code == kExitInadmissible);
}

TEST_CASE("runs reproduce bit for bit from the emitted config")
{
    const auto a = scratch("repro_a");
    const auto b = scratch("repro_b");
    const RunResult ra = run_experiment(parse_config(kLsv), a);
    REQUIRE(ra.exit_code == kExitOk);
    const ExperimentConfig again = load_config(a / "config.json");
    REQUIRE(run_experiment(again, b).exit_code == kExitOk);
    for (const char* f : {"mc_a.csv", "prediction_a.csv", "tail.csv", "holes.json", "verdict.json"})
        CHECK(slurp(a / f) == slurp(b / f));
    const Csv c = read_curve(a / "mc_a.csv");
    for (std::size_t n = 1; n < c.survival.size(); ++n)
        CHECK(c.survival[n] <= c.survival[n - 1]);
}
