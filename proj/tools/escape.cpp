#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

#include <omp.h>

#include <CLI11.hpp>

#include "escape/errors.hpp"
#include "escape/experiment.hpp"
#include "escape/renewal.hpp"

using namespace escape;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
};

int run_config(const std::string& path, const Globals& g, int engines)
{
    ExperimentConfig cfg = load_config(path);
    if (g.seed)
        cfg.mc_seed = *g.seed;
    if (g.out)
        cfg.output = *g.out;
    if (engines != 0) {
        cfg.run_mc = engines & 1;
        cfg.run_ulam = engines & 2;
        cfg.run_predict = engines & 4;
    }
    const RunResult r = run_experiment(cfg, cfg.output);
    for (const auto& f : r.files)
        std::cout << f.string() << '\n';
    if (r.exit_code == kExitInadmissible)
        std::cerr << "inadmissible hole(s); reports in " << (cfg.output + "/holes.json") << '\n';
    return r.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Escape and hitting-time statistics for open intermittent interval maps"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out;
    app.add_option("--seed", seed, "Monte Carlo seed (overrides the config)");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "Output directory (overrides the config)");

    std::string config;
    auto with_config = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", config, "Experiment config (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        return sub;
    };
    auto* simulate = with_config("simulate", "Monte Carlo escape curves");
    auto* ulam = with_config("ulam", "Open Ulam operator escape curves");
    auto* predict = with_config("predict", "Asymptotic-expansion predictions");
    auto* compare = with_config("compare", "All configured engines plus the hole comparison verdict");
    auto* tail = with_config("tail", "Return-time tail mu_X(R >= n) of the induced system");

    double theta = 1.5;
    long n = 100000;
    auto* bn = app.add_subcommand("bn", "n^theta (b_{n-1} - b_n) for the Farey tail n^-theta");
    bn->add_option("--theta", theta, "Tail exponent theta in (1, 2)")->required();
    bn->add_option("--n", n, "Index n")->required()->check(CLI::Range(2L, 100000000L));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (app.count("--seed"))
        g.seed = seed;
    if (app.count("--threads")) {
        g.threads = threads;
        omp_set_num_threads(threads);
    }
    if (app.count("--out"))
        g.out = out;

    try {
        if (simulate->parsed())
            return run_config(config, g, 1);
        if (ulam->parsed())
            return run_config(config, g, 2);
        if (predict->parsed())
            return run_config(config, g, 4);
        if (compare->parsed()) {
            ExperimentConfig cfg = load_config(config);
            int engines = 4 | (cfg.run_mc ? 1 : 0) | (cfg.run_ulam ? 2 : 0);
            return run_config(config, g, engines);
        }
        if (tail->parsed()) {
            ExperimentConfig cfg = load_config(config);
            if (g.out)
                cfg.output = *g.out;
            const TailSequence t = config_tail(cfg);
            std::filesystem::create_directories(cfg.output);
            const auto path = std::filesystem::path(cfg.output) / "tail.csv";
            std::ofstream os(path);
            write_csv(os, t);
            std::cout << path.string() << '\n';
            return kExitOk;
        }
        if (bn->parsed()) {
            if (!(theta > 1.0 && theta < 2.0))
                throw ConfigError("--theta must lie in (1, 2)");
            const double d = farey_scaled_difference(theta, n);
            const nlohmann::json j = {{"theta", theta},
                                      {"n", n},
                                      {"scaled_difference", d},
                                      {"closed_form", farey_bn_limit(theta)}};
            std::cout << j.dump(2) << '\n';
            if (g.out) {
                std::filesystem::create_directories(*g.out);
                std::ofstream(std::filesystem::path(*g.out) / "bn.json") << j.dump(2) << '\n';
            }
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
