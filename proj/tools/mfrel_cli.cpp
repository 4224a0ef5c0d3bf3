#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mfrel/benchmarks.hpp"
#include "mfrel/errors.hpp"
#include "mfrel/experiment.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_run_failed = 1;
constexpr int exit_config_error = 2;

int run_command(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed,
                std::optional<int> reps, const std::vector<std::string>& method_filter, std::optional<int> threads) {
    mfrel::ExperimentConfig config;
    try {
        std::ifstream in(config_path);
        if (!in) throw mfrel::ConfigError("", "cannot read " + config_path);
        std::ostringstream text;
        text << in.rdbuf();
        config = mfrel::parse_config(text.str());
        if (!out.empty()) config.output_dir = out;
        if (seed) config.seed = *seed;
        if (reps) {
            if (*reps < 1) throw mfrel::ConfigError("repetitions", "--reps must be at least 1");
            config.repetitions = *reps;
        }
        if (threads) config.threads = std::max(1, *threads);
        if (!method_filter.empty()) {
            std::vector<std::string> kept;
            for (const auto& m : method_filter) {
                mfrel::parse_method(m);
                if (std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end())
                    kept.push_back(m);
            }
            if (kept.empty()) throw mfrel::ConfigError("methods", "--method filter matches no configured method");
            config.methods = kept;
        }
    } catch (const mfrel::ConfigError& e) {
        std::cerr << "config error";
        if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
        std::cerr << ": " << e.what() << "\n";
        return exit_config_error;
    }

    mfrel::ExperimentOptions options;
    options.on_run = [](const mfrel::RunResult& r) {
        const auto& e = r.history.estimate;
        std::fprintf(stderr, "%-11s trial %2d  pf=%.4e  cost=%8.3f  %s\n", r.method.c_str(), r.trial, e.pf_hat,
                     e.total_cost, mfrel::to_string(e.reason).c_str());
    };
    const auto result = mfrel::run_experiment(config, options);
    std::cout << mfrel::summary_csv(result.summaries);
    return result.any_failed() ? exit_run_failed : exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-fidelity adaptive reliability analysis"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a batch of repeated trials from a JSON config");
    std::string config_path, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> reps, threads;
    std::vector<std::string> methods;
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out", out, "Output directory (overrides config)");
    run->add_option("--seed", seed, "Base seed (overrides config)");
    run->add_option("--reps", reps, "Repetitions (overrides config)");
    run->add_option("--method", methods, "Only run these methods");
    run->add_option("--threads", threads, "Concurrent trials");

    auto* reference = app.add_subcommand("reference", "Brute-force Monte Carlo reference for a named problem");
    std::string problem;
    std::int64_t n = 1000000;
    std::uint64_t ref_seed = 0;
    double a = 0.9;
    reference->add_option("problem", problem, "Problem name")->required();
    reference->add_option("--n", n, "Sample size");
    reference->add_option("--seed", ref_seed, "Seed");
    reference->add_option("--a", a, "Accuracy parameter (tendim-2f)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config_error;
    }

    if (*run) return run_command(config_path, out, seed, reps, methods, threads);

    try {
        const auto p = mfrel::benchmarks::make_problem(problem, a);
        const auto r = mfrel::benchmarks::mcs_reference(p, n, ref_seed);
        std::printf("problem,n,seed,pf,cov,rejected\n%s,%lld,%llu,%.17g,%.17g,%lld\n", problem.c_str(),
                    static_cast<long long>(n), static_cast<unsigned long long>(ref_seed), r.pf, r.cov,
                    static_cast<long long>(r.rejected));
    } catch (const mfrel::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config_error;
    }
    return exit_ok;
}
