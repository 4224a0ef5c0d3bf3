#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfrel/active_loop.hpp"
#include "mfrel/benchmarks.hpp"

namespace mfrel {

struct SweepSpec {
    std::string param;  // "c1" or "a"
    std::vector<double> values;
};

/// A batch of seeded repeated trials on one named problem.
struct ExperimentConfig {
    std::string problem;
    std::vector<std::string> methods{"amgpra-eff"};
    LoopConfig loop;
    int repetitions = 20;
    std::uint64_t seed = 0;
    std::int64_t reference_n = 1000000;
    std::optional<SweepSpec> sweep;
    double a = 0.9;
    double c1 = 0.05;
    std::string output_dir = "results";
    int threads = 1;
};

/// Method names: amgpra-eff, amgpra-um, mfegra, akmcs-eff.
struct MethodSpec {
    Method method = Method::amgpra;
    LearningFunctionKind lf = LearningFunctionKind::eff;
};
MethodSpec parse_method(const std::string& name);
std::vector<std::string> method_names();

/// Parses and validates the JSON config; unknown keys and bad values throw ConfigError.
ExperimentConfig parse_config(std::string_view text);

struct RunResult {
    std::string method;
    std::optional<double> sweep_value;
    int trial = 0;
    std::uint64_t seed = 0;
    RunHistory history;
    double pf_ref = 0.0;
    double relative_error = 0.0;
};

struct SummaryRecord {
    std::string method;
    std::string sweep_param;
    std::optional<double> sweep_value;
    int runs = 0;
    int converged = 0;
    int failed = 0;
    double mean_cost = 0.0;
    std::vector<double> mean_evals;
    double mean_pf = 0.0;
    double pf_ref = 0.0;
    double avg_relative_error_pct = 0.0;
};

/// Averages over converged runs only.
SummaryRecord summarize(const std::string& method, const std::string& sweep_param, std::optional<double> sweep_value,
                        std::span<const RunResult> runs, int num_levels);

struct ExperimentResult {
    std::vector<RunResult> runs;
    std::vector<SummaryRecord> summaries;
    bool any_failed() const;
};

struct ExperimentOptions {
    bool write_outputs = true;
    /// Where MCS references are cached; defaults to <output_dir>/reference-cache.
    std::optional<std::filesystem::path> cache_dir;
    std::function<void(const RunResult&)> on_run;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options = {});

/// Builds the problem for one sweep value (or the base configuration).
MultiFidelityProblem experiment_problem(const ExperimentConfig& config, std::optional<double> sweep_value);

/// Local MCS reference, read from or stored in `cache_dir` when given.
benchmarks::McsReference cached_reference(const MultiFidelityProblem& problem, std::int64_t n, std::uint64_t seed,
                                          const std::optional<std::filesystem::path>& cache_dir,
                                          const std::string& key_suffix = {});

std::string history_csv(const RunHistory& history, int num_levels);
void write_history(const RunHistory& history, int num_levels, const std::filesystem::path& path);
std::vector<IterationRecord> parse_history_csv(std::string_view text);
std::vector<IterationRecord> read_history(const std::filesystem::path& path);

std::string summary_csv(std::span<const SummaryRecord> summaries);
nlohmann::json to_json(const RunResult& run);

}  // namespace mfrel
