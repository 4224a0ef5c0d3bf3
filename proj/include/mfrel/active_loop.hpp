#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfrel/learning.hpp"
#include "mfrel/problem.hpp"

namespace mfrel {

enum class Method { amgpra, mfegra, akmcs_eff };

struct LoopConfig {
    Method method = Method::amgpra;
    LearningFunctionKind lf = LearningFunctionKind::eff;
    Eigen::Index n_mcs = 10000;
    Eigen::Index n_delta = 10000;
    Eigen::Index n_c = 1000;
    /// Defaults to min(12, (D + 1)(D + 2) / 2).
    std::optional<int> n_initial;
    double cov_threshold = 0.05;
    double eff_threshold = 1e-3;
    int max_iterations = 500;
    std::uint64_t seed = 0;
    double nugget = 1e-8;
    /// Nugget is multiplied by 100 after a failed fit, up to this value.
    double max_nugget = 1e-4;
    int mle_restarts = 10;
    double max_lengthscale = 1e4;
    int mle_max_iterations = 100;
    /// Evaluates the high-fidelity source on the final pool (uncosted) to measure
    /// the surrogate's classification error in isolation.
    bool audit_pool = false;

    /// Throws DomainError on non-positive thresholds or sizes.
    void validate() const;
};

/// One model assessment; the selection fields are -1 when the run stopped at this row.
struct IterationRecord {
    int iteration = 0;
    Eigen::Index point_index = -1;
    int level = -1;
    double score = 0.0;
    double pf_hat = 0.0;
    double max_eff = 0.0;
    double cost_cum = 0.0;
    std::vector<int> evals;
    Eigen::Index pool_size = 0;
};

enum class Termination { converged, no_failures_observed, max_iterations, degenerate_source, fit_failure };

std::string to_string(Termination t);
std::string to_string(Method m);

struct ReliabilityEstimate {
    double pf_hat = 0.0;
    std::optional<double> cov;
    Eigen::Index n_mcs_final = 0;
    double total_cost = 0.0;
    std::vector<int> evals;
    /// Level-0 Monte Carlo estimate on the final pool; set only when auditing.
    std::optional<double> pool_pf;
    bool converged = false;
    Termination reason = Termination::max_iterations;
    std::string message;
};

struct RunHistory {
    std::vector<IterationRecord> iterations;
    ReliabilityEstimate estimate;
    double final_nugget = 0.0;
};

/// Initial design size for input dimension `dim`.
int default_initial_size(Eigen::Index dim);

/// True iff max(eff_values) < threshold.
bool check_stop(std::span<const double> eff_values, double threshold);

/// Collective-learning-function driven multi-fidelity refinement.
RunHistory run_amgpra(const MultiFidelityProblem& problem, const LoopConfig& config);

/// EFF-argmax point with information-gain source selection.
RunHistory run_mfegra(const MultiFidelityProblem& problem, const LoopConfig& config);

/// Single-fidelity EFF refinement on the high-fidelity source only.
RunHistory run_akmcs_eff(const MultiFidelityProblem& problem, const LoopConfig& config);

/// Dispatches on config.method.
RunHistory run_method(const MultiFidelityProblem& problem, const LoopConfig& config);

}  // namespace mfrel
