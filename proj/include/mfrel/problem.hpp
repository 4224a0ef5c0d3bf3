#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfrel/probability.hpp"

namespace mfrel {

using LimitState = std::function<double(const Eigen::VectorXd&)>;

/// One information source; level 0 is the high-fidelity model.
struct FidelitySource {
    int level = 0;
    double cost = 1.0;
    LimitState evaluate;
};

struct ReferenceValue {
    double pf = 0.0;
    std::string provenance;
};

/// Independent random inputs plus the ordered sources g_0..g_k and their costs.
struct MultiFidelityProblem {
    std::string name;
    std::vector<RandomVariable> rvs;
    std::vector<FidelitySource> sources;
    std::optional<ReferenceValue> reference_pf;
    /// Rejects physically invalid draws (resampled by i.i.d. Monte Carlo); empty means all draws valid.
    std::function<bool(const Eigen::VectorXd&)> admissible;

    Eigen::Index dimension() const noexcept { return static_cast<Eigen::Index>(rvs.size()); }
    int num_levels() const noexcept { return static_cast<int>(sources.size()); }
    std::vector<double> costs() const;
    /// Throws DomainError unless levels are 0..k in order with positive costs.
    void validate() const;
    /// Same problem with only the high-fidelity source.
    MultiFidelityProblem high_fidelity_only() const;
};

}  // namespace mfrel
