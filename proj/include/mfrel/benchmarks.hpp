#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfrel/problem.hpp"

namespace mfrel::benchmarks {

/// Highly nonlinear two-variable limit state and its two cheaper variants.
double multimodal(int level, const Eigen::VectorXd& x);

/// Undamped single-degree-of-freedom oscillator; x = (k1, k2, m, r, t1, F1).
double oscillator(int level, const Eigen::VectorXd& x);

/// Sum of ten lognormal inputs against a fixed capacity; level 1 scales the
/// demand by the accuracy parameter `a`.
double tendim(int level, const Eigen::VectorXd& x, double a);

/// `levels` is 2 or 3; costs 1 / 0.1 / 0.01.
MultiFidelityProblem make_multimodal(int levels);
MultiFidelityProblem make_oscillator();
MultiFidelityProblem make_tendim(double a = 0.9, double c1 = 0.05);

/// Known names: multimodal-2f, multimodal-3f, oscillator-3f, tendim-2f.
std::vector<std::string> problem_names();
/// Builds a named problem; `a` and `c1` parameterize tendim-2f only.
MultiFidelityProblem make_problem(const std::string& name, double a = 0.9, double c1 = 0.05);

struct McsReference {
    double pf = 0.0;
    double cov = 0.0;
    std::int64_t rejected = 0;
};

/// Brute-force high-fidelity Monte Carlo with n i.i.d. draws.
McsReference mcs_reference(const MultiFidelityProblem& problem, std::int64_t n, std::uint64_t seed);

}  // namespace mfrel::benchmarks
