#include "mfrel/benchmarks.hpp"

#include <cmath>
#include <limits>

#include "mfrel/errors.hpp"

namespace mfrel {

std::vector<double> MultiFidelityProblem::costs() const {
    std::vector<double> c;
    for (const auto& s : sources) c.push_back(s.cost);
    return c;
}

void MultiFidelityProblem::validate() const {
    if (rvs.empty()) throw DomainError("problem: no random variables");
    if (sources.empty()) throw DomainError("problem: no information sources");
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (sources[i].level != static_cast<int>(i)) throw DomainError("problem: source levels must be 0..k in order");
        if (!(sources[i].cost > 0.0)) throw DomainError("problem: source costs must be positive");
        if (!sources[i].evaluate) throw DomainError("problem: source without evaluator");
    }
}

MultiFidelityProblem MultiFidelityProblem::high_fidelity_only() const {
    MultiFidelityProblem p = *this;
    p.sources.resize(1);
    return p;
}

namespace benchmarks {

namespace {

void check_size(const Eigen::VectorXd& x, Eigen::Index n, const char* what) {
    if (x.size() != n) throw DomainError(std::string(what) + ": wrong input dimension");
}

}  // namespace

double multimodal(int level, const Eigen::VectorXd& x) {
    check_size(x, 2, "multimodal");
    const double x1 = x(0);
    const double x2 = x(1);
    const double g0 = 2.0 - (x1 * x1 + 4.0) * (x2 - 1.0) / 20.0 + std::sin(2.5 * x1);
    switch (level) {
        case 0: return g0;
        case 1: return g0 - std::sin(5.0 * x1 / 22.0 + 5.0 * x2 / 44.0 + 5.0 / 4.0);
        case 2: return g0 - std::sin(5.0 * x1 / 11.0 + 5.0 * x2 / 22.0 + 35.0 / 11.0);
        default: throw DomainError("multimodal: level must be 0, 1 or 2");
    }
}

double oscillator(int level, const Eigen::VectorXd& x) {
    check_size(x, 6, "oscillator");
    const double k1 = x(0), k2 = x(1), m = x(2), r = x(3), t1 = x(4), f1 = x(5);
    if (!(m > 0.0) || !(k1 + k2 > 0.0)) throw DomainError("oscillator: requires m > 0 and k1 + k2 > 0");
    const double w0 = std::sqrt((k1 + k2) / m);
    const double s = std::sin(0.5 * w0 * t1);
    const double g0 = 3.0 * r - std::abs(2.0 * f1 / (m * w0 * w0) * s);
    switch (level) {
        case 0: return g0;
        case 1: return g0 - s / 15.0;
        case 2: return g0 - 2.0 * s / 15.0;
        default: throw DomainError("oscillator: level must be 0, 1 or 2");
    }
}

double tendim(int level, const Eigen::VectorXd& x, double a) {
    constexpr double n = 10.0;
    constexpr double sigma = 0.2;
    check_size(x, 10, "tendim");
    if (!(a > 0.0 && a <= 1.0)) throw DomainError("tendim: accuracy parameter must lie in (0, 1]");
    const double capacity = n + 3.0 * sigma * std::sqrt(n);
    switch (level) {
        case 0: return capacity - x.sum();
        case 1: return capacity - a * x.sum();
        default: throw DomainError("tendim: level must be 0 or 1");
    }
}

MultiFidelityProblem make_multimodal(int levels) {
    if (levels != 2 && levels != 3) throw DomainError("multimodal: 2 or 3 fidelity levels");
    MultiFidelityProblem p;
    p.name = levels == 2 ? "multimodal-2f" : "multimodal-3f";
    p.rvs = {RandomVariable::normal(1.5, 1.0), RandomVariable::normal(2.5, 1.0)};
    const double costs[] = {1.0, 0.1, 0.01};
    for (int l = 0; l < levels; ++l)
        p.sources.push_back({l, costs[l], [l](const Eigen::VectorXd& x) { return multimodal(l, x); }});
    p.reference_pf = ReferenceValue{3.13e-2, "[PAPER] MCS with 1e6 samples"};
    return p;
}

MultiFidelityProblem make_oscillator() {
    MultiFidelityProblem p;
    p.name = "oscillator-3f";
    p.rvs = {RandomVariable::normal(1.0, 0.1),  RandomVariable::normal(0.1, 0.01), RandomVariable::normal(1.0, 0.05),
             RandomVariable::normal(0.65, 0.05), RandomVariable::normal(1.0, 0.2), RandomVariable::normal(1.0, 0.2)};
    const double costs[] = {1.0, 0.1, 0.01};
    for (int l = 0; l < 3; ++l)
        p.sources.push_back({l, costs[l], [l](const Eigen::VectorXd& x) { return oscillator(l, x); }});
    p.reference_pf = ReferenceValue{8.2e-4, "[PAPER] MCS with 1e6 samples"};
    p.admissible = [](const Eigen::VectorXd& x) { return x(2) > 0.0 && x(0) + x(1) > 0.0; };
    return p;
}

MultiFidelityProblem make_tendim(double a, double c1) {
    if (!(a > 0.0 && a <= 1.0)) throw DomainError("tendim: accuracy parameter must lie in (0, 1]");
    MultiFidelityProblem p;
    p.name = "tendim-2f";
    p.rvs.assign(10, RandomVariable::lognormal(1.0, 0.2));
    p.sources.push_back({0, 1.0, [a](const Eigen::VectorXd& x) { return tendim(0, x, a); }});
    p.sources.push_back({1, c1, [a](const Eigen::VectorXd& x) { return tendim(1, x, a); }});
    p.reference_pf = ReferenceValue{2.73e-3, "[PAPER] MCS with 1e6 samples"};
    return p;
}

std::vector<std::string> problem_names() { return {"multimodal-2f", "multimodal-3f", "oscillator-3f", "tendim-2f"}; }

MultiFidelityProblem make_problem(const std::string& name, double a, double c1) {
    if (name == "multimodal-2f") return make_multimodal(2);
    if (name == "multimodal-3f") return make_multimodal(3);
    if (name == "oscillator-3f") return make_oscillator();
    if (name == "tendim-2f") return make_tendim(a, c1);
    throw DomainError("unknown problem: " + name);
}

McsReference mcs_reference(const MultiFidelityProblem& problem, std::int64_t n, std::uint64_t seed) {
    if (n < 1) throw DomainError("mcs_reference: n must be at least 1");
    problem.validate();
    Rng rng(seed);
    const auto& g = problem.sources.front().evaluate;
    const Eigen::Index dim = problem.dimension();
    Eigen::VectorXd x(dim);
    std::int64_t failures = 0;
    McsReference out;
    for (std::int64_t i = 0; i < n; ++i) {
        for (;;) {
            for (Eigen::Index d = 0; d < dim; ++d) x(d) = inverse_cdf(problem.rvs[static_cast<std::size_t>(d)], rng.uniform());
            if (!problem.admissible || problem.admissible(x)) break;
            ++out.rejected;
        }
        if (g(x) <= 0.0) ++failures;
    }
    out.pf = static_cast<double>(failures) / static_cast<double>(n);
    out.cov = out.pf > 0.0 ? *cov_pf(out.pf, n) : std::numeric_limits<double>::infinity();
    return out;
}

}  // namespace benchmarks
}  // namespace mfrel
