#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mfrel {

enum class Distribution { normal, lognormal, gamma };

/// Marginal distribution of one input, specified by its first two moments.
class RandomVariable {
public:
    RandomVariable(Distribution family, double mean, double std_dev);

    static RandomVariable normal(double mean, double std_dev) { return {Distribution::normal, mean, std_dev}; }
    static RandomVariable lognormal(double mean, double std_dev) { return {Distribution::lognormal, mean, std_dev}; }
    static RandomVariable gamma(double mean, double std_dev) { return {Distribution::gamma, mean, std_dev}; }

    Distribution family() const noexcept { return family_; }
    double mean() const noexcept { return mean_; }
    double std_dev() const noexcept { return std_dev_; }

    /// Moment-matched parameters of the underlying log-space normal (lognormal only).
    double log_mean() const noexcept { return p1_; }
    double log_std_dev() const noexcept { return p2_; }
    /// Moment-matched shape/scale (gamma only).
    double shape() const noexcept { return p1_; }
    double scale() const noexcept { return p2_; }

    double cdf(double x) const;

private:
    Distribution family_;
    double mean_;
    double std_dev_;
    double p1_ = 0.0;
    double p2_ = 0.0;
};

/// u-quantile of `rv`; throws DomainError unless 0 < u < 1.
double inverse_cdf(const RandomVariable& rv, double u);

/// The single seeded generator owned by one run.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform draw on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n);

    /// Fisher-Yates; portable across standard libraries, unlike std::shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Candidate population: one input vector per row, physical units.
struct CandidatePool {
    Eigen::MatrixXd points;
    std::uint64_t seed = 0;

    Eigen::Index size() const noexcept { return points.rows(); }
    Eigen::Index dimension() const noexcept { return points.cols(); }
    void append(const CandidatePool& more);
};

/// Latin hypercube population mapped through the marginals.
CandidatePool lhs_population(std::span<const RandomVariable> rvs, Eigen::Index n, Rng& rng);
CandidatePool lhs_population(std::span<const RandomVariable> rvs, Eigen::Index n, std::uint64_t seed);

/// Independent draws from the joint distribution.
Eigen::MatrixXd iid_population(std::span<const RandomVariable> rvs, Eigen::Index n, Rng& rng);

/// Mean of failure indicators.
double mcs_failure_probability(std::span<const std::uint8_t> indicators);

/// Coefficient of variation of the Monte Carlo estimate; empty when pf_hat == 0.
std::optional<double> cov_pf(double pf_hat, std::int64_t n_mcs);

}  // namespace mfrel
