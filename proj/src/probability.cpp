#include "mfrel/probability.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>

#include "mfrel/errors.hpp"

namespace mfrel {

RandomVariable::RandomVariable(Distribution family, double mean, double std_dev)
    : family_(family), mean_(mean), std_dev_(std_dev) {
    if (!(std_dev > 0.0) || !std::isfinite(std_dev) || !std::isfinite(mean))
        throw DomainError("random variable: std_dev must be positive and finite");
    switch (family) {
        case Distribution::normal:
            p1_ = mean;
            p2_ = std_dev;
            break;
        case Distribution::lognormal: {
            if (!(mean > 0.0)) throw DomainError("lognormal random variable: mean must be positive");
            const double cov = std_dev / mean;
            p2_ = std::sqrt(std::log1p(cov * cov));
            p1_ = std::log(mean) - 0.5 * p2_ * p2_;
            break;
        }
        case Distribution::gamma: {
            if (!(mean > 0.0)) throw DomainError("gamma random variable: mean must be positive");
            p1_ = (mean * mean) / (std_dev * std_dev);
            p2_ = (std_dev * std_dev) / mean;
            break;
        }
    }
}

double RandomVariable::cdf(double x) const {
    switch (family_) {
        case Distribution::normal:
            return boost::math::cdf(boost::math::normal_distribution<>(p1_, p2_), x);
        case Distribution::lognormal:
            if (x <= 0.0) return 0.0;
            return boost::math::cdf(boost::math::lognormal_distribution<>(p1_, p2_), x);
        case Distribution::gamma:
            if (x <= 0.0) return 0.0;
            return boost::math::cdf(boost::math::gamma_distribution<>(p1_, p2_), x);
    }
    return 0.0;
}

double inverse_cdf(const RandomVariable& rv, double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("inverse_cdf: u must lie in (0, 1)");
    switch (rv.family()) {
        case Distribution::normal:
            return boost::math::quantile(boost::math::normal_distribution<>(rv.mean(), rv.std_dev()), u);
        case Distribution::lognormal:
            return boost::math::quantile(boost::math::lognormal_distribution<>(rv.log_mean(), rv.log_std_dev()), u);
        case Distribution::gamma:
            return boost::math::quantile(boost::math::gamma_distribution<>(rv.shape(), rv.scale()), u);
    }
    return 0.0;
}

std::size_t Rng::index(std::size_t n) {
    // Rejection keeps the draw unbiased for any n.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return static_cast<std::size_t>(r % n);
}

void CandidatePool::append(const CandidatePool& more) {
    if (points.size() == 0) {
        points = more.points;
        return;
    }
    if (more.dimension() != dimension()) throw DomainError("candidate pool: dimension mismatch on append");
    const Eigen::Index old = points.rows();
    points.conservativeResize(old + more.size(), Eigen::NoChange);
    points.bottomRows(more.size()) = more.points;
}

CandidatePool lhs_population(std::span<const RandomVariable> rvs, Eigen::Index n, Rng& rng) {
    if (n < 1) throw DomainError("lhs_population: n must be at least 1");
    const auto dim = static_cast<Eigen::Index>(rvs.size());
    CandidatePool pool;
    pool.points.resize(n, dim);
    std::vector<Eigen::Index> strata(static_cast<std::size_t>(n));
    for (Eigen::Index d = 0; d < dim; ++d) {
        std::iota(strata.begin(), strata.end(), Eigen::Index{0});
        rng.shuffle(strata);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = (static_cast<double>(strata[static_cast<std::size_t>(i)]) + rng.uniform()) /
                             static_cast<double>(n);
            pool.points(i, d) = inverse_cdf(rvs[static_cast<std::size_t>(d)], u);
        }
    }
    return pool;
}

CandidatePool lhs_population(std::span<const RandomVariable> rvs, Eigen::Index n, std::uint64_t seed) {
    Rng rng(seed);
    auto pool = lhs_population(rvs, n, rng);
    pool.seed = seed;
    return pool;
}

Eigen::MatrixXd iid_population(std::span<const RandomVariable> rvs, Eigen::Index n, Rng& rng) {
    if (n < 1) throw DomainError("iid_population: n must be at least 1");
    const auto dim = static_cast<Eigen::Index>(rvs.size());
    Eigen::MatrixXd out(n, dim);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index d = 0; d < dim; ++d)
            out(i, d) = inverse_cdf(rvs[static_cast<std::size_t>(d)], rng.uniform());
    return out;
}

double mcs_failure_probability(std::span<const std::uint8_t> indicators) {
    if (indicators.empty()) throw DomainError("mcs_failure_probability: empty indicator sequence");
    std::size_t failures = 0;
    for (auto v : indicators) failures += v != 0;
    return static_cast<double>(failures) / static_cast<double>(indicators.size());
}

std::optional<double> cov_pf(double pf_hat, std::int64_t n_mcs) {
    if (n_mcs < 1) throw DomainError("cov_pf: n_mcs must be at least 1");
    if (pf_hat < 0.0 || pf_hat > 1.0) throw DomainError("cov_pf: pf_hat must lie in [0, 1]");
    if (pf_hat == 0.0) return std::nullopt;
    return std::sqrt((1.0 - pf_hat) / (static_cast<double>(n_mcs) * pf_hat));
}

}  // namespace mfrel
