#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfrel/errors.hpp"
#include "mfrel/probability.hpp"

using namespace mfrel;

TEST_SUITE("probability") {

TEST_CASE("inverse_cdf medians") {
    CHECK(inverse_cdf(RandomVariable::normal(0, 1), 0.5) == doctest::Approx(0.0));
    CHECK(inverse_cdf(RandomVariable::normal(1.5, 1), 0.5) == doctest::Approx(1.5));
    // sigma_ln = sqrt(ln 1.04), mu_ln = -sigma_ln^2 / 2
    const double s = std::sqrt(std::log(1.04));
    const double median = std::exp(-0.5 * s * s);
    CHECK(median == doctest::Approx(0.98058).epsilon(1e-5));
    CHECK(inverse_cdf(RandomVariable::lognormal(1, 0.2), 0.5) == doctest::Approx(median).epsilon(1e-12));
}

TEST_CASE("inverse_cdf rejects u outside (0, 1)") {
    const auto rv = RandomVariable::normal(0, 1);
    CHECK_THROWS_AS(inverse_cdf(rv, 0.0), DomainError);
    CHECK_THROWS_AS(inverse_cdf(rv, 1.0), DomainError);
    CHECK_THROWS_AS(inverse_cdf(rv, -0.1), DomainError);
}

TEST_CASE("inverse_cdf round-trips through the cdf") {
    const std::vector<RandomVariable> rvs{RandomVariable::normal(-2, 3), RandomVariable::lognormal(1, 0.2),
                                          RandomVariable::gamma(3.22, 0.65)};
    for (const auto& rv : rvs)
        for (double u : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999})
            CHECK(rv.cdf(inverse_cdf(rv, u)) == doctest::Approx(u).epsilon(1e-9));
}

TEST_CASE("moment matching") {
    const auto g = RandomVariable::gamma(3.22, 0.65);
    CHECK(g.shape() * g.scale() == doctest::Approx(3.22));
    CHECK(g.shape() * g.scale() * g.scale() == doctest::Approx(0.65 * 0.65));
    const auto ln = RandomVariable::lognormal(1, 0.2);
    const double m = std::exp(ln.log_mean() + 0.5 * ln.log_std_dev() * ln.log_std_dev());
    CHECK(m == doctest::Approx(1.0));
    CHECK_THROWS_AS(RandomVariable::normal(0, 0), DomainError);
    CHECK_THROWS_AS(RandomVariable::lognormal(-1, 1), DomainError);
}

TEST_CASE("LHS places one point per stratum") {
    const std::vector<RandomVariable> rvs{RandomVariable::normal(0, 1)};
    const auto pool = lhs_population(rvs, 10, 7);
    REQUIRE(pool.size() == 10);
    std::vector<int> hits(10, 0);
    for (Eigen::Index i = 0; i < 10; ++i) ++hits[static_cast<std::size_t>(rvs[0].cdf(pool.points(i, 0)) * 10)];
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}

TEST_CASE("LHS is deterministic per seed") {
    const std::vector<RandomVariable> rvs{RandomVariable::normal(0, 1), RandomVariable::gamma(2, 1)};
    const auto a = lhs_population(rvs, 100, 11);
    const auto b = lhs_population(rvs, 100, 11);
    const auto c = lhs_population(rvs, 100, 12);
    CHECK(a.points == b.points);
    CHECK(a.points != c.points);
}

TEST_CASE("LHS sample means") {
    const std::vector<RandomVariable> rvs{RandomVariable::normal(1.5, 1), RandomVariable::normal(2.5, 1)};
    const auto pool = lhs_population(rvs, 10000, 3);
    const double se = 1.0 / std::sqrt(10000.0);
    CHECK(std::abs(pool.points.col(0).mean() - 1.5) < 3 * se);
    CHECK(std::abs(pool.points.col(1).mean() - 2.5) < 3 * se);
}

TEST_CASE("pool append") {
    const std::vector<RandomVariable> rvs{RandomVariable::normal(0, 1)};
    auto a = lhs_population(rvs, 5, 1);
    const auto b = lhs_population(rvs, 3, 2);
    a.append(b);
    CHECK(a.size() == 8);
    CHECK(a.points(7, 0) == b.points(2, 0));
}

TEST_CASE("Rng") {
    Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(rng.index(7) < 7);
    }
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("mcs_failure_probability") {
    std::vector<std::uint8_t> ind(10000, 0);
    std::fill_n(ind.begin(), 313, 1);
    CHECK(mcs_failure_probability(ind) == doctest::Approx(0.0313));
    CHECK(mcs_failure_probability(std::vector<std::uint8_t>(50, 0)) == 0.0);
    CHECK(mcs_failure_probability(std::vector<std::uint8_t>(50, 1)) == 1.0);
    CHECK_THROWS_AS(mcs_failure_probability(std::vector<std::uint8_t>{}), DomainError);
}

TEST_CASE("cov_pf") {
    // Eq 19 evaluated directly.
    const double ref = std::sqrt((1 - 0.0313) / (1e4 * 0.0313));
    CHECK(ref == doctest::Approx(0.05563).epsilon(1e-4));
    CHECK(*cov_pf(0.0313, 10000) == doctest::Approx(ref).epsilon(1e-12));
    CHECK(*cov_pf(0.0313, 40000) == doctest::Approx(ref / 2).epsilon(1e-12));
    CHECK(*cov_pf(1.0, 123) == 0.0);
    CHECK_FALSE(cov_pf(0.0, 10000).has_value());
}

}
