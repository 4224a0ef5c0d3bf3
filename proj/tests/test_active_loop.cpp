#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfrel/active_loop.hpp"
#include "mfrel/benchmarks.hpp"
#include "mfrel/errors.hpp"

using namespace mfrel;

namespace {

LoopConfig small_config(Method method, std::uint64_t seed) {
    LoopConfig c;
    c.method = method;
    c.n_mcs = 3000;
    c.n_delta = 3000;
    c.n_c = 150;
    c.n_initial = 6;
    c.mle_restarts = 3;
    c.max_iterations = 60;
    c.seed = seed;
    return c;
}

void check_history_invariants(const MultiFidelityProblem& p, const RunHistory& h, Method method) {
    const auto costs = p.costs();
    REQUIRE_FALSE(h.iterations.empty());
    for (std::size_t i = 0; i < h.iterations.size(); ++i) {
        const auto& r = h.iterations[i];
        CHECK(r.iteration == static_cast<int>(i));
        double c = 0.0;
        for (std::size_t l = 0; l < costs.size(); ++l) c += r.evals[l] * costs[l];
        CHECK(r.cost_cum == c);
        const double failures = r.pf_hat * static_cast<double>(r.pool_size);
        CHECK(std::abs(failures - std::round(failures)) < 1e-6);
        if (i == 0) continue;
        const auto& prev = h.iterations[i - 1];
        CHECK(r.cost_cum >= prev.cost_cum);
        CHECK(r.pool_size >= prev.pool_size);
        for (std::size_t l = 0; l < costs.size(); ++l) {
            const int added = r.evals[l] - prev.evals[l];
            int expected = static_cast<int>(l) == prev.level ? 1 : 0;
            if (method == Method::amgpra && prev.level == 0) expected = 1;
            CHECK(added == expected);
        }
    }
    const auto& last = h.iterations.back();
    CHECK(last.point_index == -1);
    CHECK(h.estimate.total_cost == last.cost_cum);
    CHECK(h.estimate.pf_hat == last.pf_hat);
    CHECK(h.estimate.n_mcs_final == last.pool_size);
    if (h.estimate.reason == Termination::converged) {
        CHECK(h.estimate.converged);
        CHECK(last.max_eff < 0.001);
        REQUIRE(h.estimate.cov.has_value());
        CHECK(*h.estimate.cov < 0.05);
    }
}

// One level-0 source whose limit state never crosses zero on the pool.
MultiFidelityProblem safe_problem() {
    MultiFidelityProblem p;
    p.name = "safe";
    p.rvs = {RandomVariable::normal(0, 1)};
    p.sources.push_back({0, 1.0, [](const Eigen::VectorXd& x) { return 10.0 + x(0); }});
    return p;
}

}  // namespace

TEST_SUITE("active_loop") {

TEST_CASE("check_stop") {
    CHECK(check_stop(std::vector<double>{0, 0, 0}, 0.001));
    CHECK_FALSE(check_stop(std::vector<double>{0, 0.001}, 0.001));
    CHECK(check_stop(std::vector<double>{5e-4, 1e-5}, 0.001));
    CHECK_THROWS_AS(check_stop(std::vector<double>{}, 0.001), DomainError);
}

TEST_CASE("initial design size") {
    CHECK(default_initial_size(1) == 3);
    CHECK(default_initial_size(2) == 6);
    CHECK(default_initial_size(6) == 12);
    CHECK(default_initial_size(10) == 12);
}

TEST_CASE("config validation") {
    LoopConfig c;
    CHECK_NOTHROW(c.validate());
    c.cov_threshold = 0.0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = LoopConfig{};
    c.n_c = 0;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = LoopConfig{};
    c.n_initial = 0;
    CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("amgpra invariants and determinism") {
    const auto p = benchmarks::make_multimodal(2);
    const auto cfg = small_config(Method::amgpra, 3);
    const auto a = run_amgpra(p, cfg);
    check_history_invariants(p, a, Method::amgpra);
    CHECK(a.estimate.converged);
    CHECK(a.estimate.pf_hat == doctest::Approx(0.0313).epsilon(0.3));

    const auto b = run_amgpra(p, cfg);
    REQUIRE(a.iterations.size() == b.iterations.size());
    for (std::size_t i = 0; i < a.iterations.size(); ++i) {
        CHECK(a.iterations[i].point_index == b.iterations[i].point_index);
        CHECK(a.iterations[i].level == b.iterations[i].level);
        CHECK(a.iterations[i].score == b.iterations[i].score);
        CHECK(a.iterations[i].pf_hat == b.iterations[i].pf_hat);
        CHECK(a.iterations[i].max_eff == b.iterations[i].max_eff);
    }
}

TEST_CASE("mfegra and ak-mcs invariants") {
    const auto p = benchmarks::make_multimodal(2);
    const auto m = run_mfegra(p, small_config(Method::mfegra, 4));
    check_history_invariants(p, m, Method::mfegra);

    const auto k = run_akmcs_eff(p, small_config(Method::akmcs_eff, 4));
    REQUIRE(k.estimate.evals.size() == 1);
    CHECK(k.estimate.total_cost == k.estimate.evals[0]);
    CHECK(k.estimate.converged);
}

TEST_CASE("single source reduces to level-0 refinement") {
    const auto p = benchmarks::make_multimodal(2).high_fidelity_only();
    const auto h = run_amgpra(p, small_config(Method::amgpra, 5));
    check_history_invariants(p, h, Method::amgpra);
    for (const auto& r : h.iterations)
        if (r.point_index >= 0) CHECK(r.level == 0);
}

TEST_CASE("initial metamodel already resolved") {
    auto cfg = small_config(Method::amgpra, 6);
    cfg.n_initial.reset();
    const auto h = run_amgpra(safe_problem(), cfg);
    REQUIRE(h.iterations.size() == 1);
    CHECK(h.iterations[0].point_index == -1);
    CHECK(h.estimate.total_cost == 3.0);
    CHECK(h.estimate.pf_hat == 0.0);
    CHECK_FALSE(h.estimate.cov.has_value());
    CHECK(h.estimate.reason == Termination::no_failures_observed);
    // One mandatory enlargement before accepting a zero estimate.
    CHECK(h.estimate.n_mcs_final == cfg.n_mcs + cfg.n_delta);
}

TEST_CASE("iteration limit") {
    const auto p = benchmarks::make_multimodal(2);
    auto cfg = small_config(Method::amgpra, 7);
    cfg.max_iterations = 2;
    const auto h = run_amgpra(p, cfg);
    CHECK(h.iterations.size() <= 3);
    if (h.estimate.reason == Termination::max_iterations) {
        CHECK_FALSE(h.estimate.converged);
        CHECK(h.iterations.size() == 3);
    }
}

TEST_CASE("pool audit does not perturb the run") {
    const auto p = benchmarks::make_multimodal(2);
    auto cfg = small_config(Method::amgpra, 9);
    const auto plain = run_amgpra(p, cfg);
    cfg.audit_pool = true;
    const auto audited = run_amgpra(p, cfg);
    CHECK_FALSE(plain.estimate.pool_pf.has_value());
    REQUIRE(audited.estimate.pool_pf.has_value());
    CHECK(audited.estimate.pf_hat == plain.estimate.pf_hat);
    CHECK(audited.estimate.evals == plain.estimate.evals);
    CHECK(std::abs(*audited.estimate.pool_pf - audited.estimate.pf_hat) < 0.2 * audited.estimate.pf_hat);
}

TEST_CASE("run_method dispatch") {
    const auto p = benchmarks::make_multimodal(2);
    auto cfg = small_config(Method::akmcs_eff, 8);
    cfg.max_iterations = 1;
    CHECK(run_method(p, cfg).estimate.evals.size() == 1);
}

}
