#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mfrel/errors.hpp"
#include "mfrel/mfgp.hpp"
#include "oracles.hpp"

using namespace mfrel;

namespace {

// Random toy instance: hyperparameters, records on `levels` levels, dimension `dim`.
struct Toy {
    Hyperparameters hp;
    std::vector<oracle::Record> data;
};

Toy random_toy(std::mt19937_64& gen, int levels, int dim, int n, double nugget) {
    std::uniform_real_distribution<double> x(-2, 2), ls(0.5, 2.0), var(0.5, 2.0), y(-1, 1);
    Toy t;
    t.hp = Hyperparameters::defaults(levels, dim);
    t.hp.nugget = nugget;
    t.hp.mean = y(gen);
    for (auto& k : t.hp.kernels) {
        k.variance = var(gen);
        for (Eigen::Index d = 0; d < dim; ++d) k.lengthscales(d) = ls(gen);
    }
    t.hp.kernels[0].variance *= 2;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd p(dim);
        for (auto& v : p) v = x(gen);
        t.data.push_back({i % levels, p, y(gen)});
    }
    return t;
}

Eigen::VectorXd point(std::mt19937_64& gen, int dim, double half_width = 2.5) {
    std::uniform_real_distribution<double> x(-half_width, half_width);
    Eigen::VectorXd p(dim);
    for (auto& v : p) v = x(gen);
    return p;
}

}  // namespace

TEST_SUITE("mfgp") {

TEST_CASE("prior covariance structure") {
    auto hp = Hyperparameters::defaults(3, 2);
    hp.kernels[0].variance = 2.0;
    hp.kernels[1].variance = 0.3;
    hp.kernels[2].variance = 0.7;
    const Eigen::Vector2d x(0.4, -1.0);
    CHECK(prior_covariance(hp, 0, x, 0, x) == doctest::Approx(2.0));
    CHECK(prior_covariance(hp, 1, x, 2, x) == doctest::Approx(2.0));
    CHECK(prior_covariance(hp, 1, x, 1, x) == doctest::Approx(2.3));
    CHECK(prior_covariance(hp, 2, x, 2, x) == doctest::Approx(2.7));
    CHECK(hp.level_variance(2) == doctest::Approx(2.7));
}

TEST_CASE("invalid level") {
    std::mt19937_64 gen(1);
    const auto t = random_toy(gen, 2, 2, 5, 1e-8);
    const auto m = oracle::model(t.hp, t.data);
    CHECK_THROWS_AS(m.predict(2, t.data[0].x), DomainError);
    CHECK_THROWS_AS(m.predict(-1, t.data[0].x), DomainError);
    CHECK_THROWS_AS(m.posterior_cross_cov(0, t.data[0].x, 5, t.data[0].x), DomainError);
}

TEST_CASE("log marginal likelihood") {
    SUBCASE("single record at the mean") {
        auto hp = Hyperparameters::defaults(1, 1);
        hp.kernels[0].variance = 3.0;
        hp.nugget = 0.0;
        hp.mean = 0.25;
        GpData d{Eigen::MatrixXd::Constant(1, 1, 0.5), {0}, Eigen::VectorXd::Constant(1, 0.25)};
        CHECK(log_marginal_likelihood(hp, d) == doctest::Approx(-0.5 * std::log(2 * M_PI * 3.0)).epsilon(1e-12));
    }
    SUBCASE("dense oracle") {
        std::mt19937_64 gen(2);
        for (int rep = 0; rep < 20; ++rep) {
            const auto t = random_toy(gen, 1 + rep % 3, 1 + rep % 4, 8, 1e-6);
            GpData d;
            d.inputs.resize(t.data[0].x.size(), static_cast<Eigen::Index>(t.data.size()));
            d.values = oracle::values(t.data);
            for (std::size_t i = 0; i < t.data.size(); ++i) {
                d.inputs.col(static_cast<Eigen::Index>(i)) = t.data[i].x;
                d.levels.push_back(t.data[i].level);
            }
            CHECK(oracle::rel_error(log_marginal_likelihood(t.hp, d), oracle::log_density(t.hp, t.data)) < 1e-8);
        }
    }
    SUBCASE("singular covariance") {
        auto hp = Hyperparameters::defaults(1, 1);
        hp.nugget = 0.0;
        GpData d{Eigen::MatrixXd::Zero(1, 2), {0, 0}, Eigen::Vector2d(1.0, 1.0)};
        CHECK_THROWS_AS(log_marginal_likelihood(hp, d), IllConditionedError);
    }
}

TEST_CASE("posterior matches dense conditional Gaussian") {
    std::mt19937_64 gen(3);
    for (int rep = 0; rep < 30; ++rep) {
        const int levels = 1 + rep % 3;
        const auto t = random_toy(gen, levels, 2, 5, 1e-6);
        const auto m = oracle::model(t.hp, t.data);
        for (int l = 0; l < levels; ++l) {
            const auto x = point(gen, 2);
            const auto x2 = point(gen, 2);
            const int l2 = static_cast<int>(gen() % static_cast<unsigned>(levels));
            const auto p = m.predict(l, x);
            CHECK(oracle::rel_error(p.mean, oracle::posterior_mean(t.hp, t.data, l, x)) < 1e-8);
            CHECK(oracle::rel_error(p.variance, oracle::posterior_cov(t.hp, t.data, l, x, l, x)) < 1e-8);
            CHECK(oracle::rel_error(m.posterior_cross_cov(l, x, l2, x2),
                                    oracle::posterior_cov(t.hp, t.data, l, x, l2, x2)) < 1e-8);
            CHECK(m.posterior_cross_cov(l, x, l, x) == doctest::Approx(p.variance).epsilon(1e-10));
        }
    }
}

TEST_CASE("batch and block forms agree with pointwise forms") {
    std::mt19937_64 gen(4);
    const auto t = random_toy(gen, 3, 3, 9, 1e-6);
    const auto m = oracle::model(t.hp, t.data);
    Eigen::MatrixXd rows(4, 3);
    for (Eigen::Index i = 0; i < 4; ++i) rows.row(i) = point(gen, 3).transpose();
    for (int l = 0; l < 3; ++l) {
        const auto b = m.predict_batch(l, rows);
        const Eigen::MatrixXd c = m.posterior_cov_block(0, rows, l, rows);
        for (Eigen::Index i = 0; i < 4; ++i) {
            const auto p = m.predict(l, rows.row(i).transpose());
            CHECK(b.mean(i) == doctest::Approx(p.mean).epsilon(1e-10));
            CHECK(b.variance(i) == doctest::Approx(p.variance).epsilon(1e-10));
            for (Eigen::Index j = 0; j < 4; ++j)
                CHECK(c(i, j) == doctest::Approx(m.posterior_cross_cov(0, rows.row(i).transpose(), l, rows.row(j).transpose()))
                                     .epsilon(1e-10));
        }
    }
}

TEST_CASE("interpolation and decay limits") {
    std::mt19937_64 gen(5);
    const auto t = random_toy(gen, 2, 2, 6, 0.0);
    const auto m = oracle::model(t.hp, t.data);
    const auto& r = t.data[0];
    REQUIRE(r.level == 0);
    const auto at = m.predict(0, r.x);
    CHECK(at.mean == doctest::Approx(r.y).epsilon(1e-8));
    CHECK(at.variance < 1e-8);
    CHECK(std::abs(m.posterior_cross_cov(0, r.x, 1, t.data[3].x)) < 1e-8);

    const Eigen::Vector2d far(1e3, -1e3);
    for (int l = 0; l < 2; ++l) {
        const auto p = m.predict(l, far);
        CHECK(p.mean == doctest::Approx(t.hp.mean));
        CHECK(p.variance == doctest::Approx(t.hp.level_variance(l)));
    }
}

TEST_CASE("physical units round trip through scaling") {
    std::mt19937_64 gen(6);
    const auto t = random_toy(gen, 2, 2, 6, 1e-6);
    InputScaling s{Eigen::Vector2d(3.0, -1.0), Eigen::Vector2d(2.0, 0.5)};
    TrainingSet phys(2);
    for (const auto& r : t.data) phys.add(r.level, (r.x.cwiseProduct(s.scale) + s.shift).eval(), 4.0 * r.y);
    const MfGpModel scaled(t.hp, phys, s, 4.0);
    const auto unit = oracle::model(t.hp, t.data);
    const auto z = point(gen, 2);
    const Eigen::VectorXd x = z.cwiseProduct(s.scale) + s.shift;
    CHECK(scaled.predict(1, x).mean == doctest::Approx(4.0 * unit.predict(1, z).mean).epsilon(1e-10));
    CHECK(scaled.predict(1, x).variance == doctest::Approx(16.0 * unit.predict(1, z).variance).epsilon(1e-10));
}

TEST_CASE("lookahead variance") {
    std::mt19937_64 gen(7);
    SUBCASE("x_next = x at level 0 recovers the posterior variance") {
        const auto t = random_toy(gen, 2, 2, 6, 0.0);
        const auto m = oracle::model(t.hp, t.data);
        const auto x = point(gen, 2);
        CHECK(*m.lookahead_variance(x, x, 0) == doctest::Approx(m.predict(0, x).variance).epsilon(1e-10));
        CHECK(*m.future_variance(x, x, 0) < 1e-12);
    }
    SUBCASE("distant x_next carries almost no information") {
        const auto t = random_toy(gen, 2, 2, 6, 1e-8);
        const auto m = oracle::model(t.hp, t.data);
        const auto x = point(gen, 2);
        const Eigen::Vector2d far(40.0, 40.0);
        CHECK(*m.lookahead_variance(x, far, 0) < 1e-12);
        CHECK(*m.future_variance(x, far, 0) == doctest::Approx(m.predict(0, x).variance));
    }
    SUBCASE("one-point Schur complement") {
        for (int rep = 0; rep < 20; ++rep) {
            const auto t = random_toy(gen, 3, 2, 7, 1e-6);
            const auto m = oracle::model(t.hp, t.data);
            const auto x = point(gen, 2);
            const auto xn = point(gen, 2);
            const int lf = rep % 3;
            const double c = oracle::posterior_cov(t.hp, t.data, 0, x, lf, xn);
            const double s = oracle::posterior_cov(t.hp, t.data, lf, xn, lf, xn) + t.hp.nugget;
            CHECK(oracle::rel_error(*m.lookahead_variance(x, xn, lf), c * c / s) < 1e-8);
        }
    }
    SUBCASE("degenerate candidate") {
        const auto t = random_toy(gen, 1, 1, 3, 0.0);
        const auto m = oracle::model(t.hp, t.data);
        CHECK_FALSE(m.lookahead_variance(point(gen, 1), t.data[1].x, 0).has_value());
    }
}

TEST_CASE("future variance equals a frozen-hyperparameter refit") {
    std::mt19937_64 gen(8);
    int checked = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const int levels = 1 + rep % 3;
        const int dim = 1 + rep % 3;
        const auto t = random_toy(gen, levels, dim, 4 + rep % 5, 1e-6);
        const auto m = oracle::model(t.hp, t.data);
        const auto x = point(gen, dim);
        const auto xn = point(gen, dim);
        const int lf = static_cast<int>(gen() % static_cast<unsigned>(levels));
        auto refit_data = t.data;
        refit_data.push_back({lf, xn, m.predict(lf, xn).mean});
        const auto refit = oracle::model(t.hp, refit_data);
        CHECK(oracle::rel_error(*m.future_variance(x, xn, lf), refit.predict(0, x).variance) < 1e-8);
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("fit recovers the lengthscale of a prior draw") {
    std::mt19937_64 gen(9);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> ux(-3, 3);
    std::vector<oracle::Record> data;
    for (int i = 0; i < 50; ++i) data.push_back({0, Eigen::VectorXd::Constant(1, ux(gen)), 0.0});
    auto truth = Hyperparameters::defaults(1, 1);
    truth.kernels[0].lengthscales(0) = 1.0;
    truth.nugget = 1e-10;
    const Eigen::MatrixXd k = oracle::gram(truth, data);
    const Eigen::MatrixXd l = k.llt().matrixL();
    Eigen::VectorXd w(50);
    for (auto& v : w) v = z(gen);
    const Eigen::VectorXd y = l * w;
    TrainingSet ts(1);
    for (int i = 0; i < 50; ++i) ts.add(0, data[static_cast<std::size_t>(i)].x, y(i));

    FitConfig fc;
    fc.seed = 3;
    const auto m = MfGpModel::fit(ts, InputScaling::identity(1), fc);
    const double ls = m.hyperparameters().kernels[0].lengthscales(0);
    CHECK(ls >= 0.5);
    CHECK(ls <= 2.0);

    const auto again = MfGpModel::fit(ts, InputScaling::identity(1), fc);
    CHECK(again.hyperparameters().kernels[0].lengthscales(0) == ls);
    CHECK(again.hyperparameters().kernels[0].variance == m.hyperparameters().kernels[0].variance);
    CHECK(again.hyperparameters().mean == m.hyperparameters().mean);
}

TEST_CASE("fit tolerates a duplicate record with a nugget") {
    TrainingSet ts(2);
    for (int i = 0; i < 6; ++i) {
        const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.3 * i);
        ts.add(0, x, std::sin(x(0)));
        ts.add(1, x, std::sin(x(0)) + 0.1);
    }
    ts.add(0, Eigen::VectorXd::Constant(2, 0.0), 0.0);
    FitConfig fc;
    fc.restarts = 3;
    CHECK_NOTHROW(MfGpModel::fit(ts, InputScaling::identity(2), fc));
}

TEST_CASE("training set bookkeeping") {
    TrainingSet ts(2);
    ts.add(0, Eigen::Vector2d(1, 2), 0.5);
    ts.add(1, Eigen::Vector2d(1, 2), 0.4);
    ts.add(1, Eigen::Vector2d(3, 2), 0.1);
    CHECK(ts.size() == 3);
    CHECK(ts.count(0) == 1);
    CHECK(ts.count(1) == 2);
    CHECK(ts.contains(1, Eigen::Vector2d(3, 2)));
    CHECK_FALSE(ts.contains(0, Eigen::Vector2d(3, 2)));
    CHECK_THROWS_AS(ts.add(2, Eigen::Vector2d(0, 0), 0.0), DomainError);
}

TEST_CASE("input scaling") {
    Eigen::MatrixXd rows(4, 2);
    rows << 1, 10, 2, 20, 3, 30, 4, 40;
    const auto s = InputScaling::from_points(rows);
    const Eigen::MatrixXd z = s.apply_rows(rows);
    CHECK(z.row(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(z.row(1).mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(z(1, 3) == doctest::Approx(z(0, 3)));
}

}
