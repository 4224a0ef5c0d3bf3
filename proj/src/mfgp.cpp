#include "mfrel/mfgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "mfrel/errors.hpp"
#include "mfrel/probability.hpp"

namespace mfrel {

// ---------------------------------------------------------------------------
// Training data and scaling

TrainingSet::TrainingSet(int num_levels) : num_levels_(num_levels) {
    if (num_levels < 1) throw DomainError("training set: at least one level required");
}

void TrainingSet::add(int level, Eigen::VectorXd x, double y) {
    if (level < 0 || level >= num_levels_) throw DomainError("training set: level out of range");
    if (!records_.empty() && records_.front().x.size() != x.size())
        throw DomainError("training set: input dimension mismatch");
    records_.push_back({level, std::move(x), y});
}

std::size_t TrainingSet::count(int level) const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [level](const auto& r) { return r.level == level; }));
}

bool TrainingSet::contains(int level, const Eigen::VectorXd& x) const {
    return std::any_of(records_.begin(), records_.end(),
                       [&](const auto& r) { return r.level == level && r.x == x; });
}

InputScaling InputScaling::identity(Eigen::Index dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

InputScaling InputScaling::from_points(const Eigen::MatrixXd& rows) {
    if (rows.rows() < 2) return identity(rows.cols());
    InputScaling s;
    s.shift = rows.colwise().mean().transpose();
    const Eigen::MatrixXd centered = rows.rowwise() - s.shift.transpose();
    s.scale = (centered.colwise().squaredNorm() / static_cast<double>(rows.rows() - 1)).cwiseSqrt().transpose();
    for (Eigen::Index d = 0; d < s.scale.size(); ++d)
        if (!(s.scale(d) > 0.0)) s.scale(d) = 1.0;
    return s;
}

Eigen::MatrixXd InputScaling::apply_rows(const Eigen::MatrixXd& rows) const {
    return ((rows.rowwise() - shift.transpose()).array().rowwise() / scale.transpose().array()).transpose();
}

// ---------------------------------------------------------------------------
// Prior

double LevelKernel::operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                               const Eigen::Ref<const Eigen::VectorXd>& b) const {
    const double r2 = (a - b).cwiseQuotient(lengthscales).squaredNorm();
    return variance * std::exp(-0.5 * r2);
}

double Hyperparameters::level_variance(int level) const {
    return kernels[0].variance + (level > 0 ? kernels[static_cast<std::size_t>(level)].variance : 0.0);
}

Hyperparameters Hyperparameters::defaults(int num_levels, Eigen::Index dim, double output_variance) {
    Hyperparameters hp;
    for (int l = 0; l < num_levels; ++l)
        hp.kernels.push_back({l == 0 ? output_variance : 0.1 * output_variance, Eigen::VectorXd::Ones(dim)});
    return hp;
}

double prior_covariance(const Hyperparameters& hp, int l, const Eigen::Ref<const Eigen::VectorXd>& x, int l2,
                        const Eigen::Ref<const Eigen::VectorXd>& x2) {
    if (l < 0 || l2 < 0 || l >= hp.num_levels() || l2 >= hp.num_levels())
        throw DomainError("prior_covariance: level out of range");
    double k = hp.kernels[0](x, x2);
    if (l == l2 && l > 0) k += hp.kernels[static_cast<std::size_t>(l)](x, x2);
    return k;
}

Eigen::MatrixXd training_covariance(const Hyperparameters& hp, const GpData& data) {
    const Eigen::Index n = data.inputs.cols();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j; i < n; ++i) {
            const double v = prior_covariance(hp, data.levels[static_cast<std::size_t>(i)], data.inputs.col(i),
                                              data.levels[static_cast<std::size_t>(j)], data.inputs.col(j));
            k(i, j) = v;
            k(j, i) = v;
        }
        k(j, j) += hp.nugget;
    }
    return k;
}

namespace {

double min_eigenvalue(const Eigen::MatrixXd& k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Eigen::LLT<Eigen::MatrixXd> factorize(const Eigen::MatrixXd& k) {
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) {
        const double lambda = min_eigenvalue(k);
        throw IllConditionedError("training covariance is not positive definite (min eigenvalue " +
                                      std::to_string(lambda) + ")",
                                  lambda);
    }
    return llt;
}

}  // namespace

double log_marginal_likelihood(const Hyperparameters& hp, const GpData& data) {
    const auto n = data.values.size();
    if (n == 0) throw DomainError("log_marginal_likelihood: empty training set");
    const auto llt = factorize(training_covariance(hp, data));
    const Eigen::VectorXd r = data.values.array() - hp.mean;
    const Eigen::VectorXd alpha = llt.solve(r);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * r.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------
// Maximum likelihood

namespace {

// Parameters are log signal variance followed by log lengthscales, level by level.
// The constant mean is profiled out by generalized least squares.
class Likelihood {
public:
    Likelihood(const GpData& data, int num_levels, double nugget)
        : data_(data), num_levels_(num_levels), dim_(data.inputs.rows()), nugget_(nugget) {
        const Eigen::Index n = data.inputs.cols();
        sq_diff_.resize(static_cast<std::size_t>(dim_));
        for (Eigen::Index d = 0; d < dim_; ++d) {
            auto& m = sq_diff_[static_cast<std::size_t>(d)];
            m.resize(n, n);
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double diff = data.inputs(d, i) - data.inputs(d, j);
                    m(i, j) = diff * diff;
                }
        }
        same_level_.resize(static_cast<std::size_t>(num_levels));
        for (int l = 1; l < num_levels; ++l) {
            auto& m = same_level_[static_cast<std::size_t>(l)];
            m.setZero(n, n);
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = 0; i < n; ++i)
                    if (data.levels[static_cast<std::size_t>(i)] == l && data.levels[static_cast<std::size_t>(j)] == l)
                        m(i, j) = 1.0;
        }
    }

    Eigen::Index num_params() const { return num_levels_ * (dim_ + 1); }

    Hyperparameters unpack(const Eigen::VectorXd& theta) const {
        Hyperparameters hp;
        hp.nugget = nugget_;
        for (int l = 0; l < num_levels_; ++l) {
            const Eigen::Index o = l * (dim_ + 1);
            hp.kernels.push_back({std::exp(theta(o)), theta.segment(o + 1, dim_).array().exp().matrix()});
        }
        return hp;
    }

    Eigen::VectorXd pack(const Hyperparameters& hp) const {
        Eigen::VectorXd theta(num_params());
        for (int l = 0; l < num_levels_; ++l) {
            const Eigen::Index o = l * (dim_ + 1);
            const auto& k = hp.kernels[static_cast<std::size_t>(l)];
            theta(o) = std::log(k.variance);
            theta.segment(o + 1, dim_) = k.lengthscales.array().log().matrix();
        }
        return theta;
    }

    /// Log likelihood and its gradient in log-parameter space; empty if K is not PD.
    std::optional<double> evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad, double* mean_out) const {
        const Eigen::Index n = data_.inputs.cols();
        std::vector<Eigen::MatrixXd> kernel(static_cast<std::size_t>(num_levels_));
        Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
        for (int l = 0; l < num_levels_; ++l) {
            const Eigen::Index o = l * (dim_ + 1);
            Eigen::MatrixXd scaled = Eigen::MatrixXd::Zero(n, n);
            for (Eigen::Index d = 0; d < dim_; ++d)
                scaled += sq_diff_[static_cast<std::size_t>(d)] * std::exp(-2.0 * theta(o + 1 + d));
            Eigen::MatrixXd kl = std::exp(theta(o)) * (-0.5 * scaled.array()).exp().matrix();
            if (l > 0) kl = kl.cwiseProduct(same_level_[static_cast<std::size_t>(l)]);
            k += kl;
            kernel[static_cast<std::size_t>(l)] = std::move(kl);
        }
        k.diagonal().array() += nugget_;

        Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() != Eigen::Success) return std::nullopt;
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
        const Eigen::VectorXd kinv_one = llt.solve(ones);
        const Eigen::VectorXd kinv_y = llt.solve(data_.values);
        const double mean = kinv_one.dot(data_.values) / kinv_one.sum();
        const Eigen::VectorXd alpha = kinv_y - mean * kinv_one;
        const Eigen::VectorXd r = data_.values.array() - mean;
        const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const double ll = -0.5 * r.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
        if (!std::isfinite(ll)) return std::nullopt;
        if (mean_out) *mean_out = mean;

        if (grad) {
            grad->resize(num_params());
            Eigen::MatrixXd w = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
            for (int l = 0; l < num_levels_; ++l) {
                const Eigen::Index o = l * (dim_ + 1);
                const auto& kl = kernel[static_cast<std::size_t>(l)];
                const Eigen::MatrixXd wk = w.cwiseProduct(kl);
                (*grad)(o) = 0.5 * wk.sum();
                for (Eigen::Index d = 0; d < dim_; ++d)
                    (*grad)(o + 1 + d) = 0.5 * wk.cwiseProduct(sq_diff_[static_cast<std::size_t>(d)]).sum() *
                                         std::exp(-2.0 * theta(o + 1 + d));
            }
        }
        return ll;
    }

private:
    const GpData& data_;
    int num_levels_;
    Eigen::Index dim_;
    double nugget_;
    std::vector<Eigen::MatrixXd> sq_diff_;
    std::vector<Eigen::MatrixXd> same_level_;
};

// Box constraints handled by a logistic map from unconstrained z to theta.
struct BoxedProblem {
    const Likelihood* likelihood;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    double best_ll = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_theta;

    Eigen::VectorXd to_theta(const gsl_vector* z, Eigen::VectorXd* dtheta_dz) const {
        const Eigen::Index p = lo.size();
        Eigen::VectorXd theta(p);
        if (dtheta_dz) dtheta_dz->resize(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            const double zi = gsl_vector_get(z, static_cast<std::size_t>(i));
            const double s = 1.0 / (1.0 + std::exp(-zi));
            theta(i) = lo(i) + (hi(i) - lo(i)) * s;
            if (dtheta_dz) (*dtheta_dz)(i) = (hi(i) - lo(i)) * s * (1.0 - s);
        }
        return theta;
    }

    Eigen::VectorXd to_z(const Eigen::VectorXd& theta) const {
        Eigen::VectorXd z(theta.size());
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            const double s = std::clamp((theta(i) - lo(i)) / (hi(i) - lo(i)), 1e-6, 1.0 - 1e-6);
            z(i) = std::log(s / (1.0 - s));
        }
        return z;
    }

    // Objective is the negative log likelihood; non-PD points get a large finite penalty.
    double eval(const gsl_vector* z, gsl_vector* df) {
        Eigen::VectorXd jac;
        const Eigen::VectorXd theta = to_theta(z, &jac);
        Eigen::VectorXd grad;
        const auto ll = likelihood->evaluate(theta, df ? &grad : nullptr, nullptr);
        if (!ll) {
            if (df) gsl_vector_set_zero(df);
            return 1e30;
        }
        if (*ll > best_ll) {
            best_ll = *ll;
            best_theta = theta;
        }
        if (df)
            for (Eigen::Index i = 0; i < theta.size(); ++i)
                gsl_vector_set(df, static_cast<std::size_t>(i), -grad(i) * jac(i));
        return -*ll;
    }

    static double f(const gsl_vector* z, void* self) { return static_cast<BoxedProblem*>(self)->eval(z, nullptr); }
    static void df(const gsl_vector* z, void* self, gsl_vector* g) { static_cast<BoxedProblem*>(self)->eval(z, g); }
    static void fdf(const gsl_vector* z, void* self, double* value, gsl_vector* g) {
        *value = static_cast<BoxedProblem*>(self)->eval(z, g);
    }
};

void local_search(BoxedProblem& problem, const Eigen::VectorXd& theta0, int max_iterations) {
    const auto p = static_cast<std::size_t>(theta0.size());
    gsl_multimin_function_fdf fn{&BoxedProblem::f, &BoxedProblem::df, &BoxedProblem::fdf, p, &problem};
    gsl_vector* z = gsl_vector_alloc(p);
    const Eigen::VectorXd z0 = problem.to_z(theta0);
    for (std::size_t i = 0; i < p; ++i) gsl_vector_set(z, i, z0(static_cast<Eigen::Index>(i)));
    gsl_multimin_fdfminimizer* s = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, p);
    if (gsl_multimin_fdfminimizer_set(s, &fn, z, 0.1, 0.1) == GSL_SUCCESS && s->f < 1e29) {
        for (int it = 0; it < max_iterations; ++it) {
            if (gsl_multimin_fdfminimizer_iterate(s) != GSL_SUCCESS) break;
            if (gsl_multimin_test_gradient(s->gradient, 1e-4) == GSL_SUCCESS) break;
        }
    }
    gsl_multimin_fdfminimizer_free(s);
    gsl_vector_free(z);
}

}  // namespace

double MfGpModel::default_output_scale(const TrainingSet& training) {
    auto sample_sd = [](const std::vector<double>& v) {
        if (v.size() < 2) return 0.0;
        double mean = 0.0;
        for (double y : v) mean += y;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double y : v) ss += (y - mean) * (y - mean);
        return std::sqrt(ss / static_cast<double>(v.size() - 1));
    };
    std::vector<double> level0, all;
    for (const auto& r : training.records()) {
        all.push_back(r.y);
        if (r.level == 0) level0.push_back(r.y);
    }
    double sd = sample_sd(level0);
    if (!(sd > 0.0)) sd = sample_sd(all);
    return sd > 0.0 ? sd : 1.0;
}

MfGpModel MfGpModel::fit(const TrainingSet& training, const InputScaling& scaling, const FitConfig& config) {
    if (training.size() < 2 || training.count(0) < 1)
        throw DomainError("fit_mle: need at least two records including one high-fidelity record");
    const double output_scale = default_output_scale(training);
    const Eigen::Index dim = scaling.shift.size();
    const int levels = training.num_levels();

    GpData data;
    data.inputs.resize(dim, static_cast<Eigen::Index>(training.size()));
    data.values.resize(static_cast<Eigen::Index>(training.size()));
    for (std::size_t i = 0; i < training.size(); ++i) {
        const auto& r = training.records()[i];
        data.inputs.col(static_cast<Eigen::Index>(i)) = scaling.apply(r.x);
        data.values(static_cast<Eigen::Index>(i)) = r.y / output_scale;
        data.levels.push_back(r.level);
    }

    const Likelihood likelihood(data, levels, config.nugget);
    BoxedProblem problem{&likelihood, {}, {}, -std::numeric_limits<double>::infinity(), {}};
    const Eigen::Index p = likelihood.num_params();
    problem.lo.resize(p);
    problem.hi.resize(p);
    for (int l = 0; l < levels; ++l) {
        const Eigen::Index o = l * (dim + 1);
        problem.lo(o) = std::log(config.min_variance);
        problem.hi(o) = std::log(config.max_variance);
        problem.lo.segment(o + 1, dim).setConstant(std::log(config.min_lengthscale));
        problem.hi.segment(o + 1, dim).setConstant(std::log(config.max_lengthscale));
    }

    gsl_set_error_handler_off();
    Rng rng(config.seed);
    for (int restart = 0; restart < config.restarts; ++restart) {
        Eigen::VectorXd theta0;
        if (restart == 0) {
            theta0 = likelihood.pack(config.warm_start && config.warm_start->num_levels() == levels
                                         ? *config.warm_start
                                         : Hyperparameters::defaults(levels, dim));
        } else {
            theta0.resize(p);
            for (int l = 0; l < levels; ++l) {
                const Eigen::Index o = l * (dim + 1);
                theta0(o) = l == 0 ? std::log(0.1) + rng.uniform() * std::log(100.0)
                                   : std::log(1e-4) + rng.uniform() * std::log(1e4);
                for (Eigen::Index d = 0; d < dim; ++d)
                    theta0(o + 1 + d) = std::log(0.1) + rng.uniform() * std::log(200.0);
            }
        }
        theta0 = theta0.cwiseMax(problem.lo).cwiseMin(problem.hi);
        local_search(problem, theta0, config.max_iterations);
    }
    if (problem.best_theta.size() == 0)
        throw FitError("fit_mle: covariance factorization failed for every restart");

    Hyperparameters hp = likelihood.unpack(problem.best_theta);
    double mean = 0.0;
    likelihood.evaluate(problem.best_theta, nullptr, &mean);
    hp.mean = mean;
    return MfGpModel(std::move(hp), training, scaling, output_scale);
}

// ---------------------------------------------------------------------------
// Posterior

MfGpModel::MfGpModel(Hyperparameters hp, const TrainingSet& training, InputScaling scaling, double output_scale)
    : hp_(std::move(hp)), scaling_(std::move(scaling)), output_scale_(output_scale) {
    if (hp_.num_levels() != training.num_levels()) throw DomainError("model: level count mismatch");
    if (training.size() == 0) throw DomainError("model: empty training set");
    if (!(output_scale_ > 0.0)) throw DomainError("model: output scale must be positive");
    GpData data;
    data.inputs.resize(scaling_.shift.size(), static_cast<Eigen::Index>(training.size()));
    data.values.resize(static_cast<Eigen::Index>(training.size()));
    for (std::size_t i = 0; i < training.size(); ++i) {
        const auto& r = training.records()[i];
        data.inputs.col(static_cast<Eigen::Index>(i)) = scaling_.apply(r.x);
        data.values(static_cast<Eigen::Index>(i)) = r.y / output_scale_;
        data.levels.push_back(r.level);
    }
    chol_ = factorize(training_covariance(hp_, data));
    alpha_ = chol_.solve((data.values.array() - hp_.mean).matrix());
    inputs_ = std::move(data.inputs);
    levels_ = std::move(data.levels);
}

void MfGpModel::check_level(int level) const {
    if (level < 0 || level >= num_levels()) throw DomainError("model: level out of range");
}

Eigen::VectorXd MfGpModel::cross_prior(int level, const Eigen::VectorXd& z) const {
    const Eigen::Index n = inputs_.cols();
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i)
        k(i) = mfrel::prior_covariance(hp_, levels_[static_cast<std::size_t>(i)], inputs_.col(i), level, z);
    return k;
}

Eigen::MatrixXd MfGpModel::prior_block(int la, const Eigen::MatrixXd& za, int lb, const Eigen::MatrixXd& zb) const {
    auto kernel_block = [&](const LevelKernel& kern) {
        const Eigen::VectorXd inv = kern.lengthscales.cwiseInverse();
        const Eigen::MatrixXd a = inv.asDiagonal() * za;
        const Eigen::MatrixXd b = inv.asDiagonal() * zb;
        Eigen::MatrixXd d2 = (-2.0 * a.transpose() * b).colwise() + a.colwise().squaredNorm().transpose();
        d2.rowwise() += b.colwise().squaredNorm();
        return (kern.variance * (-0.5 * d2.array().max(0.0)).exp()).matrix().eval();
    };
    Eigen::MatrixXd k = kernel_block(hp_.kernels[0]);
    if (la == lb && la > 0) k += kernel_block(hp_.kernels[static_cast<std::size_t>(la)]);
    return k;
}

Eigen::MatrixXd MfGpModel::cross_prior_block(int level, const Eigen::MatrixXd& z) const {
    const Eigen::Index n = inputs_.cols();
    Eigen::MatrixXd k(n, z.cols());
    // Rows grouped by training level so each group is one dense block.
    for (int l = 0; l < num_levels(); ++l) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < n; ++i)
            if (levels_[static_cast<std::size_t>(i)] == l) idx.push_back(i);
        if (idx.empty()) continue;
        Eigen::MatrixXd zl(inputs_.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) zl.col(static_cast<Eigen::Index>(j)) = inputs_.col(idx[j]);
        const Eigen::MatrixXd block = prior_block(l, zl, level, z);
        for (std::size_t j = 0; j < idx.size(); ++j) k.row(idx[j]) = block.row(static_cast<Eigen::Index>(j));
    }
    return k;
}

double MfGpModel::prior_covariance(int l, const Eigen::VectorXd& x, int l2, const Eigen::VectorXd& x2) const {
    check_level(l);
    check_level(l2);
    return output_scale_ * output_scale_ * mfrel::prior_covariance(hp_, l, scaling_.apply(x), l2, scaling_.apply(x2));
}

PosteriorPrediction MfGpModel::predict(int level, const Eigen::VectorXd& x) const {
    check_level(level);
    const Eigen::VectorXd z = scaling_.apply(x);
    const Eigen::VectorXd k = cross_prior(level, z);
    const Eigen::VectorXd v = chol_.matrixL().solve(k);
    const double var = mfrel::prior_covariance(hp_, level, z, level, z) - v.squaredNorm();
    const double s2 = output_scale_ * output_scale_;
    return {output_scale_ * (hp_.mean + k.dot(alpha_)), std::max(var, 0.0) * s2};
}

double MfGpModel::posterior_cross_cov(int l, const Eigen::VectorXd& x, int l2, const Eigen::VectorXd& x2) const {
    check_level(l);
    check_level(l2);
    const Eigen::VectorXd z = scaling_.apply(x);
    const Eigen::VectorXd z2 = scaling_.apply(x2);
    const Eigen::VectorXd v = chol_.matrixL().solve(cross_prior(l, z));
    const Eigen::VectorXd v2 = chol_.matrixL().solve(cross_prior(l2, z2));
    const double c = mfrel::prior_covariance(hp_, l, z, l2, z2) - v.dot(v2);
    return c * output_scale_ * output_scale_;
}

double MfGpModel::noise_variance(int level) const {
    check_level(level);
    return hp_.nugget * output_scale_ * output_scale_;
}

double MfGpModel::variance_floor(int level) const {
    check_level(level);
    return 1e-12 * hp_.level_variance(level) * output_scale_ * output_scale_;
}

std::optional<double> MfGpModel::lookahead_variance(const Eigen::VectorXd& x, const Eigen::VectorXd& x_next,
                                                    int l_f) const {
    const double denom = predict(l_f, x_next).variance;
    if (denom <= variance_floor(l_f)) return std::nullopt;
    const double c = posterior_cross_cov(0, x, l_f, x_next);
    const double current = predict(0, x).variance;
    return std::min(c * c / (denom + noise_variance(l_f)), current);
}

std::optional<double> MfGpModel::future_variance(const Eigen::VectorXd& x, const Eigen::VectorXd& x_next,
                                                 int l_f) const {
    const auto reduction = lookahead_variance(x, x_next, l_f);
    if (!reduction) return std::nullopt;
    return std::max(predict(0, x).variance - *reduction, 0.0);
}

PosteriorBatch MfGpModel::predict_batch(int level, const Eigen::MatrixXd& rows) const {
    check_level(level);
    const Eigen::MatrixXd z = scaling_.apply_rows(rows);
    const Eigen::MatrixXd k = cross_prior_block(level, z);
    const Eigen::MatrixXd v = chol_.matrixL().solve(k);
    PosteriorBatch out;
    const double s2 = output_scale_ * output_scale_;
    out.mean = output_scale_ * ((k.transpose() * alpha_).array() + hp_.mean);
    out.variance = ((hp_.level_variance(level) - v.colwise().squaredNorm().transpose().array()).max(0.0) * s2).matrix();
    return out;
}

Eigen::MatrixXd MfGpModel::posterior_cov_block(int la, const Eigen::MatrixXd& a, int lb, const Eigen::MatrixXd& b) const {
    check_level(la);
    check_level(lb);
    const Eigen::MatrixXd za = scaling_.apply_rows(a);
    const Eigen::MatrixXd zb = scaling_.apply_rows(b);
    const Eigen::MatrixXd va = chol_.matrixL().solve(cross_prior_block(la, za));
    const Eigen::MatrixXd vb = chol_.matrixL().solve(cross_prior_block(lb, zb));
    Eigen::MatrixXd c = prior_block(la, za, lb, zb);
    c.noalias() -= va.transpose() * vb;
    return c * (output_scale_ * output_scale_);
}

}  // namespace mfrel
