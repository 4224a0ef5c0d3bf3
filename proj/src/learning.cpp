#include "mfrel/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfrel/errors.hpp"

namespace mfrel {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 * 0.5); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) * 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2; }

}  // namespace

double eff(double mu, double sigma) {
    if (sigma < 0.0) throw DomainError("eff: sigma must be non-negative");
    if (sigma == 0.0) return 0.0;
    const double t = -mu / sigma;
    const double t_lo = t - 2.0;
    const double t_hi = t + 2.0;
    const double value = mu * (2.0 * normal_cdf(t) - normal_cdf(t_lo) - normal_cdf(t_hi)) -
                         sigma * (2.0 * normal_pdf(t) - normal_pdf(t_lo) - normal_pdf(t_hi)) +
                         2.0 * sigma * (normal_cdf(t_hi) - normal_cdf(t_lo));
    return std::max(value, 0.0);
}

double u(double mu, double sigma) {
    if (sigma < 0.0) throw DomainError("u: sigma must be non-negative");
    if (sigma == 0.0) return std::numeric_limits<double>::infinity();
    return std::abs(mu) / sigma;
}

double u_m(double mu, double sigma) {
    if (sigma < 0.0) throw DomainError("u_m: sigma must be non-negative");
    return sigma * std::exp(-std::abs(mu));
}

double learning_value(LearningFunctionKind kind, double mu, double variance) {
    const double sigma = std::sqrt(std::max(variance, 0.0));
    return kind == LearningFunctionKind::eff ? eff(mu, sigma) : u_m(mu, sigma);
}

CollectiveSubset CollectiveSubset::from_model(const MfGpModel& model, Eigen::MatrixXd points) {
    CollectiveSubset s;
    auto post = model.predict_batch(0, points);
    s.points = std::move(points);
    s.mean = std::move(post.mean);
    s.variance = std::move(post.variance);
    return s;
}

namespace {

// Sum of lf(mu_i, var_i) - lf(mu_i, var_i - reduction_i) over the subset.
double lf_improvement(const CollectiveSubset& subset, LearningFunctionKind kind, const Eigen::VectorXd& present,
                      const Eigen::Ref<const Eigen::VectorXd>& cross, double denom) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < subset.size(); ++i) {
        const double var = subset.variance(i);
        const double reduction = std::min(cross(i) * cross(i) / denom, var);
        if (!(reduction > 0.0)) continue;
        const double future = std::max(var - reduction, 0.0);
        sum += present(i) - learning_value(kind, subset.mean(i), future);
    }
    return sum;
}

Eigen::VectorXd present_values(const CollectiveSubset& subset, LearningFunctionKind kind) {
    Eigen::VectorXd lf(subset.size());
    for (Eigen::Index i = 0; i < subset.size(); ++i) lf(i) = learning_value(kind, subset.mean(i), subset.variance(i));
    return lf;
}

}  // namespace

double clf(const MfGpModel& model, const CollectiveSubset& subset, const Eigen::VectorXd& x_next, int l_f,
           LearningFunctionKind kind, double cost) {
    if (subset.size() == 0) throw DomainError("clf: empty subset");
    if (!(cost > 0.0)) throw DomainError("clf: cost must be positive");
    const double candidate_var = model.predict(l_f, x_next).variance;
    if (candidate_var <= model.variance_floor(l_f)) return degenerate_score;
    const Eigen::MatrixXd cross = model.posterior_cov_block(0, subset.points, l_f, x_next.transpose());
    const double sum = lf_improvement(subset, kind, present_values(subset, kind), cross.col(0),
                                      candidate_var + model.noise_variance(l_f));
    return sum / (static_cast<double>(subset.size()) * cost);
}

namespace detail {

void score_level(const MfGpModel& model, const CollectiveSubset& subset, LearningFunctionKind kind, int level,
                 double cost, Eigen::VectorXd& out) {
    if (subset.size() == 0) throw DomainError("clf: empty subset");
    if (!(cost > 0.0)) throw DomainError("clf: cost must be positive");
    const Eigen::VectorXd present = present_values(subset, kind);
    const Eigen::VectorXd candidate_var = model.predict_batch(level, subset.points).variance;
    const Eigen::MatrixXd cross = model.posterior_cov_block(0, subset.points, level, subset.points);
    const double floor = model.variance_floor(level);
    const double noise = model.noise_variance(level);
    const double norm = static_cast<double>(subset.size()) * cost;
    out.resize(subset.size());
    for (Eigen::Index j = 0; j < subset.size(); ++j) {
        if (candidate_var(j) <= floor) {
            out(j) = degenerate_score;
            continue;
        }
        out(j) = lf_improvement(subset, kind, present, cross.col(j), candidate_var(j) + noise) / norm;
    }
}

}  // namespace detail

std::vector<CandidateScore> clf_scores(const MfGpModel& model, const CollectiveSubset& subset,
                                       LearningFunctionKind kind, std::span<const double> costs) {
    return clf_scores(model, subset, kind, costs, [](Eigen::Index, int) { return false; });
}

bool better_candidate(const CandidateScore& a, const CandidateScore& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.level != b.level) return a.level < b.level;
    return a.point < b.point;
}

std::optional<CandidateScore> best_candidate(std::span<const CandidateScore> scores) {
    std::optional<CandidateScore> best;
    for (const auto& s : scores) {
        if (s.score == degenerate_score || std::isnan(s.score)) continue;
        if (!best || better_candidate(s, *best)) best = s;
    }
    return best;
}

std::optional<double> kl_from_variances(double present_variance, double lookahead_variance, double future_variance) {
    if (!(present_variance > 0.0)) return std::nullopt;
    if (!(future_variance > kl_collapse_ratio * present_variance)) return std::nullopt;
    const double d = 0.5 * std::log(future_variance / present_variance) +
                     (present_variance + lookahead_variance) / (2.0 * future_variance) - 0.5;
    return std::max(d, 0.0);
}

std::optional<double> kl_term(const MfGpModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& x_next,
                              int l_f) {
    const double present = model.predict(0, x).variance;
    if (present <= model.variance_floor(0)) return std::nullopt;
    const auto lookahead = model.lookahead_variance(x, x_next, l_f);
    if (!lookahead) return std::nullopt;
    return kl_from_variances(present, *lookahead, present - *lookahead);
}

std::optional<SourceSelection> mfegra_select_source(const MfGpModel& model, const Eigen::VectorXd& x_next,
                                                    const Eigen::MatrixXd& pool, std::span<const double> eff_values,
                                                    std::span<const double> costs,
                                                    std::span<const bool> allowed_levels) {
    if (pool.rows() == 0) throw DomainError("mfegra_select_source: empty pool");
    if (static_cast<Eigen::Index>(eff_values.size()) != pool.rows())
        throw DomainError("mfegra_select_source: one EFF value per pool point required");
    const int levels = static_cast<int>(costs.size());

    // Points with zero EFF contribute nothing to the weighted sum.
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < pool.rows(); ++i)
        if (eff_values[static_cast<std::size_t>(i)] > 0.0) active.push_back(i);
    if (active.empty()) return std::nullopt;
    Eigen::MatrixXd points(static_cast<Eigen::Index>(active.size()), pool.cols());
    for (std::size_t i = 0; i < active.size(); ++i) points.row(static_cast<Eigen::Index>(i)) = pool.row(active[i]);
    const Eigen::VectorXd present = model.predict_batch(0, points).variance;
    const double floor0 = model.variance_floor(0);

    SourceSelection sel;
    sel.scores.assign(static_cast<std::size_t>(levels), 0.0);
    std::optional<int> best;
    for (int l = 0; l < levels; ++l) {
        if (!allowed_levels.empty() && !allowed_levels[static_cast<std::size_t>(l)]) continue;
        const double candidate_var = model.predict(l, x_next).variance;
        if (candidate_var <= model.variance_floor(l)) continue;
        const double denom = candidate_var + model.noise_variance(l);
        const Eigen::MatrixXd cross = model.posterior_cov_block(0, points, l, x_next.transpose());
        double sum = 0.0;
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            if (present(i) <= floor0) continue;
            const double lookahead = std::min(cross(i, 0) * cross(i, 0) / denom, present(i));
            const auto d = kl_from_variances(present(i), lookahead, present(i) - lookahead);
            if (!d) continue;
            sum += eff_values[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])] * *d;
        }
        const double score = sum / costs[static_cast<std::size_t>(l)];
        sel.scores[static_cast<std::size_t>(l)] = score;
        if (!(score > 0.0)) continue;
        if (!best) {
            best = l;
            continue;
        }
        const auto b = static_cast<std::size_t>(*best);
        const auto c = static_cast<std::size_t>(l);
        if (score > sel.scores[b] || (score == sel.scores[b] && costs[c] < costs[b])) best = l;
    }
    if (!best) return std::nullopt;
    sel.level = *best;
    return sel;
}

}  // namespace mfrel
