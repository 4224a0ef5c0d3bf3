#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mfrel/mfgp.hpp"

namespace mfrel {

/// Cores admissible inside the collective learning function.
enum class LearningFunctionKind { eff, u_m };

/// Expected feasibility around the limit state g = 0 with a band of 2 sigma.
double eff(double mu, double sigma);

/// |mu| / sigma; +inf when sigma == 0.
double u(double mu, double sigma);

/// sigma / exp(|mu|).
double u_m(double mu, double sigma);

/// Learning-function value from a posterior mean and variance.
double learning_value(LearningFunctionKind kind, double mu, double variance);

inline constexpr double degenerate_score = -std::numeric_limits<double>::infinity();

/// The subset over which the collective learning function sums, with its
/// current high-fidelity posterior.
struct CollectiveSubset {
    Eigen::MatrixXd points;  // one point per row
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;

    Eigen::Index size() const noexcept { return points.rows(); }
    static CollectiveSubset from_model(const MfGpModel& model, Eigen::MatrixXd points);
};

/// Cost-normalized mean reduction of the learning function over `subset` when
/// (l_f, x_next) is added; degenerate_score when the candidate carries no information.
double clf(const MfGpModel& model, const CollectiveSubset& subset, const Eigen::VectorXd& x_next, int l_f,
           LearningFunctionKind kind, double cost);

struct CandidateScore {
    Eigen::Index point = -1;
    int level = -1;
    double score = degenerate_score;
    double cost = 0.0;
};

/// Scores every (subset point, level) pair in one pass. `excluded(point, level)`
/// removes pairs from the result. Output order: point-major, then level.
template <typename Excluded>
std::vector<CandidateScore> clf_scores(const MfGpModel& model, const CollectiveSubset& subset,
                                       LearningFunctionKind kind, std::span<const double> costs, Excluded&& excluded);

std::vector<CandidateScore> clf_scores(const MfGpModel& model, const CollectiveSubset& subset,
                                       LearningFunctionKind kind, std::span<const double> costs);

/// Highest score, then cheaper source, then lower level, then lower point index.
bool better_candidate(const CandidateScore& a, const CandidateScore& b);
std::optional<CandidateScore> best_candidate(std::span<const CandidateScore> scores);

/// KL divergence between the present and the lookahead high-fidelity posterior
/// at x from its variances; empty when the future variance has collapsed.
std::optional<double> kl_from_variances(double present_variance, double lookahead_variance, double future_variance);

/// Future-variance collapse ratio below which a KL term is flagged degenerate.
inline constexpr double kl_collapse_ratio = 1e-6;

std::optional<double> kl_term(const MfGpModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& x_next, int l_f);

struct SourceSelection {
    int level = 0;
    std::vector<double> scores;  // per level; 0 for skipped levels
};

/// Information-gain source choice: argmax over levels of sum EFF * KL / cost.
/// Empty when no level yields a positive, non-degenerate gain.
std::optional<SourceSelection> mfegra_select_source(const MfGpModel& model, const Eigen::VectorXd& x_next,
                                                    const Eigen::MatrixXd& pool, std::span<const double> eff_values,
                                                    std::span<const double> costs,
                                                    std::span<const bool> allowed_levels = {});

// ---------------------------------------------------------------------------

namespace detail {
void score_level(const MfGpModel& model, const CollectiveSubset& subset, LearningFunctionKind kind, int level,
                 double cost, Eigen::VectorXd& out);
}

template <typename Excluded>
std::vector<CandidateScore> clf_scores(const MfGpModel& model, const CollectiveSubset& subset,
                                       LearningFunctionKind kind, std::span<const double> costs, Excluded&& excluded) {
    const int levels = static_cast<int>(costs.size());
    std::vector<Eigen::VectorXd> per_level(static_cast<std::size_t>(levels));
    for (int l = 0; l < levels; ++l)
        detail::score_level(model, subset, kind, l, costs[static_cast<std::size_t>(l)],
                            per_level[static_cast<std::size_t>(l)]);
    std::vector<CandidateScore> out;
    out.reserve(static_cast<std::size_t>(subset.size() * levels));
    for (Eigen::Index j = 0; j < subset.size(); ++j)
        for (int l = 0; l < levels; ++l)
            if (!excluded(j, l))
                out.push_back({j, l, per_level[static_cast<std::size_t>(l)](j), costs[static_cast<std::size_t>(l)]});
    return out;
}

}  // namespace mfrel
