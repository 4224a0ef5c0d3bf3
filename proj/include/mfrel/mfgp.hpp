#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace mfrel {

/// One evaluated limit-state value; level 0 is the high-fidelity source.
struct TrainingRecord {
    int level = 0;
    Eigen::VectorXd x;
    double y = 0.0;
};

class TrainingSet {
public:
    explicit TrainingSet(int num_levels);

    void add(int level, Eigen::VectorXd x, double y);

    const std::vector<TrainingRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    int num_levels() const noexcept { return num_levels_; }
    std::size_t count(int level) const;
    bool contains(int level, const Eigen::VectorXd& x) const;

private:
    int num_levels_;
    std::vector<TrainingRecord> records_;
};

/// Affine map of inputs to zero mean and unit variance per dimension.
struct InputScaling {
    Eigen::VectorXd shift;
    Eigen::VectorXd scale;

    static InputScaling identity(Eigen::Index dim);
    /// Statistics of a population stored one point per row.
    static InputScaling from_points(const Eigen::MatrixXd& rows);

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return (x - shift).cwiseQuotient(scale); }
    /// Maps rows of physical points to standardized columns (D x m).
    Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& rows) const;
};

/// Anisotropic squared-exponential kernel.
struct LevelKernel {
    double variance = 1.0;
    Eigen::VectorXd lengthscales;

    double operator()(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const;
};

/// Constant mean, the high-fidelity kernel at index 0 and one discrepancy kernel per
/// lower-fidelity level. The nugget is added to every training variance and is
/// expressed relative to the variance of the standardized responses (1).
struct Hyperparameters {
    double mean = 0.0;
    std::vector<LevelKernel> kernels;
    double nugget = 1e-8;

    int num_levels() const noexcept { return static_cast<int>(kernels.size()); }
    /// Signal variance of level l: base variance plus its discrepancy variance.
    double level_variance(int level) const;
    static Hyperparameters defaults(int num_levels, Eigen::Index dim, double output_variance = 1.0);
};

/// Prior covariance between (l, x) and (l2, x2); the discrepancy term enters only when l == l2 >= 1.
double prior_covariance(const Hyperparameters& hp, int l, const Eigen::Ref<const Eigen::VectorXd>& x, int l2,
                        const Eigen::Ref<const Eigen::VectorXd>& x2);

/// Training data in the units the hyperparameters are expressed in. Inputs are columns.
struct GpData {
    Eigen::MatrixXd inputs;
    std::vector<int> levels;
    Eigen::VectorXd values;
};

/// Prior covariance over all records of `data`, with the nugget on the diagonal.
Eigen::MatrixXd training_covariance(const Hyperparameters& hp, const GpData& data);

/// log N(y; mean, K + nugget). Throws IllConditionedError when K cannot be factorized.
double log_marginal_likelihood(const Hyperparameters& hp, const GpData& data);

struct FitConfig {
    int restarts = 10;
    int max_iterations = 100;
    double nugget = 1e-8;
    double min_lengthscale = 1e-2;
    double max_lengthscale = 1e4;
    /// Signal-variance bounds, relative to the output variance.
    double min_variance = 1e-6;
    double max_variance = 1e6;
    std::uint64_t seed = 0;
    /// Replaces the deterministic default starting point of the first restart.
    std::optional<Hyperparameters> warm_start;
};

struct PosteriorPrediction {
    double mean = 0.0;
    double variance = 0.0;
};

struct PosteriorBatch {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

/// Fitted multi-fidelity GP. Accepts and returns physical units; kernels act on
/// standardized inputs and responses divided by `output_scale()`.
class MfGpModel {
public:
    /// Conditions the prior on `training`; hyperparameters are in standardized units.
    MfGpModel(Hyperparameters hp, const TrainingSet& training, InputScaling scaling, double output_scale);

    /// Maximum-likelihood fit. Throws FitError when every restart fails to factorize.
    static MfGpModel fit(const TrainingSet& training, const InputScaling& scaling, const FitConfig& config);

    /// Standard deviation of level-0 responses, used to scale outputs before fitting.
    static double default_output_scale(const TrainingSet& training);

    const Hyperparameters& hyperparameters() const noexcept { return hp_; }
    const InputScaling& scaling() const noexcept { return scaling_; }
    double output_scale() const noexcept { return output_scale_; }
    int num_levels() const noexcept { return hp_.num_levels(); }
    Eigen::Index dimension() const noexcept { return scaling_.shift.size(); }
    std::size_t training_size() const noexcept { return levels_.size(); }

    double prior_covariance(int l, const Eigen::VectorXd& x, int l2, const Eigen::VectorXd& x2) const;
    PosteriorPrediction predict(int level, const Eigen::VectorXd& x) const;
    double posterior_cross_cov(int l, const Eigen::VectorXd& x, int l2, const Eigen::VectorXd& x2) const;

    /// Observation-noise variance a new record at `level` would carry.
    double noise_variance(int level) const;
    /// Denominators of the one-step lookahead below this are degenerate.
    double variance_floor(int level) const;

    /// Variance of the future posterior mean at x after observing (l_f, x_next);
    /// empty when the candidate is degenerate.
    std::optional<double> lookahead_variance(const Eigen::VectorXd& x, const Eigen::VectorXd& x_next, int l_f) const;
    /// High-fidelity posterior variance at x after observing (l_f, x_next), hyperparameters frozen.
    std::optional<double> future_variance(const Eigen::VectorXd& x, const Eigen::VectorXd& x_next, int l_f) const;

    /// Posterior mean and variance at one level for points stored one per row.
    PosteriorBatch predict_batch(int level, const Eigen::MatrixXd& rows) const;
    /// Posterior covariance block between (la, rows a) and (lb, rows b).
    Eigen::MatrixXd posterior_cov_block(int la, const Eigen::MatrixXd& a, int lb, const Eigen::MatrixXd& b) const;

private:
    void check_level(int level) const;
    Eigen::VectorXd cross_prior(int level, const Eigen::VectorXd& z) const;
    Eigen::MatrixXd cross_prior_block(int level, const Eigen::MatrixXd& z) const;
    Eigen::MatrixXd prior_block(int la, const Eigen::MatrixXd& za, int lb, const Eigen::MatrixXd& zb) const;

    Hyperparameters hp_;
    InputScaling scaling_;
    double output_scale_;
    Eigen::MatrixXd inputs_;
    std::vector<int> levels_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::VectorXd alpha_;
};

}  // namespace mfrel
