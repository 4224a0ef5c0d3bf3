#include "mfrel/active_loop.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <unordered_set>

#include "mfrel/errors.hpp"

namespace mfrel {

void LoopConfig::validate() const {
    if (!(cov_threshold > 0.0) || !(eff_threshold > 0.0)) throw DomainError("loop config: thresholds must be positive");
    if (n_mcs < 1 || n_delta < 1 || n_c < 1) throw DomainError("loop config: sizes must be at least 1");
    if (n_initial && *n_initial < 1) throw DomainError("loop config: initial design size must be at least 1");
    if (max_iterations < 0) throw DomainError("loop config: max_iterations must be non-negative");
    if (nugget < 0.0 || mle_restarts < 1) throw DomainError("loop config: invalid GP fitting settings");
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::converged: return "converged";
        case Termination::no_failures_observed: return "no_failures_observed";
        case Termination::max_iterations: return "max_iterations";
        case Termination::degenerate_source: return "degenerate_source";
        case Termination::fit_failure: return "fit_failure";
    }
    return "unknown";
}

std::string to_string(Method m) {
    switch (m) {
        case Method::amgpra: return "amgpra";
        case Method::mfegra: return "mfegra";
        case Method::akmcs_eff: return "akmcs-eff";
    }
    return "unknown";
}

int default_initial_size(Eigen::Index dim) {
    const auto d = static_cast<int>(dim);
    return std::min(12, (d + 1) * (d + 2) / 2);
}

bool check_stop(std::span<const double> eff_values, double threshold) {
    if (eff_values.empty()) throw DomainError("check_stop: empty EFF sequence");
    return *std::max_element(eff_values.begin(), eff_values.end()) < threshold;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct Selection {
    Eigen::Index point = -1;
    int level = -1;
    double score = 0.0;
};

struct PoolAssessment {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
    std::vector<double> eff;
    double pf_hat = 0.0;
    double max_eff = 0.0;
};

class Run {
public:
    Run(const MultiFidelityProblem& problem, const LoopConfig& config)
        : problem_(problem), config_(config), rng_(config.seed), training_(problem.num_levels()),
          trained_(static_cast<std::size_t>(problem.num_levels())),
          evals_(static_cast<std::size_t>(problem.num_levels()), 0), nugget_(config.nugget) {
        problem.validate();
        config.validate();
        pool_ = lhs_population(problem_.rvs, config_.n_mcs, rng_);
        pool_.seed = config_.seed;
        scaling_ = InputScaling::from_points(pool_.points);

        const int n_init = std::min<int>(config_.n_initial.value_or(default_initial_size(problem_.dimension())),
                                         static_cast<int>(pool_.size()));
        // Partial Fisher-Yates: uniform sample without replacement.
        std::vector<Eigen::Index> order(static_cast<std::size_t>(pool_.size()));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        for (int i = 0; i < n_init; ++i) {
            const auto j = static_cast<std::size_t>(i) + rng_.index(order.size() - static_cast<std::size_t>(i));
            std::swap(order[static_cast<std::size_t>(i)], order[j]);
        }
        for (int i = 0; i < n_init; ++i)
            for (int l = 0; l < problem_.num_levels(); ++l) evaluate(order[static_cast<std::size_t>(i)], l);
    }

    template <typename Select>
    RunHistory execute(Select&& select) {
        RunHistory history;
        bool zero_enlarged = false;
        for (int it = 0;; ++it) {
            std::optional<MfGpModel> model;
            try {
                model.emplace(fit(it));
            } catch (const std::exception& e) {
                finish(history, Termination::fit_failure, e.what(), std::nullopt);
                break;
            }

            PoolAssessment a;
            std::optional<Termination> stop;
            std::optional<double> cov;
            for (;;) {
                a = assess(*model);
                if (!check_stop(a.eff, config_.eff_threshold)) break;
                cov = cov_pf(a.pf_hat, pool_.size());
                if (!cov) {
                    if (!zero_enlarged) {
                        zero_enlarged = true;
                        enlarge();
                        continue;
                    }
                    stop = Termination::no_failures_observed;
                } else if (*cov >= config_.cov_threshold) {
                    enlarge();
                    continue;
                } else {
                    stop = Termination::converged;
                }
                break;
            }

            IterationRecord row;
            row.iteration = it;
            row.pf_hat = a.pf_hat;
            row.max_eff = a.max_eff;
            row.cost_cum = total_cost();
            row.evals = evals_;
            row.pool_size = pool_.size();
            last_pf_ = a.pf_hat;

            if (stop) {
                history.iterations.push_back(row);
                finish(history, *stop, {}, cov);
                break;
            }
            if (it >= config_.max_iterations) {
                history.iterations.push_back(row);
                finish(history, Termination::max_iterations, "iteration limit reached", cov_pf(a.pf_hat, pool_.size()));
                break;
            }
            const std::optional<Selection> sel = select(*this, *model, a);
            if (!sel) {
                history.iterations.push_back(row);
                finish(history, Termination::degenerate_source, "no informative candidate or source",
                       cov_pf(a.pf_hat, pool_.size()));
                break;
            }
            row.point_index = sel->point;
            row.level = sel->level;
            row.score = sel->score;
            history.iterations.push_back(row);
            if (config_.method == Method::amgpra && sel->level == 0) {
                for (int l = 0; l < problem_.num_levels(); ++l) evaluate(sel->point, l);
            } else {
                evaluate(sel->point, sel->level);
            }
        }
        history.final_nugget = nugget_;
        return history;
    }

    const CandidatePool& pool() const { return pool_; }
    const MultiFidelityProblem& problem() const { return problem_; }
    const LoopConfig& config() const { return config_; }
    bool trained(Eigen::Index point, int level) const {
        return trained_[static_cast<std::size_t>(level)].contains(point);
    }

private:
    void evaluate(Eigen::Index point, int level) {
        auto& seen = trained_[static_cast<std::size_t>(level)];
        const Eigen::VectorXd x = pool_.points.row(point).transpose();
        const double y = problem_.sources[static_cast<std::size_t>(level)].evaluate(x);
        training_.add(level, x, y);
        seen.insert(point);
        ++evals_[static_cast<std::size_t>(level)];
    }

    double total_cost() const {
        double c = 0.0;
        for (std::size_t l = 0; l < evals_.size(); ++l) c += evals_[l] * problem_.sources[l].cost;
        return c;
    }

    MfGpModel fit(int iteration) {
        FitConfig fc;
        fc.restarts = config_.mle_restarts;
        fc.max_iterations = config_.mle_max_iterations;
        fc.max_lengthscale = config_.max_lengthscale;
        fc.seed = mix_seed(config_.seed, static_cast<std::uint64_t>(iteration));
        fc.warm_start = warm_;
        for (;;) {
            fc.nugget = nugget_;
            try {
                auto model = MfGpModel::fit(training_, scaling_, fc);
                warm_ = model.hyperparameters();
                return model;
            } catch (const FitError&) {
                if (nugget_ * 100.0 > config_.max_nugget) throw;
            } catch (const IllConditionedError&) {
                if (nugget_ * 100.0 > config_.max_nugget) throw;
            }
            nugget_ = nugget_ > 0.0 ? nugget_ * 100.0 : 1e-10;
        }
    }

    PoolAssessment assess(const MfGpModel& model) const {
        constexpr Eigen::Index chunk = 4096;
        const Eigen::Index n = pool_.size();
        PoolAssessment a;
        a.mean.resize(n);
        a.variance.resize(n);
        a.eff.resize(static_cast<std::size_t>(n));
        for (Eigen::Index start = 0; start < n; start += chunk) {
            const Eigen::Index m = std::min(chunk, n - start);
            const auto post = model.predict_batch(0, pool_.points.middleRows(start, m));
            a.mean.segment(start, m) = post.mean;
            a.variance.segment(start, m) = post.variance;
        }
        std::size_t failures = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = eff(a.mean(i), std::sqrt(a.variance(i)));
            a.eff[static_cast<std::size_t>(i)] = e;
            a.max_eff = std::max(a.max_eff, e);
            failures += a.mean(i) <= 0.0;
        }
        a.pf_hat = static_cast<double>(failures) / static_cast<double>(n);
        return a;
    }

    void enlarge() { pool_.append(lhs_population(problem_.rvs, config_.n_delta, rng_)); }

    void finish(RunHistory& h, Termination reason, std::string message, std::optional<double> cov) const {
        auto& e = h.estimate;
        e.pf_hat = last_pf_;
        e.cov = cov;
        e.n_mcs_final = pool_.size();
        e.total_cost = total_cost();
        e.evals = evals_;
        e.reason = reason;
        e.converged = reason == Termination::converged || reason == Termination::no_failures_observed;
        e.message = std::move(message);
        if (config_.audit_pool) {
            std::size_t failures = 0;
            for (Eigen::Index i = 0; i < pool_.size(); ++i)
                failures += problem_.sources[0].evaluate(pool_.points.row(i).transpose()) <= 0.0;
            e.pool_pf = static_cast<double>(failures) / static_cast<double>(pool_.size());
        }
    }

    const MultiFidelityProblem& problem_;
    LoopConfig config_;
    Rng rng_;
    CandidatePool pool_;
    InputScaling scaling_;
    TrainingSet training_;
    std::vector<std::unordered_set<Eigen::Index>> trained_;
    std::vector<int> evals_;
    double nugget_;
    std::optional<Hyperparameters> warm_;
    double last_pf_ = 0.0;
};

// Highest EFF among pool points without a high-fidelity record; ties to the lower index.
std::optional<Eigen::Index> eff_argmax(const Run& run, const PoolAssessment& a) {
    std::optional<Eigen::Index> best;
    for (Eigen::Index i = 0; i < run.pool().size(); ++i) {
        if (run.trained(i, 0)) continue;
        if (!best || a.eff[static_cast<std::size_t>(i)] > a.eff[static_cast<std::size_t>(*best)]) best = i;
    }
    return best;
}

std::vector<Eigen::Index> top_indices(const std::vector<double>& values, Eigen::Index count) {
    std::vector<Eigen::Index> idx(values.size());
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    count = std::min<Eigen::Index>(count, static_cast<Eigen::Index>(idx.size()));
    auto cmp = [&](Eigen::Index a, Eigen::Index b) {
        const double va = values[static_cast<std::size_t>(a)];
        const double vb = values[static_cast<std::size_t>(b)];
        return va != vb ? va > vb : a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + count, idx.end(), cmp);
    idx.resize(static_cast<std::size_t>(count));
    return idx;
}

}  // namespace

RunHistory run_amgpra(const MultiFidelityProblem& problem, const LoopConfig& config) {
    LoopConfig cfg = config;
    cfg.method = Method::amgpra;
    Run run(problem, cfg);
    const std::vector<double> costs = problem.costs();
    return run.execute([&](const Run& r, const MfGpModel& model, const PoolAssessment& a) -> std::optional<Selection> {
        const Eigen::Index n = r.pool().size();
        std::vector<double> lf(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i)
            lf[static_cast<std::size_t>(i)] =
                cfg.lf == LearningFunctionKind::eff ? a.eff[static_cast<std::size_t>(i)]
                                                    : learning_value(cfg.lf, a.mean(i), a.variance(i));
        const auto top = top_indices(lf, cfg.n_c);
        CollectiveSubset subset;
        subset.points.resize(static_cast<Eigen::Index>(top.size()), r.pool().dimension());
        subset.mean.resize(static_cast<Eigen::Index>(top.size()));
        subset.variance.resize(static_cast<Eigen::Index>(top.size()));
        for (std::size_t j = 0; j < top.size(); ++j) {
            const auto row = static_cast<Eigen::Index>(j);
            subset.points.row(row) = r.pool().points.row(top[j]);
            subset.mean(row) = a.mean(top[j]);
            subset.variance(row) = a.variance(top[j]);
        }
        const auto scores = clf_scores(model, subset, cfg.lf, costs, [&](Eigen::Index j, int l) {
            return r.trained(top[static_cast<std::size_t>(j)], l);
        });
        const auto best = best_candidate(scores);
        if (!best) return std::nullopt;
        return Selection{top[static_cast<std::size_t>(best->point)], best->level, best->score};
    });
}

RunHistory run_mfegra(const MultiFidelityProblem& problem, const LoopConfig& config) {
    LoopConfig cfg = config;
    cfg.method = Method::mfegra;
    Run run(problem, cfg);
    const std::vector<double> costs = problem.costs();
    return run.execute([&](const Run& r, const MfGpModel& model, const PoolAssessment& a) -> std::optional<Selection> {
        const auto point = eff_argmax(r, a);
        if (!point) return std::nullopt;
        auto mask = std::make_unique<bool[]>(costs.size());
        for (std::size_t l = 0; l < costs.size(); ++l) mask[l] = !r.trained(*point, static_cast<int>(l));
        const Eigen::VectorXd x = r.pool().points.row(*point).transpose();
        const auto sel = mfegra_select_source(model, x, r.pool().points, a.eff, costs,
                                              std::span<const bool>(mask.get(), costs.size()));
        if (!sel) return std::nullopt;
        return Selection{*point, sel->level, sel->scores[static_cast<std::size_t>(sel->level)]};
    });
}

RunHistory run_akmcs_eff(const MultiFidelityProblem& problem, const LoopConfig& config) {
    LoopConfig cfg = config;
    cfg.method = Method::akmcs_eff;
    const MultiFidelityProblem single = problem.high_fidelity_only();
    Run run(single, cfg);
    return run.execute([&](const Run& r, const MfGpModel&, const PoolAssessment& a) -> std::optional<Selection> {
        const auto point = eff_argmax(r, a);
        if (!point) return std::nullopt;
        return Selection{*point, 0, a.eff[static_cast<std::size_t>(*point)]};
    });
}

RunHistory run_method(const MultiFidelityProblem& problem, const LoopConfig& config) {
    switch (config.method) {
        case Method::amgpra: return run_amgpra(problem, config);
        case Method::mfegra: return run_mfegra(problem, config);
        case Method::akmcs_eff: return run_akmcs_eff(problem, config);
    }
    throw DomainError("unknown method");
}

}  // namespace mfrel
