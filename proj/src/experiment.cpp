#include "mfrel/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mfrel/errors.hpp"

namespace mfrel {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

std::vector<std::string> method_names() { return {"amgpra-eff", "amgpra-um", "mfegra", "akmcs-eff"}; }

MethodSpec parse_method(const std::string& name) {
    if (name == "amgpra-eff") return {Method::amgpra, LearningFunctionKind::eff};
    if (name == "amgpra-um") return {Method::amgpra, LearningFunctionKind::u_m};
    if (name == "mfegra") return {Method::mfegra, LearningFunctionKind::eff};
    if (name == "akmcs-eff") return {Method::akmcs_eff, LearningFunctionKind::eff};
    throw ConfigError("methods", "unknown method: " + name);
}

namespace {

template <typename T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(key, "invalid value for key '" + key + "'");
    }
}

double positive(const json& j, const std::string& key) {
    const auto v = get_as<double>(j, key);
    if (!(v > 0.0)) throw ConfigError(key, "'" + key + "' must be positive");
    return v;
}

std::int64_t at_least_one(const json& j, const std::string& key) {
    if (!j.is_number_integer()) throw ConfigError(key, "'" + key + "' must be an integer");
    const auto v = j.get<std::int64_t>();
    if (v < 1) throw ConfigError(key, "'" + key + "' must be at least 1");
    return v;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("", "config must be a JSON object");

    static const std::set<std::string> known{
        "problem",       "methods",        "repetitions", "seed",      "n_mcs",       "n_delta",
        "n_c",           "n_initial",      "cov_threshold", "eff_threshold", "max_iterations", "nugget",
        "mle_restarts",  "mle_max_iterations", "max_lengthscale", "audit_pool", "reference_n", "sweep", "a",         "c1",
        "output_dir",    "threads"};
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw ConfigError(key, "unknown key '" + key + "'");

    ExperimentConfig c;
    if (!j.contains("problem")) throw ConfigError("problem", "missing required key 'problem'");
    c.problem = get_as<std::string>(j["problem"], "problem");
    const auto names = benchmarks::problem_names();
    if (std::find(names.begin(), names.end(), c.problem) == names.end())
        throw ConfigError("problem", "unknown problem");

    if (j.contains("methods")) {
        c.methods = get_as<std::vector<std::string>>(j["methods"], "methods");
        if (c.methods.empty()) throw ConfigError("methods", "'methods' must not be empty");
        for (const auto& m : c.methods) parse_method(m);
    }
    if (j.contains("repetitions")) c.repetitions = static_cast<int>(at_least_one(j["repetitions"], "repetitions"));
    if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j["seed"], "seed");
    if (j.contains("n_mcs")) c.loop.n_mcs = at_least_one(j["n_mcs"], "n_mcs");
    if (j.contains("n_delta")) c.loop.n_delta = at_least_one(j["n_delta"], "n_delta");
    if (j.contains("n_c")) c.loop.n_c = at_least_one(j["n_c"], "n_c");
    if (j.contains("n_initial")) c.loop.n_initial = static_cast<int>(at_least_one(j["n_initial"], "n_initial"));
    if (j.contains("cov_threshold")) c.loop.cov_threshold = positive(j["cov_threshold"], "cov_threshold");
    if (j.contains("eff_threshold")) c.loop.eff_threshold = positive(j["eff_threshold"], "eff_threshold");
    if (j.contains("max_iterations"))
        c.loop.max_iterations = static_cast<int>(at_least_one(j["max_iterations"], "max_iterations"));
    if (j.contains("nugget")) {
        c.loop.nugget = get_as<double>(j["nugget"], "nugget");
        if (c.loop.nugget < 0.0) throw ConfigError("nugget", "'nugget' must be non-negative");
        c.loop.max_nugget = std::max(c.loop.max_nugget, c.loop.nugget);
    }
    if (j.contains("mle_restarts")) c.loop.mle_restarts = static_cast<int>(at_least_one(j["mle_restarts"], "mle_restarts"));
    if (j.contains("mle_max_iterations"))
        c.loop.mle_max_iterations = static_cast<int>(at_least_one(j["mle_max_iterations"], "mle_max_iterations"));
    if (j.contains("max_lengthscale")) c.loop.max_lengthscale = positive(j["max_lengthscale"], "max_lengthscale");
    if (j.contains("audit_pool")) c.loop.audit_pool = get_as<bool>(j["audit_pool"], "audit_pool");
    if (j.contains("reference_n")) c.reference_n = at_least_one(j["reference_n"], "reference_n");
    if (j.contains("a")) {
        c.a = positive(j["a"], "a");
        if (c.a > 1.0) throw ConfigError("a", "'a' must lie in (0, 1]");
    }
    if (j.contains("c1")) c.c1 = positive(j["c1"], "c1");
    if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j["output_dir"], "output_dir");
    if (j.contains("threads")) c.threads = static_cast<int>(at_least_one(j["threads"], "threads"));

    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        if (!s.is_object()) throw ConfigError("sweep", "'sweep' must be an object");
        for (const auto& [key, value] : s.items())
            if (key != "param" && key != "values") throw ConfigError("sweep." + key, "unknown key 'sweep." + key + "'");
        if (!s.contains("param") || !s.contains("values")) throw ConfigError("sweep", "'sweep' needs 'param' and 'values'");
        SweepSpec sweep;
        sweep.param = get_as<std::string>(s["param"], "sweep.param");
        if (sweep.param != "c1" && sweep.param != "a")
            throw ConfigError("sweep.param", "sweep parameter must be 'c1' or 'a'");
        if (c.problem != "tendim-2f") throw ConfigError("sweep", "sweeps apply to tendim-2f only");
        sweep.values = get_as<std::vector<double>>(s["values"], "sweep.values");
        if (sweep.values.empty()) throw ConfigError("sweep.values", "'sweep.values' must not be empty");
        for (double v : sweep.values) {
            if (!(v > 0.0)) throw ConfigError("sweep.values", "sweep values must be positive");
            if (sweep.param == "a" && v > 1.0) throw ConfigError("sweep.values", "accuracy values must lie in (0, 1]");
        }
        c.sweep = std::move(sweep);
    }
    return c;
}

MultiFidelityProblem experiment_problem(const ExperimentConfig& config, std::optional<double> sweep_value) {
    double a = config.a;
    double c1 = config.c1;
    if (config.sweep && sweep_value) (config.sweep->param == "a" ? a : c1) = *sweep_value;
    return benchmarks::make_problem(config.problem, a, c1);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt_double(*v) : std::string{}; }

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw std::runtime_error("history: malformed number '" + s + "'");
    return v;
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string history_csv(const RunHistory& history, int num_levels) {
    std::string out = "iteration,point_index,level,score,pf_hat,max_eff,cost_cum";
    for (int l = 0; l < num_levels; ++l) out += ",evals_l" + std::to_string(l);
    out += '\n';
    for (const auto& r : history.iterations) {
        out += std::to_string(r.iteration) + ',' + std::to_string(r.point_index) + ',' + std::to_string(r.level) + ',' +
               fmt_double(r.score) + ',' + fmt_double(r.pf_hat) + ',' + fmt_double(r.max_eff) + ',' +
               fmt_double(r.cost_cum);
        for (int l = 0; l < num_levels; ++l)
            out += ',' + std::to_string(l < static_cast<int>(r.evals.size()) ? r.evals[static_cast<std::size_t>(l)] : 0);
        out += '\n';
    }
    return out;
}

void write_history(const RunHistory& history, int num_levels, const fs::path& path) {
    write_file(path, history_csv(history, num_levels));
}

std::vector<IterationRecord> parse_history_csv(std::string_view text) {
    std::vector<IterationRecord> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("history: missing header");
    const auto header = split(line, ',');
    if (header.size() < 8 || header[0] != "iteration") throw std::runtime_error("history: unexpected header");
    const std::size_t levels = header.size() - 7;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != header.size()) throw std::runtime_error("history: wrong field count");
        IterationRecord r;
        r.iteration = std::stoi(f[0]);
        r.point_index = std::stoll(f[1]);
        r.level = std::stoi(f[2]);
        r.score = parse_double(f[3]);
        r.pf_hat = parse_double(f[4]);
        r.max_eff = parse_double(f[5]);
        r.cost_cum = parse_double(f[6]);
        for (std::size_t l = 0; l < levels; ++l) r.evals.push_back(std::stoi(f[7 + l]));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<IterationRecord> read_history(const fs::path& path) { return parse_history_csv(read_file(path)); }

std::string summary_csv(std::span<const SummaryRecord> summaries) {
    std::size_t levels = 0;
    for (const auto& s : summaries) levels = std::max(levels, s.mean_evals.size());
    std::string out = "method,sweep_param,sweep_value,runs,converged,failed,mean_cost";
    for (std::size_t l = 0; l < levels; ++l) out += ",mean_evals_l" + std::to_string(l);
    out += ",mean_pf,pf_ref,avg_rel_error_pct\n";
    for (const auto& s : summaries) {
        out += s.method + ',' + s.sweep_param + ',' + fmt_optional(s.sweep_value) + ',' + std::to_string(s.runs) + ',' +
               std::to_string(s.converged) + ',' + std::to_string(s.failed) + ',' + fmt_double(s.mean_cost);
        for (std::size_t l = 0; l < levels; ++l)
            out += ',' + (l < s.mean_evals.size() ? fmt_double(s.mean_evals[l]) : std::string{});
        out += ',' + fmt_double(s.mean_pf) + ',' + fmt_double(s.pf_ref) + ',' + fmt_double(s.avg_relative_error_pct) + '\n';
    }
    return out;
}

json to_json(const RunResult& run) {
    const auto& e = run.history.estimate;
    json j;
    j["method"] = run.method;
    j["sweep_value"] = run.sweep_value ? json(*run.sweep_value) : json(nullptr);
    j["trial"] = run.trial;
    j["seed"] = run.seed;
    j["pf_hat"] = e.pf_hat;
    j["cov"] = e.cov ? json(*e.cov) : json(nullptr);
    j["n_mcs_final"] = e.n_mcs_final;
    if (e.pool_pf) j["pool_pf"] = *e.pool_pf;
    j["total_cost"] = e.total_cost;
    j["evals"] = e.evals;
    j["converged"] = e.converged;
    j["termination"] = to_string(e.reason);
    j["message"] = e.message;
    j["iterations"] = run.history.iterations.size();
    j["pf_ref"] = run.pf_ref;
    j["relative_error"] = run.relative_error;
    j["final_nugget"] = run.history.final_nugget;
    return j;
}

// ---------------------------------------------------------------------------
// Execution

SummaryRecord summarize(const std::string& method, const std::string& sweep_param, std::optional<double> sweep_value,
                        std::span<const RunResult> runs, int num_levels) {
    SummaryRecord s;
    s.method = method;
    s.sweep_param = sweep_param;
    s.sweep_value = sweep_value;
    s.runs = static_cast<int>(runs.size());
    s.mean_evals.assign(static_cast<std::size_t>(num_levels), 0.0);
    double cost = 0.0, pf = 0.0, rel = 0.0;
    for (const auto& r : runs) {
        s.pf_ref = r.pf_ref;
        const auto& e = r.history.estimate;
        if (!e.converged) {
            ++s.failed;
            continue;
        }
        ++s.converged;
        cost += e.total_cost;
        pf += e.pf_hat;
        rel += r.relative_error;
        for (std::size_t l = 0; l < e.evals.size() && l < s.mean_evals.size(); ++l) s.mean_evals[l] += e.evals[l];
    }
    if (s.converged > 0) {
        const double n = s.converged;
        s.mean_cost = cost / n;
        s.mean_pf = pf / n;
        s.avg_relative_error_pct = 100.0 * rel / n;
        for (auto& v : s.mean_evals) v /= n;
    }
    return s;
}

bool ExperimentResult::any_failed() const {
    return std::any_of(runs.begin(), runs.end(), [](const auto& r) { return !r.history.estimate.converged; });
}

benchmarks::McsReference cached_reference(const MultiFidelityProblem& problem, std::int64_t n, std::uint64_t seed,
                                          const std::optional<fs::path>& cache_dir, const std::string& key_suffix) {
    const std::string key = problem.name + '|' + key_suffix + '|' + std::to_string(n) + '|' + std::to_string(seed);
    std::optional<fs::path> path;
    if (cache_dir) {
        char name[64];
        std::snprintf(name, sizeof name, "mcs-%016llx.json", static_cast<unsigned long long>(fnv1a(key)));
        path = *cache_dir / name;
        if (fs::exists(*path)) {
            try {
                const json j = json::parse(read_file(*path));
                if (j.at("key").get<std::string>() == key)
                    return {j.at("pf").get<double>(), j.at("cov").get<double>(), j.at("rejected").get<std::int64_t>()};
            } catch (const std::exception&) {
                // Corrupt cache entries are recomputed.
            }
        }
    }
    const auto ref = benchmarks::mcs_reference(problem, n, seed);
    if (path) write_file(*path, json{{"key", key}, {"pf", ref.pf}, {"cov", ref.cov}, {"rejected", ref.rejected}}.dump(2));
    return ref;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options) {
    std::vector<std::optional<double>> sweep_values;
    if (config.sweep)
        for (double v : config.sweep->values) sweep_values.emplace_back(v);
    else
        sweep_values.emplace_back(std::nullopt);

    const fs::path out_dir = config.output_dir;
    const auto cache = options.cache_dir ? options.cache_dir
                                         : (options.write_outputs ? std::optional<fs::path>(out_dir / "reference-cache")
                                                                  : std::nullopt);
    const std::uint64_t reference_seed = config.seed ^ 0x5eed5eed5eed5eedULL;

    struct Task {
        std::string method;
        std::size_t sweep_index;
        int trial;
    };
    std::vector<Task> tasks;
    std::vector<double> references;
    std::vector<MultiFidelityProblem> problems;
    for (std::size_t s = 0; s < sweep_values.size(); ++s) {
        problems.push_back(experiment_problem(config, sweep_values[s]));
        const std::string suffix = config.sweep ? config.sweep->param + '=' + fmt_optional(sweep_values[s]) : "";
        references.push_back(cached_reference(problems.back(), config.reference_n, reference_seed, cache, suffix).pf);
        for (const auto& m : config.methods)
            for (int t = 0; t < config.repetitions; ++t) tasks.push_back({m, s, t});
    }

    ExperimentResult result;
    result.runs.resize(tasks.size());
    std::mutex callback_mutex;
    auto execute = [&](std::size_t i) {
        const Task& task = tasks[i];
        const MethodSpec spec = parse_method(task.method);
        LoopConfig loop = config.loop;
        loop.method = spec.method;
        loop.lf = spec.lf;
        loop.seed = config.seed + static_cast<std::uint64_t>(task.trial);
        RunResult r;
        r.method = task.method;
        r.sweep_value = sweep_values[task.sweep_index];
        r.trial = task.trial;
        r.seed = loop.seed;
        try {
            r.history = run_method(problems[task.sweep_index], loop);
        } catch (const std::exception& e) {
            r.history.estimate.converged = false;
            r.history.estimate.reason = Termination::fit_failure;
            r.history.estimate.message = e.what();
        }
        r.pf_ref = references[task.sweep_index];
        r.relative_error = r.pf_ref > 0.0 ? std::abs(r.history.estimate.pf_hat - r.pf_ref) / r.pf_ref : 0.0;
        result.runs[i] = std::move(r);
        if (options.on_run) {
            std::lock_guard lock(callback_mutex);
            options.on_run(result.runs[i]);
        }
    };
    const int workers = std::max(1, std::min<int>(config.threads, static_cast<int>(tasks.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) execute(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < tasks.size(); i = next++) execute(i);
            });
    }

    const std::string param = config.sweep ? config.sweep->param : "";
    for (std::size_t s = 0; s < sweep_values.size(); ++s) {
        for (const auto& m : config.methods) {
            std::vector<RunResult> group;
            for (const auto& r : result.runs)
                if (r.method == m && r.sweep_value == sweep_values[s]) group.push_back(r);
            const int levels = parse_method(m).method == Method::akmcs_eff ? 1 : problems[s].num_levels();
            result.summaries.push_back(summarize(m, param, sweep_values[s], group, levels));
        }
    }

    if (options.write_outputs) {
        json runs = json::array();
        for (const auto& r : result.runs) {
            runs.push_back(to_json(r));
            std::string name = r.method;
            if (r.sweep_value) name += '_' + param + '=' + fmt_double(*r.sweep_value);
            name += "_trial" + std::to_string(r.trial) + ".csv";
            const int levels = static_cast<int>(r.history.estimate.evals.size());
            write_history(r.history, levels, out_dir / "history" / name);
        }
        write_file(out_dir / "runs.json", runs.dump(2));
        write_file(out_dir / "summary.csv", summary_csv(result.summaries));
    }
    return result;
}

}  // namespace mfrel
