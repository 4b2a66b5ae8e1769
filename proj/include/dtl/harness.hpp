#pragma once

// Experiment orchestration: spec files, environment resolution, seeded
// multi-run execution, CSV emission and the sample-complexity sweep.
//
// Runs inside one spec are independent; they may execute on several threads
// and are merged by seed, so the output bytes depend only on the spec.

#include "dtl/algorithms.hpp"
#include "dtl/csv.hpp"
#include "dtl/envs.hpp"
#include "dtl/error.hpp"
#include "dtl/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace dtl {

/// One rung of the sweep ladder.
struct LadderRung {
    int T = 1;
    int K = 1;
    double alpha = 1e-2;

    std::int64_t samples() const { return std::int64_t(T) * K; }
};

struct SweepSpec {
    std::vector<double> epsilons;
    std::vector<LadderRung> ladder;
};

struct ExperimentSpec {
    std::string env = "example1"; ///< baird, example1, random:<seed>:<n_states>:<n_actions>, or an MDP file
    Algorithm algo = Algorithm::target_trunc;
    std::optional<double> gamma;  ///< overrides the file's discount; built-ins default to 0.9
    AlgoConfig cfg;
    int n_seeds = 1;
    std::uint64_t base_seed = 0;
    std::string out;              ///< CSV path; empty means stdout
    std::string features;         ///< optional feature-matrix file
    bool normalize_features = false;
    std::optional<SweepSpec> sweep;

    std::uint64_t seed_of(int run) const { return base_seed + static_cast<std::uint64_t>(run); }
};

inline constexpr std::string_view kRunCsvHeader = "run_id,env,algo,seed,t,samples,sup_error,theta_norm,diverged";
inline constexpr std::string_view kSweepCsvHeader = "epsilon,samples,achieved_error";

// ---------------------------------------------------------------------------
// Spec parsing and validation

namespace detail {

inline void spec_error(const std::string& field, const std::string& message) {
    throw UsageError("spec field '" + field + "': " + message);
}

inline double number_field(const nlohmann::json& v, const std::string& field) {
    if (!v.is_number())
        spec_error(field, "expected a number");
    return v.get<double>();
}

inline long long integer_field(const nlohmann::json& v, const std::string& field) {
    if (v.is_number_integer())
        return v.get<long long>();
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (std::floor(x) == x && std::abs(x) < 9e15)
            return static_cast<long long>(x);
    }
    spec_error(field, "expected an integer");
    return 0;
}

inline int int_field(const nlohmann::json& v, const std::string& field) {
    const long long x = integer_field(v, field);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        spec_error(field, "out of range");
    return static_cast<int>(x);
}

} // namespace detail

/// Checks every field and reports the first offending one by name.
inline void validate(const ExperimentSpec& spec) {
    if (spec.env.empty())
        detail::spec_error("env", "must not be empty");
    if (spec.gamma && !(*spec.gamma > 0.0 && *spec.gamma < 1.0))
        detail::spec_error("gamma", "must lie strictly inside (0,1)");
    if (spec.cfg.T < 1)
        detail::spec_error("T", "must be at least 1");
    if (spec.cfg.K < 1)
        detail::spec_error("K", "must be at least 1");
    if (!(spec.cfg.alpha > 0.0))
        detail::spec_error("alpha", "must be positive");
    if (spec.cfg.r && !(*spec.cfg.r >= 0.0))
        detail::spec_error("r", "must be nonnegative");
    if (spec.cfg.log_every < 1)
        detail::spec_error("log_every", "must be at least 1");
    if (!(spec.cfg.divergence_guard > 0.0))
        detail::spec_error("guard", "must be positive");
    if (spec.n_seeds < 1)
        detail::spec_error("seeds", "must be at least 1");
    if (spec.sweep) {
        if (spec.sweep->epsilons.empty())
            detail::spec_error("sweep.epsilons", "must not be empty");
        for (double e : spec.sweep->epsilons)
            if (!(e > 0.0))
                detail::spec_error("sweep.epsilons", "entries must be positive");
        if (spec.sweep->ladder.empty())
            detail::spec_error("sweep.ladder", "must not be empty");
        for (const auto& rung : spec.sweep->ladder)
            if (rung.T < 1 || rung.K < 1 || !(rung.alpha > 0.0))
                detail::spec_error("sweep.ladder", "each rung needs T >= 1, K >= 1, alpha > 0");
    }
}

/// Reads a JSON spec. Keys mirror the CLI flags: env, algo, gamma, T, K,
/// alpha, r, seeds, base_seed, out, features, normalize_features,
/// log_every, guard, theta0 (number or array), initial_state, sweep.
inline ExperimentSpec spec_from_json(const nlohmann::json& doc) {
    if (!doc.is_object())
        throw UsageError("spec: top level must be a JSON object");
    static const std::vector<std::string> known = {
        "env",  "algo",     "gamma",    "T",         "K",         "alpha", "r",  "seeds",
        "base_seed", "out", "features", "normalize_features", "log_every", "guard", "theta0",
        "initial_state", "sweep", "description"};
    for (const auto& item : doc.items())
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            detail::spec_error(item.key(), "unknown field");

    ExperimentSpec spec;
    if (doc.contains("env")) {
        if (!doc["env"].is_string())
            detail::spec_error("env", "expected a string");
        spec.env = doc["env"].get<std::string>();
    }
    if (doc.contains("algo")) {
        if (!doc["algo"].is_string())
            detail::spec_error("algo", "expected a string");
        try {
            spec.algo = parse_algorithm(doc["algo"].get<std::string>());
        } catch (const UsageError& e) {
            detail::spec_error("algo", e.what());
        }
    }
    if (doc.contains("gamma"))
        spec.gamma = detail::number_field(doc["gamma"], "gamma");
    if (doc.contains("T"))
        spec.cfg.T = detail::int_field(doc["T"], "T");
    if (doc.contains("K"))
        spec.cfg.K = detail::int_field(doc["K"], "K");
    if (doc.contains("alpha"))
        spec.cfg.alpha = detail::number_field(doc["alpha"], "alpha");
    if (doc.contains("r") && !doc["r"].is_null())
        spec.cfg.r = detail::number_field(doc["r"], "r");
    if (doc.contains("seeds"))
        spec.n_seeds = detail::int_field(doc["seeds"], "seeds");
    if (doc.contains("base_seed")) {
        const long long s = detail::integer_field(doc["base_seed"], "base_seed");
        if (s < 0)
            detail::spec_error("base_seed", "must be nonnegative");
        spec.base_seed = static_cast<std::uint64_t>(s);
    }
    if (doc.contains("out")) {
        if (!doc["out"].is_string())
            detail::spec_error("out", "expected a string");
        spec.out = doc["out"].get<std::string>();
    }
    if (doc.contains("features")) {
        if (!doc["features"].is_string())
            detail::spec_error("features", "expected a string");
        spec.features = doc["features"].get<std::string>();
    }
    if (doc.contains("normalize_features")) {
        if (!doc["normalize_features"].is_boolean())
            detail::spec_error("normalize_features", "expected true or false");
        spec.normalize_features = doc["normalize_features"].get<bool>();
    }
    if (doc.contains("log_every"))
        spec.cfg.log_every = detail::int_field(doc["log_every"], "log_every");
    if (doc.contains("guard"))
        spec.cfg.divergence_guard = detail::number_field(doc["guard"], "guard");
    if (doc.contains("initial_state"))
        spec.cfg.initial_state = detail::int_field(doc["initial_state"], "initial_state");
    if (doc.contains("theta0")) {
        const auto& v = doc["theta0"];
        if (v.is_number()) {
            // Scalar: broadcast once the feature dimension is known. Stored as length-1 marker.
            spec.cfg.theta0 = Theta::Constant(1, v.get<double>());
        } else if (v.is_array()) {
            Theta t(static_cast<Eigen::Index>(v.size()));
            for (std::size_t i = 0; i < v.size(); ++i)
                t[static_cast<Eigen::Index>(i)] = detail::number_field(v[i], "theta0");
            spec.cfg.theta0 = t;
        } else {
            detail::spec_error("theta0", "expected a number or an array of numbers");
        }
    }
    if (doc.contains("sweep")) {
        const auto& sw = doc["sweep"];
        if (!sw.is_object())
            detail::spec_error("sweep", "expected an object");
        SweepSpec sweep;
        if (!sw.contains("epsilons") || !sw["epsilons"].is_array())
            detail::spec_error("sweep.epsilons", "expected an array");
        for (const auto& e : sw["epsilons"])
            sweep.epsilons.push_back(detail::number_field(e, "sweep.epsilons"));
        if (!sw.contains("ladder") || !sw["ladder"].is_array())
            detail::spec_error("sweep.ladder", "expected an array");
        for (const auto& rung : sw["ladder"]) {
            if (!rung.is_object() || !rung.contains("T") || !rung.contains("K") || !rung.contains("alpha"))
                detail::spec_error("sweep.ladder", "each rung needs T, K and alpha");
            sweep.ladder.push_back({detail::int_field(rung["T"], "sweep.ladder.T"),
                                    detail::int_field(rung["K"], "sweep.ladder.K"),
                                    detail::number_field(rung["alpha"], "sweep.ladder.alpha")});
        }
        spec.sweep = std::move(sweep);
    }
    validate(spec);
    return spec;
}

inline ExperimentSpec load_spec(const std::filesystem::path& path) { return spec_from_json(detail::read_json(path)); }

/// Replaces base_seed with the value of DTL_SEED when that variable is set.
inline void apply_seed_override(ExperimentSpec& spec) {
    const char* value = std::getenv("DTL_SEED");
    if (!value || !*value)
        return;
    char* end = nullptr;
    errno = 0;
    const unsigned long long seed = std::strtoull(value, &end, 10);
    if (errno != 0 || *end != '\0' || value[0] == '-')
        throw UsageError(std::string("DTL_SEED must be a nonnegative integer, got '") + value + "'");
    spec.base_seed = seed;
}

inline std::filesystem::path preset_dir() {
    if (const char* dir = std::getenv("DTL_PRESET_DIR"); dir && *dir)
        return dir;
#ifdef DTL_PRESET_DIR
    return DTL_PRESET_DIR;
#else
    return "presets";
#endif
}

/// Loads presets/<name>.json.
inline ExperimentSpec load_preset(const std::string& name) {
    const auto path = preset_dir() / (name + ".json");
    if (!std::filesystem::exists(path))
        throw UsageError("unknown preset '" + name + "' (looked for " + path.string() + ")");
    return load_spec(path);
}

// ---------------------------------------------------------------------------
// Environments

/// Resolves the env string of a spec and applies feature overrides.
inline Environment make_environment(const ExperimentSpec& spec) {
    const double gamma = spec.gamma.value_or(0.9);
    std::optional<Environment> env;
    if (spec.env == "baird") {
        env = baird(gamma);
    } else if (spec.env == "example1") {
        env = example1(gamma);
    } else if (spec.env.rfind("random:", 0) == 0) {
        std::istringstream in(spec.env.substr(7));
        std::string part;
        std::vector<long long> values;
        while (std::getline(in, part, ':')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stoll(part, &used));
                if (used != part.size())
                    throw std::invalid_argument(part);
            } catch (const std::exception&) {
                detail::spec_error("env", "random environments are written random:<seed>:<n_states>:<n_actions>");
            }
        }
        if (values.size() != 3 || values[0] < 0 || values[1] < 1 || values[2] < 1)
            detail::spec_error("env", "random environments are written random:<seed>:<n_states>:<n_actions>");
        env = random_mdp(static_cast<std::uint64_t>(values[0]), int(values[1]), int(values[2]), gamma);
    } else if (std::filesystem::exists(spec.env)) {
        Mdp mdp = load_mdp(spec.env);
        if (spec.gamma)
            mdp = Mdp(mdp.transitions(), mdp.rewards(), *spec.gamma);
        env = tabular(mdp, Policy::uniform(mdp.n_states(), mdp.n_actions()),
                      std::filesystem::path(spec.env).stem().string());
    } else {
        detail::spec_error("env", "'" + spec.env + "' is neither a built-in environment nor an existing file");
    }
    if (!spec.features.empty())
        env = env->with_features(load_features(spec.features));
    if (spec.normalize_features)
        env = env->with_features(env->features().normalized());
    return *env;
}

/// Broadcasts a scalar θ₀ (stored as a length-1 vector) to dimension d.
inline AlgoConfig resolve_config(const AlgoConfig& cfg, int d) {
    AlgoConfig out = cfg;
    if (out.theta0 && out.theta0->size() == 1 && d != 1)
        out.theta0 = Theta::Constant(d, (*out.theta0)[0]);
    return out;
}

// ---------------------------------------------------------------------------
// Execution

/// Calls job(i) for i in [0, n) on up to `jobs` threads.
template <class Job> void parallel_for(int n, int jobs, Job&& job) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i)
            job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

/// One run per seed, returned in seed order.
inline std::vector<RunLog> run_experiment(const ExperimentSpec& spec, const Environment& env, int jobs = 1) {
    validate(spec);
    const AlgoConfig base = resolve_config(spec.cfg, env.features().dim());
    std::vector<RunLog> logs(static_cast<std::size_t>(spec.n_seeds));
    parallel_for(spec.n_seeds, jobs, [&](int i) {
        AlgoConfig cfg = base;
        cfg.seed = spec.seed_of(i);
        logs[static_cast<std::size_t>(i)] = run_algorithm(spec.algo, env, cfg);
    });
    std::stable_sort(logs.begin(), logs.end(), [](const RunLog& a, const RunLog& b) { return a.seed < b.seed; });
    return logs;
}

inline std::vector<RunLog> run_experiment(const ExperimentSpec& spec, int jobs = 1) {
    return run_experiment(spec, make_environment(spec), jobs);
}

/// Rows sorted by (seed, t); the t = 0 state before any sample is not a row.
inline std::string run_csv(const std::vector<RunLog>& logs) {
    std::vector<std::size_t> order(logs.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return logs[a].seed < logs[b].seed; });

    std::string out(kRunCsvHeader);
    out += '\n';
    for (std::size_t run_id = 0; run_id < order.size(); ++run_id) {
        const RunLog& log = logs[order[run_id]];
        const std::string algo(to_string(log.algo));
        for (const LogRecord& rec : log.records) {
            CsvRow row;
            row << int(run_id) << log.env << algo << log.seed << rec.t << rec.samples << rec.sup_error
                << rec.theta_norm << rec.diverged;
            out += row.str();
        }
    }
    return out;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw UsageError("cannot open output file '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out)
        throw UsageError("failed writing output file '" + path + "'");
}

// ---------------------------------------------------------------------------
// Sample-complexity sweep

struct SweepRow {
    double epsilon = 0.0;
    std::optional<std::int64_t> samples; ///< empty when no rung reaches epsilon
    double achieved_error = 0.0;         ///< mean terminal sup_error of the chosen rung (best rung if unattained)
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<double> rung_errors; ///< mean terminal sup_error per ladder rung, ladder order
    std::optional<double> slope;     ///< least-squares slope of log(samples) on log(1/epsilon)
};

/// Least-squares slope of y on x; empty with fewer than two distinct x.
inline std::optional<double> fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 2)
        return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0)
        return std::nullopt;
    return sxy / sxx;
}

/// For each epsilon, the cheapest ladder rung (by T·K) whose mean terminal
/// sup_error over the spec's seeds is <= epsilon. Every rung is evaluated
/// once, with the same seeds.
inline SweepResult run_sweep(const ExperimentSpec& spec, const Environment& env, int jobs = 1) {
    validate(spec);
    if (!spec.sweep)
        detail::spec_error("sweep", "missing epsilons and ladder");
    if (!env.features().complete_basis() || !env.features().matrix().isIdentity())
        detail::spec_error("env", "the sweep needs a tabular environment");
    const auto& ladder = spec.sweep->ladder;
    const int n_rungs = static_cast<int>(ladder.size());
    const int n_runs = n_rungs * spec.n_seeds;
    const AlgoConfig base = resolve_config(spec.cfg, env.features().dim());

    std::vector<double> terminal(static_cast<std::size_t>(n_runs));
    parallel_for(n_runs, jobs, [&](int i) {
        const LadderRung& rung = ladder[static_cast<std::size_t>(i / spec.n_seeds)];
        AlgoConfig cfg = base;
        cfg.T = rung.T;
        cfg.K = rung.K;
        cfg.alpha = rung.alpha;
        cfg.log_every = rung.T;
        cfg.seed = spec.seed_of(i % spec.n_seeds);
        const RunLog log = run_algorithm(spec.algo, env, cfg);
        terminal[static_cast<std::size_t>(i)] =
            log.records.empty() ? log.initial.sup_error : log.records.back().sup_error;
    });

    SweepResult result;
    for (int k = 0; k < n_rungs; ++k) {
        double sum = 0.0;
        for (int s = 0; s < spec.n_seeds; ++s)
            sum += terminal[static_cast<std::size_t>(k * spec.n_seeds + s)];
        result.rung_errors.push_back(sum / spec.n_seeds);
    }

    std::vector<int> by_cost(static_cast<std::size_t>(n_rungs));
    for (int k = 0; k < n_rungs; ++k)
        by_cost[static_cast<std::size_t>(k)] = k;
    std::stable_sort(by_cost.begin(), by_cost.end(),
                     [&](int a, int b) { return ladder[std::size_t(a)].samples() < ladder[std::size_t(b)].samples(); });

    std::vector<double> log_inv_eps, log_samples;
    for (double eps : spec.sweep->epsilons) {
        SweepRow row;
        row.epsilon = eps;
        row.achieved_error = *std::min_element(result.rung_errors.begin(), result.rung_errors.end());
        for (int k : by_cost) {
            if (result.rung_errors[std::size_t(k)] <= eps) {
                row.samples = ladder[std::size_t(k)].samples();
                row.achieved_error = result.rung_errors[std::size_t(k)];
                break;
            }
        }
        if (row.samples) {
            log_inv_eps.push_back(std::log(1.0 / eps));
            log_samples.push_back(std::log(double(*row.samples)));
        }
        result.rows.push_back(row);
    }
    result.slope = fit_slope(log_inv_eps, log_samples);
    return result;
}

inline std::string sweep_csv(const SweepResult& result) {
    std::string out(kSweepCsvHeader);
    out += '\n';
    for (const SweepRow& row : result.rows) {
        CsvRow line;
        line << row.epsilon;
        if (row.samples)
            line << *row.samples;
        else
            line << "unattained";
        line << row.achieved_error;
        out += line.str();
    }
    out += "# slope=" + (result.slope ? format_double(*result.slope) : std::string("nan")) + "\n";
    return out;
}

} // namespace dtl
