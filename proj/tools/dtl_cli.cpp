// dtl: command-line front end for the experiment harness.
//
//   dtl run    [--spec FILE] [flags]     one CSV row per logged outer step
//   dtl sweep  [--spec FILE] [flags]     sample-complexity sweep
//   dtl check  [--out FILE]              property suite
//   dtl bound  --gamma .. --T .. ...     closed-form bound terms
//   dtl env export NAME --out FILE       MDP + feature JSON
//   dtl env import FILE [--features F]   validate and summarize
//   dtl fig NAME [--out FILE]            run a versioned preset

#include "dtl/bounds.hpp"
#include "dtl/check.hpp"
#include "dtl/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Overrides {
    std::string spec_file;
    std::optional<std::string> env, algo, out, features;
    std::optional<double> gamma, alpha, r, guard;
    std::optional<int> T, K, seeds, log_every;
    std::optional<std::uint64_t> base_seed;
    std::optional<std::vector<double>> theta0;
    bool normalize = false;
    int jobs = 1;
};

void add_spec_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--spec", o.spec_file, "JSON experiment spec; flags override its fields")->check(CLI::ExistingFile);
    cmd->add_option("--env", o.env, "baird | example1 | random:<seed>:<n_states>:<n_actions> | MDP file");
    cmd->add_option("--algo", o.algo, "semi_gradient | target | target_trunc | target_proj");
    cmd->add_option("--gamma", o.gamma, "discount factor");
    cmd->add_option("--alpha", o.alpha, "constant stepsize");
    cmd->add_option("--T", o.T, "outer iterations");
    cmd->add_option("--K", o.K, "inner iterations per outer step");
    cmd->add_option("--r", o.r, "truncation radius");
    cmd->add_option("--seeds", o.seeds, "number of seeds");
    cmd->add_option("--base-seed", o.base_seed, "seed of run 0 (DTL_SEED overrides)");
    cmd->add_option("--jobs", o.jobs, "concurrent runs")->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out, "output CSV (stdout when omitted)");
    cmd->add_flag("--normalize-features", o.normalize, "rescale features to max row l1-norm 1");
    cmd->add_option("--features", o.features, "feature-matrix JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--log-every", o.log_every, "outer steps between CSV rows");
    cmd->add_option("--guard", o.guard, "divergence threshold on ||theta||_2");
    cmd->add_option("--theta0", o.theta0, "initial parameter: one value (broadcast) or d values")->expected(1, -1);
}

dtl::ExperimentSpec build_spec(const Overrides& o) {
    dtl::ExperimentSpec spec = o.spec_file.empty() ? dtl::ExperimentSpec{} : dtl::load_spec(o.spec_file);
    if (o.env)
        spec.env = *o.env;
    if (o.algo)
        spec.algo = dtl::parse_algorithm(*o.algo);
    if (o.gamma)
        spec.gamma = *o.gamma;
    if (o.alpha)
        spec.cfg.alpha = *o.alpha;
    if (o.T)
        spec.cfg.T = *o.T;
    if (o.K)
        spec.cfg.K = *o.K;
    if (o.r)
        spec.cfg.r = *o.r;
    if (o.seeds)
        spec.n_seeds = *o.seeds;
    if (o.base_seed)
        spec.base_seed = *o.base_seed;
    if (o.out)
        spec.out = *o.out;
    if (o.features)
        spec.features = *o.features;
    if (o.normalize)
        spec.normalize_features = true;
    if (o.log_every)
        spec.cfg.log_every = *o.log_every;
    if (o.guard)
        spec.cfg.divergence_guard = *o.guard;
    if (o.theta0)
        spec.cfg.theta0 = Eigen::Map<const dtl::Vec>(o.theta0->data(), Eigen::Index(o.theta0->size()));
    dtl::apply_seed_override(spec);
    dtl::validate(spec);
    return spec;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty())
        std::cout << text;
    else
        dtl::write_text(path, text);
}

void report_stepsize(const dtl::ExperimentSpec& spec, const dtl::Environment& env) {
    if (spec.algo == dtl::Algorithm::semi_gradient || spec.cfg.alpha >= 1.0)
        return;
    const auto rep = dtl::check_stepsize(env, spec.cfg);
    if (!rep.alpha_ok || !rep.k_ok)
        std::cerr << "note: alpha = " << spec.cfg.alpha << " (limit " << rep.alpha_max << "), K = " << spec.cfg.K
                  << " (need >= " << rep.t_alpha + 1 << "): outside the finite-sample theorem's hypotheses\n";
}

int run_spec(const dtl::ExperimentSpec& spec, int jobs) {
    const dtl::Environment env = dtl::make_environment(spec);
    if (spec.sweep) {
        emit(spec.out, dtl::sweep_csv(dtl::run_sweep(spec, env, jobs)));
        return 0;
    }
    report_stepsize(spec, env);
    emit(spec.out, dtl::run_csv(dtl::run_experiment(spec, env, jobs)));
    return 0;
}

int bound_command(const dtl::BoundInputs& b) {
    const dtl::BoundTerms terms = dtl::theorem1_bound(b);
    std::cout << "term   value\n"
              << "E1     " << dtl::format_double(terms.e1) << "\n"
              << "E2     " << dtl::format_double(terms.e2) << "\n"
              << "E3     " << dtl::format_double(terms.e3) << "\n"
              << "E4     " << dtl::format_double(terms.e4) << "\n"
              << "total  " << dtl::format_double(terms.total) << "\n";
    if (terms.stepsize_warning)
        std::cout << "warning: alpha exceeds lambda_min (1 - gamma)^2 / 130 = "
                  << dtl::format_double(dtl::theorem_alpha_max(b.lambda_min, b.gamma)) << "\n";
    return 0;
}

dtl::Environment builtin_environment(const std::string& name, std::optional<double> gamma) {
    dtl::ExperimentSpec spec;
    spec.env = name;
    spec.gamma = gamma;
    if (std::filesystem::exists(name))
        throw dtl::UsageError("env export expects a built-in environment name, not a file");
    return dtl::make_environment(spec);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Q-learning with linear function approximation: algorithms, oracles and experiment harness"};
    app.require_subcommand(1);

    Overrides run_opts;
    auto* run = app.add_subcommand("run", "run an experiment and write its CSV");
    add_spec_flags(run, run_opts);

    Overrides sweep_opts;
    auto* sweep = app.add_subcommand("sweep", "sample-complexity sweep over the spec's ladder");
    add_spec_flags(sweep, sweep_opts);

    std::string check_out;
    auto* check = app.add_subcommand("check", "run the property suite");
    check->add_option("--out", check_out, "also write the report as CSV");

    dtl::BoundInputs bound_in;
    auto* bound = app.add_subcommand("bound", "evaluate the finite-sample error bound");
    bound->add_option("--gamma", bound_in.gamma)->required();
    bound->add_option("--T", bound_in.T)->required();
    bound->add_option("--K", bound_in.K)->required();
    bound->add_option("--alpha", bound_in.alpha)->required();
    bound->add_option("--t-alpha", bound_in.t_alpha)->required();
    bound->add_option("--lambda-min", bound_in.lambda_min)->required();
    bound->add_option("--e-approx", bound_in.e_approx, "function approximation error (default 0)");
    bound->add_option("--init-gap", bound_in.init_gap, "||Q0 - Q*||_inf (default 0)");

    auto* env_cmd = app.add_subcommand("env", "export or import environment files");
    env_cmd->require_subcommand(1);
    std::string export_name, export_out;
    std::optional<double> export_gamma;
    auto* env_export = env_cmd->add_subcommand("export", "write a built-in environment as JSON");
    env_export->add_option("name", export_name, "baird | example1 | random:<seed>:<n_states>:<n_actions>")->required();
    env_export->add_option("--out", export_out, "MDP file; features go to <stem>.features.json")->required();
    env_export->add_option("--gamma", export_gamma);
    std::string import_file;
    std::optional<std::string> import_features;
    auto* env_import = env_cmd->add_subcommand("import", "load an MDP file and print a summary");
    env_import->add_option("file", import_file)->required()->check(CLI::ExistingFile);
    env_import->add_option("--features", import_features)->check(CLI::ExistingFile);

    std::string fig_name;
    Overrides fig_opts;
    auto* fig = app.add_subcommand("fig", "run a named preset (fig1..fig6, sweep)");
    fig->add_option("name", fig_name)->required();
    fig->add_option("--out", fig_opts.out, "output CSV (stdout when omitted)");
    fig->add_option("--jobs", fig_opts.jobs)->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto spec = build_spec(run_opts);
            spec.sweep.reset();
            return run_spec(spec, run_opts.jobs);
        }
        if (*sweep) {
            const auto spec = build_spec(sweep_opts);
            if (!spec.sweep)
                throw dtl::UsageError("sweep needs a spec with a 'sweep' section (epsilons and ladder)");
            return run_spec(spec, sweep_opts.jobs);
        }
        if (*check) {
            const auto results = dtl::run_checks();
            std::cout << dtl::check_report_text(results);
            if (!check_out.empty())
                dtl::write_text(check_out, dtl::check_report_csv(results));
            int failed = 0;
            for (const auto& r : results)
                failed += !r.passed;
            std::cout << results.size() - failed << "/" << results.size() << " properties passed\n";
            return failed == 0 ? 0 : 1;
        }
        if (*bound)
            return bound_command(bound_in);
        if (*env_export) {
            const dtl::Environment env = builtin_environment(export_name, export_gamma);
            const std::filesystem::path out(export_out);
            const auto features = out.parent_path() / (out.stem().string() + ".features.json");
            dtl::save_mdp(out, env.mdp());
            dtl::save_features(features, env.features());
            std::cout << "wrote " << out.string() << " and " << features.string() << "\n";
            return 0;
        }
        if (*env_import) {
            dtl::ExperimentSpec spec;
            spec.env = import_file;
            if (import_features)
                spec.features = *import_features;
            const dtl::Environment env = dtl::make_environment(spec);
            const double lambda = dtl::gram_and_lambda_min(env.features(), env.weights()).lambda_min;
            std::cout << "name       " << env.name() << "\n"
                      << "n_states   " << env.mdp().n_states() << "\n"
                      << "n_actions  " << env.mdp().n_actions() << "\n"
                      << "gamma      " << dtl::format_double(env.gamma()) << "\n"
                      << "d          " << env.features().dim() << "\n"
                      << "lambda_min " << dtl::format_double(lambda) << "\n"
                      << "q_star    ";
            for (int i = 0; i < env.q_star().size(); ++i)
                std::cout << " " << dtl::format_double(env.q_star()[i]);
            std::cout << "\n";
            return 0;
        }
        if (*fig) {
            auto spec = dtl::load_preset(fig_name);
            if (fig_opts.out)
                spec.out = *fig_opts.out;
            dtl::apply_seed_override(spec);
            return run_spec(spec, fig_opts.jobs);
        }
    } catch (const dtl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
