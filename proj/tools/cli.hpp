#pragma once

// Command-line front end. run() is kept separate from main() so tests can
// drive it with in-memory argument lists and streams.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "modalmr/modalmr.hpp"

namespace modalmr::cli {

enum class LogLevel { Quiet, Info, Debug };

inline LogLevel log_level_from_env()
{
    const char* v = std::getenv("MODALMR_LOG");
    if (v == nullptr || std::string(v).empty() || std::string(v) == "info") return LogLevel::Info;
    if (std::string(v) == "quiet") return LogLevel::Quiet;
    if (std::string(v) == "debug") return LogLevel::Debug;
    throw InvalidArgument("MODALMR_LOG must be quiet, info or debug, got '" + std::string(v) + "'");
}

namespace detail {

struct ChainOpts
{
    std::string family = "iid";
    long n = 16;
    double p = 0.5, q = 0.5, laziness = 0.5, gamma = 0.5;
    long d = 1;
    std::string chain_file;
};

struct TaskOpts
{
    ChainOpts chain;
    std::string noise = "gaussian";
    double noise_scale = 0.5, dof = 2.0, shape = 3.0;
    std::string target = "sine-exp";
    double slope = 1.0, intercept = 0.0, bound = 1.0;
};

struct KernelOpts
{
    std::string kind = "rbf";
    double bandwidth = 0.2, degree = 1.0, offset = 1.0;
};

struct SolverOpts
{
    std::string phi = "gaussian";
    double sigma = 0.5, lambda = 0.01;
    std::string penalty = "2";
    int max_hq_iters = 200;
    double tol = 1e-8;
    int inner_max_iters = 100;
    int max_grad_iters = 20000;
};

struct CommonOpts
{
    std::uint64_t seed = 1;
    std::string out;
    std::string config;
    int jobs = 1;
};

inline void add_common(CLI::App* sub, CommonOpts& c)
{
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--out", c.out, "Output path (stdout when omitted)");
    sub->add_option("--config", c.config, "Flat 'key = value' config file; command-line flags take precedence");
    sub->add_option("--jobs", c.jobs, "Worker threads for experiments")->capture_default_str()->check(CLI::PositiveNumber);
}

inline void add_chain(CLI::App* sub, ChainOpts& c)
{
    sub->add_option("--family", c.family, "Chain family: iid, two-state, lazy-random-walk, metropolis-grid, sticky, cycle")
        ->capture_default_str();
    sub->add_option("--n", c.n, "Number of states")->capture_default_str();
    sub->add_option("--p", c.p, "two-state: probability of leaving state 0")->capture_default_str();
    sub->add_option("--q", c.q, "two-state: probability of leaving state 1")->capture_default_str();
    sub->add_option("--laziness", c.laziness, "lazy-random-walk: holding probability")->capture_default_str();
    sub->add_option("--gamma", c.gamma, "sticky: refresh probability (equals the absolute spectral gap)")
        ->capture_default_str();
    sub->add_option("--d", c.d, "Embedding dimension for built-in chains")->capture_default_str();
    sub->add_option("--chain-file", c.chain_file, "Read the chain from a file instead of --family");
}

inline void add_task(CLI::App* sub, TaskOpts& t)
{
    add_chain(sub, t.chain);
    sub->add_option("--noise", t.noise, "Noise: gaussian, student-t, shifted-gamma")->capture_default_str();
    sub->add_option("--noise-scale", t.noise_scale, "Noise scale")->capture_default_str();
    sub->add_option("--dof", t.dof, "student-t degrees of freedom")->capture_default_str();
    sub->add_option("--shape", t.shape, "shifted-gamma shape")->capture_default_str();
    sub->add_option("--target", t.target, "Mode function f*: sine-exp, linear, zero")->capture_default_str();
    sub->add_option("--slope", t.slope, "linear target slope")->capture_default_str();
    sub->add_option("--intercept", t.intercept, "linear target intercept")->capture_default_str();
    sub->add_option("--bound", t.bound, "Sup-norm bound M on f*")->capture_default_str();
}

inline void add_kernel(CLI::App* sub, KernelOpts& k)
{
    sub->add_option("--kernel", k.kind, "Hypothesis kernel: rbf, laplacian, polynomial")->capture_default_str();
    sub->add_option("--bandwidth", k.bandwidth, "rbf/laplacian bandwidth")->capture_default_str();
    sub->add_option("--degree", k.degree, "polynomial degree")->capture_default_str();
    sub->add_option("--offset", k.offset, "polynomial offset")->capture_default_str();
}

inline void add_solver(CLI::App* sub, SolverOpts& s, bool with_sigma_lambda = true)
{
    sub->add_option("--phi", s.phi, "Representing function: gaussian, epanechnikov, quadratic, triangular, correntropy")
        ->capture_default_str();
    if (with_sigma_lambda) {
        sub->add_option("--sigma", s.sigma, "Modal bandwidth")->capture_default_str();
        sub->add_option("--lambda", s.lambda, "Regularization weight")->capture_default_str();
    }
    sub->add_option("--penalty", s.penalty, "Coefficient penalty exponent q: 1 or 2")->capture_default_str();
    sub->add_option("--max-hq-iters", s.max_hq_iters, "Outer iteration cap")->capture_default_str();
    sub->add_option("--tol", s.tol, "Objective-change stopping threshold")->capture_default_str();
    sub->add_option("--inner-max-iters", s.inner_max_iters, "Coordinate-descent sweeps per step (q = 1)")
        ->capture_default_str();
    sub->add_option("--max-grad-iters", s.max_grad_iters, "Iteration cap for non-Gaussian phi")->capture_default_str();
}

inline std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open input file '" + path + "'");
    return in;
}

inline TransitionKernel build_chain(const ChainOpts& c)
{
    if (!c.chain_file.empty()) {
        auto in = open_in(c.chain_file);
        return io::read_chain(in, c.chain_file);
    }
    modalmr::detail::require(c.n >= 1, "--n must be >= 1");
    switch (parse_chain_family(c.family)) {
    case ChainFamilyKind::IID: return builtin_chain(ChainFamily::iid(c.n), c.d);
    case ChainFamilyKind::TwoState: return builtin_chain(ChainFamily::two_state(c.p, c.q), c.d);
    case ChainFamilyKind::LazyRandomWalk: return builtin_chain(ChainFamily::lazy_random_walk(c.n, c.laziness), c.d);
    case ChainFamilyKind::MetropolisGrid: return builtin_chain(ChainFamily::metropolis_grid(c.n), c.d);
    case ChainFamilyKind::Sticky: return builtin_chain(ChainFamily::sticky(c.n, c.gamma), c.d);
    case ChainFamilyKind::Cycle: return builtin_chain(ChainFamily::cycle(c.n), c.d);
    }
    throw InvalidArgument("unknown chain family");
}

inline NoiseModel build_noise(const TaskOpts& t)
{
    if (t.noise == "gaussian") return NoiseModel::gaussian(t.noise_scale);
    if (t.noise == "student-t") return NoiseModel::student_t(t.dof, t.noise_scale);
    if (t.noise == "shifted-gamma") return NoiseModel::shifted_gamma(t.shape, t.noise_scale);
    throw InvalidArgument("unknown --noise '" + t.noise + "' (valid: gaussian, student-t, shifted-gamma)");
}

inline TargetFunction build_target(const TaskOpts& t)
{
    switch (parse_target(t.target)) {
    case TargetKind::SineExp: return TargetFunction::sine_exp();
    case TargetKind::Linear: return TargetFunction::linear(t.slope, t.intercept);
    case TargetKind::Zero: return TargetFunction::zero();
    }
    throw InvalidArgument("unknown target");
}

inline SyntheticTask build_task(const TaskOpts& t)
{
    return SyntheticTask(build_chain(t.chain), build_noise(t), build_target(t), t.bound);
}

inline HypothesisKernel build_kernel(const KernelOpts& k)
{
    return make_kernel(parse_kernel_kind(k.kind),
                       {{"bandwidth", k.bandwidth}, {"degree", k.degree}, {"offset", k.offset}});
}

inline RmrConfig build_solver(const SolverOpts& s)
{
    RmrConfig c;
    c.phi = parse_phi(s.phi);
    c.sigma = s.sigma;
    c.lambda = s.lambda;
    c.q = parse_penalty(s.penalty);
    c.max_hq_iters = s.max_hq_iters;
    c.tol = s.tol;
    c.inner_max_iters = s.inner_max_iters;
    c.max_grad_iters = s.max_grad_iters;
    c.validate();
    return c;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& flag)
{
    std::vector<T> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
        T v{};
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size())
            throw InvalidArgument(flag + ": cannot parse '" + item + "' in list '" + text + "'");
        out.push_back(v);
    }
    if (out.empty()) throw InvalidArgument(flag + " must list at least one value");
    return out;
}

/// Writes to the --out path, or to `fallback` when no path was given.
inline void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& body)
{
    if (path.empty()) {
        body(fallback);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("cannot open output file '" + path + "' for writing");
    body(f);
    if (!f) throw InvalidArgument("failed writing output file '" + path + "'");
}

/// Resolved value of every long option of a subcommand, for manifests.
inline nlohmann::ordered_json option_values(const CLI::App* sub)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string& name = opt->get_lnames().front();
        if (name == "help" || name == "config" || name == "out" || name == "jobs") continue;
        const auto& res = opt->results();
        j[name] = res.empty() ? opt->get_default_str() : res.back();
    }
    return j;
}

inline std::string vec_str(const Eigen::VectorXd& v)
{
    std::string s = "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_g(v(i), 12);
    return s + ")";
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

/// Flags from the config file are placed before the command-line flags so the
/// latter win under the take-last policy.
inline std::vector<std::string> inject_config(CLI::App& app, const std::vector<std::string>& args)
{
    if (args.empty()) return args;
    CLI::App* sub = nullptr;
    for (CLI::App* s : app.get_subcommands({}))
        if (s->get_name() == args[0]) sub = s;
    if (sub == nullptr) return args;

    std::string path;
    for (std::size_t k = 1; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
        else if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
    }
    if (path.empty()) return args;

    auto in = open_in(path);
    const auto entries = io::read_flat_config(in, path);
    std::vector<std::string> out{args[0]};
    for (const auto& [key, value] : entries) {
        const CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config" || key == "help") {
            std::string valid;
            for (const CLI::Option* o : sub->get_options())
                if (!o->get_lnames().empty() && o->get_lnames().front() != "help" && o->get_lnames().front() != "config")
                    valid += (valid.empty() ? "" : ", ") + o->get_lnames().front();
            throw InvalidArgument(path + ": unknown key '" + key + "' for " + sub->get_name() + " (valid keys: " +
                                  valid + ")");
        }
        out.push_back("--" + key);
        out.push_back(value);
    }
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
}

} // namespace detail

/// Runs one command. `out` receives data written without --out, `log`
/// receives the one-line summary and diagnostics. Returns the exit status.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log)
{
    using namespace detail;
    CLI::App app{"Regularized modal regression: chain diagnostics, fitting and experiments", "modalmr"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    CommonOpts common;
    TaskOpts task;
    KernelOpts kern;
    SolverOpts solver;

    // chain-info
    auto* chain_info = app.add_subcommand("chain-info", "Stationary distribution and spectral gaps of a chain");
    int k_max = 10, t_max = 50;
    add_common(chain_info, common);
    add_chain(chain_info, task.chain);
    chain_info->add_option("--k-max", k_max, "Largest power in the pseudo spectral gap")->capture_default_str();
    chain_info->add_option("--t-max", t_max, "Length of the total-variation decay curve")->capture_default_str();

    // check-kernel
    auto* check_kernel = app.add_subcommand("check-kernel", "Calibration report for a representing function");
    add_common(check_kernel, common);
    check_kernel->add_option("--phi", solver.phi, "Representing function")->capture_default_str();

    // generate
    auto* generate = app.add_subcommand("generate", "Sample a dataset file from a synthetic task");
    long m = 256;
    add_common(generate, common);
    add_task(generate, task);
    generate->add_option("--m", m, "Sample size")->capture_default_str();

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit RMR on a dataset file and write the model");
    std::string data_path, model_path, fitted_path, inputs_path;
    add_common(fit_cmd, common);
    add_kernel(fit_cmd, kern);
    add_solver(fit_cmd, solver);
    fit_cmd->add_option("--data", data_path, "Dataset file ('m d' header, then covariates and y)")->required();
    fit_cmd->add_option("--fitted", fitted_path, "Also write fitted values at the training inputs");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "Evaluate a stored model");
    add_common(predict_cmd, common);
    predict_cmd->add_option("--model", model_path, "Model file written by fit")->required();
    auto* in_opt = predict_cmd->add_option("--inputs", inputs_path, "Input file ('m d' header, then covariates)");
    predict_cmd->add_option("--data", data_path, "Dataset file; its covariates are used")->excludes(in_opt);

    // learning-curve
    auto* lc_cmd = app.add_subcommand("learning-curve", "Excess risk against sample size");
    std::string m_grid = "64,128,256,512,1024,2048", schedule = "theorem2";
    int replicates = 20;
    double beta = 2.0, s_cap = 0.01;
    std::string manifest_path;
    add_common(lc_cmd, common);
    add_task(lc_cmd, task);
    add_kernel(lc_cmd, kern);
    add_solver(lc_cmd, solver);
    lc_cmd->add_option("--m-grid", m_grid, "Comma-separated increasing sample sizes")->capture_default_str();
    lc_cmd->add_option("--replicates", replicates, "Replicates per sample size")->capture_default_str();
    lc_cmd->add_option("--schedule", schedule, "theorem2 or fixed (uses --lambda and --sigma)")->capture_default_str();
    lc_cmd->add_option("--beta", beta, "Source exponent for the theorem2 schedule")->capture_default_str();
    lc_cmd->add_option("--s", s_cap, "Capacity exponent for the theorem2 schedule")->capture_default_str();
    lc_cmd->add_option("--manifest", manifest_path, "JSON manifest path (default: <out>.manifest.json)");

    // gamma-sweep
    auto* gs_cmd = app.add_subcommand("gamma-sweep", "Mean excess risk across chains with different gaps");
    std::string gammas = "0.1,0.25,0.5,1", chain_files;
    long sweep_m = 512;
    add_common(gs_cmd, common);
    add_task(gs_cmd, task);
    add_kernel(gs_cmd, kern);
    add_solver(gs_cmd, solver);
    gs_cmd->add_option("--gammas", gammas, "Comma-separated gaps of sticky chains on --n states")->capture_default_str();
    gs_cmd->add_option("--chain-files", chain_files, "Comma-separated chain files (replaces --gammas)");
    gs_cmd->add_option("--m", sweep_m, "Sample size")->capture_default_str();
    gs_cmd->add_option("--replicates", replicates, "Replicates per chain")->capture_default_str();
    gs_cmd->add_option("--schedule", schedule, "theorem2 or fixed")->capture_default_str();
    gs_cmd->add_option("--beta", beta, "Source exponent for the theorem2 schedule")->capture_default_str();
    gs_cmd->add_option("--s", s_cap, "Capacity exponent for the theorem2 schedule")->capture_default_str();
    gs_cmd->add_option("--manifest", manifest_path, "JSON manifest path (default: <out>.manifest.json)");

    // breakdown
    auto* bd_cmd = app.add_subcommand("breakdown", "Breakdown quantity N and a contamination curve");
    std::string n_outliers = "0,1,2,4,8,16", magnitudes = "100,10000,1000000", outlier_x;
    long bd_m = 20;
    int multi_start = 1;
    add_common(bd_cmd, common);
    add_task(bd_cmd, task);
    add_kernel(bd_cmd, kern);
    add_solver(bd_cmd, solver);
    bd_cmd->add_option("--m", bd_m, "Clean sample size (>= 10)")->capture_default_str();
    bd_cmd->add_option("--n-outliers", n_outliers, "Comma-separated outlier counts")->capture_default_str();
    bd_cmd->add_option("--magnitudes", magnitudes, "Comma-separated outlier responses")->capture_default_str();
    bd_cmd->add_option("--outlier-x", outlier_x, "Comma-separated outlier covariate (default 0.5 per coordinate)");
    bd_cmd->add_option("--multi-start", multi_start, "1: also refit from an outlier-anchored start")
        ->capture_default_str();

    // robust-compare
    auto* rc_cmd = app.add_subcommand("robust-compare", "RMR against least-squares kernel ridge");
    std::string lambda_grid = "1e-6,1e-5,1e-4,1e-3,1e-2,1e-1";
    long rc_m = 500;
    add_common(rc_cmd, common);
    add_task(rc_cmd, task);
    add_kernel(rc_cmd, kern);
    add_solver(rc_cmd, solver);
    rc_cmd->add_option("--m", rc_m, "Sample size")->capture_default_str();
    rc_cmd->add_option("--replicates", replicates, "Replicates")->capture_default_str();
    rc_cmd->add_option("--lambda-grid", lambda_grid, "Comma-separated lambda values scanned by both estimators")
        ->capture_default_str();
    rc_cmd->add_option("--manifest", manifest_path, "JSON manifest path (default: <out>.manifest.json)");

    LogLevel level = LogLevel::Info;
    try {
        level = log_level_from_env();
        std::vector<std::string> argv = inject_config(app, args);
        std::reverse(argv.begin(), argv.end());
        try {
            app.parse(argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out, log);
            return code == 0 ? 0 : 1;
        }

        auto summary = [&](const std::string& line) {
            if (level != LogLevel::Quiet) log << line << '\n';
        };
        auto debug = [&](const std::string& line) {
            if (level == LogLevel::Debug) log << "debug: " << line << '\n';
        };
        auto manifest = [&](CLI::App* sub, const nlohmann::ordered_json& results) {
            std::string path = manifest_path;
            if (path.empty() && !common.out.empty()) path = common.out + ".manifest.json";
            if (path.empty()) return;
            nlohmann::ordered_json j;
            j["tool"] = "modalmr";
            j["version"] = version;
            j["command"] = sub->get_name();
            j["seed"] = common.seed;
            j["config"] = option_values(sub);
            j["results"] = results;
            emit(path, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
        };

        if (chain_info->parsed()) {
            const TransitionKernel k = build_chain(task.chain);
            const ChainDiagnostics dg = diagnose_chain(k, k_max, t_max);
            nlohmann::ordered_json j;
            j["n_states"] = k.n_states();
            j["reversible"] = dg.reversible;
            j["pi"] = to_std(dg.pi);
            j["gamma"] = dg.gamma;
            j["gamma_abs"] = dg.gamma_abs;
            j["gamma_pseudo"] = dg.gamma_pseudo;
            j["tv_decay"] = dg.tv_decay;
            emit(common.out, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
            summary("chain-info: n=" + std::to_string(k.n_states()) + " reversible=" + (dg.reversible ? "yes" : "no") +
                    " gamma=" + format_g(dg.gamma, 12) + " gamma_abs=" + format_g(dg.gamma_abs, 12) +
                    " gamma_pseudo=" + format_g(dg.gamma_pseudo, 12) + " pi=" + vec_str(dg.pi));
            return 0;
        }

        if (check_kernel->parsed()) {
            const RepresentingFunction phi = parse_phi(solver.phi);
            const CalibrationReport r = check_calibration(phi);
            nlohmann::ordered_json j;
            j["phi"] = to_string(phi.kind());
            j["peak_value"] = r.peak_value;
            j["symmetric"] = r.symmetric();
            j["max_symmetry_violation"] = r.max_symmetry_violation;
            j["peaked"] = r.peaked();
            j["integral"] = r.integral;
            j["unit_integral"] = r.unit_integral();
            j["second_moment"] = r.second_moment;
            j["finite_second_moment"] = r.finite_second_moment();
            j["lipschitz_estimate"] = r.lipschitz_estimate;
            j["lipschitz_bound"] = r.lipschitz_bound;
            j["lipschitz_ok"] = r.lipschitz_ok();
            j["passes"] = r.passes();
            emit(common.out, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
            summary("check-kernel: phi=" + std::string(to_string(phi.kind())) + " integral=" +
                    format_g(r.integral, 12) + " second_moment=" + format_g(r.second_moment, 12) +
                    (r.passes() ? " PASS" : " FAIL"));
            if (!r.passes()) {
                log << "calibration failed for phi '" << to_string(phi.kind()) << "'\n";
                return 2;
            }
            return 0;
        }

        if (generate->parsed()) {
            const SyntheticTask t = build_task(task);
            const Dataset d = generate_dataset(t, m, common.seed);
            emit(common.out, out, [&](std::ostream& os) { io::write_dataset(os, d.x, d.y); });
            summary("generate: m=" + std::to_string(m) + " d=" + std::to_string(t.chain().dim()) +
                    " noise=" + t.noise().describe());
            return 0;
        }

        if (fit_cmd->parsed()) {
            auto in = open_in(data_path);
            const io::LabeledData data = io::read_dataset(in, data_path);
            const RmrConfig cfg = build_solver(solver);
            const RmrModel model = fit(build_kernel(kern), data.x, data.y, cfg);
            emit(common.out, out, [&](std::ostream& os) { io::write_model(os, model); });
            if (!fitted_path.empty()) {
                const Eigen::VectorXd f = predict(model, data.x);
                emit(fitted_path, out, [&](std::ostream& os) {
                    for (Eigen::Index i = 0; i < f.size(); ++i) os << format_g(f(i), 17) << '\n';
                });
            }
            for (std::size_t k = 0; k < model.objective_trace.size(); ++k)
                debug("iteration " + std::to_string(k) + " objective " + format_g(model.objective_trace[k], 17));
            summary("fit: m=" + std::to_string(data.y.size()) + " objective=" +
                    format_g(model.objective_trace.back(), 12) + " iterations=" +
                    std::to_string(model.objective_trace.size() - 1) + " termination=" +
                    std::string(to_string(model.termination)));
            return 0;
        }

        if (predict_cmd->parsed()) {
            auto min = open_in(model_path);
            const RmrModel model = io::read_model(min, model_path);
            Points x;
            if (!inputs_path.empty()) {
                auto in = open_in(inputs_path);
                x = io::read_inputs(in, inputs_path);
            } else if (!data_path.empty()) {
                auto in = open_in(data_path);
                x = io::read_dataset(in, data_path).x;
            } else {
                throw InvalidArgument("predict needs --inputs or --data");
            }
            const Eigen::VectorXd f = predict(model, x);
            emit(common.out, out, [&](std::ostream& os) {
                for (Eigen::Index i = 0; i < f.size(); ++i) os << format_g(f(i), 17) << '\n';
            });
            summary("predict: n=" + std::to_string(f.size()));
            return 0;
        }

        if (lc_cmd->parsed()) {
            ExperimentConfig cfg(build_task(task));
            cfg.kernel = build_kernel(kern);
            cfg.m_grid.clear();
            for (long v : parse_list<long>(m_grid, "--m-grid")) cfg.m_grid.push_back(v);
            cfg.n_replicates = replicates;
            if (schedule == "theorem2") cfg.schedule = ScheduleSpec::theorem2(beta, s_cap);
            else if (schedule == "fixed") cfg.schedule = ScheduleSpec::fixed(solver.lambda, solver.sigma);
            else throw InvalidArgument("unknown --schedule '" + schedule + "' (valid: theorem2, fixed)");
            cfg.seed = common.seed;
            cfg.solver = build_solver(solver);
            cfg.jobs = common.jobs;
            const LearningCurveResult res = learning_curve(cfg);
            emit(common.out, out, [&](std::ostream& os) { write_csv(os, res); });
            nlohmann::ordered_json r;
            r["slope"] = res.slope;
            r["slope_ci"] = {res.slope_ci.lo, res.slope_ci.hi};
            r["mean_excess_risk"] = res.mean_excess;
            r["failures"] = res.failures;
            manifest(lc_cmd, r);
            if (res.failures > 0) log << "warning: " << res.failures << " fits failed and were excluded\n";
            summary("learning-curve: slope=" + format_g(res.slope, 6) + " ci90=[" + format_g(res.slope_ci.lo, 6) +
                    ", " + format_g(res.slope_ci.hi, 6) + "] rows=" + std::to_string(res.rows.size()));
            return 0;
        }

        if (gs_cmd->parsed()) {
            ExperimentConfig cfg(build_task(task));
            cfg.kernel = build_kernel(kern);
            cfg.m_grid = {sweep_m};
            cfg.n_replicates = replicates;
            if (schedule == "theorem2") cfg.schedule = ScheduleSpec::theorem2(beta, s_cap);
            else if (schedule == "fixed") cfg.schedule = ScheduleSpec::fixed(solver.lambda, solver.sigma);
            else throw InvalidArgument("unknown --schedule '" + schedule + "' (valid: theorem2, fixed)");
            cfg.seed = common.seed;
            cfg.solver = build_solver(solver);
            cfg.jobs = common.jobs;
            std::vector<TransitionKernel> chains;
            if (!chain_files.empty()) {
                std::stringstream ss(chain_files);
                for (std::string p; std::getline(ss, p, ',');) {
                    auto in = open_in(p);
                    chains.push_back(io::read_chain(in, p));
                }
            } else {
                for (double g : parse_list<double>(gammas, "--gammas"))
                    chains.push_back(builtin_chain(ChainFamily::sticky(task.chain.n, g), task.chain.d));
            }
            const auto rows = gamma_sweep(cfg, chains);
            emit(common.out, out, [&](std::ostream& os) { write_csv(os, rows); });
            nlohmann::ordered_json r = nlohmann::ordered_json::array();
            for (const auto& row : rows) r.push_back({{"gamma_abs", row.gamma_abs}, {"mean_excess_risk", row.mean_excess}});
            manifest(gs_cmd, r);
            summary("gamma-sweep: chains=" + std::to_string(rows.size()) + " m=" + std::to_string(sweep_m));
            return 0;
        }

        if (bd_cmd->parsed()) {
            const SyntheticTask t = build_task(task);
            ContaminationOptions opt;
            if (!outlier_x.empty()) opt.outlier_x = parse_list<double>(outlier_x, "--outlier-x");
            opt.multi_start = multi_start != 0;
            const BreakdownReport rep =
                contamination_experiment(t, build_kernel(kern), bd_m, parse_list<long>(n_outliers, "--n-outliers"),
                                         parse_list<double>(magnitudes, "--magnitudes"), build_solver(solver),
                                         common.seed, opt);
            nlohmann::ordered_json h;
            h["N"] = rep.N;
            h["n_star_low"] = rep.n_star_low;
            h["n_star_high"] = rep.n_star_high;
            h["breakdown_fraction"] = rep.breakdown_fraction;
            h["m"] = rep.m;
            h["clean_norm"] = rep.clean_norm;
            emit(common.out, out, [&](std::ostream& os) {
                os << "# " << h.dump() << '\n';
                os << "n_outliers,magnitude,coef_norm\n";
                for (const auto& row : rep.contamination_curve)
                    os << row.n_outliers << ',' << csv_num(row.magnitude) << ',' << csv_num(row.coef_norm) << '\n';
            });
            summary("breakdown: N=" + format_g(rep.N, 12) + " bracket=[" + std::to_string(rep.n_star_low) + ", " +
                    std::to_string(rep.n_star_high) + "] fraction=" + format_g(rep.breakdown_fraction, 12));
            return 0;
        }

        if (rc_cmd->parsed()) {
            const SyntheticTask t = build_task(task);
            RobustnessOptions opt;
            opt.n_replicates = replicates;
            opt.lambda_grid = parse_list<double>(lambda_grid, "--lambda-grid");
            opt.jobs = common.jobs;
            const RobustnessResult res =
                robustness_comparison(t, build_kernel(kern), rc_m, build_solver(solver), common.seed, opt);
            emit(common.out, out, [&](std::ostream& os) { write_csv(os, res); });
            nlohmann::ordered_json r;
            r["mean_rmr_mse"] = res.mean_rmr_mse;
            r["mean_ls_mse"] = res.mean_ls_mse;
            r["rmr_win_fraction"] = res.rmr_win_fraction;
            manifest(rc_cmd, r);
            summary("robust-compare: rmr_mse=" + format_g(res.mean_rmr_mse, 6) + " ls_mse=" +
                    format_g(res.mean_ls_mse, 6) + " rmr_wins=" + format_g(res.rmr_win_fraction, 6));
            return 0;
        }
        return 1;
    } catch (const error& e) {
        log << "error: " << e.what() << '\n';
        return e.error_class() == ErrorClass::validation ? 1 : 2;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace modalmr::cli
