#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "kernels.hpp"
#include "markov.hpp"
#include "risk.hpp"
#include "solver.hpp"

namespace modalmr {

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

struct Dataset
{
    Points x;
    Eigen::VectorXd y;
    std::vector<Eigen::Index> states; ///< chain path behind x
    Eigen::VectorXd noise;            ///< eps_i, so y_i = f*(x_i) + eps_i
};

/// Stationary-start chain path of length m, x_i = embedding(state_i),
/// y_i = f*(x_i) + eps_i with i.i.d. noise from a stream independent of the path.
inline Dataset generate_dataset(const SyntheticTask& task, Eigen::Index m, std::uint64_t seed)
{
    detail::require(m >= 1, "m must be >= 1, got " + std::to_string(m));
    Dataset d;
    d.states = sample_chain(task.chain(), m, seed, ChainStart::stationary());
    d.x.resize(m, task.chain().dim());
    d.y.resize(m);
    d.noise.resize(m);
    Rng noise_rng(seed ^ 0x6a09e667f3bcc909ULL);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index s = d.states[static_cast<std::size_t>(i)];
        d.x.row(i) = task.chain().embedding().row(s);
        d.noise(i) = task.noise().sample(noise_rng);
        d.y(i) = task.f_star_on_states()(s) + d.noise(i);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

enum class ScheduleKind { Theorem2, Fixed };

struct ScheduleSpec
{
    ScheduleKind kind = ScheduleKind::Theorem2;
    double beta = 2.0;
    double s = 0.01;
    double lambda = 0.01; ///< Fixed only
    double sigma = 0.5;   ///< Fixed only

    static ScheduleSpec theorem2(double beta, double s) { return {ScheduleKind::Theorem2, beta, s}; }
    static ScheduleSpec fixed(double lambda, double sigma)
    {
        return {.kind = ScheduleKind::Fixed, .lambda = lambda, .sigma = sigma};
    }

    /// (lambda, sigma) for a sample of size m drawn from a chain with gap gamma_abs.
    std::pair<double, double> resolve(Eigen::Index m, double gamma_abs) const
    {
        if (kind == ScheduleKind::Fixed) return {lambda, sigma};
        const Schedule sch = schedule_theorem2(static_cast<double>(m), gamma_abs, beta, s);
        return {sch.lambda, sch.sigma};
    }
};

struct ExperimentConfig
{
    explicit ExperimentConfig(SyntheticTask t) : task(std::move(t)) {}

    SyntheticTask task;
    HypothesisKernel kernel = HypothesisKernel::gaussian_rbf(0.2);
    std::vector<Eigen::Index> m_grid{64, 128, 256, 512};
    int n_replicates = 20;
    ScheduleSpec schedule;
    std::uint64_t seed = 1;
    RmrConfig solver;   ///< lambda and sigma are overwritten by the schedule
    int jobs = 1;
    int bootstrap_resamples = 1000;

    void validate() const
    {
        if (m_grid.empty()) throw InvalidArgument("m_grid must not be empty");
        for (std::size_t k = 0; k < m_grid.size(); ++k) {
            if (m_grid[k] < 1) throw InvalidArgument("m_grid entries must be >= 1");
            if (k > 0 && m_grid[k] <= m_grid[k - 1]) throw InvalidArgument("m_grid must be strictly increasing");
        }
        if (n_replicates < 1) throw InvalidArgument("n_replicates must be >= 1");
        if (jobs < 1) throw InvalidArgument("jobs must be >= 1");
        if (bootstrap_resamples < 1) throw InvalidArgument("bootstrap_resamples must be >= 1");
        solver.validate();
    }
};

inline constexpr std::uint64_t replicate_stride = 1000003;

inline std::uint64_t replicate_seed(std::uint64_t base, int replicate)
{
    return base + static_cast<std::uint64_t>(replicate) * replicate_stride;
}

namespace detail {

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Results must be
/// written to per-index slots so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body)
{
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

/// Type-7 quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q)
{
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double mean_of(const std::vector<double>& v)
{
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Least-squares slope of log(ys) against log(xs); NaN if any y is not positive.
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys)
{
    const std::size_t n = xs.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!(ys[k] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        mx += std::log(xs[k]);
        my += std::log(ys[k]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double dx = std::log(xs[k]) - mx;
        sxy += dx * (std::log(ys[k]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

} // namespace detail

struct Interval
{
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = std::numeric_limits<double>::quiet_NaN();
    bool excludes_zero() const { return lo > 0.0 || hi < 0.0; }
};

/// Percentile bootstrap interval [q_lo, q_hi] for the mean of `values`.
inline Interval bootstrap_mean_interval(const std::vector<double>& values, double q_lo, double q_hi, int resamples,
                                        std::uint64_t seed)
{
    if (values.empty()) return {};
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& mu : means) {
        double s = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) s += values[pick(rng)];
        mu = s / static_cast<double>(values.size());
    }
    std::sort(means.begin(), means.end());
    return {detail::quantile_sorted(means, q_lo), detail::quantile_sorted(means, q_hi)};
}

// ---------------------------------------------------------------------------
// Learning curve
// ---------------------------------------------------------------------------

struct LearningCurveRow
{
    Eigen::Index m = 0;
    double gamma_abs = 0.0;
    int replicate = 0;
    double excess_risk = std::numeric_limits<double>::quiet_NaN();
    double lambda_used = 0.0;
    double sigma_used = 0.0;
    bool ok = true;
    Termination termination = Termination::Converged;
};

struct LearningCurveResult
{
    std::vector<LearningCurveRow> rows;  ///< ordered by (m, replicate)
    std::vector<Eigen::Index> m_values;
    std::vector<double> mean_excess;     ///< per m, over successful replicates
    double slope = std::numeric_limits<double>::quiet_NaN();
    Interval slope_ci;                   ///< bootstrap 90% interval
    int failures = 0;                    ///< rows whose fit threw a numeric error
};

namespace detail {

struct ReplicateOutcome
{
    double excess = std::numeric_limits<double>::quiet_NaN();
    double lambda = 0.0, sigma = 0.0;
    bool ok = false;
    Termination termination = Termination::Converged;
};

inline ReplicateOutcome run_replicate(const SyntheticTask& task, const HypothesisKernel& kernel,
                                      const RmrConfig& solver, const ScheduleSpec& schedule, Eigen::Index m,
                                      double gamma_abs, std::uint64_t seed)
{
    ReplicateOutcome out;
    std::tie(out.lambda, out.sigma) = schedule.resolve(m, gamma_abs);
    RmrConfig cfg = solver;
    cfg.lambda = out.lambda;
    cfg.sigma = out.sigma;
    const Dataset data = generate_dataset(task, m, seed);
    try {
        const RmrModel model = fit(kernel, data.x, data.y, cfg);
        out.excess = excess_risk(task, model);
        out.termination = model.termination;
        out.ok = std::isfinite(out.excess);
    } catch (const error& e) {
        if (e.error_class() != ErrorClass::numeric) throw;
        out.ok = false;
    }
    return out;
}

} // namespace detail

/// Fits at every (m, replicate) and regresses log mean excess risk on log m.
/// Replicate r uses the same seed at every m, so curves are paired across m.
inline LearningCurveResult learning_curve(const ExperimentConfig& config)
{
    config.validate();
    const double gamma_abs = absolute_spectral_gap(config.task.chain());
    const std::size_t n_m = config.m_grid.size();
    const auto n_rep = static_cast<std::size_t>(config.n_replicates);

    LearningCurveResult res;
    res.rows.resize(n_m * n_rep);
    detail::parallel_for(res.rows.size(), config.jobs, [&](std::size_t idx) {
        const std::size_t mi = idx / n_rep;
        const int r = static_cast<int>(idx % n_rep);
        const Eigen::Index m = config.m_grid[mi];
        const auto o = detail::run_replicate(config.task, config.kernel, config.solver, config.schedule, m,
                                             gamma_abs, replicate_seed(config.seed, r));
        res.rows[idx] = {m, gamma_abs, r, o.excess, o.lambda, o.sigma, o.ok, o.termination};
    });

    std::vector<std::vector<double>> per_m(n_m);
    for (std::size_t idx = 0; idx < res.rows.size(); ++idx) {
        if (res.rows[idx].ok)
            per_m[idx / n_rep].push_back(res.rows[idx].excess_risk);
        else
            ++res.failures;
    }
    std::vector<double> xs;
    for (std::size_t mi = 0; mi < n_m; ++mi) {
        res.m_values.push_back(config.m_grid[mi]);
        res.mean_excess.push_back(detail::mean_of(per_m[mi]));
        xs.push_back(static_cast<double>(config.m_grid[mi]));
    }
    if (n_m < 3) return res;
    res.slope = detail::loglog_slope(xs, res.mean_excess);

    // Bootstrap: resample replicates independently within each m.
    Rng rng(config.seed ^ 0xbb67ae8584caa73bULL);
    std::vector<double> slopes;
    slopes.reserve(static_cast<std::size_t>(config.bootstrap_resamples));
    std::vector<double> means(n_m);
    for (int b = 0; b < config.bootstrap_resamples; ++b) {
        for (std::size_t mi = 0; mi < n_m; ++mi) {
            const auto& v = per_m[mi];
            if (v.empty()) {
                means[mi] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
            double s = 0.0;
            for (std::size_t k = 0; k < v.size(); ++k) s += v[pick(rng)];
            means[mi] = s / static_cast<double>(v.size());
        }
        const double sl = detail::loglog_slope(xs, means);
        if (std::isfinite(sl)) slopes.push_back(sl);
    }
    std::sort(slopes.begin(), slopes.end());
    res.slope_ci = {detail::quantile_sorted(slopes, 0.05), detail::quantile_sorted(slopes, 0.95)};
    return res;
}

// ---------------------------------------------------------------------------
// Spectral-gap sweep
// ---------------------------------------------------------------------------

struct GammaSweepRow
{
    std::size_t chain_index = 0;
    double gamma_abs = 0.0;
    double discount = 0.0;   ///< 2 gamma_abs - gamma_abs^2
    Eigen::Index m = 0;
    double lambda_used = 0.0;
    double sigma_used = 0.0;
    double mean_excess = std::numeric_limits<double>::quiet_NaN();
    double sd_excess = std::numeric_limits<double>::quiet_NaN();
    int failures = 0;
    std::vector<double> replicate_excess; ///< NaN for failed replicates; index = replicate
};

/// Mean excess risk at m = the last m_grid entry for each chain, with the task's
/// noise and target. Replicate seeds are shared across chains so rows can be
/// compared pairwise. Output is ordered by gamma_abs (ties keep input order).
inline std::vector<GammaSweepRow> gamma_sweep(const ExperimentConfig& base, const std::vector<TransitionKernel>& chains)
{
    base.validate();
    if (chains.empty()) throw InvalidArgument("gamma_sweep needs at least one chain");
    const Eigen::Index m = base.m_grid.back();
    const auto n_rep = static_cast<std::size_t>(base.n_replicates);

    std::vector<SyntheticTask> tasks;
    std::vector<GammaSweepRow> rows(chains.size());
    for (std::size_t c = 0; c < chains.size(); ++c) {
        tasks.push_back(base.task.with_chain(chains[c]));
        auto& row = rows[c];
        row.chain_index = c;
        row.gamma_abs = absolute_spectral_gap(chains[c]);
        row.discount = 2.0 * row.gamma_abs - row.gamma_abs * row.gamma_abs;
        row.m = m;
        std::tie(row.lambda_used, row.sigma_used) = base.schedule.resolve(m, row.gamma_abs);
        row.replicate_excess.assign(n_rep, std::numeric_limits<double>::quiet_NaN());
    }
    detail::parallel_for(chains.size() * n_rep, base.jobs, [&](std::size_t idx) {
        const std::size_t c = idx / n_rep;
        const int r = static_cast<int>(idx % n_rep);
        const auto o = detail::run_replicate(tasks[c], base.kernel, base.solver, base.schedule, m, rows[c].gamma_abs,
                                             replicate_seed(base.seed, r));
        rows[c].replicate_excess[static_cast<std::size_t>(r)] = o.ok ? o.excess : std::numeric_limits<double>::quiet_NaN();
    });
    for (auto& row : rows) {
        std::vector<double> ok;
        for (double v : row.replicate_excess)
            if (std::isfinite(v)) ok.push_back(v);
        row.failures = static_cast<int>(row.replicate_excess.size() - ok.size());
        row.mean_excess = detail::mean_of(ok);
        if (ok.size() > 1) {
            double ss = 0.0;
            for (double v : ok) ss += (v - row.mean_excess) * (v - row.mean_excess);
            row.sd_excess = std::sqrt(ss / static_cast<double>(ok.size() - 1));
        }
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const GammaSweepRow& a, const GammaSweepRow& b) { return a.gamma_abs < b.gamma_abs; });
    return rows;
}

/// Per-replicate differences a - b over replicates where both succeeded.
inline std::vector<double> paired_differences(const GammaSweepRow& a, const GammaSweepRow& b)
{
    std::vector<double> d;
    for (std::size_t r = 0; r < std::min(a.replicate_excess.size(), b.replicate_excess.size()); ++r)
        if (std::isfinite(a.replicate_excess[r]) && std::isfinite(b.replicate_excess[r]))
            d.push_back(a.replicate_excess[r] - b.replicate_excess[r]);
    return d;
}

// ---------------------------------------------------------------------------
// Robustness comparison against least squares
// ---------------------------------------------------------------------------

struct RobustnessRow
{
    int replicate = 0;
    double rmr_mse = std::numeric_limits<double>::quiet_NaN();
    double ls_mse = std::numeric_limits<double>::quiet_NaN();
    double rmr_lambda = 0.0;
    double ls_lambda = 0.0;
};

struct RobustnessResult
{
    std::vector<RobustnessRow> rows;
    double mean_rmr_mse = 0.0;
    double mean_ls_mse = 0.0;
    double rmr_win_fraction = 0.0; ///< share of replicates with rmr_mse <= ls_mse
};

struct RobustnessOptions
{
    int n_replicates = 20;
    std::vector<double> lambda_grid{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
    int jobs = 1;
};

/// pi-weighted mean squared distance to f* over the chain states.
inline double state_mse(const SyntheticTask& task, const Eigen::VectorXd& f_on_states)
{
    const Eigen::VectorXd d = f_on_states - task.f_star_on_states();
    return task.pi().dot(d.cwiseProduct(d));
}

/**
 * RMR against least-squares kernel ridge on identical samples. Both
 * estimators scan the same lambda grid and keep their best value per
 * replicate (measured against f*), so neither side is handicapped by tuning.
 * RMR uses config.sigma, config.q and config.phi.
 */
inline RobustnessResult robustness_comparison(const SyntheticTask& task, const HypothesisKernel& kernel,
                                              Eigen::Index m, const RmrConfig& config, std::uint64_t seed,
                                              const RobustnessOptions& opt = {})
{
    config.validate();
    detail::require(m >= 1, "m must be >= 1");
    detail::require(opt.n_replicates >= 1, "n_replicates must be >= 1");
    detail::require(!opt.lambda_grid.empty(), "lambda_grid must not be empty");
    for (double l : opt.lambda_grid) detail::require(l >= 0.0, "lambda_grid entries must be non-negative");

    RobustnessResult res;
    res.rows.resize(static_cast<std::size_t>(opt.n_replicates));
    const Points& states = task.chain().embedding();
    detail::parallel_for(res.rows.size(), opt.jobs, [&](std::size_t r) {
        const Dataset data = generate_dataset(task, m, replicate_seed(seed, static_cast<int>(r)));
        const CenterGroups groups = group_centers(data.x);
        Points reps(groups.size(), data.x.cols());
        for (Eigen::Index g = 0; g < groups.size(); ++g)
            reps.row(g) = data.x.row(groups.representative[static_cast<std::size_t>(g)]);
        // Kernel sections of the distinct centers evaluated at the chain states.
        Eigen::MatrixXd at_states(groups.size(), states.rows());
        for (Eigen::Index g = 0; g < groups.size(); ++g)
            for (Eigen::Index s = 0; s < states.rows(); ++s)
                at_states(g, s) = kernel(row_span(reps, g), row_span(states, s));
        const Eigen::MatrixXd ku = gram_matrix(kernel, reps);

        RobustnessRow row;
        row.replicate = static_cast<int>(r);
        for (double lambda : opt.lambda_grid) {
            RmrConfig cfg = config;
            cfg.lambda = lambda;
            Eigen::VectorXd f_rmr;
            if (cfg.phi.is_gaussian_shaped()) {
                const FitResult fr = detail::hq_reduced(ku, groups, data.y, cfg, Eigen::VectorXd::Zero(m));
                f_rmr = at_states.transpose() * groups.sum_by_group(fr.alpha);
            } else {
                f_rmr = predict(fit(kernel, data.x, data.y, cfg), states);
            }
            const double e_rmr = state_mse(task, f_rmr);
            if (!(e_rmr >= row.rmr_mse)) {
                row.rmr_mse = e_rmr;
                row.rmr_lambda = lambda;
            }
            bool jittered = false;
            const Eigen::VectorXd beta = detail::reduced_weighted_ridge(
                ku, groups, data.y, Eigen::VectorXd::Ones(m), lambda * static_cast<double>(m), jittered);
            const double e_ls = state_mse(task, at_states.transpose() * beta);
            if (!(e_ls >= row.ls_mse)) {
                row.ls_mse = e_ls;
                row.ls_lambda = lambda;
            }
        }
        res.rows[r] = row;
    });
    int wins = 0;
    for (const auto& row : res.rows) {
        res.mean_rmr_mse += row.rmr_mse;
        res.mean_ls_mse += row.ls_mse;
        if (row.rmr_mse <= row.ls_mse) ++wins;
    }
    const double n = static_cast<double>(res.rows.size());
    res.mean_rmr_mse /= n;
    res.mean_ls_mse /= n;
    res.rmr_win_fraction = wins / n;
    return res;
}

// ---------------------------------------------------------------------------
// CSV emission (fixed column order, 12 significant digits)
// ---------------------------------------------------------------------------

inline std::string csv_num(double v) { return format_g(v, 12); }

inline void write_csv(std::ostream& os, const LearningCurveResult& res)
{
    os << "m,gamma_abs,replicate,excess_risk,lambda_used,sigma_used,ok\n";
    for (const auto& r : res.rows)
        os << r.m << ',' << csv_num(r.gamma_abs) << ',' << r.replicate << ',' << csv_num(r.excess_risk) << ','
           << csv_num(r.lambda_used) << ',' << csv_num(r.sigma_used) << ',' << (r.ok ? 1 : 0) << '\n';
}

inline void write_csv(std::ostream& os, const std::vector<GammaSweepRow>& rows)
{
    os << "chain_index,gamma_abs,discount,m,lambda_used,sigma_used,mean_excess_risk,sd_excess_risk,failures\n";
    for (const auto& r : rows)
        os << r.chain_index << ',' << csv_num(r.gamma_abs) << ',' << csv_num(r.discount) << ',' << r.m << ','
           << csv_num(r.lambda_used) << ',' << csv_num(r.sigma_used) << ',' << csv_num(r.mean_excess) << ','
           << csv_num(r.sd_excess) << ',' << r.failures << '\n';
}

inline void write_csv(std::ostream& os, const RobustnessResult& res)
{
    os << "replicate,rmr_mse,ls_mse,rmr_lambda,ls_lambda\n";
    for (const auto& r : res.rows)
        os << r.replicate << ',' << csv_num(r.rmr_mse) << ',' << csv_num(r.ls_mse) << ',' << csv_num(r.rmr_lambda)
           << ',' << csv_num(r.ls_lambda) << '\n';
}

} // namespace modalmr
