#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "harness.hpp"
#include "kernels.hpp"
#include "risk.hpp"
#include "solver.hpp"

namespace modalmr {

/// N = sum_i phi(r_i/sigma)/phi(0) - lambda m sigma |alpha|_q^q / phi(0).
inline double breakdown_N(const Eigen::VectorXd& residuals, const Eigen::VectorXd& alpha,
                          const RepresentingFunction& phi, double sigma, double lambda, Penalty q)
{
    detail::require(sigma > 0.0, "sigma must be positive");
    const double phi0 = phi.peak_value();
    double s = 0.0;
    for (Eigen::Index i = 0; i < residuals.size(); ++i) s += phi(residuals(i) / sigma);
    const double m = static_cast<double>(residuals.size());
    return s / phi0 - lambda * m * sigma * penalty_value(alpha, q) / phi0;
}

/// N for a model fitted on (model.train_inputs, y), evaluated with phi.
inline double breakdown_N(const RmrModel& model, const Eigen::VectorXd& y, const RepresentingFunction& phi)
{
    if (y.size() != model.alpha.size())
        throw DimensionMismatch("y has length " + std::to_string(y.size()) + " but the model has " +
                                std::to_string(model.alpha.size()) + " coefficients");
    const Eigen::VectorXd r = y - predict(model, model.train_inputs);
    return breakdown_N(r, model.alpha, phi, model.config.sigma, model.config.lambda, model.config.q);
}

inline double breakdown_N(const RmrModel& model, const Eigen::VectorXd& y)
{
    return breakdown_N(model, y, model.config.phi);
}

struct BreakdownBracket
{
    long low = 1;
    long high = 1;
    double fraction = 0.0;
};

/**
 * Integer bracket around the breakdown count: [floor(N), floor(N) + 1]
 * clamped to [1, m], and the contamination fraction high / (m + high).
 */
inline BreakdownBracket breakdown_bracket(double n_value, long m)
{
    detail::require(n_value >= 0.0 && std::isfinite(n_value), "N must be finite and >= 0, got " + format_g(n_value, 17));
    detail::require(m >= 1, "m must be >= 1");
    const double fl = std::floor(n_value);
    auto clamp = [m](double v) { return static_cast<long>(std::clamp(v, 1.0, static_cast<double>(m))); };
    BreakdownBracket b;
    b.low = clamp(fl);
    b.high = clamp(fl + 1.0);
    b.fraction = static_cast<double>(b.high) / static_cast<double>(m + b.high);
    return b;
}

struct ContaminationRow
{
    long n_outliers = 0;
    double magnitude = 0.0;
    double coef_norm = 0.0;   ///< |alpha|_2 of the refit on the corrupted sample
    double objective = 0.0;
    bool outlier_start = false; ///< the winning refit started from the outlier-anchored point
};

struct BreakdownReport
{
    long m = 0;
    double N = 0.0;
    long n_star_low = 1;
    long n_star_high = 1;
    double breakdown_fraction = 0.0;
    double clean_norm = 0.0;
    std::vector<ContaminationRow> contamination_curve;
};

struct ContaminationOptions
{
    /// Covariate shared by every outlier; defaults to 0.5 in each coordinate.
    std::optional<std::vector<double>> outlier_x;
    /// Also refit from a start that interpolates the outliers and keep the
    /// better of the two local maxima.
    bool multi_start = true;
};

namespace detail {

struct Refit
{
    Eigen::VectorXd alpha;
    double objective = 0.0;
    bool outlier_start = false;
};

inline Refit best_refit(const HypothesisKernel& kernel, const Points& x, const Eigen::VectorXd& y,
                        const RmrConfig& cfg, long n_outliers, bool multi_start)
{
    const Eigen::MatrixXd gram = gram_matrix(kernel, x);
    const RmrModel zero = fit(kernel, x, y, cfg);
    Refit best{zero.alpha, objective(zero.alpha, gram, y, cfg), false};
    if (!multi_start || n_outliers == 0) return best;

    // HQ weights of far outliers underflow to 0 from the zero start, so that
    // start never sees them. Seed a second run on the outliers alone.
    Eigen::VectorXd w = Eigen::VectorXd::Zero(y.size());
    w.tail(n_outliers).setOnes();
    const Eigen::VectorXd anchor = weighted_least_squares_fit(gram, y, w, 0.0);
    const RmrModel alt = fit(kernel, x, y, cfg, anchor);
    const double alt_obj = objective(alt.alpha, gram, y, cfg);
    if (alt_obj > best.objective) best = {alt.alpha, alt_obj, true};
    return best;
}

} // namespace detail

/**
 * Clean fit on a task sample, then for every (n, magnitude) a refit with n
 * extra points (x0, magnitude) appended. Below the bracket the coefficient
 * norm stays bounded as the magnitude grows; above it the outliers win.
 */
inline BreakdownReport contamination_experiment(const SyntheticTask& task, const HypothesisKernel& kernel, long m,
                                                const std::vector<long>& n_outliers_list,
                                                const std::vector<double>& magnitudes, const RmrConfig& config,
                                                std::uint64_t seed, const ContaminationOptions& opt = {})
{
    config.validate();
    detail::require(m >= 10, "contamination experiment needs m >= 10, got " + std::to_string(m));
    for (long n : n_outliers_list) detail::require(n >= 0, "n_outliers entries must be >= 0");
    const Eigen::Index d = task.chain().dim();
    std::vector<double> x0 = opt.outlier_x.value_or(std::vector<double>(static_cast<std::size_t>(d), 0.5));
    if (static_cast<Eigen::Index>(x0.size()) != d)
        throw DimensionMismatch("outlier covariate has dimension " + std::to_string(x0.size()) + ", task has " +
                                std::to_string(d));

    const Dataset data = generate_dataset(task, m, seed);
    const RmrModel clean = fit(kernel, data.x, data.y, config);

    BreakdownReport rep;
    rep.m = m;
    rep.N = breakdown_N(clean, data.y);
    const BreakdownBracket b = breakdown_bracket(std::max(rep.N, 0.0), m);
    rep.n_star_low = b.low;
    rep.n_star_high = b.high;
    rep.breakdown_fraction = b.fraction;
    rep.clean_norm = clean.alpha.norm();

    for (long n : n_outliers_list) {
        for (double mag : magnitudes) {
            Points x(m + n, d);
            Eigen::VectorXd y(m + n);
            x.topRows(m) = data.x;
            y.head(m) = data.y;
            for (long k = 0; k < n; ++k) {
                for (Eigen::Index j = 0; j < d; ++j) x(m + k, j) = x0[static_cast<std::size_t>(j)];
                y(m + k) = mag;
            }
            const auto r = detail::best_refit(kernel, x, y, config, n, opt.multi_start);
            rep.contamination_curve.push_back({n, mag, r.alpha.norm(), r.objective, r.outlier_start});
        }
    }
    return rep;
}

} // namespace modalmr
