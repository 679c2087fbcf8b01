#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "kernels.hpp"
#include "markov.hpp"
#include "numeric.hpp"
#include "solver.hpp"

namespace modalmr {

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

enum class NoiseKind { Gaussian, StudentT, ShiftedGamma, Mixture };

inline std::string_view to_string(NoiseKind k)
{
    switch (k) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::StudentT: return "student-t";
    case NoiseKind::ShiftedGamma: return "shifted-gamma";
    case NoiseKind::Mixture: return "mixture";
    }
    return "?";
}

/**
 * Homoscedastic noise with its mode at 0.
 *
 * ShiftedGamma is Gamma(shape k, scale s) translated by -(k - 1) s so the mode
 * sits at the origin while the mean does not. Construction verifies the mode
 * on a 10001-point grid over [-10 scale, 10 scale] and that the density
 * integrates to one on the quadrature grid; failing configurations throw.
 */
class NoiseModel
{
public:
    static NoiseModel gaussian(double scale)
    {
        detail::require(scale > 0.0, "noise scale must be positive, got " + format_g(scale, 17));
        NoiseModel n(NoiseKind::Gaussian);
        n.scale_ = scale;
        n.finish();
        return n;
    }

    static NoiseModel student_t(double dof, double scale)
    {
        detail::require(dof >= 1.0, "student-t dof must be >= 1, got " + format_g(dof, 17));
        detail::require(scale > 0.0, "noise scale must be positive, got " + format_g(scale, 17));
        NoiseModel n(NoiseKind::StudentT);
        n.scale_ = scale;
        n.param_ = dof;
        n.log_norm_ = std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
                      0.5 * std::log(dof * std::numbers::pi) - std::log(scale);
        n.finish();
        return n;
    }

    static NoiseModel shifted_gamma(double shape, double scale)
    {
        detail::require(shape >= 1.0, "shifted-gamma shape must be >= 1 for a mode at 0, got " + format_g(shape, 17));
        detail::require(scale > 0.0, "noise scale must be positive, got " + format_g(scale, 17));
        NoiseModel n(NoiseKind::ShiftedGamma);
        n.scale_ = scale;
        n.param_ = shape;
        n.log_norm_ = -std::lgamma(shape) - shape * std::log(scale);
        n.finish();
        return n;
    }

    static NoiseModel mixture(std::vector<double> weights, std::vector<NoiseModel> components)
    {
        if (weights.size() != components.size() || weights.empty())
            throw InvalidArgument("mixture needs one weight per component and at least one component");
        double total = 0.0;
        for (double w : weights) {
            detail::require(w > 0.0 && std::isfinite(w), "mixture weights must be positive");
            total += w;
        }
        for (double& w : weights) w /= total;
        NoiseModel n(NoiseKind::Mixture);
        n.scale_ = 0.0;
        for (const auto& c : components) n.scale_ = std::max(n.scale_, c.scale_);
        n.weights_ = std::move(weights);
        n.components_ = std::move(components);
        n.finish();
        return n;
    }

    NoiseKind kind() const noexcept { return kind_; }
    /// Largest component scale; sets the extent of all grids.
    double scale() const noexcept { return scale_; }
    double dof() const noexcept { return param_; }
    double shape() const noexcept { return param_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<NoiseModel>& components() const noexcept { return components_; }

    double density(double t) const
    {
        switch (kind_) {
        case NoiseKind::Gaussian: {
            const double z = t / scale_;
            return inv_sqrt_2pi / scale_ * std::exp(-0.5 * z * z);
        }
        case NoiseKind::StudentT: {
            const double z = t / scale_;
            return std::exp(log_norm_ - 0.5 * (param_ + 1.0) * std::log1p(z * z / param_));
        }
        case NoiseKind::ShiftedGamma: {
            const double x = t + (param_ - 1.0) * scale_;
            if (x < 0.0) return 0.0;
            if (x == 0.0) return param_ == 1.0 ? std::exp(log_norm_) : 0.0;
            return std::exp(log_norm_ + (param_ - 1.0) * std::log(x) - x / scale_);
        }
        case NoiseKind::Mixture: {
            double s = 0.0;
            for (std::size_t j = 0; j < components_.size(); ++j) s += weights_[j] * components_[j].density(t);
            return s;
        }
        }
        return 0.0;
    }

    double operator()(double t) const { return density(t); }

    double sample(Rng& rng) const
    {
        switch (kind_) {
        case NoiseKind::Gaussian: return std::normal_distribution<double>(0.0, scale_)(rng);
        case NoiseKind::StudentT: return scale_ * std::student_t_distribution<double>(param_)(rng);
        case NoiseKind::ShiftedGamma:
            return std::gamma_distribution<double>(param_, scale_)(rng) - (param_ - 1.0) * scale_;
        case NoiseKind::Mixture: {
            const double u = uniform01(rng);
            double acc = 0.0;
            for (std::size_t j = 0; j + 1 < components_.size(); ++j) {
                acc += weights_[j];
                if (u < acc) return components_[j].sample(rng);
            }
            return components_.back().sample(rng);
        }
        }
        return 0.0;
    }

    /// Whether the density has a bounded, piecewise-continuous second
    /// derivative, which the comparison bound needs.
    bool smooth_enough() const
    {
        if (kind_ == NoiseKind::ShiftedGamma) return param_ >= 3.0;
        if (kind_ == NoiseKind::Mixture)
            return std::all_of(components_.begin(), components_.end(), [](const NoiseModel& c) { return c.smooth_enough(); });
        return true;
    }

    /// Half-width L of the symmetric quadrature grid [-L, L]. Starts at
    /// 10 * scale and doubles until the grid captures 1 - 5e-5 of the mass,
    /// which heavy tails such as Student-t with 2 dof need.
    double quadrature_halfwidth() const noexcept { return halfwidth_; }
    double captured_mass() const noexcept { return mass_; }

    std::string describe() const
    {
        switch (kind_) {
        case NoiseKind::Gaussian: return "gaussian(scale=" + format_g(scale_, 12) + ")";
        case NoiseKind::StudentT:
            return "student-t(dof=" + format_g(param_, 12) + ", scale=" + format_g(scale_, 12) + ")";
        case NoiseKind::ShiftedGamma:
            return "shifted-gamma(shape=" + format_g(param_, 12) + ", scale=" + format_g(scale_, 12) + ")";
        case NoiseKind::Mixture: {
            std::string s = "mixture(";
            for (std::size_t j = 0; j < components_.size(); ++j)
                s += (j ? ", " : "") + format_g(weights_[j], 12) + "*" + components_[j].describe();
            return s + ")";
        }
        }
        return "?";
    }

    static constexpr int mode_grid_points = 10001;

private:
    explicit NoiseModel(NoiseKind k) : kind_(k) {}

    void finish()
    {
        // Mode check on the fixed grid.
        const double lim = 10.0 * scale_;
        const auto t = linspace(-lim, lim, mode_grid_points);
        const double step = 2.0 * lim / (mode_grid_points - 1);
        std::size_t best = 0;
        double best_p = -1.0;
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double p = density(t[k]);
            if (p > best_p) {
                best_p = p;
                best = k;
            }
        }
        if (std::abs(t[best]) > step * (1.0 + 1e-9))
            throw InvalidArgument("noise " + describe() + " has its grid mode at " + format_g(t[best], 6) +
                                  ", not at 0");

        // Mass on [-L, L] accumulates shell by shell: the core grid resolves
        // the peak and each doubling adds [L, 2L] on both sides at its own step.
        halfwidth_ = lim;
        mass_ = mass_between(-lim, lim);
        for (int doubling = 0; doubling < 20 && mass_ < 1.0 - 5e-5; ++doubling) {
            mass_ += mass_between(-2.0 * halfwidth_, -halfwidth_) + mass_between(halfwidth_, 2.0 * halfwidth_);
            halfwidth_ *= 2.0;
        }
        if (std::abs(mass_ - 1.0) > 1e-4)
            throw InvalidArgument("noise " + describe() + " integrates to " + format_g(mass_, 8) +
                                  " on its quadrature grid");
    }

    /// Points where the density may jump: the left edge of each shifted gamma.
    void support_edges(std::vector<double>& out) const
    {
        if (kind_ == NoiseKind::ShiftedGamma) out.push_back(-(param_ - 1.0) * scale_);
        for (const auto& c : components_) c.support_edges(out);
    }

    double mass_between(double a, double b) const
    {
        std::vector<double> edges;
        support_edges(edges);
        for (double e : edges)
            if (e > a && e < b) return mass_between(a, std::nextafter(e, a)) + mass_between(e, b);
        return smooth_mass(a, b);
    }

    double smooth_mass(double a, double b) const
    {
        const auto t = linspace(a, b, mode_grid_points);
        std::vector<double> f(t.size());
        for (std::size_t k = 0; k < t.size(); ++k) f[k] = density(t[k]);
        return trapezoid(f, (b - a) / (mode_grid_points - 1));
    }

    NoiseKind kind_;
    double scale_ = 1.0;
    double param_ = 0.0;   ///< dof or shape
    double log_norm_ = 0.0;
    std::vector<double> weights_;
    std::vector<NoiseModel> components_;
    double halfwidth_ = 0.0;
    double mass_ = 0.0;
};

// ---------------------------------------------------------------------------
// Target functions and tasks
// ---------------------------------------------------------------------------

enum class TargetKind { SineExp, Linear, Zero };

inline std::string_view to_string(TargetKind k)
{
    switch (k) {
    case TargetKind::SineExp: return "sine-exp";
    case TargetKind::Linear: return "linear";
    case TargetKind::Zero: return "zero";
    }
    return "?";
}

inline TargetKind parse_target(std::string_view s)
{
    if (s == "sine-exp") return TargetKind::SineExp;
    if (s == "linear") return TargetKind::Linear;
    if (s == "zero") return TargetKind::Zero;
    throw InvalidArgument("unknown target '" + std::string(s) + "' (valid: sine-exp, linear, zero)");
}

/// Mode function f* on [0,1]^d; every kind depends on the first coordinate only.
struct TargetFunction
{
    TargetKind kind = TargetKind::SineExp;
    double slope = 1.0;
    double intercept = 0.0;

    static TargetFunction sine_exp() { return {}; }
    static TargetFunction linear(double slope, double intercept) { return {TargetKind::Linear, slope, intercept}; }
    static TargetFunction zero() { return {TargetKind::Zero, 0.0, 0.0}; }

    /// sup over [0,1] of |sin(2 pi x) e^{-x}|, attained where tan(2 pi x) = 2 pi.
    static double sine_exp_sup()
    {
        const double two_pi = 2.0 * std::numbers::pi;
        const double x0 = std::atan(two_pi) / two_pi;
        return std::sin(two_pi * x0) * std::exp(-x0);
    }

    double operator()(std::span<const double> x) const
    {
        if (x.empty()) throw DimensionMismatch("target needs at least one coordinate");
        switch (kind) {
        case TargetKind::SineExp: {
            static const double norm = sine_exp_sup();
            return std::sin(2.0 * std::numbers::pi * x[0]) * std::exp(-x[0]) / norm;
        }
        case TargetKind::Linear: return slope * x[0] + intercept;
        case TargetKind::Zero: return 0.0;
        }
        return 0.0;
    }
};

/// Y = f*(X) + eps with X driven by a finite Markov chain.
class SyntheticTask
{
public:
    SyntheticTask(TransitionKernel chain, NoiseModel noise, TargetFunction f_star, double bound = 1.0)
        : chain_(std::move(chain)), noise_(std::move(noise)), f_star_(f_star), bound_(bound),
          pi_(stationary_distribution(chain_))
    {
        detail::require(bound > 0.0, "sup-norm bound M must be positive");
        f_on_states_.resize(chain_.n_states());
        for (Eigen::Index s = 0; s < chain_.n_states(); ++s) {
            f_on_states_(s) = f_star_(chain_.state(s));
            if (std::abs(f_on_states_(s)) > bound_ * (1.0 + 1e-12))
                throw InvalidArgument("|f*| = " + format_g(std::abs(f_on_states_(s)), 12) + " at state " +
                                      std::to_string(s) + " exceeds M = " + format_g(bound_, 12));
        }
    }

    const TransitionKernel& chain() const noexcept { return chain_; }
    const NoiseModel& noise() const noexcept { return noise_; }
    const TargetFunction& f_star() const noexcept { return f_star_; }
    double bound() const noexcept { return bound_; }
    const Eigen::VectorXd& pi() const noexcept { return pi_; }
    const Eigen::VectorXd& f_star_on_states() const noexcept { return f_on_states_; }

    /// Same noise and target on another chain with matching embedding dimension.
    SyntheticTask with_chain(TransitionKernel chain) const
    {
        if (chain.dim() != chain_.dim())
            throw DimensionMismatch("chain embedding dimension " + std::to_string(chain.dim()) +
                                    " differs from the task's " + std::to_string(chain_.dim()));
        return SyntheticTask(std::move(chain), noise_, f_star_, bound_);
    }

private:
    TransitionKernel chain_;
    NoiseModel noise_;
    TargetFunction f_star_;
    double bound_;
    Eigen::VectorXd pi_;
    Eigen::VectorXd f_on_states_;
};

// ---------------------------------------------------------------------------
// Risk functionals
// ---------------------------------------------------------------------------

namespace detail {

inline void check_state_values(const SyntheticTask& task, const Eigen::VectorXd& f)
{
    if (f.size() != task.chain().n_states())
        throw DimensionMismatch("expected one value per chain state (" + std::to_string(task.chain().n_states()) +
                                "), got " + std::to_string(f.size()));
}

} // namespace detail

/// (1/(m sigma)) sum_i phi((y_i - f_i) / sigma).
inline double empirical_modal_risk(const Eigen::VectorXd& f_values, const Eigen::VectorXd& y,
                                   const RepresentingFunction& phi, double sigma)
{
    if (f_values.size() != y.size())
        throw DimensionMismatch("f_values has length " + std::to_string(f_values.size()) + " but y has length " +
                                std::to_string(y.size()));
    detail::require(y.size() > 0, "empty sample");
    detail::require(sigma > 0.0, "sigma must be positive, got " + format_g(sigma, 17));
    return detail::data_term(y - f_values, phi, sigma);
}

/// sum_s pi_s p_eps(f(x_s) - f*(x_s)).
inline double true_modal_risk(const SyntheticTask& task, const Eigen::VectorXd& f_on_states)
{
    detail::check_state_values(task, f_on_states);
    double r = 0.0;
    for (Eigen::Index s = 0; s < f_on_states.size(); ++s)
        r += task.pi()(s) * task.noise().density(f_on_states(s) - task.f_star_on_states()(s));
    return r;
}

/**
 * sum_s pi_s integral (1/sigma) phi((t - D_s)/sigma) p_eps(t) dt, D_s = f - f*.
 *
 * Trapezoid on the noise quadrature grid, restricted to the window where
 * phi is non-negligible (|t - D_s| <= 10 sigma, or the compact support) so
 * that small sigma keeps its resolution.
 */
inline double surrogate_risk(const SyntheticTask& task, const Eigen::VectorXd& f_on_states,
                             const RepresentingFunction& phi, double sigma, int quad_points = 20001)
{
    detail::check_state_values(task, f_on_states);
    detail::require(sigma > 0.0, "sigma must be positive, got " + format_g(sigma, 17));
    detail::require(quad_points >= 1001, "quad_points must be >= 1001, got " + std::to_string(quad_points));
    const double l = task.noise().quadrature_halfwidth();
    const double window = sigma * (std::isfinite(phi.support_halfwidth()) ? phi.support_halfwidth() : 10.0);
    std::vector<double> vals(static_cast<std::size_t>(quad_points));
    double r = 0.0;
    for (Eigen::Index s = 0; s < f_on_states.size(); ++s) {
        const double delta = f_on_states(s) - task.f_star_on_states()(s);
        const double lo = std::max(-l, delta - window), hi = std::min(l, delta + window);
        if (!(hi > lo)) continue;
        const auto t = linspace(lo, hi, vals.size());
        for (std::size_t k = 0; k < t.size(); ++k)
            vals[k] = phi((t[k] - delta) / sigma) / sigma * task.noise().density(t[k]);
        r += task.pi()(s) * trapezoid(vals, (hi - lo) / (quad_points - 1));
    }
    return r;
}

/// sup |p''| by central differences on the 10001-point mode grid.
inline double noise_curvature_bound(const NoiseModel& noise)
{
    const double lim = noise.quadrature_halfwidth();
    const int n = NoiseModel::mode_grid_points;
    const auto t = linspace(-lim, lim, n);
    const double h = 2.0 * lim / (n - 1);
    std::vector<double> p(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) p[k] = noise.density(t[k]);
    double sup = 0.0;
    for (std::size_t k = 1; k + 1 < p.size(); ++k)
        sup = std::max(sup, std::abs(p[k + 1] - 2.0 * p[k] + p[k - 1]) / (h * h));
    return sup;
}

struct ComparisonGap
{
    double gap = 0.0;
    double bound = 0.0;
};

/// |R(f*) - R(f) - (R^sigma(f*) - R^sigma(f))| against C1 sigma^2 with
/// C1 = sup|p''| * integral u^2 phi(u) du.
inline ComparisonGap comparison_gap(const SyntheticTask& task, const Eigen::VectorXd& f_on_states,
                                    const RepresentingFunction& phi, double sigma, int quad_points = 20001)
{
    detail::check_state_values(task, f_on_states);
    detail::require(sigma > 0.0 && sigma <= 1.0, "sigma must lie in (0,1], got " + format_g(sigma, 17));
    if (!task.noise().smooth_enough())
        throw NonSmoothNoise("noise " + task.noise().describe() +
                             " lacks a bounded second derivative (shifted-gamma needs shape >= 3)");
    const Eigen::VectorXd& fs = task.f_star_on_states();
    const double r_diff = true_modal_risk(task, fs) - true_modal_risk(task, f_on_states);
    const double s_diff = surrogate_risk(task, fs, phi, sigma, quad_points) -
                          surrogate_risk(task, f_on_states, phi, sigma, quad_points);
    const double c1 = noise_curvature_bound(task.noise()) * check_calibration(phi).second_moment;
    return {std::abs(r_diff - s_diff), c1 * sigma * sigma};
}

inline Eigen::VectorXd predictions_on_states(const SyntheticTask& task, const RmrModel& model)
{
    if (model.train_inputs.cols() != task.chain().dim())
        throw DimensionMismatch("model inputs have dimension " + std::to_string(model.train_inputs.cols()) +
                                ", task has " + std::to_string(task.chain().dim()));
    return predict(model, task.chain().embedding());
}

inline double excess_risk(const SyntheticTask& task, const Eigen::VectorXd& f_on_states)
{
    return true_modal_risk(task, task.f_star_on_states()) - true_modal_risk(task, f_on_states);
}

/// R(f*) - R(f_z) for a fitted model.
inline double excess_risk(const SyntheticTask& task, const RmrModel& model)
{
    return excess_risk(task, predictions_on_states(task, model));
}

} // namespace modalmr
