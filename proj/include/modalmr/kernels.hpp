#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "numeric.hpp"

namespace modalmr {

/// Row-major point set: one covariate vector per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> row_span(const Points& pts, Eigen::Index i)
{
    return {pts.data() + i * pts.cols(), static_cast<std::size_t>(pts.cols())};
}

// ---------------------------------------------------------------------------
// Representing functions
// ---------------------------------------------------------------------------

enum class PhiKind { Gaussian, Epanechnikov, Quadratic, Triangular, Correntropy };

/**
 * Smoothing kernel of the modal loss.
 *
 * The calibrated kinds integrate to one:
 *   Gaussian      standard normal density
 *   Epanechnikov  0.75 (1 - u^2) on |u| <= 1
 *   Quadratic     biweight, 15/16 (1 - u^2)^2 on |u| <= 1
 *   Triangular    1 - |u| on |u| <= 1
 * Correntropy is the unnormalized exp(-u^2) used by correntropy-style
 * regression; it is symmetric and peaked but does not integrate to one.
 */
class RepresentingFunction
{
public:
    RepresentingFunction() = default;
    explicit RepresentingFunction(PhiKind kind) : kind_(kind) {}

    static RepresentingFunction gaussian() { return RepresentingFunction(PhiKind::Gaussian); }
    static RepresentingFunction epanechnikov() { return RepresentingFunction(PhiKind::Epanechnikov); }
    static RepresentingFunction quadratic() { return RepresentingFunction(PhiKind::Quadratic); }
    static RepresentingFunction triangular() { return RepresentingFunction(PhiKind::Triangular); }
    static RepresentingFunction correntropy() { return RepresentingFunction(PhiKind::Correntropy); }

    PhiKind kind() const noexcept { return kind_; }

    double operator()(double u) const noexcept
    {
        const double a = std::abs(u);
        switch (kind_) {
        case PhiKind::Gaussian: return inv_sqrt_2pi * std::exp(-0.5 * u * u);
        case PhiKind::Epanechnikov: return a <= 1.0 ? 0.75 * (1.0 - a * a) : 0.0;
        case PhiKind::Quadratic: {
            if (a > 1.0) return 0.0;
            const double t = 1.0 - a * a;
            return 0.9375 * t * t;
        }
        case PhiKind::Triangular: return a <= 1.0 ? 1.0 - a : 0.0;
        case PhiKind::Correntropy: return std::exp(-u * u);
        }
        return 0.0;
    }

    /// Derivative; at kinks the symmetric choice (0 at the origin, one-sided
    /// interior value at the support edge) is returned.
    double derivative(double u) const noexcept
    {
        const double a = std::abs(u);
        switch (kind_) {
        case PhiKind::Gaussian: return -u * inv_sqrt_2pi * std::exp(-0.5 * u * u);
        case PhiKind::Epanechnikov: return a < 1.0 ? -1.5 * u : 0.0;
        case PhiKind::Quadratic: return a < 1.0 ? -3.75 * u * (1.0 - u * u) : 0.0;
        case PhiKind::Triangular:
            if (u == 0.0 || a >= 1.0) return 0.0;
            return u > 0.0 ? -1.0 : 1.0;
        case PhiKind::Correntropy: return -2.0 * u * std::exp(-u * u);
        }
        return 0.0;
    }

    double peak_value() const noexcept { return (*this)(0.0); }

    double lipschitz_bound() const noexcept
    {
        switch (kind_) {
        case PhiKind::Gaussian: return inv_sqrt_2pi * std::exp(-0.5); // |phi'| peaks at u = 1
        case PhiKind::Epanechnikov: return 1.5;
        case PhiKind::Quadratic: return 2.5 / std::sqrt(3.0); // at u = 1/sqrt(3)
        case PhiKind::Triangular: return 1.0;
        case PhiKind::Correntropy: return std::sqrt(2.0) * std::exp(-0.5);
        }
        return 0.0;
    }

    /// Half-width of the support; infinite for the Gaussian-shaped kinds.
    double support_halfwidth() const noexcept
    {
        return is_gaussian_shaped() ? std::numeric_limits<double>::infinity() : 1.0;
    }

    /// phi(u) = amplitude * exp(-rate * u^2) for the Gaussian-shaped kinds.
    bool is_gaussian_shaped() const noexcept
    {
        return kind_ == PhiKind::Gaussian || kind_ == PhiKind::Correntropy;
    }
    double gaussian_amplitude() const noexcept { return kind_ == PhiKind::Gaussian ? inv_sqrt_2pi : 1.0; }
    double gaussian_rate() const noexcept { return kind_ == PhiKind::Gaussian ? 0.5 : 1.0; }

    bool is_calibrated() const noexcept { return kind_ != PhiKind::Correntropy; }

    /// Grid that covers the support comfortably for calibration checks.
    double default_grid_halfwidth() const noexcept { return is_gaussian_shaped() ? 10.0 : 2.0; }
    int default_grid_points() const noexcept { return is_gaussian_shaped() ? 100001 : 10001; }

    friend bool operator==(const RepresentingFunction&, const RepresentingFunction&) = default;

private:
    PhiKind kind_ = PhiKind::Gaussian;
};

inline std::string_view to_string(PhiKind k)
{
    switch (k) {
    case PhiKind::Gaussian: return "gaussian";
    case PhiKind::Epanechnikov: return "epanechnikov";
    case PhiKind::Quadratic: return "quadratic";
    case PhiKind::Triangular: return "triangular";
    case PhiKind::Correntropy: return "correntropy";
    }
    return "?";
}

inline RepresentingFunction parse_phi(std::string_view name)
{
    for (auto k : {PhiKind::Gaussian, PhiKind::Epanechnikov, PhiKind::Quadratic,
                   PhiKind::Triangular, PhiKind::Correntropy})
        if (to_string(k) == name) return RepresentingFunction(k);
    throw InvalidArgument("unknown representing function '" + std::string(name) +
                          "' (valid: gaussian, epanechnikov, quadratic, triangular, correntropy)");
}

inline double eval_phi(const RepresentingFunction& phi, double u) { return phi(u); }

struct CalibrationReport
{
    PhiKind kind{};
    double peak_value = 0.0;
    double max_symmetry_violation = 0.0;
    double max_peak_excess = 0.0;   ///< max of phi(u) - phi(0); must be <= 0
    double integral = 0.0;
    double integral_error = 0.0;    ///< |integral - 1|
    double second_moment = 0.0;
    double lipschitz_estimate = 0.0;
    double lipschitz_bound = 0.0;

    bool symmetric() const { return max_symmetry_violation <= 1e-12; }
    bool peaked() const { return max_peak_excess <= 0.0; }
    bool unit_integral() const { return integral_error < 1e-6; }
    bool finite_second_moment() const { return std::isfinite(second_moment); }
    bool lipschitz_ok() const { return lipschitz_estimate <= lipschitz_bound * 1.01; }

    bool passes() const
    {
        return symmetric() && peaked() && unit_integral() && finite_second_moment() && lipschitz_ok();
    }
};

/// Grid-based verification of symmetry, peak, normalization, second moment
/// and Lipschitz constant. Integrals use composite Simpson on the grid.
inline CalibrationReport check_calibration(const RepresentingFunction& phi, double grid_halfwidth,
                                           int grid_points)
{
    detail::require(grid_halfwidth > 0.0, "grid_halfwidth must be positive");
    detail::require(grid_points > 1, "grid_points must be at least 2");

    const auto u = linspace(-grid_halfwidth, grid_halfwidth, static_cast<std::size_t>(grid_points));
    const double h = 2.0 * grid_halfwidth / (grid_points - 1);
    std::vector<double> f(u.size()), u2f(u.size());
    CalibrationReport rep;
    rep.kind = phi.kind();
    rep.peak_value = phi.peak_value();
    rep.lipschitz_bound = phi.lipschitz_bound();

    for (std::size_t k = 0; k < u.size(); ++k) {
        f[k] = phi(u[k]);
        u2f[k] = u[k] * u[k] * f[k];
        rep.max_symmetry_violation = std::max(rep.max_symmetry_violation, std::abs(f[k] - phi(-u[k])));
        rep.max_peak_excess = std::max(rep.max_peak_excess, f[k] - rep.peak_value);
        if (k > 0) rep.lipschitz_estimate = std::max(rep.lipschitz_estimate, std::abs(f[k] - f[k - 1]) / h);
    }
    rep.integral = simpson(f, h);
    rep.integral_error = std::abs(rep.integral - 1.0);
    rep.second_moment = simpson(u2f, h);
    return rep;
}

inline CalibrationReport check_calibration(const RepresentingFunction& phi)
{
    return check_calibration(phi, phi.default_grid_halfwidth(), phi.default_grid_points());
}

// ---------------------------------------------------------------------------
// Hypothesis-space kernels
// ---------------------------------------------------------------------------

enum class KernelKind { GaussianRBF, Laplacian, Polynomial };

/**
 * Kernel K(x, x') spanning the sample-dependent hypothesis space.
 *
 * GaussianRBF  exp(-|x - x'|^2 / bandwidth^2)
 * Laplacian    exp(-|x - x'| / bandwidth)
 * Polynomial   (<x, x'> + offset)^degree
 *
 * Symmetry and positive-definiteness are not required by the solver; the
 * shipped kinds happen to be symmetric. New kinds only need eval().
 */
class HypothesisKernel
{
public:
    HypothesisKernel() : HypothesisKernel(gaussian_rbf(1.0)) {}

    static HypothesisKernel gaussian_rbf(double bandwidth)
    {
        detail::require(bandwidth > 0.0, "kernel bandwidth must be positive");
        return HypothesisKernel(KernelKind::GaussianRBF, {{"bandwidth", bandwidth}});
    }
    static HypothesisKernel laplacian(double bandwidth)
    {
        detail::require(bandwidth > 0.0, "kernel bandwidth must be positive");
        return HypothesisKernel(KernelKind::Laplacian, {{"bandwidth", bandwidth}});
    }
    static HypothesisKernel polynomial(double degree, double offset)
    {
        detail::require(degree >= 0.0 && degree == std::floor(degree), "polynomial degree must be a non-negative integer");
        detail::require(offset >= 0.0, "polynomial offset must be non-negative");
        return HypothesisKernel(KernelKind::Polynomial, {{"degree", degree}, {"offset", offset}});
    }

    KernelKind kind() const noexcept { return kind_; }
    const std::map<std::string, double>& shape_params() const noexcept { return params_; }
    double param(const std::string& key) const { return params_.at(key); }
    bool is_symmetric() const noexcept { return true; }

    double eval(std::span<const double> x, std::span<const double> xp) const
    {
        if (x.size() != xp.size())
            throw DimensionMismatch("kernel inputs have dimensions " + std::to_string(x.size()) +
                                    " and " + std::to_string(xp.size()));
        switch (kind_) {
        case KernelKind::GaussianRBF: {
            double d2 = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) d2 += (x[k] - xp[k]) * (x[k] - xp[k]);
            return std::exp(-d2 / (bw_ * bw_));
        }
        case KernelKind::Laplacian: {
            double d2 = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) d2 += (x[k] - xp[k]) * (x[k] - xp[k]);
            return std::exp(-std::sqrt(d2) / bw_);
        }
        case KernelKind::Polynomial: {
            double dot = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) dot += x[k] * xp[k];
            return std::pow(dot + params_.at("offset"), params_.at("degree"));
        }
        }
        return 0.0;
    }

    double operator()(std::span<const double> x, std::span<const double> xp) const { return eval(x, xp); }

    friend bool operator==(const HypothesisKernel& a, const HypothesisKernel& b)
    {
        return a.kind_ == b.kind_ && a.params_ == b.params_;
    }

private:
    HypothesisKernel(KernelKind kind, std::map<std::string, double> params)
        : kind_(kind), params_(std::move(params))
    {
        auto it = params_.find("bandwidth");
        bw_ = it == params_.end() ? 1.0 : it->second;
    }

    KernelKind kind_;
    std::map<std::string, double> params_;
    double bw_ = 1.0;
};

inline std::string_view to_string(KernelKind k)
{
    switch (k) {
    case KernelKind::GaussianRBF: return "gaussian_rbf";
    case KernelKind::Laplacian: return "laplacian";
    case KernelKind::Polynomial: return "polynomial";
    }
    return "?";
}

inline KernelKind parse_kernel_kind(std::string_view name)
{
    if (name == "gaussian_rbf" || name == "rbf") return KernelKind::GaussianRBF;
    if (name == "laplacian") return KernelKind::Laplacian;
    if (name == "polynomial") return KernelKind::Polynomial;
    throw InvalidArgument("unknown kernel '" + std::string(name) + "' (valid: rbf, laplacian, polynomial)");
}

inline HypothesisKernel make_kernel(KernelKind kind, const std::map<std::string, double>& params)
{
    auto get = [&](const char* key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    switch (kind) {
    case KernelKind::GaussianRBF: return HypothesisKernel::gaussian_rbf(get("bandwidth", 1.0));
    case KernelKind::Laplacian: return HypothesisKernel::laplacian(get("bandwidth", 1.0));
    case KernelKind::Polynomial: return HypothesisKernel::polynomial(get("degree", 1.0), get("offset", 1.0));
    }
    throw InvalidArgument("unknown kernel kind");
}

/// Gram matrix with entry (j, i) = K(x_j, x_i); column i is the vector K_i.
inline Eigen::MatrixXd gram_matrix(const HypothesisKernel& kernel, const Points& inputs)
{
    detail::require<DimensionMismatch>(inputs.cols() >= 1, "inputs must have dimension >= 1");
    const Eigen::Index m = inputs.rows();
    Eigen::MatrixXd g(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            g(j, i) = kernel(row_span(inputs, j), row_span(inputs, i));
    return g;
}

/// Convenience overload for ragged input lists; rejects unequal dimensions.
inline Eigen::MatrixXd gram_matrix(const HypothesisKernel& kernel, const std::vector<std::vector<double>>& inputs)
{
    Points pts(static_cast<Eigen::Index>(inputs.size()), inputs.empty() ? 1 : static_cast<Eigen::Index>(inputs[0].size()));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].size() != inputs[0].size())
            throw DimensionMismatch("input " + std::to_string(i) + " has dimension " +
                                    std::to_string(inputs[i].size()) + ", expected " +
                                    std::to_string(inputs[0].size()));
        for (std::size_t k = 0; k < inputs[i].size(); ++k)
            pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = inputs[i][k];
    }
    return gram_matrix(kernel, pts);
}

} // namespace modalmr
