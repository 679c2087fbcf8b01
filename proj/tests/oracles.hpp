#pragma once

// Reference computations that do not go through the library code paths they
// check: closed forms, characteristic polynomials and exhaustive grids.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline constexpr double pi = 3.14159265358979323846;

inline double normal_pdf(double x, double s = 1.0)
{
    return std::exp(-0.5 * x * x / (s * s)) / (s * std::sqrt(2.0 * pi));
}

/// Second moment of the Epanechnikov kernel 3/4 (1 - u^2) on [-1, 1]:
/// 3/4 (2/3 - 2/5) = 1/5.
inline constexpr double epanechnikov_second_moment = 0.2;

/// Two-state chain [[1-p, p], [q, 1-q]]: eigenvalues 1 and 1 - p - q,
/// stationary law (q, p) / (p + q).
inline double two_state_gap(double p, double q) { return 1.0 - std::abs(1.0 - p - q); }
inline double two_state_pi0(double p, double q) { return q / (p + q); }

/// Pseudo gap of a reversible two-state chain: max_k (1 - l^{2k}) / k.
inline double two_state_pseudo_gap(double p, double q, int k_max)
{
    const double l = 1.0 - p - q;
    double best = 0.0;
    for (int k = 1; k <= k_max; ++k) best = std::max(best, (1.0 - std::pow(l, 2.0 * k)) / k);
    return best;
}

/// Characteristic polynomial coefficients c_0..c_n (c_n = 1) by Faddeev-LeVerrier.
inline std::vector<double> char_poly(const Eigen::MatrixXd& a)
{
    const Eigen::Index n = a.rows();
    std::vector<double> c(static_cast<std::size_t>(n + 1));
    c[static_cast<std::size_t>(n)] = 1.0;
    Eigen::MatrixXd mk = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 1; k <= n; ++k) {
        mk = a * mk + c[static_cast<std::size_t>(n - k + 1)] * Eigen::MatrixXd::Identity(n, n);
        c[static_cast<std::size_t>(n - k)] = -(a * mk).trace() / static_cast<double>(k);
    }
    return c;
}

/// Roots of the monic polynomial sum c_k z^k by Durand-Kerner iteration.
inline std::vector<std::complex<double>> poly_roots(const std::vector<double>& c)
{
    const std::size_t n = c.size() - 1;
    std::vector<std::complex<double>> z(n);
    for (std::size_t k = 0; k < n; ++k) z[k] = std::pow(std::complex<double>(0.4, 0.9), static_cast<double>(k));
    auto eval = [&](std::complex<double> x) {
        std::complex<double> v = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) v = v * x + c[k];
        return v;
    };
    for (int it = 0; it < 2000; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            std::complex<double> den = 1.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) den *= z[i] - z[j];
            z[i] -= eval(z[i]) / den;
        }
    }
    return z;
}

/// 1 - second largest eigenvalue modulus, from the characteristic polynomial.
inline double absolute_gap_by_roots(const Eigen::MatrixXd& p)
{
    auto roots = poly_roots(char_poly(p));
    std::sort(roots.begin(), roots.end(), [](auto a, auto b) { return std::abs(a - 1.0) < std::abs(b - 1.0); });
    double second = 0.0;
    for (std::size_t k = 1; k < roots.size(); ++k) second = std::max(second, std::abs(roots[k]));
    return 1.0 - second;
}

/**
 * Exhaustive maximum of
 *     (1/(m sigma)) sum_i A exp(-b r_i^2 / sigma^2) - lambda |alpha|_q^q,
 *     r_i = y_i - sum_j g(j, i) alpha_j,
 * over the grid [lo, hi]^m with spacing h, for m <= 3. The innermost axis
 * uses the exact recurrence exp(-b (r - d)^2) = exp(-b r^2) exp(-b (d^2 - 2 r d)).
 */
inline double gaussian_grid_max(const Eigen::MatrixXd& g, const Eigen::VectorXd& y, double amp, double rate,
                                double sigma, double lambda, int q, double lo, double hi, double h)
{
    const int m = static_cast<int>(y.size());
    const int n = static_cast<int>(std::llround((hi - lo) / h)) + 1;
    auto node = [&](int k) { return lo + h * k; };
    auto pen = [&](double a) { return q == 1 ? std::abs(a) : a * a; };
    const double scale = amp / (m * sigma);
    const double c = rate / (sigma * sigma);
    double best = -std::numeric_limits<double>::infinity();

    auto scan_last = [&](const std::vector<double>& r_base, double pen_base) {
        // r_i(a) = r_base_i - g(m-1, i) * a along the last coordinate.
        const int last = m - 1;
        std::vector<double> e(m), f(m), ratio(m);
        for (int i = 0; i < m; ++i) {
            const double d = g(last, i) * h;
            const double r0 = r_base[i] - g(last, i) * lo;
            e[i] = std::exp(-c * r0 * r0);
            f[i] = std::exp(-c * (d * d - 2.0 * r0 * d));
            ratio[i] = std::exp(-2.0 * c * d * d);
        }
        for (int k = 0; k < n; ++k) {
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += e[i];
            best = std::max(best, scale * s - lambda * (pen_base + pen(node(k))));
            for (int i = 0; i < m; ++i) {
                e[i] *= f[i];
                f[i] *= ratio[i];
            }
        }
    };

    std::vector<double> r(static_cast<std::size_t>(m));
    if (m == 1) {
        r[0] = y(0);
        scan_last(r, 0.0);
    } else if (m == 2) {
        for (int a = 0; a < n; ++a) {
            for (int i = 0; i < m; ++i) r[i] = y(i) - g(0, i) * node(a);
            scan_last(r, pen(node(a)));
        }
    } else {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                for (int i = 0; i < m; ++i) r[i] = y(i) - g(0, i) * node(a) - g(1, i) * node(b);
                scan_last(r, pen(node(a)) + pen(node(b)));
            }
    }
    return best;
}

/// Same grid search for an arbitrary representing function (m <= 2).
template <class Phi>
double generic_grid_max(const Eigen::MatrixXd& g, const Eigen::VectorXd& y, Phi&& phi, double sigma, double lambda,
                        int q, double lo, double hi, double h)
{
    const int m = static_cast<int>(y.size());
    const int n = static_cast<int>(std::llround((hi - lo) / h)) + 1;
    auto pen = [&](double a) { return q == 1 ? std::abs(a) : a * a; };
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) {
        const double x0 = lo + h * a;
        for (int b = 0; b < (m == 2 ? n : 1); ++b) {
            const double x1 = m == 2 ? lo + h * b : 0.0;
            double s = 0.0;
            for (int i = 0; i < m; ++i) {
                const double r = y(i) - g(0, i) * x0 - (m == 2 ? g(1, i) * x1 : 0.0);
                s += phi(r / sigma);
            }
            best = std::max(best, s / (m * sigma) - lambda * (pen(x0) + (m == 2 ? pen(x1) : 0.0)));
        }
    }
    return best;
}

} // namespace oracle
