#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace modalmr {

using Rng = std::mt19937_64;

inline constexpr double inv_sqrt_2pi = 0.398942280401432677939946059934;

/// Uniform draw in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Evenly spaced points on [lo, hi], endpoints included. Node k is computed as
/// lo + (hi - lo) * k / (n - 1) so that symmetric grids hit rational nodes exactly.
inline std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double span = hi - lo;
    const double denom = static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k)
        out[k] = lo + span * static_cast<double>(k) / denom;
    out[n - 1] = hi;
    return out;
}

/// Composite trapezoid rule over equally spaced samples with spacing h.
inline double trapezoid(std::span<const double> f, double h)
{
    if (f.size() < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t k = 1; k + 1 < f.size(); ++k) s += f[k];
    return s * h;
}

/// Composite Simpson rule; falls back to trapezoid for an even sample count.
inline double simpson(std::span<const double> f, double h)
{
    const std::size_t n = f.size();
    if (n < 3 || n % 2 == 0) return trapezoid(f, h);
    double s = f.front() + f.back();
    for (std::size_t k = 1; k + 1 < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f[k];
    return s * h / 3.0;
}

/// printf-style "%.<digits>g" formatting.
inline std::string format_g(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

} // namespace modalmr
