#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "kernels.hpp"
#include "numeric.hpp"

namespace modalmr {

/// Tolerance on |lambda - 1| when counting unit eigenvalues.
inline constexpr double unit_eigenvalue_tol = 1e-8;

/**
 * Finite-state transition matrix with each state embedded as a covariate
 * vector in [0,1]^d. Rows are validated to be probability vectors.
 */
class TransitionKernel
{
public:
    TransitionKernel(Eigen::MatrixXd p, Points embedding)
        : p_(std::move(p)), embedding_(std::move(embedding))
    {
        const Eigen::Index n = p_.rows();
        if (n < 1 || p_.cols() != n)
            throw NotStochastic("transition matrix must be square and non-empty");
        for (Eigen::Index i = 0; i < n; ++i) {
            if ((p_.row(i).array() < 0.0).any() || !p_.row(i).allFinite())
                throw NotStochastic("row " + std::to_string(i) + " has a negative or non-finite entry");
            const double s = p_.row(i).sum();
            if (std::abs(s - 1.0) > 1e-12)
                throw NotStochastic("row " + std::to_string(i) + " sums to " + format_g(s, 17));
        }
        if (embedding_.rows() != n)
            throw DimensionMismatch("state embedding has " + std::to_string(embedding_.rows()) +
                                    " rows for " + std::to_string(n) + " states");
        if (embedding_.cols() < 1)
            throw DimensionMismatch("state embedding dimension must be >= 1");
        if ((embedding_.array() < 0.0).any() || (embedding_.array() > 1.0).any())
            throw InvalidArgument("state embedding coordinates must lie in [0,1]");
    }

    Eigen::Index n_states() const noexcept { return p_.rows(); }
    Eigen::Index dim() const noexcept { return embedding_.cols(); }
    const Eigen::MatrixXd& matrix() const noexcept { return p_; }
    const Points& embedding() const noexcept { return embedding_; }
    std::span<const double> state(Eigen::Index i) const { return row_span(embedding_, i); }

private:
    Eigen::MatrixXd p_;
    Points embedding_;
};

/// Evenly spaced grid of n points in [0,1]^d, row-major with the last
/// coordinate varying fastest. Uses k = ceil(n^(1/d)) levels per axis.
inline Points grid_embedding(Eigen::Index n, Eigen::Index d)
{
    detail::require(n >= 1 && d >= 1, "grid embedding needs n >= 1 and d >= 1");
    Eigen::Index k = 1;
    while (true) {
        double total = 1.0;
        for (Eigen::Index a = 0; a < d; ++a) total *= static_cast<double>(k);
        if (total >= static_cast<double>(n)) break;
        ++k;
    }
    Points pts(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index idx = i;
        for (Eigen::Index a = d - 1; a >= 0; --a) {
            const Eigen::Index level = idx % k;
            idx /= k;
            pts(i, a) = k == 1 ? 0.0 : static_cast<double>(level) / static_cast<double>(k - 1);
        }
    }
    return pts;
}

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

inline std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& m)
{
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
    const auto& ev = es.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

inline int unit_eigenvalue_multiplicity(const Eigen::MatrixXd& m)
{
    int count = 0;
    for (const auto& l : eigenvalues(m))
        if (std::abs(l - 1.0) < unit_eigenvalue_tol) ++count;
    return count;
}

/// Invariant distribution; requires eigenvalue 1 to be simple.
inline Eigen::VectorXd stationary_distribution(const TransitionKernel& kernel)
{
    const Eigen::MatrixXd& p = kernel.matrix();
    const Eigen::Index n = p.rows();
    if (unit_eigenvalue_multiplicity(p) > 1)
        throw NonUniqueStationary("eigenvalue 1 has multiplicity > 1; the stationary distribution is not unique");

    // pi (P - I) = 0 with the last equation replaced by sum(pi) = 1.
    Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(n, n);
    a.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    Eigen::VectorXd pi = a.fullPivLu().solve(b);
    for (Eigen::Index i = 0; i < n; ++i)
        if (pi(i) < 0.0) pi(i) = 0.0;
    pi /= pi.sum();
    return pi;
}

inline bool is_reversible(const TransitionKernel& kernel, const Eigen::VectorXd& pi, double tol = 1e-10)
{
    const Eigen::MatrixXd& p = kernel.matrix();
    if (pi.size() != p.rows()) throw DimensionMismatch("pi length does not match the number of states");
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = i + 1; j < p.cols(); ++j)
            if (std::abs(pi(i) * p(i, j) - pi(j) * p(j, i)) > tol) return false;
    return true;
}

/// Time reversal P*_ij = pi_j P_ji / pi_i.
inline Eigen::MatrixXd adjoint_kernel(const Eigen::MatrixXd& p, const Eigen::VectorXd& pi)
{
    if (pi.size() != p.rows()) throw DimensionMismatch("pi length does not match the number of states");
    for (Eigen::Index i = 0; i < pi.size(); ++i)
        if (!(pi(i) > 0.0)) throw ZeroMass("pi[" + std::to_string(i) + "] is zero");
    Eigen::MatrixXd adj(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = 0; j < p.cols(); ++j)
            adj(i, j) = pi(j) * p(j, i) / pi(i);
    return adj;
}

inline Eigen::MatrixXd adjoint_kernel(const TransitionKernel& kernel, const Eigen::VectorXd& pi)
{
    return adjoint_kernel(kernel.matrix(), pi);
}

namespace detail {

/// Real spectrum of a matrix that is self-adjoint in L2(pi), via the
/// symmetrization D^{1/2} M D^{-1/2}. Sorted descending.
inline std::vector<double> self_adjoint_spectrum(const Eigen::MatrixXd& m, const Eigen::VectorXd& pi)
{
    const Eigen::VectorXd s = pi.cwiseSqrt();
    Eigen::MatrixXd sym = s.asDiagonal() * m * s.cwiseInverse().asDiagonal();
    sym = 0.5 * (sym + sym.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + sym.rows());
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

/// 1 - sup of the spectrum without the unit eigenvalue; 0 if 1 is not simple.
inline double gap_from_real_spectrum(const std::vector<double>& ev)
{
    int units = 0;
    for (double l : ev)
        if (std::abs(l - 1.0) < unit_eigenvalue_tol) ++units;
    if (units > 1) return 0.0;
    double sup = -std::numeric_limits<double>::infinity();
    bool skipped = false;
    for (double l : ev) {
        if (!skipped && std::abs(l - 1.0) < unit_eigenvalue_tol) {
            skipped = true;
            continue;
        }
        sup = std::max(sup, l);
    }
    if (sup == -std::numeric_limits<double>::infinity()) return 1.0; // single state
    return 1.0 - sup;
}

} // namespace detail

/// Absolute spectral gap 1 - max |lambda| over the non-unit spectrum.
inline double absolute_spectral_gap(const TransitionKernel& kernel)
{
    const Eigen::MatrixXd& p = kernel.matrix();
    const auto ev = eigenvalues(p);
    int units = 0;
    std::size_t unit_idx = ev.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ev.size(); ++k) {
        const double dist = std::abs(ev[k] - 1.0);
        if (dist < unit_eigenvalue_tol) ++units;
        if (dist < best) {
            best = dist;
            unit_idx = k;
        }
    }
    if (units != 1) return 0.0;

    // Reversible chains: use the symmetrized operator for accurate real eigenvalues.
    const Eigen::VectorXd pi = stationary_distribution(kernel);
    if ((pi.array() > 0.0).all() && is_reversible(kernel, pi)) {
        auto sev = detail::self_adjoint_spectrum(p, pi);
        double sup = 0.0;
        for (std::size_t k = 1; k < sev.size(); ++k) sup = std::max(sup, std::abs(sev[k]));
        return std::clamp(1.0 - sup, 0.0, 1.0);
    }
    double sup = 0.0;
    for (std::size_t k = 0; k < ev.size(); ++k)
        if (k != unit_idx) sup = std::max(sup, std::abs(ev[k]));
    return std::clamp(1.0 - sup, 0.0, 1.0);
}

/// Spectral gap of a reversible chain; lies in [0, 2].
inline double spectral_gap_reversible(const TransitionKernel& kernel)
{
    if (unit_eigenvalue_multiplicity(kernel.matrix()) > 1) return 0.0;
    const Eigen::VectorXd pi = stationary_distribution(kernel);
    if (!is_reversible(kernel, pi)) throw NotReversible("chain does not satisfy detailed balance");
    return detail::gap_from_real_spectrum(detail::self_adjoint_spectrum(kernel.matrix(), pi));
}

/// max over k = 1..k_max of gap((P*)^k P^k) / k.
inline double pseudo_spectral_gap(const TransitionKernel& kernel, int k_max)
{
    detail::require(k_max >= 1, "k_max must be >= 1");
    if (unit_eigenvalue_multiplicity(kernel.matrix()) > 1) return 0.0;
    const Eigen::VectorXd pi = stationary_distribution(kernel);
    const Eigen::MatrixXd& p = kernel.matrix();
    const Eigen::MatrixXd adj = adjoint_kernel(p, pi);
    Eigen::MatrixXd pk = p, adjk = adj;
    double best = 0.0;
    for (int k = 1; k <= k_max; ++k) {
        if (k > 1) {
            pk = pk * p;
            adjk = adjk * adj;
        }
        const double g = detail::gap_from_real_spectrum(detail::self_adjoint_spectrum(adjk * pk, pi));
        best = std::max(best, g / k);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Sampling and mixing
// ---------------------------------------------------------------------------

/// Initial law of a sampled path: the stationary distribution or a fixed state.
class ChainStart
{
public:
    static ChainStart stationary() { return ChainStart(std::nullopt); }
    static ChainStart state(Eigen::Index i) { return ChainStart(i); }
    bool is_stationary() const noexcept { return !state_; }
    Eigen::Index index() const { return *state_; }

private:
    explicit ChainStart(std::optional<Eigen::Index> s) : state_(s) {}
    std::optional<Eigen::Index> state_;
};

namespace detail {

inline Eigen::Index draw_from_cdf(const std::vector<double>& cdf, double u)
{
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return static_cast<Eigen::Index>(it - cdf.begin());
}

inline std::vector<double> cumulative(const Eigen::Ref<const Eigen::RowVectorXd>& probs)
{
    std::vector<double> cdf(static_cast<std::size_t>(probs.size()));
    double acc = 0.0;
    for (Eigen::Index j = 0; j < probs.size(); ++j) {
        acc += probs(j);
        cdf[static_cast<std::size_t>(j)] = acc;
    }
    cdf.back() = std::max(cdf.back(), 1.0);
    return cdf;
}

} // namespace detail

/// State path of length m. Deterministic given the seed.
inline std::vector<Eigen::Index> sample_chain(const TransitionKernel& kernel, Eigen::Index m, std::uint64_t seed,
                                              ChainStart start = ChainStart::stationary())
{
    detail::require(m >= 1, "sample size m must be >= 1");
    const Eigen::MatrixXd& p = kernel.matrix();
    const Eigen::Index n = p.rows();
    Rng rng(seed);

    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) rows.push_back(detail::cumulative(p.row(i)));

    std::vector<Eigen::Index> path(static_cast<std::size_t>(m));
    if (start.is_stationary()) {
        const Eigen::VectorXd pi = stationary_distribution(kernel);
        path[0] = detail::draw_from_cdf(detail::cumulative(pi.transpose()), uniform01(rng));
    } else {
        if (start.index() < 0 || start.index() >= n)
            throw InvalidArgument("start state " + std::to_string(start.index()) + " out of range [0, " +
                                  std::to_string(n) + ")");
        path[0] = start.index();
    }
    for (std::size_t t = 1; t < path.size(); ++t)
        path[t] = detail::draw_from_cdf(rows[static_cast<std::size_t>(path[t - 1])], uniform01(rng));
    return path;
}

/// Total-variation distance between P^t(start, .) and pi for t = 1..t_max.
inline std::vector<std::pair<int, double>> tv_mixing_curve(const TransitionKernel& kernel, Eigen::Index start_state,
                                                           int t_max)
{
    detail::require(t_max >= 1, "t_max must be >= 1");
    const Eigen::Index n = kernel.n_states();
    if (start_state < 0 || start_state >= n) throw InvalidArgument("start_state out of range");
    const Eigen::VectorXd pi = stationary_distribution(kernel);
    Eigen::RowVectorXd dist = Eigen::RowVectorXd::Zero(n);
    dist(start_state) = 1.0;
    std::vector<std::pair<int, double>> curve;
    curve.reserve(static_cast<std::size_t>(t_max));
    for (int t = 1; t <= t_max; ++t) {
        dist = dist * kernel.matrix();
        curve.emplace_back(t, 0.5 * (dist.transpose() - pi).cwiseAbs().sum());
    }
    return curve;
}

struct ChainDiagnostics
{
    Eigen::VectorXd pi;
    bool reversible = false;
    /// Spectral gap; for non-reversible chains, that of (P + P*)/2.
    double gamma = 0.0;
    double gamma_abs = 0.0;
    double gamma_pseudo = 0.0;
    /// Worst-case over start states of the TV distance to pi.
    std::vector<std::pair<int, double>> tv_decay;
};

inline ChainDiagnostics diagnose_chain(const TransitionKernel& kernel, int k_max = 10, int t_max = 50)
{
    ChainDiagnostics d;
    d.pi = stationary_distribution(kernel);
    d.reversible = is_reversible(kernel, d.pi);
    if (d.reversible) {
        d.gamma = spectral_gap_reversible(kernel);
    } else {
        const Eigen::MatrixXd sym = 0.5 * (kernel.matrix() + adjoint_kernel(kernel, d.pi));
        d.gamma = detail::gap_from_real_spectrum(detail::self_adjoint_spectrum(sym, d.pi));
    }
    d.gamma_abs = absolute_spectral_gap(kernel);
    d.gamma_pseudo = pseudo_spectral_gap(kernel, k_max);

    std::vector<double> worst(static_cast<std::size_t>(t_max), 0.0);
    for (Eigen::Index s = 0; s < kernel.n_states(); ++s) {
        const auto c = tv_mixing_curve(kernel, s, t_max);
        for (std::size_t t = 0; t < c.size(); ++t) worst[t] = std::max(worst[t], c[t].second);
    }
    for (int t = 1; t <= t_max; ++t) d.tv_decay.emplace_back(t, worst[static_cast<std::size_t>(t - 1)]);
    return d;
}

// ---------------------------------------------------------------------------
// Built-in families
// ---------------------------------------------------------------------------

enum class ChainFamilyKind { IID, TwoState, LazyRandomWalk, MetropolisGrid, Sticky, Cycle };

/**
 * Parametrized chain family.
 *
 *   IID(n, target)             every row equals target (uniform by default)
 *   TwoState(p, q)             [[1-p, p], [q, 1-q]]
 *   LazyRandomWalk(n, l)       hold with prob l, else step +-1 (reflecting)
 *   MetropolisGrid(n, target)  Metropolis walk on the path graph toward target
 *   Sticky(n, g)               g * (IID uniform) + (1 - g) * I; absolute gap is g
 *   Cycle(n)                   deterministic i -> i+1 mod n
 */
struct ChainFamily
{
    ChainFamilyKind kind = ChainFamilyKind::IID;
    Eigen::Index n = 2;
    double p = 0.5;           ///< TwoState
    double q = 0.5;           ///< TwoState
    double laziness = 0.5;    ///< LazyRandomWalk
    double gamma = 1.0;       ///< Sticky
    std::vector<double> target; ///< IID / MetropolisGrid; empty means uniform

    static ChainFamily iid(Eigen::Index n, std::vector<double> target = {})
    {
        return {.kind = ChainFamilyKind::IID, .n = n, .target = std::move(target)};
    }
    static ChainFamily two_state(double p, double q)
    {
        return {.kind = ChainFamilyKind::TwoState, .n = 2, .p = p, .q = q, .target = {}};
    }
    static ChainFamily lazy_random_walk(Eigen::Index n, double laziness)
    {
        return {.kind = ChainFamilyKind::LazyRandomWalk, .n = n, .laziness = laziness, .target = {}};
    }
    static ChainFamily metropolis_grid(Eigen::Index n, std::vector<double> target = {})
    {
        return {.kind = ChainFamilyKind::MetropolisGrid, .n = n, .target = std::move(target)};
    }
    static ChainFamily sticky(Eigen::Index n, double gamma)
    {
        return {.kind = ChainFamilyKind::Sticky, .n = n, .gamma = gamma, .target = {}};
    }
    static ChainFamily cycle(Eigen::Index n) { return {.kind = ChainFamilyKind::Cycle, .n = n, .target = {}}; }
};

inline std::string_view to_string(ChainFamilyKind k)
{
    switch (k) {
    case ChainFamilyKind::IID: return "iid";
    case ChainFamilyKind::TwoState: return "two-state";
    case ChainFamilyKind::LazyRandomWalk: return "lazy-random-walk";
    case ChainFamilyKind::MetropolisGrid: return "metropolis-grid";
    case ChainFamilyKind::Sticky: return "sticky";
    case ChainFamilyKind::Cycle: return "cycle";
    }
    return "?";
}

inline ChainFamilyKind parse_chain_family(std::string_view name)
{
    for (auto k : {ChainFamilyKind::IID, ChainFamilyKind::TwoState, ChainFamilyKind::LazyRandomWalk,
                   ChainFamilyKind::MetropolisGrid, ChainFamilyKind::Sticky, ChainFamilyKind::Cycle})
        if (to_string(k) == name) return k;
    throw InvalidArgument("unknown chain family '" + std::string(name) +
                          "' (valid: iid, two-state, lazy-random-walk, metropolis-grid, sticky, cycle)");
}

namespace detail {

inline Eigen::VectorXd normalized_target(const std::vector<double>& target, Eigen::Index n)
{
    if (target.empty()) return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    if (static_cast<Eigen::Index>(target.size()) != n)
        throw InvalidArgument("target has " + std::to_string(target.size()) + " entries for n = " + std::to_string(n));
    Eigen::VectorXd t(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(target[static_cast<std::size_t>(i)] > 0.0)) throw InvalidArgument("target weights must be positive");
        t(i) = target[static_cast<std::size_t>(i)];
    }
    return t / t.sum();
}

inline void require_probability(double v, const char* name)
{
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string(name) + " must lie in [0,1], got " + format_g(v, 17));
}

} // namespace detail

inline TransitionKernel builtin_chain(const ChainFamily& fam, Eigen::Index d = 1)
{
    detail::require(d >= 1, "embedding dimension d must be >= 1");
    const Eigen::Index n = fam.kind == ChainFamilyKind::TwoState ? 2 : fam.n;
    detail::require(n >= 2, "chain needs n >= 2 states");
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);

    switch (fam.kind) {
    case ChainFamilyKind::IID: {
        const Eigen::VectorXd t = detail::normalized_target(fam.target, n);
        for (Eigen::Index i = 0; i < n; ++i) p.row(i) = t.transpose();
        break;
    }
    case ChainFamilyKind::TwoState:
        detail::require_probability(fam.p, "p");
        detail::require_probability(fam.q, "q");
        p << 1.0 - fam.p, fam.p, fam.q, 1.0 - fam.q;
        break;
    case ChainFamilyKind::LazyRandomWalk: {
        detail::require_probability(fam.laziness, "laziness");
        const double move = 0.5 * (1.0 - fam.laziness);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i, i) = fam.laziness;
            if (i > 0) p(i, i - 1) = move; else p(i, i) += move;
            if (i + 1 < n) p(i, i + 1) = move; else p(i, i) += move;
        }
        break;
    }
    case ChainFamilyKind::MetropolisGrid: {
        const Eigen::VectorXd t = detail::normalized_target(fam.target, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double stay = 1.0;
            for (Eigen::Index j : {i - 1, i + 1}) {
                if (j < 0 || j >= n) continue;
                const double acc = 0.5 * std::min(1.0, t(j) / t(i));
                p(i, j) = acc;
                stay -= acc;
            }
            p(i, i) = stay;
        }
        break;
    }
    case ChainFamilyKind::Sticky: {
        detail::require_probability(fam.gamma, "gamma");
        detail::require(fam.gamma > 0.0, "sticky chain needs gamma > 0");
        p.setConstant(fam.gamma / static_cast<double>(n));
        p.diagonal().array() += 1.0 - fam.gamma;
        break;
    }
    case ChainFamilyKind::Cycle:
        for (Eigen::Index i = 0; i < n; ++i) p(i, (i + 1) % n) = 1.0;
        break;
    }
    // Exact row normalization guards against accumulated rounding.
    for (Eigen::Index i = 0; i < n; ++i) p.row(i) /= p.row(i).sum();
    return TransitionKernel(std::move(p), grid_embedding(n, d));
}

} // namespace modalmr
