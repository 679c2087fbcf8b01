#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "kernels.hpp"

namespace modalmr {

enum class Penalty { L1, L2 };

inline std::string_view to_string(Penalty q) { return q == Penalty::L1 ? "1" : "2"; }

inline Penalty parse_penalty(std::string_view s)
{
    if (s == "1" || s == "L1" || s == "l1") return Penalty::L1;
    if (s == "2" || s == "L2" || s == "l2") return Penalty::L2;
    throw InvalidArgument("unknown penalty q '" + std::string(s) + "' (valid: 1, 2)");
}

struct RmrConfig
{
    RepresentingFunction phi = RepresentingFunction::gaussian();
    double sigma = 1.0;     ///< modal bandwidth
    double lambda = 0.01;   ///< weight of the coefficient penalty
    Penalty q = Penalty::L2;
    int max_hq_iters = 200;
    double tol = 1e-8;      ///< stop once the objective gains less than this
    int inner_max_iters = 100;  ///< coordinate-descent sweeps per HQ step (q = 1)
    int max_grad_iters = 20000; ///< iteration cap for fit_gradient

    void validate() const
    {
        if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive, got " + format_g(sigma, 17));
        if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative, got " + format_g(lambda, 17));
        if (max_hq_iters < 1) throw InvalidArgument("max_hq_iters must be >= 1");
        if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
        if (inner_max_iters < 1) throw InvalidArgument("inner_max_iters must be >= 1");
        if (max_grad_iters < 1) throw InvalidArgument("max_grad_iters must be >= 1");
    }
};

enum class Termination {
    Converged,      ///< objective gain fell below tol
    MaxIterations,
    Stalled,        ///< a step failed to increase the objective; previous iterate kept
};

inline std::string_view to_string(Termination t)
{
    switch (t) {
    case Termination::Converged: return "converged";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::Stalled: return "stalled";
    }
    return "?";
}

struct FitResult
{
    Eigen::VectorXd alpha;
    std::vector<double> objective_trace; ///< initial value, then one entry per accepted iteration
    Termination termination = Termination::Converged;
    bool jittered = false;               ///< a linear solve needed the diagonal jitter
};

/// Fitted expansion f(x) = sum_i alpha_i K(x_i, x).
struct RmrModel
{
    Eigen::VectorXd alpha;
    Points train_inputs;
    HypothesisKernel kernel;
    RmrConfig config;
    std::vector<double> objective_trace;
    Termination termination = Termination::Converged;
};

inline double penalty_value(const Eigen::VectorXd& alpha, Penalty q)
{
    return q == Penalty::L1 ? alpha.lpNorm<1>() : alpha.squaredNorm();
}

namespace detail {

inline void check_fit_dims(const Eigen::MatrixXd& gram, const Eigen::VectorXd& y)
{
    if (gram.rows() != gram.cols())
        throw DimensionMismatch("gram must be square, got " + std::to_string(gram.rows()) + "x" +
                                std::to_string(gram.cols()));
    if (y.size() != gram.rows())
        throw DimensionMismatch("y has length " + std::to_string(y.size()) + " but gram is " +
                                std::to_string(gram.rows()) + "x" + std::to_string(gram.cols()));
    if (gram.rows() < 1) throw DimensionMismatch("empty training set");
}

inline double data_term(const Eigen::VectorXd& residuals, const RepresentingFunction& phi, double sigma)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < residuals.size(); ++i) s += phi(residuals(i) / sigma);
    return s / (static_cast<double>(residuals.size()) * sigma);
}

} // namespace detail

/// Residuals r_i = y_i - K_i^T alpha, with K_i the i-th column of the gram matrix.
inline Eigen::VectorXd residuals(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& gram, const Eigen::VectorXd& y)
{
    detail::check_fit_dims(gram, y);
    if (alpha.size() != y.size())
        throw DimensionMismatch("alpha has length " + std::to_string(alpha.size()) + ", expected " +
                                std::to_string(y.size()));
    return y - gram.transpose() * alpha;
}

/// (1 / (m sigma)) sum_i phi(r_i / sigma) - lambda |alpha|_q^q.
inline double objective(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& gram, const Eigen::VectorXd& y,
                        const RepresentingFunction& phi, const RmrConfig& config)
{
    const Eigen::VectorXd r = residuals(alpha, gram, y);
    return detail::data_term(r, phi, config.sigma) - config.lambda * penalty_value(alpha, config.q);
}

inline double objective(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& gram, const Eigen::VectorXd& y,
                        const RmrConfig& config)
{
    return objective(alpha, gram, y, config.phi, config);
}

/// Gradient of the smooth part of the objective: the data term, plus the
/// ridge penalty when q = 2.
inline Eigen::VectorXd objective_gradient(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& gram,
                                          const Eigen::VectorXd& y, const RepresentingFunction& phi,
                                          const RmrConfig& config)
{
    const Eigen::VectorXd r = residuals(alpha, gram, y);
    const double m = static_cast<double>(y.size());
    Eigen::VectorXd dphi(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) dphi(i) = phi.derivative(r(i) / config.sigma);
    Eigen::VectorXd g = -(gram * dphi) / (m * config.sigma * config.sigma);
    if (config.q == Penalty::L2) g -= 2.0 * config.lambda * alpha;
    return g;
}

// ---------------------------------------------------------------------------
// Duplicate centers
// ---------------------------------------------------------------------------

/**
 * Partition of training indices into groups of identical centers. Two
 * indices share a group when their gram rows and columns coincide, i.e. the
 * hypothesis space cannot tell them apart. For such groups the objective
 * depends on alpha only through the group sums and the penalty, so the HQ
 * subproblems can be solved exactly in the reduced coordinates.
 */
struct CenterGroups
{
    std::vector<Eigen::Index> group_of;        ///< training index -> group
    std::vector<Eigen::Index> representative;  ///< group -> first training index
    Eigen::VectorXd count;                     ///< group sizes

    Eigen::Index size() const { return static_cast<Eigen::Index>(representative.size()); }

    Eigen::VectorXd sum_by_group(const Eigen::VectorXd& v) const
    {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(size());
        for (std::size_t i = 0; i < group_of.size(); ++i) out(group_of[i]) += v(static_cast<Eigen::Index>(i));
        return out;
    }

    /// Even split of group coefficients; minimizes every l_q norm among splits.
    Eigen::VectorXd spread(const Eigen::VectorXd& beta) const
    {
        Eigen::VectorXd alpha(static_cast<Eigen::Index>(group_of.size()));
        for (std::size_t i = 0; i < group_of.size(); ++i)
            alpha(static_cast<Eigen::Index>(i)) = beta(group_of[i]) / count(group_of[i]);
        return alpha;
    }
};

namespace detail {

template <class KeyOf>
CenterGroups group_by_key(Eigen::Index m, KeyOf&& key_of)
{
    CenterGroups g;
    g.group_of.resize(static_cast<std::size_t>(m));
    std::unordered_map<std::size_t, std::vector<Eigen::Index>> buckets;
    std::vector<double> counts;
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::vector<double> key = key_of(i);
        std::size_t h = key.size();
        for (double v : key) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h ^= std::hash<std::uint64_t>{}(bits) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        auto& bucket = buckets[h];
        Eigen::Index found = -1;
        for (Eigen::Index grp : bucket)
            if (key_of(g.representative[static_cast<std::size_t>(grp)]) == key) {
                found = grp;
                break;
            }
        if (found < 0) {
            found = static_cast<Eigen::Index>(g.representative.size());
            g.representative.push_back(i);
            counts.push_back(0.0);
            bucket.push_back(found);
        }
        g.group_of[static_cast<std::size_t>(i)] = found;
        counts[static_cast<std::size_t>(found)] += 1.0;
    }
    g.count = Eigen::Map<Eigen::VectorXd>(counts.data(), static_cast<Eigen::Index>(counts.size()));
    return g;
}

} // namespace detail

inline CenterGroups group_centers(const Eigen::MatrixXd& gram)
{
    const Eigen::Index m = gram.rows();
    return detail::group_by_key(m, [&](Eigen::Index i) {
        std::vector<double> key(static_cast<std::size_t>(2 * m));
        for (Eigen::Index j = 0; j < m; ++j) {
            key[static_cast<std::size_t>(j)] = gram(i, j);
            key[static_cast<std::size_t>(m + j)] = gram(j, i);
        }
        return key;
    });
}

inline CenterGroups group_centers(const Points& inputs)
{
    return detail::group_by_key(inputs.rows(), [&](Eigen::Index i) {
        const auto r = row_span(inputs, i);
        return std::vector<double>(r.begin(), r.end());
    });
}

/// Gram matrix restricted to group representatives.
inline Eigen::MatrixXd reduced_gram(const Eigen::MatrixXd& gram, const CenterGroups& groups)
{
    const Eigen::Index n = groups.size();
    Eigen::MatrixXd ku(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b)
            ku(a, b) = gram(groups.representative[static_cast<std::size_t>(a)],
                            groups.representative[static_cast<std::size_t>(b)]);
    return ku;
}

namespace detail {

/// Solves the SPD system A x = b. When the Cholesky factorization fails or is
/// numerically singular, 1e-10 * trace(A) / n is added to the diagonal once.
inline Eigen::VectorXd solve_spd(Eigen::MatrixXd a, const Eigen::VectorXd& b, bool& jittered)
{
    {
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() == Eigen::Success && llt.rcond() > 1e-14) {
            Eigen::VectorXd x = llt.solve(b);
            if (x.allFinite()) return x;
        }
    }
    const double n = static_cast<double>(a.rows());
    const double jitter = 1e-10 * std::max(a.trace(), std::numeric_limits<double>::min()) / n;
    a.diagonal().array() += jitter;
    jittered = true;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
        throw SingularSystem("weighted least-squares system is singular even after a diagonal jitter of " +
                             format_g(jitter, 6));
    Eigen::VectorXd x = llt.solve(b);
    if (!x.allFinite()) throw SingularSystem("weighted least-squares solve produced non-finite coefficients");
    return x;
}

/// Minimizes sum_i w_i (y_i - f(x_i))^2 + mu * sum_g beta_g^2 / count_g over
/// the group coefficients beta, where f depends on beta through ku.
inline Eigen::VectorXd reduced_weighted_ridge(const Eigen::MatrixXd& ku, const CenterGroups& groups,
                                              const Eigen::VectorXd& y, const Eigen::VectorXd& w, double mu,
                                              bool& jittered)
{
    const Eigen::VectorXd wsum = groups.sum_by_group(w);
    const Eigen::VectorXd ysum = groups.sum_by_group(w.cwiseProduct(y));
    Eigen::MatrixXd a = ku * wsum.asDiagonal() * ku.transpose();
    a.diagonal() += mu * groups.count.cwiseInverse();
    a = 0.5 * (a + a.transpose());
    return solve_spd(std::move(a), ku * ysum, jittered);
}

/// Cyclic coordinate descent on 0.5 b^T H b - g^T b + lambda |b|_1, warm-started.
inline void lasso_coordinate_descent(const Eigen::MatrixXd& h, const Eigen::VectorXd& g, double lambda,
                                     Eigen::VectorXd& beta, int sweeps)
{
    Eigen::VectorXd hb = h * beta;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < beta.size(); ++j) {
            const double hjj = h(j, j);
            double next = 0.0;
            if (hjj > 0.0) {
                const double z = g(j) - (hb(j) - hjj * beta(j));
                next = (z > lambda ? z - lambda : (z < -lambda ? z + lambda : 0.0)) / hjj;
            }
            const double delta = next - beta(j);
            if (delta != 0.0) {
                hb += delta * h.col(j);
                beta(j) = next;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        if (max_delta <= 1e-14 * (1.0 + beta.cwiseAbs().maxCoeff())) break;
    }
}

/**
 * Half-quadratic ascent in reduced coordinates.
 *
 * For phi(u) = A exp(-c u^2) the map t -> exp(-c t / sigma^2) is convex, so
 * its tangent at the current squared residual minorizes it. Maximizing the
 * minorant of the objective is the weighted problem
 *
 *     min  (A c / (m sigma^3)) sum_i w_i r_i^2 + lambda |alpha|_q^q,
 *     w_i = exp(-c r_i^2 / sigma^2),
 *
 * whose q = 2 stationarity condition reads
 *
 *     (G W G^T + (lambda m sigma^3 / (A c)) I) alpha = G W y.
 *
 * Each step therefore cannot decrease the objective. The q = 1 subproblem is
 * solved by coordinate descent warm-started at the current iterate, which
 * also keeps the minorant non-increasing.
 */
inline FitResult hq_reduced(const Eigen::MatrixXd& ku, const CenterGroups& groups, const Eigen::VectorXd& y,
                            const RmrConfig& config, const Eigen::VectorXd& alpha0)
{
    const RepresentingFunction& phi = config.phi;
    const double m = static_cast<double>(y.size());
    const double sigma = config.sigma;
    const double amp = phi.gaussian_amplitude();
    const double rate = phi.gaussian_rate();
    const double curvature = amp * rate / (m * sigma * sigma * sigma);

    auto residuals_of = [&](const Eigen::VectorXd& beta) {
        const Eigen::VectorXd pred = ku.transpose() * beta;
        Eigen::VectorXd r(y.size());
        for (Eigen::Index i = 0; i < y.size(); ++i) r(i) = y(i) - pred(groups.group_of[static_cast<std::size_t>(i)]);
        return r;
    };
    auto objective_of = [&](const Eigen::VectorXd& alpha, const Eigen::VectorXd& r) {
        return data_term(r, phi, sigma) - config.lambda * penalty_value(alpha, config.q);
    };

    FitResult out;
    Eigen::VectorXd alpha = alpha0;
    Eigen::VectorXd beta = groups.sum_by_group(alpha);
    Eigen::VectorXd r = residuals_of(beta);
    double obj = objective_of(alpha, r);
    out.objective_trace.push_back(obj);
    out.termination = Termination::MaxIterations;

    for (int it = 0; it < config.max_hq_iters; ++it) {
        Eigen::VectorXd w(r.size());
        for (Eigen::Index i = 0; i < r.size(); ++i) w(i) = std::exp(-rate * r(i) * r(i) / (sigma * sigma));

        Eigen::VectorXd next_beta;
        if (config.q == Penalty::L2) {
            next_beta = reduced_weighted_ridge(ku, groups, y, w, config.lambda / curvature, out.jittered);
        } else {
            const Eigen::VectorXd wsum = groups.sum_by_group(w);
            const Eigen::VectorXd ysum = groups.sum_by_group(w.cwiseProduct(y));
            const Eigen::MatrixXd h = 2.0 * curvature * ku * wsum.asDiagonal() * ku.transpose();
            const Eigen::VectorXd g = 2.0 * curvature * ku * ysum;
            next_beta = beta;
            lasso_coordinate_descent(h, g, config.lambda, next_beta, config.inner_max_iters);
        }

        const Eigen::VectorXd next_alpha = groups.spread(next_beta);
        const Eigen::VectorXd next_r = residuals_of(next_beta);
        const double next_obj = objective_of(next_alpha, next_r);
        if (!(next_obj >= obj)) {
            // Rounding-level losses count as convergence; anything larger
            // means the jittered solve overshot.
            out.termination = obj - next_obj <= 1e-12 * std::max(1.0, std::abs(obj)) ? Termination::Converged
                                                                                     : Termination::Stalled;
            break;
        }
        const double gain = next_obj - obj;
        alpha = next_alpha;
        beta = next_beta;
        r = next_r;
        obj = next_obj;
        out.objective_trace.push_back(obj);
        if (gain < config.tol) {
            out.termination = Termination::Converged;
            break;
        }
    }
    out.alpha = std::move(alpha);
    return out;
}

inline Eigen::VectorXd initial_alpha(const std::optional<Eigen::VectorXd>& init, Eigen::Index m)
{
    if (!init) return Eigen::VectorXd::Zero(m);
    if (init->size() != m)
        throw DimensionMismatch("initial alpha has length " + std::to_string(init->size()) + ", expected " +
                                std::to_string(m));
    return *init;
}

} // namespace detail

/// Half-quadratic solver for Gaussian-shaped representing functions. Starts
/// from init (zero when absent).
inline FitResult fit_hq(const Eigen::MatrixXd& gram, const Eigen::VectorXd& y, const RmrConfig& config,
                        const std::optional<Eigen::VectorXd>& init = std::nullopt)
{
    config.validate();
    detail::check_fit_dims(gram, y);
    if (!config.phi.is_gaussian_shaped())
        throw NonGaussianPhi("half-quadratic solver needs the gaussian or correntropy representing function, got " +
                             std::string(to_string(config.phi.kind())));
    const CenterGroups groups = group_centers(gram);
    return detail::hq_reduced(reduced_gram(gram, groups), groups, y, config,
                              detail::initial_alpha(init, y.size()));
}

/**
 * Proximal gradient ascent with backtracking for any representing function.
 *
 * The step t is accepted when the smooth part satisfies the usual quadratic
 * lower model and the full objective does not decrease; t is halved on
 * rejection and doubled after each accepted step.
 */
inline FitResult fit_gradient(const Eigen::MatrixXd& gram, const Eigen::VectorXd& y, const RepresentingFunction& phi,
                              const RmrConfig& config, const std::optional<Eigen::VectorXd>& init = std::nullopt)
{
    config.validate();
    detail::check_fit_dims(gram, y);
    const double lambda = config.lambda;
    const bool l1 = config.q == Penalty::L1;
    RmrConfig smooth_cfg = config;

    // Smooth part S(alpha) = data term (- lambda |alpha|^2 for q = 2).
    auto smooth = [&](const Eigen::VectorXd& a) {
        const double d = detail::data_term(y - gram.transpose() * a, phi, config.sigma);
        return l1 ? d : d - lambda * a.squaredNorm();
    };
    auto full = [&](const Eigen::VectorXd& a, double s) { return l1 ? s - lambda * a.lpNorm<1>() : s; };
    auto prox = [&](const Eigen::VectorXd& v, double t) -> Eigen::VectorXd {
        if (!l1) return v;
        const double thr = t * lambda;
        return v.unaryExpr([thr](double x) { return x > thr ? x - thr : (x < -thr ? x + thr : 0.0); });
    };

    FitResult out;
    Eigen::VectorXd alpha = detail::initial_alpha(init, y.size());
    double s = smooth(alpha);
    double obj = full(alpha, s);
    out.objective_trace.push_back(obj);
    out.termination = Termination::MaxIterations;
    double t = 1.0;

    for (int it = 0; it < config.max_grad_iters; ++it) {
        const Eigen::VectorXd grad = objective_gradient(alpha, gram, y, phi, smooth_cfg);
        bool accepted = false, stationary = false;
        Eigen::VectorXd next;
        double next_s = 0.0, next_obj = 0.0;
        for (int halving = 0; halving <= 50; ++halving) {
            next = prox(alpha + t * grad, t);
            const Eigen::VectorXd d = next - alpha;
            if (d.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + alpha.cwiseAbs().maxCoeff())) {
                stationary = true;
                break;
            }
            next_s = smooth(next);
            next_obj = full(next, next_s);
            const double model = s + grad.dot(d) - d.squaredNorm() / (2.0 * t);
            if (next_s >= model - 1e-15 * std::abs(s) && next_obj >= obj) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (stationary) {
            out.termination = Termination::Converged;
            break;
        }
        if (!accepted)
            throw LineSearchFailed("no ascent step found after 50 backtracking halvings at iteration " +
                                   std::to_string(it));
        const double gain = next_obj - obj;
        const double step_norm = (next - alpha).cwiseAbs().maxCoeff() / t;
        alpha = std::move(next);
        s = next_s;
        obj = next_obj;
        out.objective_trace.push_back(obj);
        if (gain < config.tol && step_norm < 1e-6) {
            out.termination = Termination::Converged;
            break;
        }
        t = std::min(2.0 * t, 1e12);
    }
    out.alpha = std::move(alpha);
    return out;
}

/// Fits on raw inputs. Gaussian-shaped phi uses the HQ solver on the distinct
/// centers; other kinds use fit_gradient on the full gram matrix.
inline RmrModel fit(const HypothesisKernel& kernel, const Points& inputs, const Eigen::VectorXd& y,
                    const RmrConfig& config, const std::optional<Eigen::VectorXd>& init = std::nullopt)
{
    config.validate();
    if (inputs.rows() != y.size())
        throw DimensionMismatch("inputs have " + std::to_string(inputs.rows()) + " rows but y has length " +
                                std::to_string(y.size()));
    if (inputs.rows() < 1) throw DimensionMismatch("empty training set");
    FitResult res;
    if (config.phi.is_gaussian_shaped()) {
        const CenterGroups groups = group_centers(inputs);
        Points reps(groups.size(), inputs.cols());
        for (Eigen::Index g = 0; g < groups.size(); ++g)
            reps.row(g) = inputs.row(groups.representative[static_cast<std::size_t>(g)]);
        res = detail::hq_reduced(gram_matrix(kernel, reps), groups, y, config,
                                 detail::initial_alpha(init, y.size()));
    } else {
        res = fit_gradient(gram_matrix(kernel, inputs), y, config.phi, config, init);
    }
    return RmrModel{std::move(res.alpha), inputs, kernel, config, std::move(res.objective_trace), res.termination};
}

inline double predict(const RmrModel& model, std::span<const double> x)
{
    if (static_cast<Eigen::Index>(x.size()) != model.train_inputs.cols())
        throw DimensionMismatch("input has dimension " + std::to_string(x.size()) + ", model expects " +
                                std::to_string(model.train_inputs.cols()));
    double f = 0.0;
    for (Eigen::Index i = 0; i < model.alpha.size(); ++i)
        if (model.alpha(i) != 0.0) f += model.alpha(i) * model.kernel(row_span(model.train_inputs, i), x);
    return f;
}

inline Eigen::VectorXd predict(const RmrModel& model, const Points& xs)
{
    Eigen::VectorXd out(xs.rows());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) out(i) = predict(model, row_span(xs, i));
    return out;
}

/// Least-squares kernel ridge baseline over the same hypothesis space:
/// minimizes (1/m) sum_i r_i^2 + lambda |alpha|_2^2.
inline Eigen::VectorXd kernel_ridge_fit(const Eigen::MatrixXd& gram, const Eigen::VectorXd& y, double lambda)
{
    detail::check_fit_dims(gram, y);
    detail::require(lambda >= 0.0, "lambda must be non-negative");
    const CenterGroups groups = group_centers(gram);
    bool jittered = false;
    const Eigen::VectorXd beta = detail::reduced_weighted_ridge(
        reduced_gram(gram, groups), groups, y, Eigen::VectorXd::Ones(y.size()),
        lambda * static_cast<double>(y.size()), jittered);
    return groups.spread(beta);
}

/// Minimum-norm-leaning fit of the weighted squared loss (tiny ridge), used to
/// build starting points that follow a chosen subset of the sample.
inline Eigen::VectorXd weighted_least_squares_fit(const Eigen::MatrixXd& gram, const Eigen::VectorXd& y,
                                                  const Eigen::VectorXd& weights, double ridge)
{
    detail::check_fit_dims(gram, y);
    if (weights.size() != y.size()) throw DimensionMismatch("weights length does not match y");
    const CenterGroups groups = group_centers(gram);
    bool jittered = false;
    return groups.spread(
        detail::reduced_weighted_ridge(reduced_gram(gram, groups), groups, y, weights, ridge, jittered));
}

// ---------------------------------------------------------------------------
// Parameter schedule
// ---------------------------------------------------------------------------

struct Schedule
{
    double theta = 0.0;
    double lambda = 0.0;
    double sigma = 0.0;
};

/**
 * Rate-optimal schedule for source exponent beta and capacity exponent s:
 *   theta  = 2 beta / (8 beta + 5 s beta + 2 s + 4)
 *   lambda = ((2 g - g^2) m)^(-theta / beta)
 *   sigma  = ((2 g - g^2) m)^(-theta / (2 beta))
 * with g the absolute spectral gap.
 */
inline Schedule schedule_theorem2(double m, double gamma_abs, double beta, double s)
{
    if (!(m >= 1.0)) throw InvalidArgument("m must be >= 1");
    if (!(gamma_abs > 0.0 && gamma_abs <= 1.0))
        throw InvalidArgument("gamma_abs must lie in (0,1], got " + format_g(gamma_abs, 17));
    if (!(beta > 0.0 && beta <= 2.0)) throw InvalidArgument("beta must lie in (0,2], got " + format_g(beta, 17));
    if (!(s > 0.0 && s < 2.0)) throw InvalidArgument("s must lie in (0,2), got " + format_g(s, 17));
    Schedule out;
    out.theta = 2.0 * beta / (8.0 * beta + 5.0 * s * beta + 2.0 * s + 4.0);
    const double effective = (2.0 * gamma_abs - gamma_abs * gamma_abs) * m;
    out.lambda = std::pow(effective, -out.theta / beta);
    out.sigma = std::pow(effective, -out.theta / (2.0 * beta));
    return out;
}

} // namespace modalmr
