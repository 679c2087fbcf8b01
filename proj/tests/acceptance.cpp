// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "modalmr/modalmr.hpp"
#include "oracles.hpp"
#include "../tools/cli.hpp"

using namespace modalmr;

namespace {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string g(double v, int digits = 6) { return format_g(v, digits); }

// 1. Spectral-gap oracle.
Outcome gap_oracle()
{
    const double tol = 1e-10;
    const double two = absolute_spectral_gap(builtin_chain(ChainFamily::two_state(0.3, 0.2)));
    const double iid = absolute_spectral_gap(builtin_chain(ChainFamily::iid(5)));
    const bool ok = std::abs(two - oracle::two_state_gap(0.3, 0.2)) <= tol && std::abs(two - 0.5) <= tol &&
                    std::abs(iid - 1.0) <= tol;
    return {ok, "two-state gamma_abs=" + g(two, 15) + " iid gamma_abs=" + g(iid, 15)};
}

// 2. Pseudo-gap oracle and monotonicity in k_max.
Outcome pseudo_gap_oracle()
{
    const TransitionKernel k = builtin_chain(ChainFamily::two_state(0.3, 0.2));
    const double gp = pseudo_spectral_gap(k, 10);
    bool monotone = true;
    double prev = -1.0;
    for (int kmax = 1; kmax <= 12; ++kmax) {
        const double v = pseudo_spectral_gap(k, kmax);
        if (v < prev) monotone = false;
        prev = v;
    }
    const bool ok = std::abs(gp - 0.75) <= 1e-8 && std::abs(gp - oracle::two_state_pseudo_gap(0.3, 0.2, 10)) <= 1e-8 &&
                    monotone;
    return {ok, "gamma_pseudo=" + g(gp, 15) + " monotone=" + (monotone ? "yes" : "no")};
}

// 3. Calibration of the four calibrated representing functions.
Outcome calibration_suite()
{
    bool ok = true;
    std::string detail;
    for (auto phi : {RepresentingFunction::gaussian(), RepresentingFunction::epanechnikov(),
                     RepresentingFunction::quadratic(), RepresentingFunction::triangular()}) {
        const CalibrationReport r = check_calibration(phi);
        const bool this_ok = r.symmetric() && r.peaked() && std::abs(r.integral - 1.0) < 1e-6 &&
                             r.finite_second_moment();
        ok = ok && this_ok;
        detail += std::string(to_string(phi.kind())) + (this_ok ? ":ok " : ":FAIL ");
    }
    const double em = check_calibration(RepresentingFunction::epanechnikov()).second_moment;
    ok = ok && std::abs(em - oracle::epanechnikov_second_moment) <= 1e-6;
    return {ok, detail + "epanechnikov_u2=" + g(em, 12)};
}

struct RandomInstance
{
    Eigen::MatrixXd gram;
    Eigen::VectorXd y;
    RmrConfig cfg;
};

RandomInstance random_instance(Rng& rng, int m, std::vector<double> sigmas, std::vector<double> lambdas)
{
    std::uniform_real_distribution<double> u01(0.0, 1.0), sym(-1.0, 1.0);
    const int d = 1 + static_cast<int>(rng() % 2);
    Points x(m, d);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = u01(rng);
    RandomInstance inst;
    inst.gram = gram_matrix(HypothesisKernel::gaussian_rbf(0.2 + 0.8 * u01(rng)), x);
    inst.y.resize(m);
    for (int i = 0; i < m; ++i) inst.y(i) = sym(rng);
    inst.cfg.sigma = sigmas[rng() % sigmas.size()];
    inst.cfg.lambda = lambdas[rng() % lambdas.size()];
    inst.cfg.q = (rng() % 2) ? Penalty::L1 : Penalty::L2;
    return inst;
}

// 4. HQ ascent over 200 random instances.
Outcome hq_ascent()
{
    Rng rng(404);
    int violations = 0, stalled = 0;
    for (int t = 0; t < 200; ++t) {
        const int m = 2 + static_cast<int>(rng() % 49);
        auto inst = random_instance(rng, m, {0.1, 0.25, 0.5, 1.0}, {1e-4, 1e-3, 1e-2, 1e-1});
        inst.cfg.phi = (t % 4 == 3) ? RepresentingFunction::correntropy() : RepresentingFunction::gaussian();
        const FitResult r = fit_hq(inst.gram, inst.y, inst.cfg);
        for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
            if (r.objective_trace[k] < r.objective_trace[k - 1] - 1e-10) ++violations;
        if (r.termination == Termination::Stalled) ++stalled;
    }
    return {violations == 0, "violations=" + std::to_string(violations) + " stalled_runs=" + std::to_string(stalled)};
}

// 5. Brute-force equivalence at m <= 3.
Outcome brute_force()
{
    Rng rng(505);
    int failures = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (int t = 0; t < 50; ++t) {
        const int m = 1 + t % 3;
        auto inst = random_instance(rng, m, {0.5, 1.0}, {0.01, 0.1});
        const FitResult r = fit_hq(inst.gram, inst.y, inst.cfg);
        const double fitted = objective(r.alpha, inst.gram, inst.y, inst.cfg);
        const double grid = oracle::gaussian_grid_max(inst.gram, inst.y, oracle::normal_pdf(0.0), 0.5, inst.cfg.sigma,
                                                      inst.cfg.lambda, inst.cfg.q == Penalty::L1 ? 1 : 2, -3.0, 3.0,
                                                      0.01);
        worst = std::min(worst, fitted - grid);
        if (fitted < grid - 1e-3) ++failures;
    }
    return {failures == 0, "failures=" + std::to_string(failures) + " min(fit-grid)=" + g(worst)};
}

// 6. Comparison gap against C1 sigma^2 with second-order decay.
Outcome comparison_gap_check()
{
    const double s = 0.5;
    const SyntheticTask task(builtin_chain(ChainFamily::iid(8)), NoiseModel::gaussian(s), TargetFunction::sine_exp());
    const RepresentingFunction phi = RepresentingFunction::gaussian();
    Rng rng(606);
    std::uniform_real_distribution<double> off(-1.0, 1.0);
    const double sigmas[] = {0.5, 0.25, 0.125};
    int within = 0, total = 0;
    double ratio_sum = 0.0, oracle_err = 0.0;
    int ratio_count = 0;
    for (int t = 0; t < 20; ++t) {
        Eigen::VectorXd f = task.f_star_on_states();
        for (Eigen::Index i = 0; i < f.size(); ++i) f(i) += off(rng);
        double prev = 0.0;
        for (int k = 0; k < 3; ++k) {
            const ComparisonGap cg = comparison_gap(task, f, phi, sigmas[k]);
            // Gaussian convolution closed form: R^sigma(f) = sum pi N(delta; 0, s^2 + sigma^2).
            const double w = std::sqrt(s * s + sigmas[k] * sigmas[k]);
            double exact = 0.0;
            for (Eigen::Index i = 0; i < f.size(); ++i) {
                const double dl = f(i) - task.f_star_on_states()(i);
                exact += task.pi()(i) * ((oracle::normal_pdf(0.0, s) - oracle::normal_pdf(dl, s)) -
                                         (oracle::normal_pdf(0.0, w) - oracle::normal_pdf(dl, w)));
            }
            oracle_err = std::max(oracle_err, std::abs(std::abs(exact) - cg.gap));
            const double c1 = 1.0 / (std::sqrt(2.0 * oracle::pi) * s * s * s);
            ++total;
            if (cg.gap <= cg.bound && cg.gap <= c1 * sigmas[k] * sigmas[k]) ++within;
            if (k > 0 && prev > 0.0) {
                ratio_sum += cg.gap / prev;
                ++ratio_count;
            }
            prev = cg.gap;
        }
    }
    const double mean_ratio = ratio_sum / ratio_count;
    const bool ok = within == total && mean_ratio <= 0.5 && oracle_err <= 1e-8;
    return {ok, "within=" + std::to_string(within) + "/" + std::to_string(total) + " mean_ratio=" + g(mean_ratio) +
                    " max_oracle_err=" + g(oracle_err, 3)};
}

// 7. Parameter schedule.
Outcome schedule_check()
{
    const Schedule s = schedule_theorem2(1024, 1.0, 2.0, 1e-9);
    bool ok = std::abs(s.theta - 0.2) <= 1e-6;
    Rng rng(707);
    std::uniform_real_distribution<double> gam(0.01, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        const double m = static_cast<double>(1 + rng() % 100000);
        const double ga = gam(rng);
        const Schedule sc = schedule_theorem2(m, ga, 2.0, 1e-9);
        const double theta = 4.0 / (16.0 + 5.0 * 1e-9 * 2.0 + 2.0 * 1e-9 + 4.0);
        const double lam = std::pow(2.0 * ga - ga * ga, -theta / 2.0) * std::pow(m, -theta / 2.0);
        const double sig = std::pow(2.0 * ga - ga * ga, -theta / 4.0) * std::pow(m, -theta / 4.0);
        worst = std::max({worst, std::abs(sc.lambda - lam), std::abs(sc.sigma - sig)});
    }
    ok = ok && worst <= 1e-12;
    return {ok, "theta=" + g(s.theta, 12) + " max_closed_form_err=" + g(worst, 3)};
}

SyntheticTask rate_task()
{
    return SyntheticTask(builtin_chain(ChainFamily::iid(16)), NoiseModel::gaussian(0.5), TargetFunction::sine_exp());
}

ExperimentConfig rate_config()
{
    ExperimentConfig cfg(rate_task());
    cfg.kernel = HypothesisKernel::gaussian_rbf(0.2);
    cfg.m_grid = {64, 128, 256, 512, 1024, 2048};
    cfg.n_replicates = 20;
    cfg.schedule = ScheduleSpec::theorem2(2.0, 0.01);
    cfg.seed = 8080;
    return cfg;
}

// 8. Rate direction.
Outcome rate_direction()
{
    const LearningCurveResult r = learning_curve(rate_config());
    const bool ok = r.slope < -0.05 && r.slope_ci.hi < 0.0 && r.failures == 0;
    return {ok, "slope=" + g(r.slope) + " ci90=[" + g(r.slope_ci.lo) + ", " + g(r.slope_ci.hi) + "] failures=" +
                    std::to_string(r.failures)};
}

// 9. Gap discount direction, paired one-sided bootstrap at 90%.
Outcome gap_discount()
{
    ExperimentConfig cfg = rate_config();
    cfg.m_grid = {512};
    cfg.seed = 9090;
    const auto rows = gamma_sweep(cfg, {builtin_chain(ChainFamily::sticky(16, 0.1)),
                                        builtin_chain(ChainFamily::sticky(16, 1.0))});
    const auto diff = paired_differences(rows[0], rows[1]);
    const Interval iv = bootstrap_mean_interval(diff, 0.10, 0.90, 1000, 9091);
    const bool ok = std::abs(rows[0].gamma_abs - 0.1) < 1e-10 && std::abs(rows[1].gamma_abs - 1.0) < 1e-10 &&
                    rows[0].mean_excess >= rows[1].mean_excess && iv.lo > 0.0 && diff.size() == 20;
    return {ok, "mean(slow)=" + g(rows[0].mean_excess) + " mean(iid)=" + g(rows[1].mean_excess) +
                    " paired_lower90=" + g(iv.lo)};
}

// 10. Breakdown bracket and contamination.
Outcome breakdown_check()
{
    // Interpolating fit: ten distinct inputs from a cycle, lambda = 0.
    const SyntheticTask cyc(builtin_chain(ChainFamily::cycle(10)), NoiseModel::gaussian(0.05), TargetFunction::sine_exp());
    const Dataset d = generate_dataset(cyc, 10, 1010);
    RmrConfig ic;
    ic.lambda = 0.0;
    ic.sigma = 0.2;
    const RmrModel interp = fit(HypothesisKernel::gaussian_rbf(0.1), d.x, d.y, ic);
    const double n_interp = breakdown_N(interp, d.y);
    const BreakdownBracket b = breakdown_bracket(n_interp, 10);
    bool ok = b.fraction == 0.5;
    std::string detail = "interp N=" + g(n_interp, 12) + " fraction=" + g(b.fraction, 12);

    // Contamination on an affine hypothesis space.
    const SyntheticTask lin(builtin_chain(ChainFamily::iid(10)), NoiseModel::gaussian(0.05),
                            TargetFunction::linear(1.0, 0.0));
    RmrConfig cc;
    cc.lambda = 0.0;
    cc.sigma = 0.2;
    const BreakdownReport probe =
        contamination_experiment(lin, HypothesisKernel::polynomial(1, 1), 10, {}, {}, cc, 1011);
    const long fl = static_cast<long>(std::floor(probe.N));
    std::vector<long> ns;
    for (long n = 1; n < fl; ++n) ns.push_back(n);
    ns.push_back(fl + 2);
    ns.push_back(fl + 3);
    const BreakdownReport rep =
        contamination_experiment(lin, HypothesisKernel::polynomial(1, 1), 10, ns, {1e2, 1e6}, cc, 1011);
    bool bounded = true, diverged = true;
    for (std::size_t k = 0; k + 1 < rep.contamination_curve.size(); k += 2) {
        const auto& lo = rep.contamination_curve[k];
        const auto& hi = rep.contamination_curve[k + 1];
        if (lo.n_outliers < fl && hi.coef_norm > 10.0 * lo.coef_norm) bounded = false;
        if (lo.n_outliers > fl + 1 && !(hi.coef_norm > 100.0 * rep.clean_norm)) diverged = false;
    }
    ok = ok && bounded && diverged && !ns.empty();
    detail += " affine N=" + g(rep.N) + " bracket=[" + std::to_string(rep.n_star_low) + "," +
              std::to_string(rep.n_star_high) + "] bounded=" + (bounded ? "yes" : "no") +
              " diverged=" + (diverged ? "yes" : "no");
    return {ok, detail};
}

// 11. Robustness against least squares under Student-t(2) noise.
Outcome robustness_trend()
{
    const SyntheticTask task(builtin_chain(ChainFamily::iid(16)), NoiseModel::student_t(2.0, 0.2),
                             TargetFunction::sine_exp());
    RmrConfig cfg;
    cfg.sigma = 0.3;
    const RobustnessResult r = robustness_comparison(task, HypothesisKernel::gaussian_rbf(0.2), 500, cfg, 1111);
    return {r.rmr_win_fraction >= 0.7 && r.rows.size() == 20,
            "rmr_wins=" + g(r.rmr_win_fraction) + " mse_rmr=" + g(r.mean_rmr_mse) + " mse_ls=" + g(r.mean_ls_mse)};
}

// 12. CLI reproducibility.
Outcome cli_reproducibility()
{
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "modalmr_acceptance";
    fs::create_directories(dir);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::vector<std::vector<std::string>> experiments = {
        {"generate", "--m", "300", "--noise", "student-t"},
        {"learning-curve", "--m-grid", "32,64,128", "--replicates", "5"},
        {"gamma-sweep", "--gammas", "0.2,1", "--m", "128", "--replicates", "5"},
        {"breakdown", "--m", "12", "--n-outliers", "0,2,20", "--magnitudes", "100,1e6"},
        {"robust-compare", "--m", "200", "--replicates", "4", "--noise", "student-t"},
    };
    int identical = 0;
    std::string detail;
    for (const auto& base : experiments) {
        std::string outputs[3];
        for (int run = 0; run < 3; ++run) {
            const fs::path out = dir / (base[0] + std::to_string(run) + ".csv");
            std::vector<std::string> args = base;
            args.insert(args.end(), {"--seed", "77", "--out", out.string(), "--jobs", run == 2 ? "2" : "1"});
            std::ostringstream sink_out, sink_log;
            if (cli::run(args, sink_out, sink_log) != 0) {
                outputs[run] = "failed: " + sink_log.str();
                continue;
            }
            outputs[run] = slurp(out);
        }
        const bool same = !outputs[0].empty() && outputs[0].rfind("failed", 0) != 0 && outputs[0] == outputs[1] &&
                          outputs[0] == outputs[2];
        identical += same;
        detail += base[0] + (same ? ":same " : ":DIFF ");
    }
    fs::remove_all(dir);
    return {identical == static_cast<int>(experiments.size()), detail};
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"spectral-gap oracle", gap_oracle},
        {"pseudo-gap oracle", pseudo_gap_oracle},
        {"calibration suite", calibration_suite},
        {"HQ ascent", hq_ascent},
        {"brute-force solver equivalence", brute_force},
        {"comparison gap", comparison_gap_check},
        {"parameter schedule", schedule_check},
        {"rate direction", rate_direction},
        {"gap discount direction", gap_discount},
        {"breakdown", breakdown_check},
        {"robustness trend", robustness_trend},
        {"CLI reproducibility", cli_reproducibility},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failed;
        std::printf("%s %2zu %-32s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
