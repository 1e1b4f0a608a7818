// simulation.hpp
// Data-generating scenarios, the replication study harness and its metric
// stack (bias, ESE, RMSE, coverage probabilities, average squared error of
// the fitted incidence).
//
// Generating mechanism per unit: covariates x1 ~ N(0,1), x2 ~ Bern(0.5),
// z1 ~ N(0,1), z2 ~ Bern(0.4) (z independent of x); susceptible status
// B ~ Bern(p(x)); for susceptibles an event time from the Weibull
// proportional-hazards survival S_u(t|z) = exp(-nu t^rho e^{gamma'z})
// conditioned on T <= tau0 (inverse-CDF draw, no atom at tau0); cured units
// get the large sentinel time; censoring is min(Exp(mu_c), tau1),
// independent of everything else. Draw order within a unit is fixed
// (x1, x2, z1, z2, B, [T], C) so a stream seed pins the dataset.
//
// Replication r of a study uses the derived stream derive_stream(base_seed,
// r). Replications run in parallel (bounded by LPSMC_THREADS) into
// per-index slots and are aggregated sequentially, so summaries are
// bit-identical regardless of thread count.

#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lpsmc/data.hpp"
#include "lpsmc/errors.hpp"
#include "lpsmc/intervals.hpp"
#include "lpsmc/laplace.hpp"
#include "lpsmc/rng.hpp"

namespace lpsmc {

struct ScenarioConfig {
    std::string name = "custom";
    Eigen::Vector3d beta;              // beta_0, beta_1, beta_2
    Eigen::Vector2d gamma;             // gamma_1, gamma_2
    double weibull_scale = 0.25;       // nu
    double weibull_shape = 1.45;       // rho
    double censor_rate = 0.16;         // mu_c
    double latency_truncation = 8.0;   // tau0
    double censor_truncation = 11.0;   // tau1
    double cured_time_sentinel = 20000.0;
    int n = 300;
};

inline ScenarioConfig scenario1() {
    ScenarioConfig s;
    s.name = "scenario1";
    s.beta << 0.70, -1.15, 0.95;
    s.gamma << -0.10, 0.25;
    s.censor_rate = 0.16;
    return s;
}

inline ScenarioConfig scenario2() {
    ScenarioConfig s;
    s.name = "scenario2";
    s.beta << 1.25, -0.75, 0.45;
    s.gamma << -0.10, 0.20;
    s.censor_rate = 0.05;
    return s;
}

// Inverse CDF of the Weibull event time conditioned on T <= tau0, at total
// hazard rate = nu * exp(gamma'z).
inline double weibull_latency_quantile(double u, double rate, double rho, double tau0) {
    const double s_tau0 = std::exp(-rate * std::pow(tau0, rho));
    return std::pow(-std::log1p(-u * (1.0 - s_tau0)) / rate, 1.0 / rho);
}

inline double weibull_latency_draw(Xoshiro256pp& rng, const Eigen::VectorXd& gamma,
                                   const Eigen::VectorXd& z_row, double nu, double rho,
                                   double tau0) {
    const double rate = nu * std::exp(gamma.dot(z_row));
    return weibull_latency_quantile(rng.uniform_open(), rate, rho, tau0);
}

// Inverse CDF of the censoring time min(Exp(mu), tau1): exponential below
// tau1 with the remaining mass as an atom at tau1. The capping reading of
// the truncation is the one that reproduces the reference censoring and
// plateau rates; conditioning the draw on C <= tau1 instead inflates the
// censoring share far beyond them.
inline double truncated_exponential_quantile(double u, double mu, double tau1) {
    return std::min(-std::log1p(-u) / mu, tau1);
}

struct GeneratedData {
    SurvivalDataset data;
    std::vector<std::uint8_t> susceptible;  // hidden truth B_i
    Eigen::VectorXd event_time;             // hidden truth T_i (sentinel when cured)
    Eigen::VectorXd censor_time;            // hidden truth C_i
};

inline GeneratedData generate_dataset(const ScenarioConfig& scenario, std::uint64_t seed) {
    Xoshiro256pp rng(seed);
    const int n = scenario.n;
    GeneratedData out;
    out.data.times.resize(n);
    out.data.events.resize(n);
    out.data.X.resize(n, 3);
    out.data.Z.resize(n, 2);
    out.susceptible.resize(n);
    out.event_time.resize(n);
    out.censor_time.resize(n);

    for (int i = 0; i < n; ++i) {
        const double x1 = rng.normal();
        const double x2 = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const double z1 = rng.normal();
        const double z2 = rng.bernoulli(0.4) ? 1.0 : 0.0;
        out.data.X(i, 0) = 1.0;
        out.data.X(i, 1) = x1;
        out.data.X(i, 2) = x2;
        out.data.Z(i, 0) = z1;
        out.data.Z(i, 1) = z2;

        const double p = sigmoid(scenario.beta[0] + scenario.beta[1] * x1 + scenario.beta[2] * x2);
        const bool susceptible = rng.bernoulli(p);
        out.susceptible[i] = susceptible ? 1 : 0;

        double event_time;
        if (susceptible) {
            const double rate =
                scenario.weibull_scale * std::exp(scenario.gamma[0] * z1 + scenario.gamma[1] * z2);
            event_time = weibull_latency_quantile(rng.uniform_open(), rate,
                                                  scenario.weibull_shape,
                                                  scenario.latency_truncation);
        } else {
            event_time = scenario.cured_time_sentinel;
        }
        out.event_time[i] = event_time;

        const double censor_time = truncated_exponential_quantile(
            rng.uniform_open(), scenario.censor_rate, scenario.censor_truncation);
        out.censor_time[i] = censor_time;
        out.data.times[i] = std::min(event_time, censor_time);
        out.data.events[i] = event_time <= censor_time ? 1 : 0;
    }
    return out;
}

// Empirical cure, censoring and plateau rates of a generated dataset; the
// plateau is the share of observations with follow-up strictly beyond the
// last observed event time.
struct GeneratorRates {
    double cure = 0.0;
    double censoring = 0.0;
    double plateau = 0.0;
};

inline GeneratorRates generator_rates(const GeneratedData& generated) {
    const auto& data = generated.data;
    const Eigen::Index n = data.n();
    GeneratorRates rates;
    double last_event = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        rates.cure += generated.susceptible[i] == 0 ? 1.0 : 0.0;
        rates.censoring += data.events[i] == 0 ? 1.0 : 0.0;
        if (data.events[i] == 1 && data.times[i] > last_event) last_event = data.times[i];
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (data.times[i] > last_event) rates.plateau += 1.0;
    }
    rates.cure /= static_cast<double>(n);
    rates.censoring /= static_cast<double>(n);
    rates.plateau /= static_cast<double>(n);
    return rates;
}

// Mean squared deviation of a fitted incidence surface from the true one on
// the reference grid: x1 equidistant in [-1.50, 1.50] with step 0.001,
// crossed with x2 in {0, 1}.
inline double ase_incidence_grid(const std::function<double(double, double)>& fitted,
                                 const Eigen::Vector3d& true_beta) {
    double sum = 0.0;
    long count = 0;
    for (int b = 0; b <= 1; ++b) {
        const double x2 = static_cast<double>(b);
        for (int k = 0; k <= 3000; ++k) {
            const double x1 = -1.5 + 0.001 * k;
            const double truth = sigmoid(true_beta[0] + true_beta[1] * x1 + true_beta[2] * x2);
            const double diff = fitted(x1, x2) - truth;
            sum += diff * diff;
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

inline double ase_incidence(const FitResult& fit, const ScenarioConfig& scenario) {
    if (fit.p != 2) {
        throw InvalidArgument("ase_incidence: fit must carry two incidence covariates");
    }
    const Eigen::VectorXd beta = fit.posterior.mean.segment(fit.hyper.K, 3);
    return ase_incidence_grid(
        [&](double x1, double x2) { return sigmoid(beta[0] + beta[1] * x1 + beta[2] * x2); },
        scenario.beta);
}

struct ParameterMetrics {
    std::string name;
    double truth = 0.0;
    double mean = 0.0;
    double bias = 0.0;
    double ese = 0.0;   // sample standard deviation (S-1 denominator)
    double rmse = 0.0;  // sqrt of mean squared deviation from the truth
    double cp90 = 0.0;  // coverage in percent
    double cp95 = 0.0;
};

struct SurvivalCoverage {
    double q = 0.0;
    double t_baseline = 0.0;
    double t_uncured = 0.0;
    double cp90_baseline = 0.0;
    double cp95_baseline = 0.0;
    double cp90_uncured = 0.0;
    double cp95_uncured = 0.0;
};

struct StudySummary {
    std::string scenario_name;
    int n = 0;
    int replications = 0;  // requested
    int failures = 0;      // non-converged fits, excluded from the metrics
    std::vector<ParameterMetrics> parameters;
    std::vector<double> ase_incidence;          // per converged replication
    std::vector<SurvivalCoverage> coverage;     // filled when requested
    Eigen::VectorXd curve_times;                // bin boundaries, when curves kept
    std::vector<Eigen::VectorXd> baseline_curves;
};

struct StudyOptions {
    bool with_coverage = false;
    std::vector<double> quantiles = {0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 0.95};
    Eigen::Vector2d coverage_profile{0.0, 0.4};  // mean latency covariate profile
    bool keep_curves = false;
    bool same_seed_all_reps = false;  // degenerate-determinism checks
};

namespace detail {

inline int max_threads() {
    if (const char* env = std::getenv("LPSMC_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

template <class Body>
void parallel_for(int count, Body&& body) {
    const int workers = std::min(max_threads(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count) break;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct ReplicationOutcome {
    bool converged = false;
    Eigen::Matrix<double, 5, 1> estimate;
    bool cover90[5] = {false, false, false, false, false};
    bool cover95[5] = {false, false, false, false, false};
    double ase = 0.0;
    std::vector<bool> s0_cover90, s0_cover95, su_cover90, su_cover95;
    Eigen::VectorXd s0_curve;
};

}  // namespace detail

// True baseline/uncured survival quantile of the generating Weibull model.
inline double true_quantile_baseline(const ScenarioConfig& scenario, double q) {
    return std::pow(-std::log(1.0 - q) / scenario.weibull_scale, 1.0 / scenario.weibull_shape);
}

inline double true_quantile_uncured(const ScenarioConfig& scenario, double q,
                                    const Eigen::Vector2d& profile) {
    const double rate = scenario.weibull_scale * std::exp(scenario.gamma.dot(profile));
    return std::pow(-std::log(1.0 - q) / rate, 1.0 / scenario.weibull_shape);
}

inline StudySummary run_study(const ScenarioConfig& scenario, int n, int S,
                              std::uint64_t base_seed, const Hyperparameters& hyper,
                              const StudyOptions& options = {}) {
    if (S < 2) throw InvalidArgument("run_study: need at least S=2 replications");
    ScenarioConfig config = scenario;
    config.n = n;

    const int nq = static_cast<int>(options.quantiles.size());
    std::vector<detail::ReplicationOutcome> outcomes(S);

    detail::parallel_for(S, [&](int r) {
        detail::ReplicationOutcome& out = outcomes[r];
        const std::uint64_t seed =
            options.same_seed_all_reps ? derive_stream(base_seed, 0) : derive_stream(base_seed, r);
        const GeneratedData generated = generate_dataset(config, seed);

        FitOptions fit_options;
        fit_options.t_upper = config.censor_truncation;
        FitResult fit_result;
        try {
            fit_result = fit(generated.data, hyper, fit_options);
        } catch (const Error&) {
            return;  // counted as a failure
        }
        out.converged = true;

        const int K = hyper.K;
        const double truths[5] = {config.beta[0], config.beta[1], config.beta[2],
                                  config.gamma[0], config.gamma[1]};
        for (int j = 0; j < 5; ++j) {
            const int coord = K + j;
            out.estimate[j] = fit_result.posterior.mean[coord];
            const CredibleInterval ci90 = ci_latent(fit_result, coord, 0.10);
            const CredibleInterval ci95 = ci_latent(fit_result, coord, 0.05);
            out.cover90[j] = ci90.lower <= truths[j] && truths[j] <= ci90.upper;
            out.cover95[j] = ci95.lower <= truths[j] && truths[j] <= ci95.upper;
        }
        out.ase = ase_incidence(fit_result, config);

        if (options.with_coverage) {
            out.s0_cover90.resize(nq);
            out.s0_cover95.resize(nq);
            out.su_cover90.resize(nq);
            out.su_cover95.resize(nq);
            for (int iq = 0; iq < nq; ++iq) {
                const double q = options.quantiles[iq];
                const double target = 1.0 - q;
                const double t_s0 = true_quantile_baseline(config, q);
                const double t_su = true_quantile_uncured(config, q, options.coverage_profile);
                const CredibleInterval s0_90 = ci_baseline_survival(fit_result, t_s0, 0.10);
                const CredibleInterval s0_95 = ci_baseline_survival(fit_result, t_s0, 0.05);
                const CredibleInterval su_90 =
                    ci_latency_survival(fit_result, options.coverage_profile, t_su, 0.10);
                const CredibleInterval su_95 =
                    ci_latency_survival(fit_result, options.coverage_profile, t_su, 0.05);
                out.s0_cover90[iq] = s0_90.lower <= target && target <= s0_90.upper;
                out.s0_cover95[iq] = s0_95.lower <= target && target <= s0_95.upper;
                out.su_cover90[iq] = su_90.lower <= target && target <= su_90.upper;
                out.su_cover95[iq] = su_95.lower <= target && target <= su_95.upper;
            }
        }

        if (options.keep_curves) {
            const KnotGrid grid = fit_result.grid();
            const BinGrid bins = fit_result.bins();
            const Eigen::VectorXd theta = fit_result.posterior.mean.segment(0, K);
            out.s0_curve.resize(bins.num_bins());
            double sum = 0.0;
            for (int j = 0; j < bins.num_bins(); ++j) {
                sum += std::exp(bspline_eval(grid, bins.midpoints()[j]).dot(theta));
                out.s0_curve[j] = std::exp(-sum * bins.delta());
            }
        }
    });

    StudySummary summary;
    summary.scenario_name = config.name;
    summary.n = n;
    summary.replications = S;
    for (const auto& out : outcomes) {
        if (!out.converged) ++summary.failures;
    }
    const int ok = S - summary.failures;
    if (summary.failures > S / 10) {
        throw StudyError("run_study: " + std::to_string(summary.failures) + " of " +
                         std::to_string(S) + " replications failed to converge");
    }

    const char* names[5] = {"beta0", "beta1", "beta2", "gamma1", "gamma2"};
    const double truths[5] = {config.beta[0], config.beta[1], config.beta[2], config.gamma[0],
                              config.gamma[1]};
    for (int j = 0; j < 5; ++j) {
        ParameterMetrics pm;
        pm.name = names[j];
        pm.truth = truths[j];
        double sum = 0.0;
        for (const auto& out : outcomes) {
            if (out.converged) sum += out.estimate[j];
        }
        pm.mean = sum / ok;
        pm.bias = pm.mean - pm.truth;
        double ss_mean = 0.0, ss_truth = 0.0, cov90 = 0.0, cov95 = 0.0;
        for (const auto& out : outcomes) {
            if (!out.converged) continue;
            ss_mean += (out.estimate[j] - pm.mean) * (out.estimate[j] - pm.mean);
            ss_truth += (out.estimate[j] - pm.truth) * (out.estimate[j] - pm.truth);
            cov90 += out.cover90[j] ? 1.0 : 0.0;
            cov95 += out.cover95[j] ? 1.0 : 0.0;
        }
        pm.ese = ok > 1 ? std::sqrt(ss_mean / (ok - 1)) : 0.0;
        pm.rmse = std::sqrt(ss_truth / ok);
        pm.cp90 = 100.0 * cov90 / ok;
        pm.cp95 = 100.0 * cov95 / ok;
        summary.parameters.push_back(std::move(pm));
    }

    for (const auto& out : outcomes) {
        if (out.converged) summary.ase_incidence.push_back(out.ase);
    }

    if (options.with_coverage) {
        for (int iq = 0; iq < nq; ++iq) {
            SurvivalCoverage row;
            row.q = options.quantiles[iq];
            row.t_baseline = true_quantile_baseline(config, row.q);
            row.t_uncured = true_quantile_uncured(config, row.q, options.coverage_profile);
            double c90s0 = 0.0, c95s0 = 0.0, c90su = 0.0, c95su = 0.0;
            for (const auto& out : outcomes) {
                if (!out.converged) continue;
                c90s0 += out.s0_cover90[iq] ? 1.0 : 0.0;
                c95s0 += out.s0_cover95[iq] ? 1.0 : 0.0;
                c90su += out.su_cover90[iq] ? 1.0 : 0.0;
                c95su += out.su_cover95[iq] ? 1.0 : 0.0;
            }
            row.cp90_baseline = 100.0 * c90s0 / ok;
            row.cp95_baseline = 100.0 * c95s0 / ok;
            row.cp90_uncured = 100.0 * c90su / ok;
            row.cp95_uncured = 100.0 * c95su / ok;
            summary.coverage.push_back(row);
        }
    }

    if (options.keep_curves) {
        const BinGrid bins(hyper.J, config.censor_truncation);
        summary.curve_times.resize(bins.num_bins());
        for (int j = 0; j < bins.num_bins(); ++j) {
            summary.curve_times[j] = (j + 1) * bins.delta();
        }
        for (const auto& out : outcomes) {
            if (out.converged) summary.baseline_curves.push_back(out.s0_curve);
        }
    }
    return summary;
}

// Coverage study for the baseline and uncured survival intervals at the true
// quantiles of the generating model, run with a richer spline basis.
inline StudySummary coverage_survival(const ScenarioConfig& scenario, int n, int S,
                                      std::uint64_t base_seed, Hyperparameters hyper,
                                      int K_override = 30,
                                      const std::vector<double>& quantiles = {
                                          0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 0.95}) {
    hyper.K = K_override;
    StudyOptions options;
    options.with_coverage = true;
    options.quantiles = quantiles;
    return run_study(scenario, n, S, base_seed, hyper, options);
}

// ---------------------------------------------------------------------------
// Plain-text / CSV export of study results.

namespace detail {

inline std::string double_repr(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string study_summary_csv(const StudySummary& summary) {
    std::string out = "parameter,truth,mean,bias,ese,rmse,cp90,cp95\n";
    for (const auto& pm : summary.parameters) {
        out += pm.name + ',' + detail::double_repr(pm.truth) + ',' + detail::double_repr(pm.mean) +
               ',' + detail::double_repr(pm.bias) + ',' + detail::double_repr(pm.ese) + ',' +
               detail::double_repr(pm.rmse) + ',' + detail::double_repr(pm.cp90) + ',' +
               detail::double_repr(pm.cp95) + '\n';
    }
    return out;
}

inline std::string coverage_csv(const StudySummary& summary) {
    std::string out =
        "quantile,t_baseline,cp90_baseline,cp95_baseline,t_uncured,cp90_uncured,cp95_uncured\n";
    for (const auto& row : summary.coverage) {
        out += detail::double_repr(row.q) + ',' + detail::double_repr(row.t_baseline) + ',' +
               detail::double_repr(row.cp90_baseline) + ',' +
               detail::double_repr(row.cp95_baseline) + ',' +
               detail::double_repr(row.t_uncured) + ',' + detail::double_repr(row.cp90_uncured) +
               ',' + detail::double_repr(row.cp95_uncured) + '\n';
    }
    return out;
}

inline std::string ase_csv(const StudySummary& summary) {
    std::string out = "replication,ase\n";
    for (std::size_t r = 0; r < summary.ase_incidence.size(); ++r) {
        out += std::to_string(r) + ',' + detail::double_repr(summary.ase_incidence[r]) + '\n';
    }
    return out;
}

inline std::string study_summary_table(const StudySummary& summary) {
    std::ostringstream os;
    os << "Study " << summary.scenario_name << " (n=" << summary.n
       << ", S=" << summary.replications << ", failures=" << summary.failures << ")\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-10s %9s %9s %9s %9s %9s %7s %7s\n", "Parameter", "Truth",
                  "Mean", "Bias", "ESE", "RMSE", "CP90", "CP95");
    os << line;
    for (const auto& pm : summary.parameters) {
        std::snprintf(line, sizeof(line), "%-10s %9.3f %9.3f %9.3f %9.3f %9.3f %7.1f %7.1f\n",
                      pm.name.c_str(), pm.truth, pm.mean, pm.bias, pm.ese, pm.rmse, pm.cp90,
                      pm.cp95);
        os << line;
    }
    return os.str();
}

}  // namespace lpsmc
