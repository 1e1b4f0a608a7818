// lpsmc command-line driver: dataset fitting, interval reporting, simulation
// studies and Kaplan-Meier diagnostics.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 data validation
// error, 4 numerical failure, 1 unexpected internal error.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lpsmc/lpsmc.hpp"

namespace fs = std::filesystem;
using namespace lpsmc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char ch : text) {
        if (ch == ',') {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else if (ch != ' ') {
            item += ch;
        }
    }
    if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const std::string& item : split_list(text)) {
        double value;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), value);
        if (res.ec != std::errc{} || res.ptr != item.data() + item.size()) {
            throw InvalidArgument(what + ": cannot parse '" + item + "' as a number");
        }
        out.push_back(value);
    }
    return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& values) {
    return Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
}

std::string repr(double x) { return detail::double_repr(x); }

// Shared dataset flags for subcommands that ingest a CSV.
struct DataFlags {
    std::string input;
    std::string time_col = "time";
    std::string status_col = "status";
    std::string incidence_cols;
    std::string latency_cols;
    bool center = false;

    void attach(CLI::App* cmd, bool covariates_required) {
        cmd->add_option("--input", input, "input CSV file")->required();
        cmd->add_option("--time-col", time_col, "follow-up time column");
        cmd->add_option("--status-col", status_col, "event indicator column (0/1)");
        auto* inc = cmd->add_option("--incidence-cols", incidence_cols,
                                    "comma-separated incidence covariate columns");
        auto* lat = cmd->add_option("--latency-cols", latency_cols,
                                    "comma-separated latency covariate columns");
        cmd->add_flag("--center", center, "center continuous covariates to their mean");
        if (covariates_required) {
            inc->required();
            lat->required();
        }
    }

    SurvivalDataset load(LoadReport* report, ColumnMapping* mapping_out = nullptr) const {
        ColumnMapping mapping;
        mapping.time_col = time_col;
        mapping.status_col = status_col;
        mapping.incidence_cols = split_list(incidence_cols);
        mapping.latency_cols = split_list(latency_cols);
        mapping.center_continuous = center;
        if (mapping_out) *mapping_out = mapping;
        return load_csv(input, mapping, report);
    }
};

struct HyperFlags {
    Hyperparameters hyper;
    CLI::Option* k_option = nullptr;

    void attach(CLI::App* cmd) {
        k_option = cmd->add_option("--K", hyper.K, "number of cubic B-splines");
        cmd->add_option("--J", hyper.J, "number of Riemann bins");
        cmd->add_option("--penalty-order", hyper.penalty_order, "difference penalty order r");
        cmd->add_option("--delta-v", hyper.delta_v, "bracketing step size");
        cmd->add_option("--v0", hyper.v0, "bracketing start value");
        cmd->add_option("--a-lambda", hyper.a_lambda, "Gamma prior shape for lambda");
        cmd->add_option("--b-lambda", hyper.b_lambda, "Gamma prior rate for lambda");
        cmd->add_option("--zeta", hyper.zeta, "regression-block prior precision");
        cmd->add_option("--epsilon", hyper.epsilon, "penalty ridge");
        cmd->add_option("--newton-tol", hyper.newton_tol, "inner Newton gradient tolerance");
        cmd->add_option("--newton-max-iter", hyper.newton_max_iter, "inner Newton iteration cap");
    }
};

void write_file(const fs::path& path, const std::string& content) {
    write_text_file(path.string(), content);
}

std::string curve_csv(const FitResult& fit, const std::optional<Eigen::VectorXd>& profile,
                      double alpha) {
    const BinGrid bins = fit.bins();
    std::string out = "t,estimate,lower,upper\n";
    for (int j = 1; j <= bins.num_bins(); ++j) {
        const double t = std::min(j * bins.delta(), bins.t_upper());
        const CredibleInterval ci = profile ? ci_latency_survival(fit, *profile, t, alpha)
                                            : ci_baseline_survival(fit, t, alpha);
        out += repr(t) + ',' + repr(ci.point) + ',' + repr(ci.lower) + ',' + repr(ci.upper) + '\n';
    }
    return out;
}

std::string coefficient_csv(const FitResult& fit, const std::vector<std::string>& inc_names,
                            const std::vector<std::string>& lat_names,
                            const std::vector<double>& alphas, bool include_spline) {
    std::string header = "part,parameter,estimate,sd";
    for (double alpha : alphas) {
        const std::string pct = std::to_string(static_cast<int>(std::lround(100 * (1 - alpha))));
        header += ",ci" + pct + "_lower,ci" + pct + "_upper";
    }
    std::string out = header + '\n';

    const auto emit = [&](const std::string& part, const std::string& name, int coord) {
        const double estimate = fit.posterior.mean[coord];
        const double sd = std::sqrt(std::max(fit.posterior.covariance(coord, coord), 0.0));
        out += part + ',' + name + ',' + repr(estimate) + ',' + repr(sd);
        for (double alpha : alphas) {
            if (fit.constrained_index && coord == *fit.constrained_index) {
                out += ',' + repr(estimate) + ',' + repr(estimate);
            } else {
                const CredibleInterval ci = ci_latent(fit, coord, alpha);
                out += ',' + repr(ci.lower) + ',' + repr(ci.upper);
            }
        }
        out += '\n';
    };

    const LatentLayout lay = fit.layout();
    if (include_spline) {
        for (int k = 0; k < lay.K; ++k) emit("spline", "theta" + std::to_string(k + 1), k);
    }
    emit("incidence", "beta0 (Intercept)", lay.beta_start());
    for (int c = 0; c < fit.p; ++c) {
        const std::string name = c < static_cast<int>(inc_names.size())
                                     ? "beta" + std::to_string(c + 1) + " (" + inc_names[c] + ")"
                                     : "beta" + std::to_string(c + 1);
        emit("incidence", name, lay.beta_start() + 1 + c);
    }
    for (int c = 0; c < fit.q; ++c) {
        const std::string name = c < static_cast<int>(lat_names.size())
                                     ? "gamma" + std::to_string(c + 1) + " (" + lat_names[c] + ")"
                                     : "gamma" + std::to_string(c + 1);
        emit("latency", name, lay.gamma_start() + c);
    }
    return out;
}

// ---------------------------------------------------------------------------

int cmd_fit(const DataFlags& data_flags, const HyperFlags& hyper_flags,
            const std::string& out_dir, std::optional<double> t_upper, bool no_constraint,
            const std::vector<double>& alphas, const std::string& profile_spec,
            const std::string& latency_profile, bool include_spline) {
    LoadReport report;
    ColumnMapping mapping;
    const SurvivalDataset data = data_flags.load(&report, &mapping);
    if (report.rows_dropped_missing > 0) {
        std::cerr << "note: dropped " << report.rows_dropped_missing
                  << " rows with missing values (" << report.rows_total << " total)\n";
    }
    for (const auto& [column, mean] : report.centers) {
        std::cerr << "note: centered column '" << column << "' (mean " << mean << ")\n";
    }

    FitOptions options;
    options.t_upper = t_upper;
    options.constrain_last_theta = !no_constraint;
    if (!profile_spec.empty()) {
        const std::vector<double> parts = parse_doubles(
            profile_spec == "default" ? "-2,15,171" : profile_spec, "--v-profile");
        if (parts.size() != 3) {
            throw InvalidArgument("--v-profile expects lo,hi,points");
        }
        options.profile = ProfileRequest{parts[0], parts[1], static_cast<int>(parts[2])};
    }

    const auto t0 = std::chrono::steady_clock::now();
    const FitResult result = fit(data, hyper_flags.hyper, options);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (const std::string& warning : result.warnings) {
        std::cerr << "warning: " << warning << "\n";
    }

    fs::create_directories(out_dir);
    save_fit((fs::path(out_dir) / "fit.json").string(), result, mapping.incidence_cols,
             mapping.latency_cols);
    write_file(fs::path(out_dir) / "coefficients.csv",
               coefficient_csv(result, mapping.incidence_cols, mapping.latency_cols, alphas,
                               include_spline));
    write_file(fs::path(out_dir) / "baseline_survival.csv", curve_csv(result, {}, alphas[0]));
    Eigen::VectorXd profile_z = Eigen::VectorXd::Zero(result.q);
    if (!latency_profile.empty()) {
        profile_z = to_vector(parse_doubles(latency_profile, "--latency-profile"));
    }
    write_file(fs::path(out_dir) / "uncured_survival.csv",
               curve_csv(result, profile_z, alphas[0]));
    if (options.profile) {
        std::string csv = "v,density\n";
        for (const auto& [v, density] : result.v_profile) {
            csv += repr(v) + ',' + repr(density) + '\n';
        }
        write_file(fs::path(out_dir) / "v_profile.csv", csv);
    }

    std::cout << "fit complete in " << seconds << "s: n=" << result.n << " p=" << result.p
              << " q=" << result.q << " v*=" << result.v_star
              << " lambda*=" << result.posterior.lambda
              << " newton_iterations=" << result.posterior.iterations << "\n"
              << "artifacts written to " << out_dir << "\n";
    return kExitOk;
}

// Targets: latent:<h> | incidence:<x...> | cure:<x...> | S0:t=<t> | S0:q=<q>
//          | Su:z=<z...>;t=<t> | Su:z=<z...>;q=<q>
int cmd_intervals(const std::string& fit_path, const std::vector<std::string>& targets,
                  double alpha, const std::string& out_dir) {
    const LoadedFit loaded = load_fit(fit_path);
    const FitResult& fit = loaded.fit;

    std::string out = "target,point,lower,upper,level,time\n";
    for (const std::string& target : targets) {
        const auto colon = target.find(':');
        if (colon == std::string::npos) {
            throw InvalidArgument("target '" + target + "': expected kind:specification");
        }
        const std::string kind = target.substr(0, colon);
        const std::string spec = target.substr(colon + 1);
        CredibleInterval ci;
        std::string time_cell;

        if (kind == "latent") {
            ci = ci_latent(fit, static_cast<int>(parse_doubles(spec, "latent index")[0]), alpha);
        } else if (kind == "incidence" || kind == "cure") {
            const Eigen::VectorXd x = to_vector(parse_doubles(spec, "covariate profile"));
            ci = ci_incidence(fit, x, alpha,
                              kind == "cure" ? IncidenceTarget::cured : IncidenceTarget::uncured);
        } else if (kind == "S0" || kind == "Su") {
            std::string z_part, at_part = spec;
            if (kind == "Su") {
                const auto semi = spec.find(';');
                if (semi == std::string::npos || spec.rfind("z=", 0) != 0) {
                    throw InvalidArgument("target '" + target + "': expected Su:z=...;t=|q=...");
                }
                z_part = spec.substr(2, semi - 2);
                at_part = spec.substr(semi + 1);
            }
            double t;
            if (at_part.rfind("t=", 0) == 0) {
                t = parse_doubles(at_part.substr(2), "time")[0];
            } else if (at_part.rfind("q=", 0) == 0) {
                const double q = parse_doubles(at_part.substr(2), "quantile")[0];
                std::optional<Eigen::VectorXd> profile;
                if (kind == "Su") profile = to_vector(parse_doubles(z_part, "latency profile"));
                const SurvivalQuantile sq = survival_quantile(fit, q, profile);
                if (!sq.attained) {
                    std::cerr << "note: quantile q=" << q
                              << " not attained; reporting the end of follow-up\n";
                }
                t = sq.time;
            } else {
                throw InvalidArgument("target '" + target + "': expected t=<time> or q=<prob>");
            }
            if (kind == "S0") {
                ci = ci_baseline_survival(fit, t, alpha);
            } else {
                ci = ci_latency_survival(fit, to_vector(parse_doubles(z_part, "latency profile")),
                                         t, alpha);
            }
            time_cell = repr(t);
        } else {
            throw InvalidArgument("unknown target kind '" + kind + "'");
        }
        // Commas inside the target syntax would break the CSV cell.
        std::string label = target;
        std::replace(label.begin(), label.end(), ',', ';');
        out += label + ',' + repr(ci.point) + ',' + repr(ci.lower) + ',' + repr(ci.upper) + ',' +
               repr(ci.level) + ',' + time_cell + '\n';
    }

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "intervals.csv", out);
    std::cout << out;
    return kExitOk;
}

int cmd_simulate(const std::string& scenario_name, int n, int S, std::uint64_t seed,
                 const HyperFlags& hyper_flags, const std::string& out_dir, bool with_coverage,
                 bool dump_curves, const std::string& quantiles_spec, const std::string& beta_spec,
                 const std::string& gamma_spec, std::optional<double> censor_rate) {
    ScenarioConfig scenario;
    if (scenario_name == "scenario1") {
        scenario = scenario1();
    } else if (scenario_name == "scenario2") {
        scenario = scenario2();
    } else {
        throw InvalidArgument("unknown scenario preset '" + scenario_name +
                              "' (use scenario1 or scenario2)");
    }
    if (!beta_spec.empty()) {
        const auto b = parse_doubles(beta_spec, "--beta");
        if (b.size() != 3) throw InvalidArgument("--beta expects three values");
        scenario.beta << b[0], b[1], b[2];
    }
    if (!gamma_spec.empty()) {
        const auto g = parse_doubles(gamma_spec, "--gamma");
        if (g.size() != 2) throw InvalidArgument("--gamma expects two values");
        scenario.gamma << g[0], g[1];
    }
    if (censor_rate) scenario.censor_rate = *censor_rate;

    StudyOptions options;
    options.with_coverage = with_coverage;
    options.keep_curves = dump_curves;
    if (!quantiles_spec.empty()) {
        options.quantiles = parse_doubles(quantiles_spec, "--quantiles");
    }
    Hyperparameters hyper = hyper_flags.hyper;
    if (with_coverage && hyper_flags.k_option->count() == 0) {
        hyper.K = 30;  // richer basis for survival-coverage studies
    }

    const auto t0 = std::chrono::steady_clock::now();
    const StudySummary summary = run_study(scenario, n, S, seed, hyper, options);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "study_summary.csv", study_summary_csv(summary));
    write_file(fs::path(out_dir) / "study_table.txt", study_summary_table(summary));
    write_file(fs::path(out_dir) / "ase.csv", ase_csv(summary));
    if (with_coverage) {
        write_file(fs::path(out_dir) / "coverage.csv", coverage_csv(summary));
    }
    if (dump_curves) {
        for (std::size_t r = 0; r < summary.baseline_curves.size(); ++r) {
            std::string csv = "t,S0\n";
            for (int j = 0; j < summary.curve_times.size(); ++j) {
                csv += repr(summary.curve_times[j]) + ',' + repr(summary.baseline_curves[r][j]) +
                       '\n';
            }
            char name[32];
            std::snprintf(name, sizeof(name), "s0_rep%03zu.csv", r);
            write_file(fs::path(out_dir) / name, csv);
        }
    }

    std::cout << study_summary_table(summary);
    std::cout << "study complete in " << seconds << "s; artifacts written to " << out_dir << "\n";
    return kExitOk;
}

int cmd_km(const DataFlags& data_flags, const std::string& out_dir) {
    LoadReport report;
    const SurvivalDataset data = data_flags.load(&report);
    const KaplanMeierCurve curve = kaplan_meier(data);

    fs::create_directories(out_dir);
    std::string csv = "time,survival\n";
    for (int i = 0; i < curve.times.size(); ++i) {
        csv += repr(curve.times[i]) + ',' + repr(curve.survival[i]) + '\n';
    }
    write_file(fs::path(out_dir) / "km.csv", csv);
    std::string marks = "time\n";
    for (int i = 0; i < curve.censor_times.size(); ++i) {
        marks += repr(curve.censor_times[i]) + '\n';
    }
    write_file(fs::path(out_dir) / "km_censoring.csv", marks);

    std::cout << "n=" << data.n() << " events=" << data.events.cast<double>().sum()
              << " plateau=" << curve.plateau << "\n"
              << "curve written to " << out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Laplacian-P-splines mixture cure model"};
    app.require_subcommand(1);

    // fit -----------------------------------------------------------------
    auto* fit_cmd = app.add_subcommand("fit", "fit the mixture cure model to a CSV dataset");
    DataFlags fit_data;
    fit_data.attach(fit_cmd, true);
    HyperFlags fit_hyper;
    fit_hyper.attach(fit_cmd);
    std::string fit_out = "lpsmc-out";
    std::optional<double> t_upper;
    bool no_constraint = false;
    std::vector<double> alphas{0.05};
    std::string profile_spec, latency_profile;
    bool include_spline = false;
    fit_cmd->add_option("--out-dir", fit_out, "output directory");
    fit_cmd->add_option("--t-upper", t_upper,
                        "spline interval upper bound (default: largest follow-up time)");
    fit_cmd->add_flag("--no-constrain-last-theta", no_constraint,
                      "skip pinning the last spline coefficient at 1");
    fit_cmd->add_option("--alpha", alphas, "credible levels alpha (repeatable)");
    fit_cmd->add_option("--v-profile", profile_spec,
                        "emit the normalized penalty posterior: lo,hi,points or 'default'");
    fit_cmd->add_option("--latency-profile", latency_profile,
                        "covariate profile for the uncured survival curve (default zeros)");
    fit_cmd->add_flag("--include-spline", include_spline,
                      "include spline coefficients in the coefficient table");

    // intervals -------------------------------------------------------------
    auto* intervals_cmd =
        app.add_subcommand("intervals", "credible intervals from a saved fit file");
    std::string fit_path, intervals_out = "lpsmc-out";
    std::vector<std::string> targets;
    double intervals_alpha = 0.05;
    intervals_cmd->add_option("--fit", fit_path, "fit.json produced by the fit command")
        ->required();
    intervals_cmd
        ->add_option("--target", targets,
                     "latent:<h> | incidence:<x,..> | cure:<x,..> | S0:t=<t> | S0:q=<q> | "
                     "Su:z=<z,..>;t=<t> | Su:z=<z,..>;q=<q> (repeatable)")
        ->required();
    intervals_cmd->add_option("--alpha", intervals_alpha, "credible level alpha");
    intervals_cmd->add_option("--out-dir", intervals_out, "output directory");

    // simulate --------------------------------------------------------------
    auto* simulate_cmd = app.add_subcommand("simulate", "replication study on synthetic data");
    std::string scenario_name = "scenario1";
    int sim_n = 300, sim_S = 100;
    std::uint64_t sim_seed = 1;
    std::string sim_out = "lpsmc-study";
    bool with_coverage = false, dump_curves = false;
    std::string quantiles_spec, beta_spec, gamma_spec;
    std::optional<double> censor_rate;
    HyperFlags sim_hyper;
    sim_hyper.attach(simulate_cmd);
    simulate_cmd->add_option("--scenario", scenario_name, "preset: scenario1 or scenario2");
    simulate_cmd->add_option("--n", sim_n, "sample size per replication");
    simulate_cmd->add_option("--S", sim_S, "number of replications");
    simulate_cmd->add_option("--seed", sim_seed, "base seed (streams derived per replication)");
    simulate_cmd->add_option("--out-dir", sim_out, "output directory");
    simulate_cmd->add_flag("--coverage", with_coverage,
                           "also estimate survival-interval coverage (K defaults to 30)");
    simulate_cmd->add_flag("--dump-curves", dump_curves,
                           "write the fitted baseline survival curve of every replication");
    simulate_cmd->add_option("--quantiles", quantiles_spec,
                             "coverage quantiles, comma separated");
    simulate_cmd->add_option("--beta", beta_spec, "override incidence coefficients b0,b1,b2");
    simulate_cmd->add_option("--gamma", gamma_spec, "override latency coefficients g1,g2");
    simulate_cmd->add_option("--censor-rate", censor_rate, "override censoring rate mu_c");

    // km ----------------------------------------------------------------
    auto* km_cmd = app.add_subcommand("km", "Kaplan-Meier estimate and plateau diagnostic");
    DataFlags km_data;
    km_data.attach(km_cmd, false);
    std::string km_out = "lpsmc-out";
    km_cmd->add_option("--out-dir", km_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*fit_cmd) {
            return cmd_fit(fit_data, fit_hyper, fit_out, t_upper, no_constraint, alphas,
                           profile_spec, latency_profile, include_spline);
        }
        if (*intervals_cmd) {
            return cmd_intervals(fit_path, targets, intervals_alpha, intervals_out);
        }
        if (*simulate_cmd) {
            return cmd_simulate(scenario_name, sim_n, sim_S, sim_seed, sim_hyper, sim_out,
                                with_coverage, dump_curves, quantiles_spec, beta_spec, gamma_spec,
                                censor_rate);
        }
        if (*km_cmd) {
            return cmd_km(km_data, km_out);
        }
    } catch (const CsvError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ConvergenceError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const StudyError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitConfig;
}
