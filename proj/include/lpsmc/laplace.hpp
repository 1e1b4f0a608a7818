// laplace.hpp
// Gaussian (Laplace) approximation of the conditional latent posterior via
// damped Newton-Raphson, the approximate log-posterior of the log penalty
// v = log(lambda), the leftward bracketing mode search, and the end-to-end
// fit with the optional theta_K = 1 constraint.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lpsmc/data.hpp"
#include "lpsmc/errors.hpp"
#include "lpsmc/model.hpp"
#include "lpsmc/splines.hpp"

namespace lpsmc {

struct Hyperparameters {
    double a_lambda = 1.0;     // Gamma prior shape for lambda
    double b_lambda = 1e-5;    // Gamma prior rate for lambda
    double zeta = 1e-6;        // prior precision of the regression blocks
    double epsilon = 1e-6;     // penalty ridge
    int penalty_order = 3;     // r
    int K = 15;                // number of cubic B-splines
    int J = 300;               // Riemann bins
    double v0 = 15.0;          // bracketing start
    double delta_v = 0.2;      // bracketing step
    double v_min = -10.0;      // bracketing lower guard
    double newton_tol = 1e-8;  // gradient max-norm tolerance
    int newton_max_iter = 100;
};

// Gaussian approximation N(mean, covariance) to p(xi | lambda, D).
struct ConditionalPosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    double lambda = 0.0;
    bool converged = false;
    int iterations = 0;
    double loglik_at_mean = 0.0;
    double logdet_covariance = 0.0;  // over the free coordinates
};

// Block prior precision Q(lambda) = blockdiag(lambda * P, zeta * I).
inline Eigen::MatrixXd prior_precision(double lambda, const PenaltyMatrix& penalty, int p, int q,
                                       double zeta) {
    if (!(lambda > 0.0)) throw InvalidArgument("prior_precision: lambda must be positive");
    const int K = static_cast<int>(penalty.matrix.rows());
    const int reg = (p + 1) + q;
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(K + reg, K + reg);
    Q.topLeftCorner(K, K) = lambda * penalty.matrix;
    Q.bottomRightCorner(reg, reg) = zeta * Eigen::MatrixXd::Identity(reg, reg);
    return Q;
}

// Prior bookkeeping reused across the v-walk; caches log det P.
struct PriorSpec {
    Eigen::MatrixXd penalty;  // K x K
    int num_regression;       // (p+1)+q
    double zeta;
    double logdet_penalty;

    PriorSpec(const PenaltyMatrix& pen, int num_regression, double zeta)
        : penalty(pen.matrix), num_regression(num_regression), zeta(zeta) {
        const Eigen::LLT<Eigen::MatrixXd> llt(penalty);
        if (llt.info() != Eigen::Success) {
            throw InvalidArgument("PriorSpec: penalty matrix is not positive definite");
        }
        logdet_penalty = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }

    int dim() const { return static_cast<int>(penalty.rows()) + num_regression; }

    Eigen::MatrixXd precision(double lambda) const {
        const int K = static_cast<int>(penalty.rows());
        Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(dim(), dim());
        Q.topLeftCorner(K, K) = lambda * penalty;
        Q.bottomRightCorner(num_regression, num_regression) =
            zeta * Eigen::MatrixXd::Identity(num_regression, num_regression);
        return Q;
    }

    double logdet_precision(double v) const {
        return penalty.rows() * v + logdet_penalty + num_regression * std::log(zeta);
    }
};

struct NewtonOptions {
    double tol = 1e-8;
    int max_iter = 100;
    // When set, coordinate .first is pinned at value .second and excluded
    // from the optimization; its covariance row/column is zeroed.
    std::optional<std::pair<int, double>> fixed_coordinate;
};

namespace detail {

inline Eigen::MatrixXd drop_coordinate(const Eigen::MatrixXd& M, int c) {
    const Eigen::Index d = M.rows();
    Eigen::MatrixXd out(d - 1, d - 1);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
        if (i == c) continue;
        Eigen::Index s = 0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (j == c) continue;
            out(r, s++) = M(i, j);
        }
        ++r;
    }
    return out;
}

inline Eigen::VectorXd drop_coordinate(const Eigen::VectorXd& v, int c) {
    Eigen::VectorXd out(v.size() - 1);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i != c) out[r++] = v[i];
    }
    return out;
}

inline Eigen::VectorXd insert_coordinate(const Eigen::VectorXd& v, int c, double value) {
    Eigen::VectorXd out(v.size() + 1);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out[i] = (i == c) ? value : v[r++];
    }
    return out;
}

}  // namespace detail

// Damped Newton-Raphson maximization of loglik(xi) - 0.5 * xi' Q xi for a
// target exposing value(xi) and value_grad_hess(xi, value, grad, hess).
// Steps use a Cholesky solve of (Q - hess) on the free coordinates, with a
// Levenberg-style ridge (1e-6 * mean curvature, escalating x10) whenever the
// factorization fails, and step-halving so the objective never decreases
// across accepted steps. Laplace is exact for quadratic targets: a single
// iteration lands on the Gaussian mean.
template <class LogLik>
ConditionalPosterior laplace_newton(const LogLik& target, const Eigen::MatrixXd& Q,
                                    const Eigen::VectorXd& init, const NewtonOptions& opt) {
    const Eigen::Index dim = Q.rows();
    Eigen::VectorXd xi = init;
    int fixed = -1;
    if (opt.fixed_coordinate) {
        fixed = opt.fixed_coordinate->first;
        xi[fixed] = opt.fixed_coordinate->second;
    }

    const auto free_vec = [&](const Eigen::VectorXd& v) {
        return fixed < 0 ? v : detail::drop_coordinate(v, fixed);
    };
    const auto free_mat = [&](const Eigen::MatrixXd& m) {
        return fixed < 0 ? m : detail::drop_coordinate(m, fixed);
    };
    const auto objective = [&](const Eigen::VectorXd& v) {
        const double ll = target.value(v);
        return std::isfinite(ll) ? ll - 0.5 * v.dot(Q * v) : ll;
    };

    double ll_value;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    target.value_grad_hess(xi, ll_value, grad, hess);
    double F = ll_value - 0.5 * xi.dot(Q * xi);
    if (!std::isfinite(F)) {
        throw ConvergenceError("laplace_newton: objective not finite at the starting point", 0,
                               std::numeric_limits<double>::quiet_NaN(),
                               std::vector<double>(xi.data(), xi.data() + xi.size()));
    }

    int iterations = 0;
    bool converged = false;
    double grad_norm = std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXd curvature;  // (Q - hess) on free coordinates at the incumbent

    for (int iter = 0; iter <= opt.max_iter; ++iter) {
        const Eigen::VectorXd grad_post = grad - Q * xi;
        const Eigen::VectorXd gf = free_vec(grad_post);
        grad_norm = gf.size() == 0 ? 0.0 : gf.cwiseAbs().maxCoeff();
        curvature = free_mat(Q - hess);
        if (grad_norm < opt.tol) {
            converged = true;
            break;
        }
        if (iter == opt.max_iter) break;

        // Solve for the Newton step with a Levenberg-style ridge whenever the
        // curvature is indefinite, escalating x10 for this step only. The
        // step-halving line search never lets F decrease beyond its own
        // floating-point resolution; if no step passes, the ridge escalates
        // and the solve is retried. Near the mode the true gain of a step can
        // fall below that resolution, in which case the PD Newton step is
        // taken as is and the gradient criterion decides convergence.
        const double scale = std::max(curvature.diagonal().cwiseAbs().maxCoeff(), 1.0);
        const double noise = (std::fabs(F) + 1.0) * 1e-12;
        double ridge = 0.0;
        bool accepted = false;
        Eigen::VectorXd xi_try;
        double F_try = 0.0;
        while (!accepted) {
            Eigen::MatrixXd M = curvature;
            if (ridge > 0.0) M.diagonal().array() += ridge;
            Eigen::LLT<Eigen::MatrixXd> llt(M);
            if (llt.info() != Eigen::Success) {
                ridge = ridge == 0.0 ? 1e-6 * scale : ridge * 10.0;
                if (ridge > 1e12 * scale) {
                    throw ConvergenceError("laplace_newton: curvature irreparably indefinite",
                                           iterations, grad_norm,
                                           std::vector<double>(xi.data(), xi.data() + xi.size()));
                }
                continue;
            }
            const Eigen::VectorXd step = llt.solve(gf);
            const double predicted_gain = 0.5 * gf.dot(step);
            const bool at_resolution = predicted_gain <= 1e3 * noise && grad_norm <= 1e4 * opt.tol;

            double t = 1.0;
            for (int h = 0; h <= 30 && !accepted; ++h) {
                xi_try = xi;
                Eigen::Index r = 0;
                for (Eigen::Index c = 0; c < dim; ++c) {
                    if (c == fixed) continue;
                    xi_try[c] += t * step[r++];
                }
                F_try = objective(xi_try);
                if (std::isfinite(F_try) && (F_try >= F - noise || (at_resolution && h == 0))) {
                    accepted = true;
                }
                t *= 0.5;
            }
            if (!accepted) {
                ridge = ridge == 0.0 ? 1e-6 * scale : ridge * 10.0;
                if (ridge > 1e12 * scale) {
                    throw ConvergenceError(
                        "laplace_newton: step-halving could not improve the objective",
                        iterations, grad_norm,
                        std::vector<double>(xi.data(), xi.data() + xi.size()));
                }
            }
        }
        xi = xi_try;
        F = F_try;
        target.value_grad_hess(xi, ll_value, grad, hess);
        ++iterations;
    }

    if (!converged) {
        throw ConvergenceError("laplace_newton: no convergence after max_iter", iterations,
                               grad_norm, std::vector<double>(xi.data(), xi.data() + xi.size()));
    }

    // Posterior covariance from the curvature at the mode.
    Eigen::LLT<Eigen::MatrixXd> llt(curvature);
    if (llt.info() != Eigen::Success) {
        throw ConvergenceError("laplace_newton: curvature not positive definite at the mode",
                               iterations, grad_norm,
                               std::vector<double>(xi.data(), xi.data() + xi.size()));
    }
    const Eigen::Index free_dim = curvature.rows();
    Eigen::MatrixXd cov_free = llt.solve(Eigen::MatrixXd::Identity(free_dim, free_dim));
    const double logdet_cov =
        -2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();

    ConditionalPosterior post;
    post.mean = xi;
    if (fixed < 0) {
        post.covariance = std::move(cov_free);
    } else {
        post.covariance = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < dim; ++i) {
            if (i == fixed) continue;
            Eigen::Index s = 0;
            for (Eigen::Index j = 0; j < dim; ++j) {
                if (j == fixed) continue;
                post.covariance(i, j) = cov_free(r, s++);
            }
            ++r;
        }
    }
    post.converged = true;
    post.iterations = iterations;
    post.loglik_at_mean = ll_value;
    post.logdet_covariance = logdet_cov;
    return post;
}

// Adapter presenting MixtureCureModel as a laplace_newton target.
class MixtureCureLogLik {
public:
    explicit MixtureCureLogLik(const MixtureCureModel& model) : model_(model) {}

    double value(const Eigen::VectorXd& xi) const { return model_.value(xi); }

    void value_grad_hess(const Eigen::VectorXd& xi, double& value, Eigen::VectorXd& grad,
                         Eigen::MatrixXd& hess) const {
        const OmegaCache cache = model_.omega_cache(model_.theta_of(xi));
        model_.value_grad_hess(xi, cache, value, grad, hess);
    }

private:
    const MixtureCureModel& model_;
};

inline ConditionalPosterior laplace_approx(double lambda, const SurvivalDataset& data,
                                           const KnotGrid& grid, const BinGrid& bins,
                                           const LatentVector& init,
                                           const Hyperparameters& hyper) {
    const MixtureCureModel model(data, grid, bins);
    if (init.dim() != model.dim()) {
        throw InvalidArgument("laplace_approx: init has dimension " + std::to_string(init.dim()) +
                              ", expected " + std::to_string(model.dim()));
    }
    const PenaltyMatrix P = penalty_matrix(grid.num_basis(), hyper.penalty_order, hyper.epsilon);
    const Eigen::MatrixXd Q = prior_precision(lambda, P, data.p(), data.q(), hyper.zeta);
    NewtonOptions opt;
    opt.tol = hyper.newton_tol;
    opt.max_iter = hyper.newton_max_iter;
    ConditionalPosterior post =
        laplace_newton(MixtureCureLogLik(model), Q, init.flatten(), opt);
    post.lambda = lambda;
    return post;
}

// Gamma(a, b) prior for lambda expressed on the v = log(lambda) scale.
inline double log_penalty_prior(double v, const Hyperparameters& hyper) {
    return hyper.a_lambda * v - hyper.b_lambda * std::exp(v);
}

// Unnormalized log posterior of v (equality up to an additive constant)
// together with the inner Laplace posterior for warm-start reuse.
template <class LogLik>
std::pair<double, ConditionalPosterior> log_posterior_v_impl(const LogLik& target,
                                                             const PriorSpec& prior,
                                                             const Hyperparameters& hyper,
                                                             double v,
                                                             const Eigen::VectorXd& warm_start) {
    const double lambda = std::exp(v);
    const Eigen::MatrixXd Q = prior.precision(lambda);
    NewtonOptions opt;
    opt.tol = hyper.newton_tol;
    opt.max_iter = hyper.newton_max_iter;
    ConditionalPosterior post = laplace_newton(target, Q, warm_start, opt);
    post.lambda = lambda;
    const double quad = 0.5 * post.mean.dot(Q * post.mean);
    const double value = post.loglik_at_mean - quad +
                         0.5 * (prior.logdet_precision(v) + post.logdet_covariance) +
                         log_penalty_prior(v, hyper);
    return {value, std::move(post)};
}

inline std::pair<double, ConditionalPosterior> log_posterior_v(
    double v, const SurvivalDataset& data, const KnotGrid& grid, const BinGrid& bins,
    const Hyperparameters& hyper, const LatentVector& warm_start) {
    const MixtureCureModel model(data, grid, bins);
    const PenaltyMatrix P = penalty_matrix(grid.num_basis(), hyper.penalty_order, hyper.epsilon);
    const PriorSpec prior(P, data.p() + 1 + data.q(), hyper.zeta);
    return log_posterior_v_impl(MixtureCureLogLik(model), prior, hyper, v, warm_start.flatten());
}

struct BracketResult {
    double v_star = 0.0;
    bool hit_lower_bound = false;
    int evaluations = 0;
};

// Leftward walk from v0 in steps of delta; stops at the first downhill point
// v_m (objective(v_m) < objective(v_m + delta)) and returns v_m + delta/2.
// Falls back to v_min with a boundary flag when no downturn occurs.
inline BracketResult bracket_mode(const std::function<double(double)>& objective, double v0,
                                  double delta, double v_min) {
    if (!(delta > 0.0)) throw InvalidArgument("bracket_mode: delta must be positive");
    if (!(v_min < v0)) throw InvalidArgument("bracket_mode: v_min must lie below v0");
    BracketResult result;
    double prev_v = v0;
    double prev_value = objective(v0);
    result.evaluations = 1;
    for (;;) {
        const double v = prev_v - delta;
        if (v < v_min) {
            result.v_star = v_min;
            result.hit_lower_bound = true;
            return result;
        }
        const double value = objective(v);
        ++result.evaluations;
        if (value < prev_value) {
            result.v_star = v + delta / 2.0;
            return result;
        }
        prev_v = v;
        prev_value = value;
    }
}

struct ProfileRequest {
    double v_lo = -2.0;
    double v_hi = 15.0;
    int points = 171;
};

struct FitOptions {
    bool constrain_last_theta = true;
    std::optional<ProfileRequest> profile;
    std::optional<double> t_upper;  // defaults to the largest follow-up time
};

struct FitResult {
    double v_star = 0.0;
    ConditionalPosterior posterior;  // at v*, constrained when requested
    std::optional<int> constrained_index;
    Hyperparameters hyper;
    double t_upper = 0.0;
    Eigen::Index n = 0;
    int p = 0;
    int q = 0;
    bool v_at_lower_bound = false;
    std::vector<std::pair<double, double>> v_profile;  // (v, normalized density)
    std::vector<std::string> warnings;

    KnotGrid grid() const { return KnotGrid(hyper.K, t_upper); }
    BinGrid bins() const { return BinGrid(hyper.J, t_upper); }
    LatentLayout layout() const { return LatentLayout{hyper.K, p + 1, q}; }
    LatentVector latent_mean() const { return LatentVector::unflatten(layout(), posterior.mean); }
};

namespace detail {

// Starting point: constant theta from the crude event rate (partition of
// unity makes a constant theta equal the log hazard level), beta from a few
// ridge-stabilized logistic Newton steps of tau on X, gamma at zero. Any
// non-finite outcome falls back to the zero vector.
inline Eigen::VectorXd initial_latent(const SurvivalDataset& data, const LatentLayout& lay) {
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(lay.dim());
    const double total_time = data.times.sum();
    const double events = data.events.cast<double>().sum();
    if (total_time > 0.0 && events > 0.0) {
        const double level = std::log(events / total_time);
        if (std::isfinite(level)) xi.segment(0, lay.K).setConstant(level);
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(lay.p1);
    for (int step = 0; step < 5; ++step) {
        Eigen::VectorXd score = Eigen::VectorXd::Zero(lay.p1);
        Eigen::MatrixXd info = 1e-6 * Eigen::MatrixXd::Identity(lay.p1, lay.p1);
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            const double p = sigmoid(data.X.row(i).dot(beta));
            score += (data.events[i] - p) * data.X.row(i).transpose();
            info.noalias() += p * (1.0 - p) * data.X.row(i).transpose() * data.X.row(i);
        }
        beta += info.ldlt().solve(score);
        if (!beta.allFinite()) {
            beta.setZero();
            break;
        }
    }
    xi.segment(lay.beta_start(), lay.p1) = beta;
    return xi;
}

}  // namespace detail

// Full pipeline: bracketing search for the posterior mode of v = log(lambda)
// with warm-started inner Laplace approximations, then a final Laplace fit
// at lambda* = exp(v*) with the last spline coefficient pinned at 1 (so the
// estimated baseline survival lands on its right asymptote smoothly).
inline FitResult fit(const SurvivalDataset& data, const Hyperparameters& hyper,
                     const FitOptions& options = {}) {
    FitResult result;
    result.warnings = data.validate();
    result.hyper = hyper;
    result.t_upper = options.t_upper.value_or(data.times.maxCoeff());
    result.n = data.n();
    result.p = data.p();
    result.q = data.q();

    const LatentLayout lay{hyper.K, data.p() + 1, data.q()};
    if (data.n() < lay.dim()) {
        result.warnings.push_back("sample size n=" + std::to_string(data.n()) +
                                  " is below dim(xi)=" + std::to_string(lay.dim()));
    }

    const KnotGrid grid(hyper.K, result.t_upper);
    const BinGrid bins(hyper.J, result.t_upper);
    const MixtureCureModel model(data, grid, bins);
    const MixtureCureLogLik target(model);
    const PenaltyMatrix P = penalty_matrix(hyper.K, hyper.penalty_order, hyper.epsilon);
    const PriorSpec prior(P, lay.p1 + lay.q, hyper.zeta);

    const Eigen::VectorXd smart_init = detail::initial_latent(data, lay);
    Eigen::VectorXd warm = smart_init;
    const auto stage = [](const std::string& name, const std::string& what) {
        return Error("fit failed during " + name + ": " + what);
    };

    // Warm-started evaluation of the penalty posterior. The conditional
    // posterior can be multimodal; when Newton stalls from the tracked warm
    // start, restart from the smart initial point and then from zero before
    // giving up on this v.
    const auto evaluate_v = [&](double v, Eigen::VectorXd& start) {
        try {
            try {
                return log_posterior_v_impl(target, prior, hyper, v, start);
            } catch (const ConvergenceError&) {
                try {
                    return log_posterior_v_impl(target, prior, hyper, v, smart_init);
                } catch (const ConvergenceError&) {
                    return log_posterior_v_impl(target, prior, hyper, v,
                                                Eigen::VectorXd::Zero(lay.dim()));
                }
            }
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("penalty posterior evaluation failed at v=" +
                                       std::to_string(v),
                                   e.iterations, e.gradient_norm, e.last_iterate);
        } catch (const Error& e) {
            throw Error("penalty posterior evaluation failed at v=" + std::to_string(v) + ": " +
                        e.what());
        }
    };

    // Penalty-mode search.
    Eigen::VectorXd incumbent = warm;
    const auto objective = [&](double v) {
        auto [value, post] = evaluate_v(v, warm);
        warm = post.mean;
        incumbent = post.mean;
        return value;
    };

    BracketResult bracket;
    try {
        bracket = bracket_mode(objective, hyper.v0, hyper.delta_v, hyper.v_min);
    } catch (const ConvergenceError& e) {
        throw ConvergenceError("fit failed during penalty-mode search: " + std::string(e.what()),
                               e.iterations, e.gradient_norm, e.last_iterate);
    } catch (const Error& e) {
        throw stage("penalty-mode search", e.what());
    }
    result.v_star = bracket.v_star;
    result.v_at_lower_bound = bracket.hit_lower_bound;
    if (bracket.hit_lower_bound) {
        result.warnings.push_back("penalty-mode search reached the lower bound v_min=" +
                                  std::to_string(hyper.v_min));
    }

    // Final Laplace approximation at v*, with the theta_K constraint.
    try {
        const double lambda_star = std::exp(result.v_star);
        const Eigen::MatrixXd Q = prior.precision(lambda_star);
        NewtonOptions opt;
        opt.tol = hyper.newton_tol;
        opt.max_iter = hyper.newton_max_iter;
        if (options.constrain_last_theta) {
            const int pin = hyper.K - 1;
            opt.fixed_coordinate = {pin, 1.0};
            result.constrained_index = pin;
        }
        Eigen::VectorXd init = incumbent;
        if (options.constrain_last_theta) init[hyper.K - 1] = 1.0;
        try {
            result.posterior = laplace_newton(target, Q, init, opt);
        } catch (const ConvergenceError&) {
            Eigen::VectorXd restart = smart_init;
            if (options.constrain_last_theta) restart[hyper.K - 1] = 1.0;
            result.posterior = laplace_newton(target, Q, restart, opt);
        }
        result.posterior.lambda = lambda_star;
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(
            "fit failed during final Laplace approximation: " + std::string(e.what()),
            e.iterations, e.gradient_norm, e.last_iterate);
    } catch (const Error& e) {
        throw stage("final Laplace approximation", e.what());
    }

    // Optional normalized posterior profile of v (trapezoid normalization).
    if (options.profile) {
        try {
            const ProfileRequest& req = *options.profile;
            if (req.points < 2 || !(req.v_hi > req.v_lo)) {
                throw InvalidArgument("profile grid needs v_hi > v_lo and at least 2 points");
            }
            const double step = (req.v_hi - req.v_lo) / (req.points - 1);
            std::vector<double> vs(req.points), logp(req.points);
            Eigen::VectorXd prof_warm = result.posterior.mean;
            if (result.constrained_index) prof_warm = incumbent;
            // Walk from the top so warm starts track the changing penalty.
            for (int k = req.points - 1; k >= 0; --k) {
                vs[k] = req.v_lo + k * step;
                auto [value, post] = evaluate_v(vs[k], prof_warm);
                prof_warm = post.mean;
                logp[k] = value;
            }
            const double peak = *std::max_element(logp.begin(), logp.end());
            std::vector<double> density(req.points);
            for (int k = 0; k < req.points; ++k) density[k] = std::exp(logp[k] - peak);
            double mass = 0.0;
            for (int k = 0; k + 1 < req.points; ++k) {
                mass += 0.5 * (density[k] + density[k + 1]) * step;
            }
            result.v_profile.reserve(req.points);
            for (int k = 0; k < req.points; ++k) {
                result.v_profile.emplace_back(vs[k], density[k] / mass);
            }
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(
                "fit failed during the posterior profile of v: " + std::string(e.what()),
                e.iterations, e.gradient_norm, e.last_iterate);
        } catch (const Error& e) {
            throw stage("posterior profile of v", e.what());
        }
    }
    return result;
}

}  // namespace lpsmc
