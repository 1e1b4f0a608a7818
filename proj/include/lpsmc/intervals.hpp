// intervals.hpp
// Delta-method approximate credible intervals built on the final Gaussian
// posterior: latent coordinates, incidence/cure probability, baseline and
// uncured survival, plus survival-quantile location on the bin grid.
//
// Probability-scale targets are handled on the g = log(-log(.)) scale and
// mapped back through exp(-exp(.)). That map is monotone decreasing, so the
// two mapped endpoints are swapped to restore lower <= upper.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "lpsmc/errors.hpp"
#include "lpsmc/laplace.hpp"
#include "lpsmc/numeric.hpp"

namespace lpsmc {

struct CredibleInterval {
    double point = 0.0;  // plug-in estimate on the natural scale
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.0;         // 1 - alpha
    std::string transform_tag;  // "identity" or "log(-log)"
};

namespace detail {

inline double z_value(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw DomainError("credible interval: alpha must lie in (0,1], got " +
                          std::to_string(alpha));
    }
    return alpha == 1.0 ? 0.0 : normal_quantile(1.0 - alpha / 2.0);
}

inline CredibleInterval loglog_interval(double g_center, double variance, double point,
                                        double alpha) {
    if (!std::isfinite(g_center)) {
        throw SingularTransformError(
            "log(-log) transform degenerated (probability numerically 0 or 1); report the "
            "degenerate interval {0} or {1} instead");
    }
    const double sd = std::sqrt(std::max(variance, 0.0));
    const double z = z_value(alpha);
    const double a = std::exp(-std::exp(g_center + z * sd));
    const double b = std::exp(-std::exp(g_center - z * sd));
    CredibleInterval ci;
    ci.point = point;
    ci.lower = std::min(a, b);
    ci.upper = std::max(a, b);
    ci.level = 1.0 - alpha;
    ci.transform_tag = "log(-log)";
    return ci;
}

// Riemann pieces at a fixed time: omega = Delta * sum h0(s_j) up to j(t) and
// the basis-weighted vector omega^k used by the delta-method gradients.
struct RiemannAtTime {
    double omega;
    Eigen::VectorXd omega_k;
};

inline RiemannAtTime riemann_at_time(const FitResult& fit, double t) {
    const KnotGrid grid = fit.grid();
    const BinGrid bins = fit.bins();
    if (!grid.contains(t)) {
        throw DomainError("time t=" + std::to_string(t) + " outside the fitted interval [0, " +
                          std::to_string(grid.t_upper()) + "]");
    }
    const Eigen::VectorXd theta = fit.posterior.mean.segment(0, fit.hyper.K);
    const int m = bins.bin_index(t);
    double sum = 0.0;
    Eigen::VectorXd sum_k = Eigen::VectorXd::Zero(fit.hyper.K);
    for (int j = 0; j < m; ++j) {
        const Eigen::VectorXd b = bspline_eval(grid, bins.midpoints()[j]);
        const double h = std::exp(b.dot(theta));
        sum += h;
        sum_k += h * b;
    }
    return RiemannAtTime{sum * bins.delta(), sum_k * bins.delta()};
}

}  // namespace detail

inline CredibleInterval ci_latent(const FitResult& fit, int h, double alpha) {
    const int dim = static_cast<int>(fit.posterior.mean.size());
    if (h < 0 || h >= dim) {
        throw InvalidArgument("ci_latent: coordinate " + std::to_string(h) + " outside 0.." +
                              std::to_string(dim - 1));
    }
    if (fit.constrained_index && h == *fit.constrained_index) {
        throw ConstraintError("ci_latent: coordinate " + std::to_string(h) +
                              " is pinned by the theta_K = 1 constraint");
    }
    const double z = detail::z_value(alpha);
    const double center = fit.posterior.mean[h];
    const double sd = std::sqrt(std::max(fit.posterior.covariance(h, h), 0.0));
    CredibleInterval ci;
    ci.point = center;
    ci.lower = center - z * sd;
    ci.upper = center + z * sd;
    ci.level = 1.0 - alpha;
    ci.transform_tag = "identity";
    return ci;
}

enum class IncidenceTarget { uncured, cured };

inline CredibleInterval ci_incidence(const FitResult& fit, const Eigen::VectorXd& x_row,
                                     double alpha, IncidenceTarget target) {
    const int p1 = fit.p + 1;
    if (x_row.size() != p1) {
        throw InvalidArgument("ci_incidence: x_row must have length p+1 = " + std::to_string(p1));
    }
    if (x_row[0] != 1.0) {
        throw InvalidArgument("ci_incidence: x_row must carry the leading intercept 1");
    }
    const Eigen::VectorXd beta = fit.posterior.mean.segment(fit.hyper.K, p1);
    const Eigen::MatrixXd cov_beta = fit.posterior.covariance.block(fit.hyper.K, fit.hyper.K, p1, p1);
    const double lp = x_row.dot(beta);
    const double p = sigmoid(lp);

    double g_center, factor, point;
    if (target == IncidenceTarget::uncured) {
        // g = log(-log p) = log(log(1 + exp(-lp)))
        const double neg_log_p = log1pexp(-lp);
        g_center = std::log(neg_log_p);
        factor = -sigmoid(-lp) / neg_log_p;
        point = p;
    } else {
        // g = log(-log(1-p)) = log(log(1 + exp(lp)))
        const double neg_log_pm1 = log1pexp(lp);
        g_center = std::log(neg_log_pm1);
        factor = p / neg_log_pm1;
        point = sigmoid(-lp);
    }
    if (!std::isfinite(factor)) {
        throw SingularTransformError(
            "ci_incidence: probability numerically 0 or 1 at this profile; report the "
            "degenerate interval {0} or {1} instead");
    }
    const Eigen::VectorXd grad = factor * x_row;
    const double variance = grad.dot(cov_beta * grad);
    return detail::loglog_interval(g_center, variance, point, alpha);
}

inline CredibleInterval ci_baseline_survival(const FitResult& fit, double t, double alpha) {
    const detail::RiemannAtTime r = detail::riemann_at_time(fit, t);
    const double g_center = std::log(r.omega);
    const Eigen::VectorXd grad = r.omega_k / r.omega;
    const Eigen::MatrixXd cov_theta =
        fit.posterior.covariance.block(0, 0, fit.hyper.K, fit.hyper.K);
    const double variance = grad.dot(cov_theta * grad);
    return detail::loglog_interval(g_center, variance, std::exp(-r.omega), alpha);
}

inline CredibleInterval ci_latency_survival(const FitResult& fit, const Eigen::VectorXd& z_row,
                                            double t, double alpha) {
    if (z_row.size() != fit.q) {
        throw InvalidArgument("ci_latency_survival: z_row must have length q = " +
                              std::to_string(fit.q));
    }
    const detail::RiemannAtTime r = detail::riemann_at_time(fit, t);
    const LatentLayout lay = fit.layout();
    const Eigen::VectorXd gamma = fit.posterior.mean.segment(lay.gamma_start(), lay.q);
    const double g_center = z_row.dot(gamma) + std::log(r.omega);

    // Stacked gradient over (theta, gamma) with the matching covariance
    // sub-block, cross-covariances included.
    const int K = lay.K, q = lay.q;
    Eigen::VectorXd grad(K + q);
    grad.head(K) = r.omega_k / r.omega;
    grad.tail(q) = z_row;
    Eigen::MatrixXd cov(K + q, K + q);
    cov.topLeftCorner(K, K) = fit.posterior.covariance.block(0, 0, K, K);
    cov.topRightCorner(K, q) = fit.posterior.covariance.block(0, lay.gamma_start(), K, q);
    cov.bottomLeftCorner(q, K) = fit.posterior.covariance.block(lay.gamma_start(), 0, q, K);
    cov.bottomRightCorner(q, q) =
        fit.posterior.covariance.block(lay.gamma_start(), lay.gamma_start(), q, q);
    const double variance = grad.dot(cov * grad);
    const double point = std::exp(-std::exp(z_row.dot(gamma)) * r.omega);
    return detail::loglog_interval(g_center, variance, point, alpha);
}

struct SurvivalQuantile {
    double time = 0.0;
    bool attained = false;
};

// Smallest bin-boundary time where the fitted survival drops to <= 1-q;
// returns t_upper with attained=false when the level is never reached.
// profile_z empty/absent means the baseline curve.
inline SurvivalQuantile survival_quantile(const FitResult& fit, double q,
                                          const std::optional<Eigen::VectorXd>& profile_z = {}) {
    if (!(q > 0.0 && q < 1.0)) {
        throw DomainError("survival_quantile: q must lie in (0,1)");
    }
    const KnotGrid grid = fit.grid();
    const BinGrid bins = fit.bins();
    const Eigen::VectorXd theta = fit.posterior.mean.segment(0, fit.hyper.K);
    double scale = 1.0;
    if (profile_z && profile_z->size() > 0) {
        const LatentLayout lay = fit.layout();
        if (profile_z->size() != lay.q) {
            throw InvalidArgument("survival_quantile: profile has length " +
                                  std::to_string(profile_z->size()) + ", expected q = " +
                                  std::to_string(lay.q));
        }
        scale = std::exp(
            profile_z->dot(fit.posterior.mean.segment(lay.gamma_start(), lay.q)));
    }
    const double target = 1.0 - q;
    double sum = 0.0;
    for (int j = 0; j < bins.num_bins(); ++j) {
        sum += std::exp(bspline_eval(grid, bins.midpoints()[j]).dot(theta));
        const double survival = std::exp(-scale * sum * bins.delta());
        if (survival <= target) {
            return SurvivalQuantile{(j + 1) * bins.delta(), true};
        }
    }
    return SurvivalQuantile{grid.t_upper(), false};
}

}  // namespace lpsmc
